#pragma once

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gcreg/errors.hpp"
#include "gcreg/rng.hpp"
#include "gcreg/tensor.hpp"

namespace gcreg {

enum class Split { train, test };

struct Dataset {
  Tensor features; // [N x d]
  std::vector<int> labels;
  std::size_t classes = 0;
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }

  void validate() const {
    if (labels.empty()) throw ConfigError("dataset", "dataset is empty");
    if (features.rank() != 2 || features.rows() != labels.size())
      throw DimensionError("feature rows do not match label count");
    for (int y : labels)
      if (y < 0 || static_cast<std::size_t>(y) >= classes)
        throw DomainError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    for (double v : features.data())
      if (!std::isfinite(v)) throw DomainError("non-finite feature value");
  }
};

enum class SyntheticKind { gaussian_clusters, two_spirals };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::gaussian_clusters;
  std::size_t classes = 10;
  std::size_t per_class = 500;
  std::size_t test_per_class = 100;
  std::size_t dim = 64;
  /// Per-coordinate standard deviation of class means (gaussian_clusters).
  double separation = 1.0;
  /// Per-coordinate noise standard deviation around each class centre/arm.
  double noise = 1.5;
  std::uint64_t seed = 1;
};

namespace detail {

inline Dataset draw_split(const SyntheticSpec &spec, const Tensor &means, Rng rng,
                          std::size_t per_class, Split split) {
  Dataset ds;
  ds.classes = spec.classes;
  ds.split = split;
  const std::size_t n = per_class * spec.classes;
  ds.features = Tensor({n, spec.dim});
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % spec.classes;
    ds.labels[i] = static_cast<int>(c);
    auto row = ds.features.row(i);
    if (spec.kind == SyntheticKind::gaussian_clusters) {
      for (std::size_t j = 0; j < spec.dim; ++j) row[j] = means(c, j) + rng.normal(0.0, spec.noise);
    } else {
      // Arm c of a C-arm spiral: radius t, angle 3 pi t plus the arm offset.
      const double t = rng.uniform();
      const double angle = 3.0 * std::numbers::pi * t +
                           2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(spec.classes);
      row[0] = t * std::cos(angle) + rng.normal(0.0, spec.noise);
      row[1] = t * std::sin(angle) + rng.normal(0.0, spec.noise);
    }
  }
  return ds;
}

} // namespace detail

/// Reproducible train/test draws. Class centres, train samples, and test
/// samples come from disjoint substreams ("means", "train", "test") of the
/// spec seed.
inline std::pair<Dataset, Dataset> gen_synthetic(const SyntheticSpec &spec) {
  if (spec.classes < 2) throw ConfigError("data.classes", "need at least 2 classes");
  if (spec.per_class == 0) throw ConfigError("data.per_class", "per_class must be positive");
  if (spec.test_per_class == 0) throw ConfigError("data.test_per_class", "test_per_class must be positive");
  if (spec.dim == 0) throw ConfigError("data.dim", "dim must be positive");
  if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise))
    throw ConfigError("data.noise", "noise must be finite and nonnegative");
  if (spec.kind == SyntheticKind::two_spirals && spec.dim != 2)
    throw ConfigError("data.dim", "two_spirals requires dim = 2");

  const Rng root(spec.seed);
  Tensor means({spec.classes, spec.dim});
  if (spec.kind == SyntheticKind::gaussian_clusters) {
    if (!(spec.separation > 0.0)) throw ConfigError("data.separation", "separation must be positive");
    Rng mrng = root.fork("means");
    for (auto &m : means.data()) m = mrng.normal(0.0, spec.separation);
    for (std::size_t a = 0; a < spec.classes; ++a)
      for (std::size_t b = a + 1; b < spec.classes; ++b)
        if (std::equal(means.row(a).begin(), means.row(a).end(), means.row(b).begin()))
          throw ConfigError("data.seed", "degenerate class means");
  }
  return {detail::draw_split(spec, means, root.fork("train"), spec.per_class, Split::train),
          detail::draw_split(spec, means, root.fork("test"), spec.test_per_class, Split::test)};
}

struct Batch {
  Tensor x;
  std::vector<int> labels;
  std::vector<std::size_t> indices;
};

/// Shuffled minibatches covering the dataset exactly once; the last batch
/// may be short.
inline std::vector<Batch> batches(const Dataset &ds, std::size_t batch_size, std::uint64_t epoch_seed) {
  if (batch_size == 0) throw ConfigError("opt.batch_size", "batch size must be at least 1");
  const std::size_t n = ds.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(epoch_seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

  std::vector<Batch> out;
  const std::size_t d = ds.dim();
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t len = std::min(batch_size, n - start);
    Batch b;
    b.x = Tensor({len, d});
    b.labels.resize(len);
    b.indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                     perm.begin() + static_cast<std::ptrdiff_t>(start + len));
    for (std::size_t r = 0; r < len; ++r) {
      auto src = ds.features.row(b.indices[r]);
      std::copy(src.begin(), src.end(), b.x.row(r).begin());
      b.labels[r] = ds.labels[b.indices[r]];
    }
    out.push_back(std::move(b));
  }
  return out;
}

namespace detail {

inline bool has_gzip_suffix(const std::string &path) {
  for (const char *s : {".gz", ".gzip"}) {
    const std::string suf(s);
    if (path.size() >= suf.size() && path.compare(path.size() - suf.size(), suf.size(), suf) == 0)
      return true;
  }
  return false;
}

/// Whole-file read; gzip streams are inflated when the name says so.
inline std::vector<std::uint8_t> read_file_bytes(const std::string &path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open " + path);
  if (!has_gzip_suffix(path)) gzdirect(f);
  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  int got;
  while ((got = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + got);
  const bool failed = got < 0;
  gzclose(f);
  if (failed) throw IoError("read failure on " + path);
  return out;
}

class BigEndianReader {
public:
  BigEndianReader(const std::vector<std::uint8_t> &bytes, std::string name)
      : bytes_(bytes), name_(std::move(name)) {}

  std::uint32_t u32() {
    if (pos_ + 4 > bytes_.size()) throw FormatError(name_ + ": truncated header", pos_);
    const std::uint32_t v = (std::uint32_t{bytes_[pos_]} << 24) | (std::uint32_t{bytes_[pos_ + 1]} << 16) |
                            (std::uint32_t{bytes_[pos_ + 2]} << 8) | std::uint32_t{bytes_[pos_ + 3]};
    pos_ += 4;
    return v;
  }

  std::size_t pos() const { return pos_; }

  void require(std::size_t count) const {
    if (pos_ + count > bytes_.size())
      throw FormatError(name_ + ": truncated payload, need " + std::to_string(count) + " bytes, have " +
                            std::to_string(bytes_.size() - pos_),
                        bytes_.size());
  }

private:
  const std::vector<std::uint8_t> &bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

} // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Reads an IDX image/label pair (uint8 payloads, big-endian headers).
/// Pixels are scaled by 1/255 and each image is flattened to H*W features.
inline Dataset load_idx(const std::string &images_path, const std::string &labels_path,
                        std::optional<std::size_t> classes = std::nullopt, Split split = Split::train) {
  const auto img = detail::read_file_bytes(images_path);
  const auto lab = detail::read_file_bytes(labels_path);

  detail::BigEndianReader ir(img, images_path);
  if (const auto magic = ir.u32(); magic != kIdxImageMagic)
    throw FormatError(images_path + ": bad image magic " + std::to_string(magic), 0);
  const std::size_t n = ir.u32(), h = ir.u32(), w = ir.u32();
  if (n == 0 || h == 0 || w == 0) throw FormatError(images_path + ": zero extent in header", 4);
  ir.require(n * h * w);

  detail::BigEndianReader lr(lab, labels_path);
  if (const auto magic = lr.u32(); magic != kIdxLabelMagic)
    throw FormatError(labels_path + ": bad label magic " + std::to_string(magic), 0);
  const std::size_t nl = lr.u32();
  if (nl != n)
    throw FormatError("image count " + std::to_string(n) + " does not match label count " + std::to_string(nl), 4);
  lr.require(nl);

  Dataset ds;
  ds.split = split;
  ds.features = Tensor({n, h * w});
  auto f = ds.features.data();
  const std::size_t img_off = ir.pos();
  for (std::size_t i = 0; i < n * h * w; ++i) f[i] = static_cast<double>(img[img_off + i]) / 255.0;
  ds.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = lab[lr.pos() + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.classes = classes.value_or(static_cast<std::size_t>(max_label) + 1);
  for (std::size_t i = 0; i < n; ++i)
    if (static_cast<std::size_t>(ds.labels[i]) >= ds.classes)
      throw FormatError(labels_path + ": label " + std::to_string(ds.labels[i]) + " exceeds class count",
                        lr.pos() + i);
  return ds;
}

} // namespace gcreg
