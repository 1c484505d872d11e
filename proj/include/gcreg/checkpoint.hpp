#pragma once

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>

#include "gcreg/io.hpp"
#include "gcreg/nn.hpp"

namespace gcreg {

// Text layout, one token group per line:
//
//   gcreg-checkpoint 1
//   rng <algorithm label>
//   seed <uint64 key used by init_params>
//   arch.input <n>
//   arch.hidden <w1,w2,...>      ("-" when there are no hidden layers)
//   arch.classes <n>
//   arch.dropout <p>
//   arch.init_gain <g>
//   weights <n>                  followed by n values in FlatParamView order
//   biases <m>                   followed by m values, dense layer by layer
//   end
//
// Values use shortest round-trip decimal, so save/load is bitwise exact.

inline constexpr int kCheckpointVersion = 1;

inline std::string checkpoint_text(const Network &net, std::uint64_t seed) {
  const Architecture &a = net.architecture();
  std::ostringstream out;
  out << "gcreg-checkpoint " << kCheckpointVersion << "\n";
  out << "rng " << Rng::algorithm << "\n";
  out << "seed " << seed << "\n";
  out << "arch.input " << a.input << "\n";
  out << "arch.hidden ";
  if (a.hidden.empty()) out << "-";
  for (std::size_t i = 0; i < a.hidden.size(); ++i) out << (i ? "," : "") << a.hidden[i];
  out << "\narch.classes " << a.classes << "\n";
  out << "arch.dropout " << format_double(a.dropout) << "\n";
  out << "arch.init_gain " << format_double(a.init_gain) << "\n";
  const FlatParamView view(net);
  const Tensor w = gather_flat(view, net, FlatSource::params);
  out << "weights " << w.size() << "\n";
  for (double v : w.data()) out << format_double(v) << "\n";
  std::size_t nb = 0;
  net.for_each_dense([&](const DenseLayer &d) { nb += d.bias.size(); });
  out << "biases " << nb << "\n";
  net.for_each_dense([&](const DenseLayer &d) {
    for (double v : d.bias.data()) out << format_double(v) << "\n";
  });
  out << "end\n";
  return out.str();
}

inline void save_checkpoint(const std::filesystem::path &p, const Network &net, std::uint64_t seed) {
  write_text(p, checkpoint_text(net, seed));
}

struct Checkpoint {
  Network net;
  std::uint64_t seed = 0;
};

inline Checkpoint parse_checkpoint(const std::string &text) {
  std::istringstream in(text);
  auto expect = [&](const std::string &key) {
    std::string k;
    if (!(in >> k) || k != key)
      throw FormatError("checkpoint: expected '" + key + "', got '" + k + "'",
                        static_cast<std::size_t>(std::max<std::streamoff>(in.tellg(), 0)));
  };
  auto next_double = [&]() {
    std::string tok;
    double v = 0;
    if (!(in >> tok) || !parse_double(tok, v))
      throw FormatError("checkpoint: bad number '" + tok + "'",
                        static_cast<std::size_t>(std::max<std::streamoff>(in.tellg(), 0)));
    return v;
  };

  int version = 0;
  expect("gcreg-checkpoint");
  in >> version;
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version", 0);
  std::string tok;
  expect("rng");
  in >> tok;
  Checkpoint c;
  expect("seed");
  in >> c.seed;
  Architecture a;
  expect("arch.input");
  in >> a.input;
  expect("arch.hidden");
  in >> tok;
  if (tok != "-")
    for (const auto &w : split(tok, ',')) a.hidden.push_back(std::stoul(w));
  expect("arch.classes");
  in >> a.classes;
  expect("arch.dropout");
  a.dropout = next_double();
  expect("arch.init_gain");
  a.init_gain = next_double();

  c.net = init_params(a, Rng(c.seed));
  const FlatParamView view(c.net);
  std::size_t n = 0;
  expect("weights");
  in >> n;
  if (n != view.size()) throw FormatError("checkpoint: weight count does not match architecture", 0);
  Tensor w({n});
  for (auto &v : w.data()) v = next_double();
  scatter_flat(view, c.net, w);
  expect("biases");
  in >> n;
  std::size_t nb = 0;
  c.net.for_each_dense([&](const DenseLayer &d) { nb += d.bias.size(); });
  if (n != nb) throw FormatError("checkpoint: bias count does not match architecture", 0);
  c.net.for_each_dense([&](DenseLayer &d) {
    for (auto &v : d.bias.data()) v = next_double();
  });
  expect("end");
  return c;
}

inline Checkpoint load_checkpoint(const std::filesystem::path &p) { return parse_checkpoint(read_text(p)); }

} // namespace gcreg
