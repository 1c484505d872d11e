#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>

#include "gcreg/errors.hpp"
#include "gcreg/tensor.hpp"

namespace gcreg {

enum class RegKind { L1, L2 };

inline std::string to_string(RegKind k) { return k == RegKind::L1 ? "l1" : "l2"; }

/// Regularize at every step.
struct ConstantGate {};
/// Regularize from epoch `gamma` (0-based) onward.
struct EpochGate {
  std::size_t gamma = 5;
};
/// Regularize at a step only when the sign coherence rate exceeds `mu`.
struct CoherenceGate {
  double mu = 0.6;
};

using Gate = std::variant<ConstantGate, EpochGate, CoherenceGate>;

inline std::string gate_name(const Gate &g) {
  switch (g.index()) {
  case 0: return "constant";
  case 1: return "epoch";
  default: return "coherence";
  }
}

struct RegSchedule {
  RegKind kind = RegKind::L2;
  double lambda = 0.0;
  Gate gate = ConstantGate{};
};

/// Omega(w): sum of squares for L2, sum of magnitudes for L1. No lambda factor.
inline double penalty_value(std::span<const double> w, RegKind kind) {
  double s = 0.0;
  if (kind == RegKind::L2)
    for (double x : w) s += x * x;
  else
    for (double x : w) s += std::abs(x);
  return s;
}

/// dOmega/dw: 2w for L2, sign(w) for L1 with 0 at w == 0.
inline Tensor penalty_grad(const Tensor &w, RegKind kind) {
  if (kind == RegKind::L2) return ew_map([](double x) { return 2.0 * x; }, w);
  return ew_map(sign, w);
}

/// S(a, z): shrink `a` toward zero by `z`, clamping to exactly 0 on [-z, z].
inline double soft_threshold(double a, double z) {
  if (!(z >= 0.0)) throw DomainError("soft_threshold needs a nonnegative threshold, got " + std::to_string(z));
  if (a > z) return a - z;
  if (a < -z) return a + z;
  return 0.0;
}

/// Proximal operator of threshold * ||.||_1, applied entrywise.
inline Tensor prox_step(const Tensor &w, double threshold) {
  if (!(threshold >= 0.0)) throw DomainError("prox threshold must be nonnegative");
  return ew_map([threshold](double a) { return soft_threshold(a, threshold); }, w);
}

struct CoherenceReport {
  double pi = 1.0;
  std::size_t counted = 0;
  std::size_t total = 0;
};

/// Fraction of coordinates with a nonzero loss gradient whose total gradient
/// (loss + scaled penalty) keeps the loss gradient's sign. A total of exactly
/// zero counts as incoherent. With nothing counted the rate is 1.
inline CoherenceReport coherence_rate(std::span<const double> g_loss,
                                      std::span<const double> g_reg_scaled) {
  if (g_loss.size() != g_reg_scaled.size())
    throw DimensionError("coherence_rate: gradient lengths " + std::to_string(g_loss.size()) +
                         " and " + std::to_string(g_reg_scaled.size()) + " differ");
  CoherenceReport r;
  r.total = g_loss.size();
  std::size_t coherent = 0;
  for (std::size_t i = 0; i < g_loss.size(); ++i) {
    const double g = g_loss[i];
    if (g == 0.0) continue;
    ++r.counted;
    coherent += heaviside(sign(g) * sign(g + g_reg_scaled[i])) > 0.0;
  }
  r.pi = r.counted ? static_cast<double>(coherent) / static_cast<double>(r.counted) : 1.0;
  return r;
}

/// Coherence of the loss gradient with the lambda-scaled penalty gradient at `w`.
inline CoherenceReport coherence_rate(const Tensor &g_loss, const Tensor &w, RegKind kind,
                                      double lambda) {
  if (g_loss.size() != w.size())
    throw DimensionError("coherence_rate: gradient and parameter lengths differ");
  Tensor r = penalty_grad(w, kind);
  for (auto &v : r.data()) v *= lambda;
  return coherence_rate(g_loss.data(), r.data());
}

/// lambda^(t): the configured lambda or 0, depending on the gate.
inline double effective_lambda(const RegSchedule &sched, std::size_t epoch,
                               std::optional<double> pi = std::nullopt) {
  return std::visit(
      [&](const auto &gate) -> double {
        using G = std::decay_t<decltype(gate)>;
        if constexpr (std::is_same_v<G, ConstantGate>) {
          return sched.lambda;
        } else if constexpr (std::is_same_v<G, EpochGate>) {
          return epoch >= gate.gamma ? sched.lambda : 0.0;
        } else {
          if (!pi) throw UsageError("coherence gate requires a coherence rate");
          return *pi > gate.mu ? sched.lambda : 0.0;
        }
      },
      sched.gate);
}

} // namespace gcreg
