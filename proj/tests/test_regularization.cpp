#include <gtest/gtest.h>

#include <cmath>

#include "gcreg/regularization.hpp"
#include "gcreg/rng.hpp"

using namespace gcreg;

TEST(Penalty, Values) {
  EXPECT_EQ(penalty_value(Tensor::vector({1, -2}).data(), RegKind::L2), 5.0);
  EXPECT_EQ(penalty_value(Tensor::vector({1, -2, 0}).data(), RegKind::L1), 3.0);
  const Tensor z({4});
  EXPECT_EQ(penalty_value(z.data(), RegKind::L1), 0.0);
  EXPECT_EQ(penalty_value(z.data(), RegKind::L2), 0.0);
}

TEST(Penalty, Gradients) {
  EXPECT_EQ(penalty_grad(Tensor::vector({1, -2}), RegKind::L2), Tensor::vector({2, -4}));
  EXPECT_EQ(penalty_grad(Tensor::vector({0.5, -3}), RegKind::L1), Tensor::vector({1, -1}));
  EXPECT_EQ(penalty_grad(Tensor::vector({0}), RegKind::L1), Tensor::vector({0}));
}

TEST(SoftThreshold, Branches) {
  EXPECT_NEAR(soft_threshold(0.5, 0.2), 0.3, 1e-15);
  EXPECT_NEAR(soft_threshold(-0.5, 0.2), -0.3, 1e-15);
  EXPECT_EQ(soft_threshold(0.1, 0.2), 0.0);
  EXPECT_EQ(soft_threshold(-0.2, 0.2), 0.0);
  EXPECT_THROW(soft_threshold(1.0, -0.1), DomainError);
}

TEST(Prox, Examples) {
  const Tensor w = Tensor::vector({0.3, -0.1, 0.5});
  EXPECT_EQ(prox_step(w, 0.0), w);
  const Tensor p = prox_step(w, 0.2);
  EXPECT_NEAR(p[0], 0.1, 1e-15);
  EXPECT_EQ(p[1], 0.0);
  EXPECT_NEAR(p[2], 0.3, 1e-15);
}

TEST(Prox, MatchesGridSearchMinimizer) {
  Rng rng(77);
  const double step = 1e-4;
  for (int trial = 0; trial < 200; ++trial) {
    const double a = rng.normal(0.0, 1.0), z = rng.uniform();
    double best_x = 0, best = INFINITY;
    const double lo = std::min(a, 0.0) - 0.01, hi = std::max(a, 0.0) + 0.01;
    for (double x = lo; x <= hi; x += step) {
      const double f = 0.5 * (x - a) * (x - a) + z * std::abs(x);
      if (f < best) {
        best = f;
        best_x = x;
      }
    }
    EXPECT_NEAR(soft_threshold(a, z), best_x, step);
  }
}

TEST(Coherence, Examples) {
  const auto r0 = coherence_rate(Tensor::vector({1, -2}).data(), Tensor::vector({0, 0}).data());
  EXPECT_EQ(r0.pi, 1.0);
  const auto r1 = coherence_rate(Tensor::vector({1, -1}).data(), Tensor::vector({-2, -1}).data());
  EXPECT_EQ(r1.pi, 0.5);
  EXPECT_EQ(r1.counted, 2u);
  const auto r2 = coherence_rate(Tensor::vector({0, 3}).data(), Tensor::vector({5, 1}).data());
  EXPECT_EQ(r2.pi, 1.0);
  EXPECT_EQ(r2.counted, 1u);
  EXPECT_EQ(r2.total, 2u);
}

TEST(Coherence, NothingCountedIsOne) {
  const auto r = coherence_rate(Tensor({3}).data(), Tensor::vector({1, 2, 3}).data());
  EXPECT_EQ(r.pi, 1.0);
  EXPECT_EQ(r.counted, 0u);
}

TEST(Coherence, ExactCancellationIsIncoherent) {
  const auto r = coherence_rate(Tensor::vector({1}).data(), Tensor::vector({-1}).data());
  EXPECT_EQ(r.pi, 0.0);
}

TEST(Coherence, ScaledOverloadUsesPenaltyGradient) {
  const Tensor g = Tensor::vector({0.1, -0.1, 0.1});
  const Tensor w = Tensor::vector({-1, -1, 0});
  // L2: total = g + lambda * 2w = [0.1 - 0.2, -0.1 - 0.2, 0.1]
  const auto r = coherence_rate(g, w, RegKind::L2, 0.1);
  EXPECT_EQ(r.counted, 3u);
  EXPECT_NEAR(r.pi, 2.0 / 3.0, 1e-15);
}

TEST(Coherence, MatchesEnumerationOracle) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<double> g(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = rng.uniform() < 0.3 ? 0.0 : rng.normal();
      r[i] = rng.normal();
    }
    std::size_t agree = 0, counted = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (g[i] == 0.0) continue;
      ++counted;
      const double t = g[i] + r[i];
      if ((g[i] > 0 && t > 0) || (g[i] < 0 && t < 0)) ++agree;
    }
    const auto rep = coherence_rate(g, r);
    EXPECT_EQ(rep.counted, counted);
    EXPECT_EQ(rep.pi, counted ? static_cast<double>(agree) / static_cast<double>(counted) : 1.0);
  }
}

TEST(Gate, EpochGate) {
  const RegSchedule s{RegKind::L2, 0.3, EpochGate{5}};
  EXPECT_EQ(effective_lambda(s, 3), 0.0);
  EXPECT_EQ(effective_lambda(s, 4), 0.0);
  EXPECT_EQ(effective_lambda(s, 5), 0.3);
  EXPECT_EQ(effective_lambda(s, 50), 0.3);
}

TEST(Gate, CoherenceGateIsStrict) {
  const RegSchedule s{RegKind::L1, 0.3, CoherenceGate{0.6}};
  EXPECT_EQ(effective_lambda(s, 0, 0.7), 0.3);
  EXPECT_EQ(effective_lambda(s, 0, 0.6), 0.0);
  EXPECT_THROW(effective_lambda(s, 0), UsageError);
}

TEST(Gate, ValuesAreZeroOrLambda) {
  Rng rng(3);
  for (const Gate g : {Gate{ConstantGate{}}, Gate{EpochGate{2}}, Gate{CoherenceGate{0.5}}}) {
    const RegSchedule s{RegKind::L2, 0.125, g};
    for (std::size_t e = 0; e < 10; ++e) {
      const double v = effective_lambda(s, e, rng.uniform());
      EXPECT_TRUE(v == 0.0 || v == 0.125);
    }
  }
}
