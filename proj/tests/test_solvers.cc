#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "twostage/errors.h"
#include "twostage/solvers.h"

namespace twostage {
namespace {

// f(x) = 1/2 sum c_i x_i^2 over the box x >= lower, split into blocks of
// the given sizes. Records whether any query left the box.
class Quadratic : public Oracle {
 public:
  Quadratic(std::vector<double> c, std::vector<std::size_t> block_sizes = {},
            double lower = -std::numeric_limits<double>::infinity())
      : c_(std::move(c)), lower_(lower) {
    if (block_sizes.empty()) block_sizes = {c_.size()};
    std::size_t begin = 0;
    for (auto s : block_sizes) {
      ranges_.push_back({begin, begin + s});
      begin += s;
    }
  }
  std::size_t dimension() const override { return c_.size(); }
  std::size_t num_blocks() const override { return ranges_.size(); }
  std::pair<std::size_t, std::size_t> block_range(std::size_t i) const override {
    return ranges_.at(i);
  }
  double value(std::span<const double> x) override {
    check(x);
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) v += 0.5 * c_[i] * x[i] * x[i];
    return v;
  }
  double value_and_gradient(std::span<const double> x, std::span<double> g) override {
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = c_[i] * x[i];
    return value(x);
  }
  void project(std::span<double> x) const override {
    for (auto& v : x) v = std::max(v, lower_);
  }
  bool left_box = false;

 private:
  void check(std::span<const double> x) {
    for (double v : x) left_box |= v < lower_;
  }
  std::vector<double> c_;
  double lower_;
  std::vector<std::pair<std::size_t, std::size_t>> ranges_;
};

class AbsValue : public Oracle {
 public:
  std::size_t dimension() const override { return 1; }
  double value(std::span<const double> x) override { return std::abs(x[0]); }
  double value_and_gradient(std::span<const double> x, std::span<double> g) override {
    g[0] = x[0] > 0 ? 1.0 : (x[0] < 0 ? -1.0 : 0.0);
    return std::abs(x[0]);
  }
};

class NanOracle : public Oracle {
 public:
  std::size_t dimension() const override { return 1; }
  double value(std::span<const double>) override { return std::nan(""); }
  double value_and_gradient(std::span<const double>, std::span<double> g) override {
    g[0] = 1.0;
    return 0.0;
  }
};

double norm(std::span<const double> x) {
  return std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
}

TEST(Ustm, QuadraticConvergesWithinHundredCalls) {
  Quadratic q(std::vector<double>(5, 1.0));
  UstmOptions o;
  o.eps = 1e-9;
  o.max_calls = 100;
  const auto r = ustm_minimize(q, std::vector<double>(5, 1.0), o);
  EXPECT_LE(r.calls, 100);
  EXPECT_LE(norm(r.x_best), 1e-4);
}

TEST(Ustm, NonsmoothAbsoluteValue) {
  AbsValue f;
  UstmOptions o;
  o.eps = 1e-3;
  o.max_calls = 20000;
  const auto r = ustm_minimize(f, std::vector<double>{1.0}, o);
  EXPECT_LE(r.value_best, o.eps);
  EXPECT_GE(r.value_best, -o.eps);
}

TEST(Ustm, AcceptanceInequalityAndRecurrences) {
  Quadratic q({1.0, 4.0, 0.25, 9.0});
  UstmOptions o;
  o.eps = 1e-6;
  o.max_calls = 400;
  const auto r = ustm_minimize(q, std::vector<double>{1, -2, 3, 0.5}, o);
  double a_prev = 0.0;
  long accepted = 0;
  for (const auto& t : r.trials) {
    // Independent recomputation of the alpha recurrence.
    const double alpha = 1.0 / (2 * t.lipschitz) +
                         std::sqrt(1.0 / (4 * t.lipschitz * t.lipschitz) + t.a_prev / t.lipschitz);
    EXPECT_NEAR(t.alpha, alpha, 1e-12 * alpha);
    EXPECT_NEAR(t.a_next, t.a_prev + t.alpha, 1e-12 * t.a_next);
    EXPECT_EQ(t.a_prev, a_prev);
    if (!t.accepted) continue;
    ++accepted;
    const double rhs = t.value_y + t.linear_term + 0.5 * t.lipschitz * t.distance_sq +
                       t.alpha / (2 * t.a_next) * o.eps;
    EXPECT_LE(t.value_x, rhs);
    EXPECT_GT(t.a_next, a_prev);
    a_prev = t.a_next;
  }
  EXPECT_EQ(accepted, r.iterations);
}

TEST(Ustm, StaysInsideFeasibleBox) {
  Quadratic q({1.0, 2.0, 3.0}, {}, 0.5);
  UstmOptions o;
  o.max_calls = 300;
  const auto r = ustm_minimize(q, std::vector<double>{2, 3, 4}, o);
  EXPECT_FALSE(q.left_box);
  for (double v : r.x_best) EXPECT_NEAR(v, 0.5, 1e-3);
}

TEST(Ustm, BudgetExhaustionIsFlagged) {
  Quadratic q({1.0, 1.0});
  UstmOptions o;
  o.max_calls = 7;
  const auto r = ustm_minimize(q, std::vector<double>{1, 1}, o);
  EXPECT_EQ(r.status, SolveStatus::kBudgetExhausted);
  EXPECT_LE(r.calls, 7);
}

TEST(Ustm, LipschitzOverflowIsNumericalFailure) {
  NanOracle f;
  UstmOptions o;
  o.max_calls = 100000;
  const auto r = ustm_minimize(f, std::vector<double>{1.0}, o);
  EXPECT_EQ(r.status, SolveStatus::kNumericalFailure);
}

TEST(Ustm, ObserverCanStop) {
  Quadratic q({1.0});
  UstmOptions o;
  o.max_calls = 1000;
  const auto r = ustm_minimize(q, std::vector<double>{1.0}, o,
                               [](const UstmIterate& it) { return it.iteration == 3; });
  EXPECT_EQ(r.status, SolveStatus::kConverged);
  EXPECT_EQ(r.iterations, 3);
}

TEST(BlockSampler, FrequencyFollowsSquareRootWeights) {
  BlockSampler s({std::sqrt(100.0), std::sqrt(1.0)}, 42);
  int first = 0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) first += s.sample() == 0;
  EXPECT_NEAR(static_cast<double>(first) / draws, 10.0 / 11.0, 0.02);
}

TEST(BlockSampler, ChiSquareGoodnessOfFit) {
  const std::vector<double> w{1.0, 2.0, 3.0, 4.0};
  BlockSampler s(w, 7);
  const int draws = 20000;
  std::vector<int> counts(4, 0);
  for (int k = 0; k < draws; ++k) ++counts[s.sample()];
  double chi2 = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double expected = draws * w[i] / 10.0;
    chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
  }
  // 0.99 quantile of chi-square with 3 degrees of freedom.
  EXPECT_LT(chi2, 11.345);
}

TEST(BlockSampler, RejectsBadWeights) {
  EXPECT_THROW(BlockSampler({}, 0), ValidationError);
  EXPECT_THROW(BlockSampler({0.0, 0.0}, 0), ValidationError);
  EXPECT_THROW(BlockSampler({1.0, -1.0}, 0), ValidationError);
}

TEST(Acrcd, SeparableQuadraticConverges) {
  Quadratic q({1.0, 1.0}, {1, 1});
  AcrcdOptions o;
  o.max_iterations = 5000;
  const std::vector<double> lipschitz{1.0, 1.0};
  const auto r = acrcd_minimize(q, lipschitz, std::vector<double>{1.0, -1.0}, o);
  EXPECT_LE(q.value(r.y_last), 1e-6);
}

TEST(Acrcd, IllConditionedBlocksConverge) {
  Quadratic q({100.0, 100.0, 1.0, 1.0, 1.0}, {2, 3});
  AcrcdOptions o;
  o.max_iterations = 20000;
  const std::vector<double> lipschitz{100.0, 1.0};
  const auto r = acrcd_minimize(q, lipschitz, std::vector<double>(5, 1.0), o);
  EXPECT_LE(q.value(r.y_last), 1e-6);
}

TEST(Acrcd, FixedSeedIsBitIdentical) {
  auto run = [] {
    Quadratic q({3.0, 1.0, 0.5}, {1, 2});
    AcrcdOptions o;
    o.seed = 99;
    o.max_iterations = 500;
    o.track_objective = true;
    const std::vector<double> lipschitz{3.0, 1.0};
    return acrcd_minimize(q, lipschitz, std::vector<double>{1, 2, 3}, o);
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.sampled_blocks, b.sampled_blocks);
  EXPECT_EQ(a.y_last, b.y_last);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    EXPECT_EQ(a.trace[k].objective, b.trace[k].objective);
    EXPECT_EQ(a.trace[k].block_calls, b.trace[k].block_calls);
  }
}

TEST(Acrcd, CountsCallsPerBlockAndRespectsBudget) {
  Quadratic q({1.0, 1.0}, {1, 1});
  AcrcdOptions o;
  o.max_iterations = 100000;
  o.max_block_calls = {200, 0};
  const std::vector<double> lipschitz{1.0, 1.0};
  const auto r = acrcd_minimize(q, lipschitz, std::vector<double>{1.0, 1.0}, o);
  EXPECT_EQ(r.status, SolveStatus::kBudgetExhausted);
  EXPECT_EQ(r.block_calls[0], 200);
  EXPECT_EQ(r.block_calls[0] + r.block_calls[1], r.iterations);
  const auto zeros = std::count(r.sampled_blocks.begin(), r.sampled_blocks.end(), 0u);
  EXPECT_EQ(zeros, 200);
}

TEST(Acrcd, StaysInsideFeasibleBox) {
  Quadratic q({1.0, 2.0, 5.0}, {1, 2}, 0.25);
  AcrcdOptions o;
  o.max_iterations = 3000;
  const std::vector<double> lipschitz{1.0, 5.0};
  const auto r = acrcd_minimize(q, lipschitz, std::vector<double>{3, 3, 3}, o);
  EXPECT_FALSE(q.left_box);
  for (double v : r.y_last) EXPECT_NEAR(v, 0.25, 1e-4);
}

TEST(Acrcd, AdaptiveConstantsConverge) {
  Quadratic q({50.0, 0.5}, {1, 1});
  AcrcdOptions o;
  o.max_iterations = 5000;
  o.adaptive = true;
  const std::vector<double> lipschitz{1.0, 1.0};
  const auto r = acrcd_minimize(q, lipschitz, std::vector<double>{1.0, 1.0}, o);
  EXPECT_LE(q.value(r.y_last), 1e-6);
  EXPECT_GE(r.lipschitz[0], 25.0);
}

TEST(Acrcd, RejectsSingleBlock) {
  Quadratic q({1.0});
  const std::vector<double> lipschitz{1.0};
  EXPECT_THROW(acrcd_minimize(q, lipschitz, std::vector<double>{1.0}, {}), ValidationError);
}

TEST(PrimalAverager, ConstantSequence) {
  PrimalAverager a;
  const std::vector<double> f{1.5, 2.5}, d{0.25};
  for (double w : {0.1, 2.0, 7.0}) a.add(w, f, d);
  EXPECT_EQ(a.flows(), f);
  EXPECT_EQ(a.trips(), d);
}

TEST(PrimalAverager, WeightedMean) {
  const std::vector<WeightedPrimal> steps{{1.0, {0.0}, {0.0}}, {3.0, {4.0}, {8.0}}};
  const auto avg = average_primal(steps);
  EXPECT_DOUBLE_EQ(avg.flows[0], 3.0);
  EXPECT_DOUBLE_EQ(avg.trips[0], 6.0);
  EXPECT_EQ(avg.total_weight, 4.0);
}

TEST(PrimalAverager, EmptyIsError) {
  PrimalAverager a;
  EXPECT_TRUE(a.empty());
  EXPECT_THROW(a.flows(), std::logic_error);
  EXPECT_THROW(average_primal({}), std::logic_error);
}

TEST(PrimalAverager, UstmWeightsSumToAccumulator) {
  Quadratic q({1.0, 2.0});
  UstmOptions o;
  o.max_calls = 200;
  PrimalAverager a;
  double a_last = 0.0;
  const std::vector<double> dummy{1.0};
  ustm_minimize(q, std::vector<double>{1, 1}, o, [&](const UstmIterate& it) {
    a.add(it.alpha, dummy, dummy);
    a_last = it.a_next;
    return false;
  });
  EXPECT_NEAR(a.total_weight() / a_last, 1.0, 1e-12);
}

}  // namespace
}  // namespace twostage
