#pragma once

// First-order engines over a generic oracle:
//  * ustm_minimize: universal similar-triangles method with the adaptive
//    (L-doubling) line search and an inexactness slack eps.
//  * acrcd_minimize: accelerated randomized block-coordinate descent with
//    block i sampled with probability sqrt(L_i) / sum_j sqrt(L_j).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace twostage {

/// Objective with (sub)gradients, optionally split into contiguous blocks,
/// over a feasible set with a cheap Euclidean projection.
class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::size_t num_blocks() const { return 1; }
  /// [begin, end) of block i in the flat vector.
  virtual std::pair<std::size_t, std::size_t> block_range(std::size_t i) const;

  virtual double value(std::span<const double> x) = 0;
  /// Returns the value and writes the full gradient into `grad`.
  virtual double value_and_gradient(std::span<const double> x, std::span<double> grad) = 0;
  /// Gradient restricted to block i; `grad` has the block's size.
  virtual void block_gradient(std::size_t block, std::span<const double> x,
                              std::span<double> grad);
  /// Euclidean projection onto the feasible set, in place.
  virtual void project(std::span<double> x) const { (void)x; }
};

enum class SolveStatus {
  kConverged,        // the caller's stopping rule fired
  kBudgetExhausted,  // call or iteration budget reached
  kNumericalFailure  // line search blew up
};

const char* to_string(SolveStatus status);

struct TraceRow {
  long iteration = 0;
  std::vector<long> block_calls;  // cumulative, per block
  double objective = 0.0;
  double wall_ms = 0.0;
};

struct UstmOptions {
  double initial_lipschitz = 1.0;  // L0
  double eps = 1e-6;               // line-search slack
  long max_calls = 1000;           // oracle evaluations (value or value+gradient)
  long max_iterations = -1;        // negative: unlimited
  double lipschitz_limit = 1e30;
};

/// One trial of the inner line search.
struct UstmTrial {
  long iteration = 0;
  double lipschitz = 0.0;
  double alpha = 0.0;
  double a_prev = 0.0;  // A_k
  double a_next = 0.0;  // A_{k+1}
  double value_y = 0.0;
  double value_x = 0.0;
  double linear_term = 0.0;  // <grad(y), x - y>
  double distance_sq = 0.0;  // |x - y|^2
  bool accepted = false;
};

/// State handed to the observer after each accepted step.
struct UstmIterate {
  long iteration = 0;  // k + 1
  double alpha = 0.0;
  double a_next = 0.0;
  double lipschitz = 0.0;
  std::span<const double> y;
  std::span<const double> x;  // t^{k+1}
  std::span<const double> u;
  std::span<const double> grad_y;
  double value_x = 0.0;
  long calls = 0;
};

/// Return true to stop (reported as kConverged).
using UstmObserver = std::function<bool(const UstmIterate&)>;

struct UstmResult {
  std::vector<double> x_best;
  double value_best = 0.0;
  std::vector<double> x_last;
  SolveStatus status = SolveStatus::kBudgetExhausted;
  long iterations = 0;
  long calls = 0;
  std::vector<UstmTrial> trials;
  std::vector<TraceRow> trace;
};

UstmResult ustm_minimize(Oracle& oracle, std::span<const double> x0, const UstmOptions& options,
                         const UstmObserver& observer = {});

/// True when the accepted trial satisfies the line-search inequality
/// (up to a relative rounding allowance `slack`).
bool ustm_acceptance_holds(const UstmTrial& trial, double eps, double slack = 0.0);

/// Samples block i with probability weights[i] / sum(weights) from a
/// 64-bit Mersenne Twister, using a platform-independent uniform draw.
class BlockSampler {
 public:
  BlockSampler(std::vector<double> weights, std::uint64_t seed);
  std::size_t sample();
  void set_weights(std::vector<double> weights);
  const std::vector<double>& probabilities() const { return probabilities_; }

 private:
  std::vector<double> probabilities_;
  std::vector<double> cumulative_;
  std::mt19937_64 engine_;
};

struct AcrcdOptions {
  std::uint64_t seed = 0;
  long max_iterations = 10000;
  /// Per-block call budgets; empty or nonpositive entries mean unlimited.
  std::vector<long> max_block_calls;
  /// Halve L_i before each step of block i and double it until the block
  /// descent condition holds. Costs two extra value calls per trial.
  bool adaptive = false;
  /// Evaluate the objective at y after every step (not counted as calls).
  bool track_objective = false;
};

struct AcrcdIterate {
  long iteration = 0;  // k + 1
  std::size_t block = 0;
  double tau = 0.0;
  double alpha = 0.0;
  std::span<const double> x;  // x_{k+1}: where the block gradient was taken
  std::span<const double> y;  // y_{k+1}
  std::span<const double> z;  // z_{k+1}
  std::span<const double> block_grad;
  const std::vector<long>* block_calls = nullptr;
};

using AcrcdObserver = std::function<bool(const AcrcdIterate&)>;

struct AcrcdResult {
  std::vector<double> x_best;
  double value_best = 0.0;  // NaN unless track_objective
  std::vector<double> y_last;
  SolveStatus status = SolveStatus::kBudgetExhausted;
  long iterations = 0;
  std::vector<long> block_calls;
  std::vector<std::size_t> sampled_blocks;
  std::vector<double> lipschitz;  // final per-block constants
  std::vector<TraceRow> trace;
};

AcrcdResult acrcd_minimize(Oracle& oracle, std::span<const double> lipschitz,
                           std::span<const double> x0, const AcrcdOptions& options,
                           const AcrcdObserver& observer = {});

/// Running weighted means of flows and trip matrices (O(1) extra memory).
class PrimalAverager {
 public:
  void add(double weight, std::span<const double> flows, std::span<const double> trips);
  bool empty() const { return total_weight_ == 0.0; }
  double total_weight() const { return total_weight_; }
  /// Throws std::logic_error when nothing was added.
  const std::vector<double>& flows() const;
  const std::vector<double>& trips() const;

 private:
  double total_weight_ = 0.0;
  std::vector<double> flows_;
  std::vector<double> trips_;
};

struct WeightedPrimal {
  double weight = 0.0;
  std::vector<double> flows;
  std::vector<double> trips;
};

struct PrimalAverage {
  std::vector<double> flows;
  std::vector<double> trips;
  double total_weight = 0.0;
};

/// f_hat = sum a_k f_k / A_N, d_hat = sum a_k d_k / A_N.
PrimalAverage average_primal(std::span<const WeightedPrimal> steps);

}  // namespace twostage
