#include "twostage/solvers.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "twostage/errors.h"

namespace twostage {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

std::pair<std::size_t, std::size_t> Oracle::block_range(std::size_t i) const {
  if (i != 0) throw std::out_of_range("oracle has a single block");
  return {0, dimension()};
}

void Oracle::block_gradient(std::size_t block, std::span<const double> x, std::span<double> grad) {
  std::vector<double> full(dimension());
  value_and_gradient(x, full);
  const auto [begin, end] = block_range(block);
  std::copy(full.begin() + begin, full.begin() + end, grad.begin());
}

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kBudgetExhausted:
      return "budget-exhausted";
    case SolveStatus::kNumericalFailure:
      return "numerical-failure";
  }
  return "unknown";
}

bool ustm_acceptance_holds(const UstmTrial& trial, double eps, double slack) {
  const double rhs = trial.value_y + trial.linear_term +
                     0.5 * trial.lipschitz * trial.distance_sq +
                     trial.alpha / (2.0 * trial.a_next) * eps;
  return trial.value_x <= rhs + slack * (std::abs(trial.value_x) + std::abs(rhs));
}

UstmResult ustm_minimize(Oracle& oracle, std::span<const double> x0, const UstmOptions& options,
                         const UstmObserver& observer) {
  if (!(options.initial_lipschitz > 0.0)) throw DomainError("L0 must be positive");
  if (!(options.eps > 0.0)) throw DomainError("eps must be positive");
  const std::size_t n = oracle.dimension();
  if (x0.size() != n) throw ValidationError("starting point has the wrong dimension");
  const auto start = Clock::now();
  const std::size_t blocks = oracle.num_blocks();

  UstmResult result;
  std::vector<double> origin(x0.begin(), x0.end());
  oracle.project(origin);
  std::vector<double> t = origin, u = origin, y(n), u_next(n), t_next(n), grad_y(n);
  std::vector<double> grad_sum(n, 0.0);
  double a = 0.0;
  double lipschitz = options.initial_lipschitz;

  auto record = [&](long iteration, double objective) {
    result.trace.push_back(
        {iteration, std::vector<long>(blocks, result.calls), objective, elapsed_ms(start)});
  };

  if (options.max_calls < 1) {
    result.x_best = result.x_last = origin;
    result.value_best = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  result.value_best = oracle.value(origin);
  ++result.calls;
  result.x_best = origin;
  record(0, result.value_best);

  for (long k = 0;; ++k) {
    if (options.max_iterations >= 0 && k >= options.max_iterations) {
      result.status = SolveStatus::kBudgetExhausted;
      break;
    }
    lipschitz /= 2.0;
    UstmTrial trial;
    bool out_of_budget = false;
    for (;;) {
      if (result.calls + 2 > options.max_calls) {
        out_of_budget = true;
        break;
      }
      const double alpha =
          1.0 / (2.0 * lipschitz) + std::sqrt(1.0 / (4.0 * lipschitz * lipschitz) + a / lipschitz);
      const double a_next = a + alpha;
      for (std::size_t i = 0; i < n; ++i) y[i] = (alpha * u[i] + a * t[i]) / a_next;
      // Convex combinations of feasible points; projecting only removes rounding.
      oracle.project(y);
      const double value_y = oracle.value_and_gradient(y, grad_y);
      for (std::size_t i = 0; i < n; ++i) u_next[i] = origin[i] - (grad_sum[i] + alpha * grad_y[i]);
      oracle.project(u_next);
      for (std::size_t i = 0; i < n; ++i) t_next[i] = (alpha * u_next[i] + a * t[i]) / a_next;
      oracle.project(t_next);
      const double value_x = oracle.value(t_next);
      result.calls += 2;

      double linear = 0.0, dist_sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double diff = t_next[i] - y[i];
        linear += grad_y[i] * diff;
        dist_sq += diff * diff;
      }
      trial = {k + 1, lipschitz, alpha, a, a_next, value_y, value_x, linear, dist_sq, false};
      trial.accepted = ustm_acceptance_holds(trial, options.eps);
      result.trials.push_back(trial);
      if (trial.accepted) break;
      lipschitz *= 2.0;
      if (!(lipschitz <= options.lipschitz_limit)) {
        result.status = SolveStatus::kNumericalFailure;
        result.x_last = t;
        result.iterations = k;
        return result;
      }
    }
    if (out_of_budget) {
      result.status = SolveStatus::kBudgetExhausted;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) grad_sum[i] += trial.alpha * grad_y[i];
    a = trial.a_next;
    u.swap(u_next);
    t.swap(t_next);
    result.iterations = k + 1;
    if (trial.value_x < result.value_best) {
      result.value_best = trial.value_x;
      result.x_best = t;
    }
    record(k + 1, trial.value_x);
    if (observer) {
      const UstmIterate it{k + 1, trial.alpha, a, lipschitz, y, t, u, grad_y, trial.value_x,
                           result.calls};
      if (observer(it)) {
        result.status = SolveStatus::kConverged;
        break;
      }
    }
  }
  result.x_last = t;
  return result;
}

BlockSampler::BlockSampler(std::vector<double> weights, std::uint64_t seed) : engine_(seed) {
  set_weights(std::move(weights));
}

void BlockSampler::set_weights(std::vector<double> weights) {
  if (weights.empty()) throw ValidationError("sampler needs at least one weight");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw ValidationError("sampler weights must have a positive sum");
  probabilities_.resize(weights.size());
  cumulative_.resize(weights.size());
  double running = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0) throw ValidationError("negative sampling weight");
    probabilities_[i] = weights[i] / total;
    running += probabilities_[i];
    cumulative_[i] = running;
  }
  cumulative_.back() = 1.0;
}

std::size_t BlockSampler::sample() {
  // 53 random bits -> uniform in [0, 1).
  const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return static_cast<std::size_t>(std::min<std::ptrdiff_t>(
      it - cumulative_.begin(), static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
}

AcrcdResult acrcd_minimize(Oracle& oracle, std::span<const double> lipschitz,
                           std::span<const double> x0, const AcrcdOptions& options,
                           const AcrcdObserver& observer) {
  const std::size_t n = oracle.dimension();
  const std::size_t blocks = oracle.num_blocks();
  if (blocks < 2) throw ValidationError("block-coordinate method needs at least two blocks");
  if (lipschitz.size() != blocks) throw ValidationError("one Lipschitz constant per block required");
  if (x0.size() != n) throw ValidationError("starting point has the wrong dimension");
  for (double l : lipschitz) {
    if (!(l > 0.0)) throw DomainError("block Lipschitz constants must be positive");
  }
  const auto start = Clock::now();

  AcrcdResult result;
  result.lipschitz.assign(lipschitz.begin(), lipschitz.end());
  result.block_calls.assign(blocks, 0);
  auto& big_l = result.lipschitz;

  auto sqrt_weights = [&] {
    std::vector<double> w(blocks);
    for (std::size_t i = 0; i < blocks; ++i) w[i] = std::sqrt(big_l[i]);
    return w;
  };
  auto weights = sqrt_weights();
  double s = std::accumulate(weights.begin(), weights.end(), 0.0);
  BlockSampler sampler(weights, options.seed);

  std::vector<double> x(x0.begin(), x0.end());
  oracle.project(x);
  std::vector<double> y = x, z = x, grad, y_trial(n);
  result.y_last = y;
  result.x_best = y;
  result.value_best = std::numeric_limits<double>::quiet_NaN();
  if (options.track_objective) result.value_best = oracle.value(y);

  auto budget_left = [&] {
    for (std::size_t i = 0; i < blocks && i < options.max_block_calls.size(); ++i) {
      if (options.max_block_calls[i] > 0 && result.block_calls[i] >= options.max_block_calls[i]) {
        return false;
      }
    }
    return true;
  };

  for (long k = 0;; ++k) {
    if (k >= options.max_iterations || !budget_left()) {
      result.status = SolveStatus::kBudgetExhausted;
      break;
    }
    const double tau = 2.0 / (k + 2.0);
    for (std::size_t j = 0; j < n; ++j) x[j] = tau * z[j] + (1.0 - tau) * y[j];
    oracle.project(x);
    const std::size_t i = sampler.sample();
    result.sampled_blocks.push_back(i);
    const auto [begin, end] = oracle.block_range(i);
    grad.assign(end - begin, 0.0);
    oracle.block_gradient(i, x, grad);
    ++result.block_calls[i];

    if (options.adaptive) {
      const double value_x = oracle.value(x);
      ++result.block_calls[i];
      big_l[i] /= 2.0;
      for (;;) {
        y_trial = x;
        for (std::size_t j = begin; j < end; ++j) y_trial[j] -= grad[j - begin] / big_l[i];
        oracle.project(y_trial);
        double linear = 0.0, dist_sq = 0.0;
        for (std::size_t j = begin; j < end; ++j) {
          const double diff = y_trial[j] - x[j];
          linear += grad[j - begin] * diff;
          dist_sq += diff * diff;
        }
        const double value_y = oracle.value(y_trial);
        ++result.block_calls[i];
        if (value_y <= value_x + linear + 0.5 * big_l[i] * dist_sq) break;
        big_l[i] *= 2.0;
        if (!(big_l[i] <= 1e30)) {
          result.status = SolveStatus::kNumericalFailure;
          result.iterations = k;
          return result;
        }
      }
      weights = sqrt_weights();
      s = std::accumulate(weights.begin(), weights.end(), 0.0);
      sampler.set_weights(weights);
    }

    const double step_y = 1.0 / big_l[i];
    y = x;
    for (std::size_t j = begin; j < end; ++j) y[j] -= step_y * grad[j - begin];
    oracle.project(y);

    const double alpha = (k + 2.0) / (2.0 * s * s);
    const double step_z = alpha * s / std::sqrt(big_l[i]);
    for (std::size_t j = begin; j < end; ++j) z[j] -= step_z * grad[j - begin];
    oracle.project(z);

    result.iterations = k + 1;
    double objective = std::numeric_limits<double>::quiet_NaN();
    if (options.track_objective) {
      objective = oracle.value(y);
      if (!(objective >= result.value_best)) {
        result.value_best = objective;
        result.x_best = y;
      }
    }
    result.trace.push_back({k + 1, result.block_calls, objective, elapsed_ms(start)});
    if (observer) {
      const AcrcdIterate it{k + 1, i, tau, alpha, x, y, z, grad, &result.block_calls};
      if (observer(it)) {
        result.status = SolveStatus::kConverged;
        break;
      }
    }
  }
  result.y_last = y;
  if (!options.track_objective) result.x_best = y;
  return result;
}

void PrimalAverager::add(double weight, std::span<const double> flows,
                         std::span<const double> trips) {
  if (!(weight > 0.0)) throw DomainError("averaging weight must be positive");
  if (total_weight_ == 0.0) {
    flows_.assign(flows.begin(), flows.end());
    trips_.assign(trips.begin(), trips.end());
    total_weight_ = weight;
    return;
  }
  if (flows.size() != flows_.size() || trips.size() != trips_.size()) {
    throw ValidationError("primal averaging: inconsistent vector sizes");
  }
  total_weight_ += weight;
  const double share = weight / total_weight_;
  for (std::size_t e = 0; e < flows_.size(); ++e) flows_[e] += share * (flows[e] - flows_[e]);
  for (std::size_t k = 0; k < trips_.size(); ++k) trips_[k] += share * (trips[k] - trips_[k]);
}

const std::vector<double>& PrimalAverager::flows() const {
  if (empty()) throw std::logic_error("primal average of an empty sequence");
  return flows_;
}

const std::vector<double>& PrimalAverager::trips() const {
  if (empty()) throw std::logic_error("primal average of an empty sequence");
  return trips_;
}

PrimalAverage average_primal(std::span<const WeightedPrimal> steps) {
  PrimalAverager averager;
  for (const auto& s : steps) averager.add(s.weight, s.flows, s.trips);
  return {averager.flows(), averager.trips(), averager.total_weight()};
}

}  // namespace twostage
