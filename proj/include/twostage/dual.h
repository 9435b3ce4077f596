#pragma once

// Combined dual objective of the two-stage (trip distribution + assignment)
// model in physical units:
//
//   D(t, lambda, mu) = N * gamma * ln sum_{(i,j)} exp((-T_ij(t) + lambda_i + mu_j) / gamma)
//                      - <l, lambda> - <w, mu> + sum_e sigma*_e(t_e)
//
// minimized over t >= t_free and free (lambda, mu).

#include <cstddef>
#include <span>
#include <vector>

#include "twostage/netio.h"
#include "twostage/paths.h"

namespace twostage {

struct EntropyParams {
  double gamma = 10.0;  // cost units
  double total = 1.0;   // N, flow units
};

/// Immutable problem instance: network, demand and entropy parameter.
class TransportProblem {
 public:
  /// Validates the instance and checks that every OD pair is reachable.
  TransportProblem(Network net, DemandSpec demand, double gamma, int threads = 1);

  const Network& network() const { return net_; }
  const Graph& graph() const { return graph_; }
  const DemandSpec& demand() const { return demand_; }
  const OdSupport& od() const { return od_; }
  EntropyParams entropy() const { return {gamma_, demand_.total}; }
  double gamma() const { return gamma_; }
  double total_demand() const { return demand_.total; }
  int threads() const { return threads_; }
  void set_threads(int threads) { threads_ = threads; }

  std::size_t num_links() const { return net_.links.size(); }
  int num_zones() const { return demand_.num_zones(); }

  std::vector<double> free_flow_times() const;
  /// Clamps t_e to [t_free, inf); links with kappa = 0 are pinned at t_free.
  void project_times(std::span<double> times) const;

 private:
  Network net_;
  DemandSpec demand_;
  double gamma_;
  int threads_;
  Graph graph_;
  OdSupport od_;
};

/// Link times and zone potentials. lambda and mu are indexed by zone.
struct DualPoint {
  std::vector<double> t;
  std::vector<double> lambda;
  std::vector<double> mu;

  /// t = free-flow times, lambda = mu = 0.
  static DualPoint initial(const TransportProblem& problem);
};

/// ln sum_k exp((-T_k + lambda_{o(k)} + mu_{d(k)}) / gamma), max-shifted.
double log_partition(std::span<const double> od_costs, std::span<const double> lambda,
                     std::span<const double> mu, const OdSupport& od, double gamma);

/// d_k = N * softmax_k((-T_k + lambda_{o(k)} + mu_{d(k)}) / gamma), per OD pair.
std::vector<double> trip_matrix(std::span<const double> od_costs,
                                std::span<const double> lambda, std::span<const double> mu,
                                const OdSupport& od, const EntropyParams& ep);

/// D evaluated with given OD costs (no shortest-path call).
double dual_value_from_costs(const TransportProblem& problem, std::span<const double> od_costs,
                             const DualPoint& point);

struct DualEvaluation {
  double value = 0.0;
  std::vector<double> od_costs;  // T
  std::vector<double> trips;     // d(lambda, mu)
  std::vector<double> flows;     // all-or-nothing assignment of `trips`
  std::vector<double> grad_t;    // zero on links with a pinned time
  std::vector<double> grad_lambda;
  std::vector<double> grad_mu;
};

/// Value and (sub)gradients of D at `point`: one shortest-path pass.
DualEvaluation evaluate_dual(const TransportProblem& problem, const DualPoint& point);

double dual_value(const TransportProblem& problem, const DualPoint& point);

/// Marginal residuals: row sums of d minus l, column sums minus w.
struct MarginalResiduals {
  std::vector<double> origin;
  std::vector<double> destination;
};
MarginalResiduals grad_lambda_mu(const TransportProblem& problem, const DualPoint& point);

/// -assign_flows(d(lambda, mu)) + inverse_link_time(t).
std::vector<double> grad_t(const TransportProblem& problem, const DualPoint& point);

struct SinkhornOptions {
  double tol = 1e-8;  // on max marginal residual, relative to N
  int max_iters = 10000;
};

struct SinkhornResult {
  int iterations = 0;  // full (lambda-step, mu-step) sweeps
  bool converged = false;
  double residual = 0.0;  // max(|rows - l|_inf, |cols - w|_inf) / N
};

/// Alternating exact minimization of D over lambda and mu for fixed OD costs.
class SinkhornBalancer {
 public:
  SinkhornBalancer(const OdSupport& od, const DemandSpec& demand, double gamma);

  /// lambda_i <- gamma * (ln(l_i / N) - ln sum_j exp((-T_ij + mu_j) / gamma)).
  void lambda_step(std::span<const double> od_costs, std::span<double> lambda,
                   std::span<const double> mu);
  /// mu_j <- gamma * (ln(w_j / N) - ln sum_i exp((-T_ij + lambda_i) / gamma)).
  void mu_step(std::span<const double> od_costs, std::span<const double> lambda,
               std::span<double> mu);

  /// Sweeps until both marginal residuals are at most tol * N. On
  /// non-convergence lambda/mu hold the iterate with the smallest residual.
  SinkhornResult solve(std::span<const double> od_costs, std::vector<double>& lambda,
                       std::vector<double>& mu, const SinkhornOptions& options);

  /// Exact marginal residuals at (lambda, mu), relative to N (max norm).
  double residual(std::span<const double> od_costs, std::span<const double> lambda,
                  std::span<const double> mu);

  long exp_count() const { return exp_count_; }
  long log_count() const { return log_count_; }

 private:
  // Per-origin ln sum_j exp((-T_ij + mu_j) / gamma).
  void row_pass(std::span<const double> od_costs, std::span<const double> mu);
  // Per-destination ln sum_i exp((-T_ij + lambda_i) / gamma).
  void column_pass(std::span<const double> od_costs, std::span<const double> lambda);
  double row_residual(std::span<const double> lambda);

  const OdSupport* od_;
  const DemandSpec* demand_;
  double gamma_;
  std::vector<double> log_origin_share_;       // ln(l_i / N) per od.origins()
  std::vector<double> log_destination_share_;  // ln(w_j / N) per od.destinations()
  std::vector<double> row_lse_;
  std::vector<double> column_lse_;
  long exp_count_ = 0;
  long log_count_ = 0;
};

SinkhornResult sinkhorn_solve(const TransportProblem& problem, std::span<const double> times,
                              std::vector<double>& lambda, std::vector<double>& mu,
                              const SinkhornOptions& options = {});

struct ReducedDualEvaluation {
  DualEvaluation dual;  // at (t, lambda(t), mu(t))
  SinkhornResult sinkhorn;
};

/// D(t) = min over (lambda, mu) of D(t, lambda, mu), evaluated with a
/// warm-started Sinkhorn inner solve.
class ReducedDual {
 public:
  ReducedDual(const TransportProblem& problem, SinkhornOptions options = {});

  ReducedDualEvaluation evaluate(std::span<const double> times);

  const std::vector<double>& lambda() const { return lambda_; }
  const std::vector<double>& mu() const { return mu_; }
  void reset();

 private:
  const TransportProblem* problem_;
  SinkhornOptions options_;
  SinkhornBalancer balancer_;
  std::vector<double> lambda_;
  std::vector<double> mu_;
};

}  // namespace twostage
