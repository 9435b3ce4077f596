#include "twostage/dual.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "twostage/costs.h"
#include "twostage/errors.h"

namespace twostage {
namespace {

void require_sizes(const TransportProblem& problem, const DualPoint& point) {
  if (point.t.size() != problem.num_links() ||
      point.lambda.size() != static_cast<std::size_t>(problem.num_zones()) ||
      point.mu.size() != static_cast<std::size_t>(problem.num_zones())) {
    throw ValidationError("dual point dimensions do not match the problem");
  }
}

DualEvaluation evaluate_with_costs(const TransportProblem& problem, const DualPoint& point,
                                   const ShortestPathResult& sp) {
  const auto& od = problem.od();
  const auto& demand = problem.demand();
  const auto& net = problem.network();
  const auto ep = problem.entropy();

  DualEvaluation out;
  out.od_costs = sp.od_costs;
  const double log_z = log_partition(out.od_costs, point.lambda, point.mu, od, ep.gamma);
  out.trips.resize(od.size());
  for (std::size_t k = 0; k < od.size(); ++k) {
    const double a =
        (-out.od_costs[k] + point.lambda[od[k].origin] + point.mu[od[k].destination]) /
        ep.gamma;
    out.trips[k] = ep.total * std::exp(a - log_z);
  }
  out.flows = assign_flows(problem.graph(), sp, od, out.trips, problem.threads());

  double value = ep.total * ep.gamma * log_z;
  for (int z = 0; z < problem.num_zones(); ++z) {
    value -= demand.origin_totals[z] * point.lambda[z] + demand.destination_totals[z] * point.mu[z];
  }
  out.grad_t.assign(problem.num_links(), 0.0);
  for (std::size_t e = 0; e < problem.num_links(); ++e) {
    const auto& p = net.links[e].bpr;
    if (!has_time_variable(p)) continue;
    value += sigma_star(p, point.t[e]);
    out.grad_t[e] = -out.flows[e] + inverse_link_time(p, point.t[e]);
  }
  out.value = value;

  out.grad_lambda.assign(problem.num_zones(), 0.0);
  out.grad_mu.assign(problem.num_zones(), 0.0);
  for (std::size_t k = 0; k < od.size(); ++k) {
    out.grad_lambda[od[k].origin] += out.trips[k];
    out.grad_mu[od[k].destination] += out.trips[k];
  }
  for (int z = 0; z < problem.num_zones(); ++z) {
    out.grad_lambda[z] -= demand.origin_totals[z];
    out.grad_mu[z] -= demand.destination_totals[z];
  }
  return out;
}

}  // namespace

TransportProblem::TransportProblem(Network net, DemandSpec demand, double gamma, int threads)
    : net_(std::move(net)),
      demand_(std::move(demand)),
      gamma_(gamma),
      threads_(threads),
      graph_(net_),
      od_(OdSupport::from_demand(demand_)) {
  if (!(gamma_ > 0.0)) throw ValidationError("gamma must be positive");
  if (demand_.num_zones() > net_.num_nodes) {
    throw ValidationError("demand has more zones than the network has nodes");
  }
  if (!(demand_.total > 0.0)) throw ValidationError("total demand must be positive");
  if (od_.size() == 0) throw ValidationError("OD support is empty");
  if (demand_.destination_totals.size() != demand_.origin_totals.size()) {
    throw ValidationError("origin and destination totals differ in length");
  }
  std::vector<char> has_row(demand_.num_zones(), 0), has_col(demand_.num_zones(), 0);
  for (const auto& p : od_.pairs()) {
    has_row[p.origin] = 1;
    has_col[p.destination] = 1;
  }
  for (int z = 0; z < demand_.num_zones(); ++z) {
    const double l = demand_.origin_totals[z];
    const double w = demand_.destination_totals[z];
    if (l < 0.0 || w < 0.0) throw ValidationError("negative zone total");
    if ((l > 0.0) != static_cast<bool>(has_row[z]) || (w > 0.0) != static_cast<bool>(has_col[z])) {
      throw ValidationError("zone " + std::to_string(z + 1) +
                            ": positive marginal must coincide with OD support");
    }
  }
  shortest_paths(graph_, free_flow_times(), od_, threads_);
}

std::vector<double> TransportProblem::free_flow_times() const {
  std::vector<double> t(net_.links.size());
  for (std::size_t e = 0; e < t.size(); ++e) t[e] = net_.links[e].bpr.free_flow_time;
  return t;
}

void TransportProblem::project_times(std::span<double> times) const {
  for (std::size_t e = 0; e < times.size(); ++e) {
    const auto& p = net_.links[e].bpr;
    times[e] = has_time_variable(p) ? std::max(times[e], p.free_flow_time) : p.free_flow_time;
  }
}

DualPoint DualPoint::initial(const TransportProblem& problem) {
  return {problem.free_flow_times(), std::vector<double>(problem.num_zones(), 0.0),
          std::vector<double>(problem.num_zones(), 0.0)};
}

double log_partition(std::span<const double> od_costs, std::span<const double> lambda,
                     std::span<const double> mu, const OdSupport& od, double gamma) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < od.size(); ++k) {
    top = std::max(top, (-od_costs[k] + lambda[od[k].origin] + mu[od[k].destination]) / gamma);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < od.size(); ++k) {
    sum += std::exp((-od_costs[k] + lambda[od[k].origin] + mu[od[k].destination]) / gamma - top);
  }
  return top + std::log(sum);
}

std::vector<double> trip_matrix(std::span<const double> od_costs,
                                std::span<const double> lambda, std::span<const double> mu,
                                const OdSupport& od, const EntropyParams& ep) {
  const double log_z = log_partition(od_costs, lambda, mu, od, ep.gamma);
  std::vector<double> d(od.size());
  for (std::size_t k = 0; k < od.size(); ++k) {
    d[k] = ep.total *
           std::exp((-od_costs[k] + lambda[od[k].origin] + mu[od[k].destination]) / ep.gamma -
                    log_z);
  }
  return d;
}

double dual_value_from_costs(const TransportProblem& problem, std::span<const double> od_costs,
                             const DualPoint& point) {
  require_sizes(problem, point);
  const auto ep = problem.entropy();
  double value =
      ep.total * ep.gamma * log_partition(od_costs, point.lambda, point.mu, problem.od(), ep.gamma);
  const auto& demand = problem.demand();
  for (int z = 0; z < problem.num_zones(); ++z) {
    value -= demand.origin_totals[z] * point.lambda[z] + demand.destination_totals[z] * point.mu[z];
  }
  for (std::size_t e = 0; e < problem.num_links(); ++e) {
    const auto& p = problem.network().links[e].bpr;
    if (has_time_variable(p)) value += sigma_star(p, point.t[e]);
  }
  return value;
}

DualEvaluation evaluate_dual(const TransportProblem& problem, const DualPoint& point) {
  require_sizes(problem, point);
  const auto sp = shortest_paths(problem.graph(), point.t, problem.od(), problem.threads());
  return evaluate_with_costs(problem, point, sp);
}

double dual_value(const TransportProblem& problem, const DualPoint& point) {
  require_sizes(problem, point);
  const auto sp = shortest_paths(problem.graph(), point.t, problem.od(), problem.threads());
  return dual_value_from_costs(problem, sp.od_costs, point);
}

MarginalResiduals grad_lambda_mu(const TransportProblem& problem, const DualPoint& point) {
  require_sizes(problem, point);
  const auto sp = shortest_paths(problem.graph(), point.t, problem.od(), problem.threads());
  const auto& od = problem.od();
  const auto d = trip_matrix(sp.od_costs, point.lambda, point.mu, od, problem.entropy());
  MarginalResiduals r;
  r.origin = problem.demand().origin_totals;
  r.destination = problem.demand().destination_totals;
  for (auto& x : r.origin) x = -x;
  for (auto& x : r.destination) x = -x;
  for (std::size_t k = 0; k < od.size(); ++k) {
    r.origin[od[k].origin] += d[k];
    r.destination[od[k].destination] += d[k];
  }
  return r;
}

std::vector<double> grad_t(const TransportProblem& problem, const DualPoint& point) {
  return evaluate_dual(problem, point).grad_t;
}

SinkhornBalancer::SinkhornBalancer(const OdSupport& od, const DemandSpec& demand, double gamma)
    : od_(&od), demand_(&demand), gamma_(gamma) {
  for (int i : od.origins()) {
    log_origin_share_.push_back(std::log(demand.origin_totals[i] / demand.total));
  }
  for (int j : od.destinations()) {
    log_destination_share_.push_back(std::log(demand.destination_totals[j] / demand.total));
  }
  row_lse_.resize(od.origins().size());
  column_lse_.resize(od.destinations().size());
}

void SinkhornBalancer::row_pass(std::span<const double> od_costs, std::span<const double> mu) {
  const auto& od = *od_;
  for (std::size_t r = 0; r < od.origins().size(); ++r) {
    const std::size_t begin = od.row_begin(r), end = od.row_begin(r + 1);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = begin; k < end; ++k) {
      top = std::max(top, (-od_costs[k] + mu[od[k].destination]) / gamma_);
    }
    double sum = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      sum += std::exp((-od_costs[k] + mu[od[k].destination]) / gamma_ - top);
    }
    exp_count_ += static_cast<long>(end - begin);
    ++log_count_;
    row_lse_[r] = top + std::log(sum);
  }
}

void SinkhornBalancer::column_pass(std::span<const double> od_costs,
                                   std::span<const double> lambda) {
  const auto& od = *od_;
  for (std::size_t c = 0; c < od.destinations().size(); ++c) {
    const auto column = od.column(c);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k : column) top = std::max(top, (-od_costs[k] + lambda[od[k].origin]) / gamma_);
    double sum = 0.0;
    for (std::size_t k : column) sum += std::exp((-od_costs[k] + lambda[od[k].origin]) / gamma_ - top);
    exp_count_ += static_cast<long>(column.size());
    ++log_count_;
    column_lse_[c] = top + std::log(sum);
  }
}

// Requires row_lse_ for the current mu.
double SinkhornBalancer::row_residual(std::span<const double> lambda) {
  const auto& origins = od_->origins();
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < origins.size(); ++r) {
    top = std::max(top, lambda[origins[r]] / gamma_ + row_lse_[r]);
  }
  double sum = 0.0;
  for (std::size_t r = 0; r < origins.size(); ++r) {
    sum += std::exp(lambda[origins[r]] / gamma_ + row_lse_[r] - top);
  }
  const double log_z = top + std::log(sum);
  double worst = 0.0;
  for (std::size_t r = 0; r < origins.size(); ++r) {
    const double row =
        demand_->total * std::exp(lambda[origins[r]] / gamma_ + row_lse_[r] - log_z);
    worst = std::max(worst, std::abs(row - demand_->origin_totals[origins[r]]));
  }
  exp_count_ += 2 * static_cast<long>(origins.size());
  ++log_count_;
  return worst / demand_->total;
}

void SinkhornBalancer::lambda_step(std::span<const double> od_costs, std::span<double> lambda,
                                   std::span<const double> mu) {
  row_pass(od_costs, mu);
  const auto& origins = od_->origins();
  for (std::size_t r = 0; r < origins.size(); ++r) {
    lambda[origins[r]] = gamma_ * (log_origin_share_[r] - row_lse_[r]);
  }
}

void SinkhornBalancer::mu_step(std::span<const double> od_costs, std::span<const double> lambda,
                               std::span<double> mu) {
  column_pass(od_costs, lambda);
  const auto& destinations = od_->destinations();
  for (std::size_t c = 0; c < destinations.size(); ++c) {
    mu[destinations[c]] = gamma_ * (log_destination_share_[c] - column_lse_[c]);
  }
}

double SinkhornBalancer::residual(std::span<const double> od_costs,
                                  std::span<const double> lambda, std::span<const double> mu) {
  const auto& od = *od_;
  const double log_z = log_partition(od_costs, lambda, mu, od, gamma_);
  std::vector<double> rows(demand_->origin_totals.size(), 0.0);
  std::vector<double> cols(demand_->destination_totals.size(), 0.0);
  for (std::size_t k = 0; k < od.size(); ++k) {
    const double d =
        demand_->total *
        std::exp((-od_costs[k] + lambda[od[k].origin] + mu[od[k].destination]) / gamma_ - log_z);
    rows[od[k].origin] += d;
    cols[od[k].destination] += d;
  }
  double worst = 0.0;
  for (std::size_t z = 0; z < rows.size(); ++z) {
    worst = std::max(worst, std::abs(rows[z] - demand_->origin_totals[z]));
    worst = std::max(worst, std::abs(cols[z] - demand_->destination_totals[z]));
  }
  return worst / demand_->total;
}

SinkhornResult SinkhornBalancer::solve(std::span<const double> od_costs,
                                       std::vector<double>& lambda, std::vector<double>& mu,
                                       const SinkhornOptions& options) {
  if (!(options.tol > 0.0)) throw DomainError("Sinkhorn tolerance must be positive");
  SinkhornResult result;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_lambda, best_mu;
  for (int iter = 0;; ++iter) {
    row_pass(od_costs, mu);
    double res = row_residual(lambda);
    if (iter == 0) {
      // Columns are balanced only after a mu-step; check them explicitly once.
      res = std::max(res, residual(od_costs, lambda, mu));
    }
    result.iterations = iter;
    if (res < best) {
      best = res;
      best_lambda = lambda;
      best_mu = mu;
    }
    if (res <= options.tol) {
      result.converged = true;
      result.residual = res;
      return result;
    }
    if (iter >= options.max_iters) break;
    const auto& origins = od_->origins();
    for (std::size_t r = 0; r < origins.size(); ++r) {
      lambda[origins[r]] = gamma_ * (log_origin_share_[r] - row_lse_[r]);
    }
    mu_step(od_costs, lambda, mu);
  }
  lambda = std::move(best_lambda);
  mu = std::move(best_mu);
  result.residual = best;
  return result;
}

SinkhornResult sinkhorn_solve(const TransportProblem& problem, std::span<const double> times,
                              std::vector<double>& lambda, std::vector<double>& mu,
                              const SinkhornOptions& options) {
  const auto sp = shortest_paths(problem.graph(), times, problem.od(), problem.threads());
  SinkhornBalancer balancer(problem.od(), problem.demand(), problem.gamma());
  lambda.resize(problem.num_zones(), 0.0);
  mu.resize(problem.num_zones(), 0.0);
  return balancer.solve(sp.od_costs, lambda, mu, options);
}

ReducedDual::ReducedDual(const TransportProblem& problem, SinkhornOptions options)
    : problem_(&problem),
      options_(options),
      balancer_(problem.od(), problem.demand(), problem.gamma()) {
  reset();
}

void ReducedDual::reset() {
  lambda_.assign(problem_->num_zones(), 0.0);
  mu_.assign(problem_->num_zones(), 0.0);
}

ReducedDualEvaluation ReducedDual::evaluate(std::span<const double> times) {
  const auto sp = shortest_paths(problem_->graph(), times, problem_->od(), problem_->threads());
  ReducedDualEvaluation out;
  out.sinkhorn = balancer_.solve(sp.od_costs, lambda_, mu_, options_);
  DualPoint point{std::vector<double>(times.begin(), times.end()), lambda_, mu_};
  out.dual = evaluate_with_costs(*problem_, point, sp);
  return out;
}

}  // namespace twostage
