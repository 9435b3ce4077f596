#include "twostage/metrics.h"

#include <cmath>
#include <limits>

#include "twostage/costs.h"
#include "twostage/errors.h"

namespace twostage {

double primal_value(const TransportProblem& problem, std::span<const double> flows,
                    std::span<const double> trips) {
  const auto& links = problem.network().links;
  if (flows.size() != links.size()) throw ValidationError("flow vector size mismatch");
  if (trips.size() != problem.od().size()) throw ValidationError("trip vector size mismatch");
  double links_part = 0.0;
  for (std::size_t e = 0; e < links.size(); ++e) links_part += sigma(links[e].bpr, flows[e]);
  const double total = problem.total_demand();
  double entropy = 0.0;
  for (double d : trips) {
    if (d < 0.0) throw DomainError("negative trip volume");
    if (d > 0.0) entropy += d * std::log(d / total);
  }
  return links_part + problem.gamma() * entropy;
}

double duality_gap(const TransportProblem& problem, std::span<const double> flows,
                   std::span<const double> trips, const DualPoint& point) {
  return primal_value(problem, flows, trips) + dual_value(problem, point);
}

double euclidean_norm(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (double v : a) s += v * v;
  for (double v : b) s += v * v;
  return std::sqrt(s);
}

QualityReport make_quality_report(double primal, double dual, double marginal_residual_norm,
                                  double reference_norm) {
  QualityReport r;
  r.primal = primal;
  r.dual = dual;
  r.gap = primal + dual;
  r.marginal_residual_norm = marginal_residual_norm;
  r.reference_norm = reference_norm;
  r.denominator = 2.0 * marginal_residual_norm * reference_norm + std::max(r.gap, 0.0);
  r.metric = r.denominator > 0.0 ? 1.0 / r.denominator
                                 : std::numeric_limits<double>::infinity();
  return r;
}

QualityReport quality_metric(const TransportProblem& problem, const DualPoint& point,
                             std::span<const double> flows, std::span<const double> trips,
                             std::span<const double> lambda_ref, std::span<const double> mu_ref) {
  const DualEvaluation ev = evaluate_dual(problem, point);
  return make_quality_report(primal_value(problem, flows, trips), ev.value,
                             euclidean_norm(ev.grad_lambda, ev.grad_mu),
                             euclidean_norm(lambda_ref, mu_ref));
}

void min_norm_potentials(const OdSupport& od, std::span<double> lambda, std::span<double> mu) {
  auto center = [](const std::vector<int>& zones, std::span<double> v) {
    if (zones.empty()) return;
    double mean = 0.0;
    for (int z : zones) mean += v[z];
    mean /= static_cast<double>(zones.size());
    for (int z : zones) v[z] -= mean;
  };
  center(od.origins(), lambda);
  center(od.destinations(), mu);
}

}  // namespace twostage
