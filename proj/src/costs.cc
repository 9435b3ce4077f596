#include "twostage/costs.h"

#include <cmath>
#include <string>

#include "twostage/errors.h"

namespace twostage {
namespace {

void require_flow(double flow) {
  if (!(flow >= 0.0)) throw DomainError("link flow must be nonnegative, got " + std::to_string(flow));
}

void require_kappa(const BprParams& p) {
  if (!(p.kappa > 0.0)) {
    throw UnsupportedConfiguration("constant-cost link (kappa = 0) has no inverse cost");
  }
}

}  // namespace

double link_time(const BprParams& p, double flow) {
  require_flow(flow);
  return p.free_flow_time * (1.0 + p.kappa * std::pow(flow / p.capacity, 1.0 / p.mu));
}

double inverse_link_time(const BprParams& p, double time) {
  require_kappa(p);
  if (time <= p.free_flow_time) return 0.0;
  return p.capacity *
         std::pow((time - p.free_flow_time) / (p.free_flow_time * p.kappa), p.mu);
}

double sigma(const BprParams& p, double flow) {
  require_flow(flow);
  const double exponent = 1.0 + 1.0 / p.mu;
  return p.free_flow_time * flow + p.free_flow_time * p.kappa * p.capacity / exponent *
                                       std::pow(flow / p.capacity, exponent);
}

double sigma_star(const BprParams& p, double time) {
  require_kappa(p);
  if (time <= p.free_flow_time) return 0.0;
  const double excess = time - p.free_flow_time;
  return p.capacity * std::pow(p.free_flow_time * p.kappa, -p.mu) *
         std::pow(excess, 1.0 + p.mu) / (1.0 + p.mu);
}

}  // namespace twostage
