#pragma once

// BPR link cost, its inverse, the link potential sigma(f) = int_0^f time(z) dz
// and the convex conjugate sigma*(t) = max_{f >= 0} { f t - sigma(f) }.

#include "twostage/netio.h"

namespace twostage {

/// Flow and time on one link. Feasible states have flow >= 0 and
/// time >= free-flow time (the domain of sigma*).
struct LinkState {
  double flow = 0.0;
  double time = 0.0;
};

/// t(f) = t_free * (1 + kappa * (f / capacity)^(1 / mu)). Throws DomainError for f < 0.
double link_time(const BprParams& p, double flow);

/// Flow at which the link time equals `time`. Times below free flow map to
/// zero flow. Throws UnsupportedConfiguration when kappa == 0.
double inverse_link_time(const BprParams& p, double time);

/// Closed-form antiderivative of link_time on [0, flow].
double sigma(const BprParams& p, double flow);

/// Fenchel conjugate of sigma. Zero for times at or below free flow; its
/// derivative is inverse_link_time. Throws UnsupportedConfiguration when kappa == 0.
double sigma_star(const BprParams& p, double time);

/// True when the link has a flow-dependent cost and therefore a dual time variable.
inline bool has_time_variable(const BprParams& p) { return p.kappa > 0.0; }

}  // namespace twostage
