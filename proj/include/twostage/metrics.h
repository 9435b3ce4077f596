#pragma once

// Primal objective, duality gap and the composite quality metric
//
//   metric = 1 / (2 |(grad_lambda D, grad_mu D)|_2 * |(lambda*, mu*)|_2 + max{gap, 0}).

#include <span>
#include <vector>

#include "twostage/dual.h"

namespace twostage {

/// P(f, d) = sum_e sigma_e(f_e) + gamma * sum_k d_k ln(d_k / N), with 0 ln 0 = 0.
/// `trips` is aligned with problem.od().
double primal_value(const TransportProblem& problem, std::span<const double> flows,
                    std::span<const double> trips);

/// P(f, d) + D(point). Negative values are possible for infeasible (f, d).
double duality_gap(const TransportProblem& problem, std::span<const double> flows,
                   std::span<const double> trips, const DualPoint& point);

struct QualityReport {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
  double marginal_residual_norm = 0.0;  // |(grad_lambda D, grad_mu D)|_2
  double reference_norm = 0.0;          // |(lambda*, mu*)|_2
  double denominator = 0.0;
  double metric = 0.0;  // +inf when the denominator is zero
};

/// Assembles the report from precomputed pieces.
QualityReport make_quality_report(double primal, double dual, double marginal_residual_norm,
                                  double reference_norm);

/// Full evaluation: one shortest-path pass at `point`.
QualityReport quality_metric(const TransportProblem& problem, const DualPoint& point,
                             std::span<const double> flows, std::span<const double> trips,
                             std::span<const double> lambda_ref, std::span<const double> mu_ref);

/// D is invariant under lambda + c and mu + c' on the active zones; returns
/// the representative with zero mean over origins (lambda) and destinations (mu).
void min_norm_potentials(const OdSupport& od, std::span<double> lambda, std::span<double> mu);

double euclidean_norm(std::span<const double> a, std::span<const double> b = {});

}  // namespace twostage
