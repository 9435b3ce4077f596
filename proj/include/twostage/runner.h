#pragma once

// Solver adapters for the transport dual and the synthetic problem, plus the
// batch runs that produce convergence traces.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "twostage/dual.h"
#include "twostage/metrics.h"
#include "twostage/solvers.h"
#include "twostage/synthetic.h"

namespace twostage {

/// Full dual over x = [t (links), lambda (zones), mu (zones)] with blocks
/// {t, (lambda, mu)}. Every evaluation runs one shortest-path pass.
class TransportOracle : public Oracle {
 public:
  explicit TransportOracle(const TransportProblem& problem);

  std::size_t dimension() const override;
  std::size_t num_blocks() const override { return 2; }
  std::pair<std::size_t, std::size_t> block_range(std::size_t i) const override;
  double value(std::span<const double> x) override;
  double value_and_gradient(std::span<const double> x, std::span<double> grad) override;
  void block_gradient(std::size_t block, std::span<const double> x,
                      std::span<double> grad) override;
  void project(std::span<double> x) const override;

  DualPoint unpack(std::span<const double> x) const;
  std::vector<double> pack(const DualPoint& point) const;

  /// Evaluation behind the latest gradient request (full or block).
  const DualEvaluation& last_gradient_evaluation() const { return last_; }
  long calls_t() const { return calls_t_; }
  long calls_lm() const { return calls_lm_; }

 private:
  DualEvaluation evaluate(std::span<const double> x);

  const TransportProblem* problem_;
  DualEvaluation last_;
  long calls_t_ = 0;
  long calls_lm_ = 0;
};

/// D(t) = min over (lambda, mu) of D, with the inner minimum found by
/// Sinkhorn. One shortest-path pass per evaluation; (lambda, mu) calls are
/// counted as Sinkhorn sweeps.
class ReducedDualOracle : public Oracle {
 public:
  ReducedDualOracle(const TransportProblem& problem, SinkhornOptions inner);

  std::size_t dimension() const override { return problem_->num_links(); }
  double value(std::span<const double> t) override;
  double value_and_gradient(std::span<const double> t, std::span<double> grad) override;
  void project(std::span<double> t) const override { problem_->project_times(t); }

  const ReducedDualEvaluation& last_gradient_evaluation() const { return last_; }
  long calls_t() const { return calls_t_; }
  long calls_lm() const { return calls_lm_; }

 private:
  ReducedDualEvaluation evaluate(std::span<const double> t);

  const TransportProblem* problem_;
  ReducedDual reduced_;
  ReducedDualEvaluation last_;
  long calls_t_ = 0;
  long calls_lm_ = 0;
};

enum class TransportSolver { kUstm, kUstmSinkhorn, kAcrcd };

/// Accepts "ustm", "ustm-sinkhorn" and "acrcd".
TransportSolver parse_transport_solver(const std::string& name);
const char* to_string(TransportSolver solver);

struct TransportRunOptions {
  TransportSolver solver = TransportSolver::kUstmSinkhorn;
  /// Stop when the metric denominator is at most eps * max(1, |D|). Also
  /// scales the line-search slack: eps * max(1, |D(x0)|).
  double eps = 3e-4;
  /// When false the run always uses the whole budget.
  bool stop_at_tolerance = true;
  SinkhornOptions inner;
  long budget = 10000;  // shortest-path (t-block) oracle calls
  std::uint64_t seed = 0;
  double lipschitz_t = 0.0;   // block constants for acrcd; 0 selects the default
  double lipschitz_lm = 0.0;
  double initial_lipschitz = 1.0;
  /// acrcd: adjust each block constant by a backtracking line search.
  bool adaptive = false;
};

/// Defaults for the acrcd block constants: L_lm = N / gamma, L_t = 10 L_lm.
double default_lipschitz_lm(const TransportProblem& problem);
double default_lipschitz_t(const TransportProblem& problem);

struct TransportRow {
  long iteration = 0;
  long calls_t = 0;
  long calls_lm = 0;
  double dual = 0.0;
  double primal = 0.0;
  double gap = 0.0;
  double residual_norm = 0.0;
  double denominator = 0.0;
  double metric = 0.0;
  double wall_ms = 0.0;
};

struct TransportRun {
  std::vector<TransportRow> rows;
  SolveStatus status = SolveStatus::kBudgetExhausted;
  DualPoint final_point;
  /// Final (lambda, mu), centred; used as the reference in every row's metric.
  std::vector<double> lambda_ref;
  std::vector<double> mu_ref;
  double reference_norm = 0.0;
};

TransportRun run_transport(const TransportProblem& problem, const TransportRunOptions& options);

/// Header plus one row per outer iteration. wall_ms is written as 0 unless
/// `with_timing`, so that repeated runs give identical files.
void write_transport_csv(std::ostream& out, const TransportRun& run, bool with_timing = false);

/// Checks every row: gap == primal + dual, metric * denominator == 1.
/// Returns a description of the first violation.
std::optional<std::string> audit_transport_rows(const std::vector<TransportRow>& rows);

enum class SyntheticSolver { kUstm, kAcrcd };
SyntheticSolver parse_synthetic_solver(const std::string& name);
const char* to_string(SyntheticSolver solver);

struct SyntheticRunOptions {
  long iterations = 20000;  // acrcd iterations; ustm oracle calls
  std::uint64_t seed = 0;
  double initial_lipschitz = 1.0;
  double eps = 1e-9;  // ustm line-search slack
};

struct SyntheticRow {
  long iteration = 0;
  long calls_x = 0;
  long calls_y = 0;
  double value = 0.0;
  double metric = 0.0;  // inverse gradient norm
};

struct SyntheticRun {
  SyntheticSolver solver = SyntheticSolver::kAcrcd;
  std::vector<SyntheticRow> rows;
  SolveStatus status = SolveStatus::kBudgetExhausted;
};

SyntheticRun run_synthetic(const SyntheticProblem& problem, SyntheticSolver solver,
                           const SyntheticRunOptions& options);

/// Columns: solver, iter, calls_grad_x, calls_grad_y, value, metric,
/// metric_smoothed (window 30, per run).
void write_synthetic_csv(std::ostream& out, const std::vector<SyntheticRun>& runs);

}  // namespace twostage
