#include "twostage/runner.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "twostage/errors.h"

namespace twostage {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_point(const TransportProblem& problem, std::span<const double> t) {
  const auto& links = problem.network().links;
  for (std::size_t e = 0; e < links.size(); ++e) {
    if (!(t[e] >= links[e].bpr.free_flow_time)) {
      throw DomainError("oracle queried below free-flow time on link " + std::to_string(e + 1));
    }
  }
}

// Counts gradient requests per block; full gradients count for every block.
class CountingOracle : public Oracle {
 public:
  explicit CountingOracle(Oracle& inner) : inner_(&inner), calls_(inner.num_blocks(), 0) {}

  std::size_t dimension() const override { return inner_->dimension(); }
  std::size_t num_blocks() const override { return inner_->num_blocks(); }
  std::pair<std::size_t, std::size_t> block_range(std::size_t i) const override {
    return inner_->block_range(i);
  }
  double value(std::span<const double> x) override { return inner_->value(x); }
  double value_and_gradient(std::span<const double> x, std::span<double> grad) override {
    for (auto& c : calls_) ++c;
    return inner_->value_and_gradient(x, grad);
  }
  void block_gradient(std::size_t block, std::span<const double> x,
                      std::span<double> grad) override {
    ++calls_[block];
    inner_->block_gradient(block, x, grad);
  }
  void project(std::span<double> x) const override { inner_->project(x); }

  const std::vector<long>& calls() const { return calls_; }

 private:
  Oracle* inner_;
  std::vector<long> calls_;
};

}  // namespace

TransportOracle::TransportOracle(const TransportProblem& problem) : problem_(&problem) {}

std::size_t TransportOracle::dimension() const {
  return problem_->num_links() + 2 * static_cast<std::size_t>(problem_->num_zones());
}

std::pair<std::size_t, std::size_t> TransportOracle::block_range(std::size_t i) const {
  if (i == 0) return {0, problem_->num_links()};
  if (i == 1) return {problem_->num_links(), dimension()};
  throw std::out_of_range("transport oracle has two blocks");
}

DualPoint TransportOracle::unpack(std::span<const double> x) const {
  const std::size_t m = problem_->num_links();
  const std::size_t z = problem_->num_zones();
  DualPoint p;
  p.t.assign(x.begin(), x.begin() + m);
  p.lambda.assign(x.begin() + m, x.begin() + m + z);
  p.mu.assign(x.begin() + m + z, x.begin() + m + 2 * z);
  return p;
}

std::vector<double> TransportOracle::pack(const DualPoint& point) const {
  std::vector<double> x;
  x.reserve(dimension());
  x.insert(x.end(), point.t.begin(), point.t.end());
  x.insert(x.end(), point.lambda.begin(), point.lambda.end());
  x.insert(x.end(), point.mu.begin(), point.mu.end());
  return x;
}

DualEvaluation TransportOracle::evaluate(std::span<const double> x) {
  if (x.size() != dimension()) throw ValidationError("transport point has the wrong dimension");
  check_point(*problem_, x.first(problem_->num_links()));
  return evaluate_dual(*problem_, unpack(x));
}

double TransportOracle::value(std::span<const double> x) {
  ++calls_t_;
  ++calls_lm_;
  return evaluate(x).value;
}

double TransportOracle::value_and_gradient(std::span<const double> x, std::span<double> grad) {
  ++calls_t_;
  ++calls_lm_;
  last_ = evaluate(x);
  auto it = std::copy(last_.grad_t.begin(), last_.grad_t.end(), grad.begin());
  it = std::copy(last_.grad_lambda.begin(), last_.grad_lambda.end(), it);
  std::copy(last_.grad_mu.begin(), last_.grad_mu.end(), it);
  return last_.value;
}

void TransportOracle::block_gradient(std::size_t block, std::span<const double> x,
                                     std::span<double> grad) {
  last_ = evaluate(x);
  if (block == 0) {
    ++calls_t_;
    std::copy(last_.grad_t.begin(), last_.grad_t.end(), grad.begin());
  } else if (block == 1) {
    ++calls_lm_;
    auto it = std::copy(last_.grad_lambda.begin(), last_.grad_lambda.end(), grad.begin());
    std::copy(last_.grad_mu.begin(), last_.grad_mu.end(), it);
  } else {
    throw std::out_of_range("transport oracle has two blocks");
  }
}

void TransportOracle::project(std::span<double> x) const {
  problem_->project_times(x.first(problem_->num_links()));
}

ReducedDualOracle::ReducedDualOracle(const TransportProblem& problem, SinkhornOptions inner)
    : problem_(&problem), reduced_(problem, inner) {}

ReducedDualEvaluation ReducedDualOracle::evaluate(std::span<const double> t) {
  if (t.size() != dimension()) throw ValidationError("time vector has the wrong dimension");
  check_point(*problem_, t);
  auto ev = reduced_.evaluate(t);
  ++calls_t_;
  calls_lm_ += ev.sinkhorn.iterations;
  return ev;
}

double ReducedDualOracle::value(std::span<const double> t) { return evaluate(t).dual.value; }

double ReducedDualOracle::value_and_gradient(std::span<const double> t, std::span<double> grad) {
  last_ = evaluate(t);
  std::copy(last_.dual.grad_t.begin(), last_.dual.grad_t.end(), grad.begin());
  return last_.dual.value;
}

TransportSolver parse_transport_solver(const std::string& name) {
  if (name == "ustm") return TransportSolver::kUstm;
  if (name == "ustm-sinkhorn") return TransportSolver::kUstmSinkhorn;
  if (name == "acrcd") return TransportSolver::kAcrcd;
  throw ValidationError("unknown solver '" + name + "' (expected ustm, ustm-sinkhorn or acrcd)");
}

const char* to_string(TransportSolver solver) {
  switch (solver) {
    case TransportSolver::kUstm:
      return "ustm";
    case TransportSolver::kUstmSinkhorn:
      return "ustm-sinkhorn";
    case TransportSolver::kAcrcd:
      return "acrcd";
  }
  return "unknown";
}

double default_lipschitz_lm(const TransportProblem& problem) {
  return problem.total_demand() / problem.gamma();
}

double default_lipschitz_t(const TransportProblem& problem) {
  return 10.0 * default_lipschitz_lm(problem);
}

TransportRun run_transport(const TransportProblem& problem, const TransportRunOptions& options) {
  if (options.budget < 1) throw ValidationError("budget must be positive");
  if (!(options.eps > 0.0)) throw ValidationError("eps must be positive");
  const auto start = Clock::now();
  const auto& od = problem.od();

  TransportRun run;
  PrimalAverager averager;
  DualPoint current = DualPoint::initial(problem);

  // Appends a row for the monitored point and applies the stopping rule,
  // taking the current potentials as the reference.
  auto add_row = [&](long iteration, long calls_t, long calls_lm, const DualEvaluation& ev,
                     double primal) {
    TransportRow row;
    row.iteration = iteration;
    row.calls_t = calls_t;
    row.calls_lm = calls_lm;
    row.dual = ev.value;
    row.primal = primal;
    row.residual_norm = euclidean_norm(ev.grad_lambda, ev.grad_mu);
    row.wall_ms = elapsed_ms(start);
    std::vector<double> lambda = current.lambda, mu = current.mu;
    min_norm_potentials(od, lambda, mu);
    const auto report =
        make_quality_report(primal, ev.value, row.residual_norm, euclidean_norm(lambda, mu));
    row.gap = report.gap;
    row.denominator = report.denominator;
    row.metric = report.metric;
    run.rows.push_back(row);
    return options.stop_at_tolerance &&
           report.denominator <= options.eps * std::max(1.0, std::abs(ev.value));
  };
  auto averaged_primal = [&](const DualEvaluation& fallback) {
    if (averager.empty()) return primal_value(problem, fallback.flows, fallback.trips);
    return primal_value(problem, averager.flows(), averager.trips());
  };

  switch (options.solver) {
    case TransportSolver::kUstm: {
      TransportOracle oracle(problem);
      const auto ev0 = evaluate_dual(problem, current);
      const double eps_abs = options.eps * std::max(1.0, std::abs(ev0.value));
      if (add_row(0, 0, 0, ev0, averaged_primal(ev0))) {
        run.status = SolveStatus::kConverged;
        break;
      }
      UstmOptions uo;
      uo.initial_lipschitz = options.initial_lipschitz;
      uo.eps = eps_abs;
      uo.max_calls = options.budget;
      const auto observer = [&](const UstmIterate& it) {
        const auto& at_y = oracle.last_gradient_evaluation();
        averager.add(it.alpha, at_y.flows, at_y.trips);
        current = oracle.unpack(it.x);
        const auto ev = evaluate_dual(problem, current);
        return add_row(it.iteration, oracle.calls_t(), oracle.calls_lm(), ev, averaged_primal(ev));
      };
      run.status = ustm_minimize(oracle, oracle.pack(current), uo, observer).status;
      break;
    }
    case TransportSolver::kUstmSinkhorn: {
      ReducedDualOracle oracle(problem, options.inner);
      ReducedDual monitor(problem, options.inner);
      auto monitored = [&](std::span<const double> t) {
        auto ev = monitor.evaluate(t).dual;
        current = {std::vector<double>(t.begin(), t.end()), monitor.lambda(), monitor.mu()};
        return ev;
      };
      const auto ev0 = monitored(current.t);
      const double eps_abs = options.eps * std::max(1.0, std::abs(ev0.value));
      if (add_row(0, 0, 0, ev0, averaged_primal(ev0))) {
        run.status = SolveStatus::kConverged;
        break;
      }
      UstmOptions uo;
      uo.initial_lipschitz = options.initial_lipschitz;
      uo.eps = eps_abs;
      uo.max_calls = options.budget;
      const auto observer = [&](const UstmIterate& it) {
        const auto& at_y = oracle.last_gradient_evaluation().dual;
        averager.add(it.alpha, at_y.flows, at_y.trips);
        const auto ev = monitored(it.x);
        return add_row(it.iteration, oracle.calls_t(), oracle.calls_lm(), ev, averaged_primal(ev));
      };
      run.status = ustm_minimize(oracle, current.t, uo, observer).status;
      break;
    }
    case TransportSolver::kAcrcd: {
      TransportOracle oracle(problem);
      const auto ev0 = evaluate_dual(problem, current);
      if (add_row(0, 0, 0, ev0, averaged_primal(ev0))) {
        run.status = SolveStatus::kConverged;
        break;
      }
      const double l_lm =
          options.lipschitz_lm > 0.0 ? options.lipschitz_lm : default_lipschitz_lm(problem);
      const double l_t =
          options.lipschitz_t > 0.0 ? options.lipschitz_t : default_lipschitz_t(problem);
      const std::vector<double> lipschitz{l_t, l_lm};
      AcrcdOptions ao;
      ao.seed = options.seed;
      ao.max_block_calls = {options.budget, 0};
      ao.max_iterations = std::numeric_limits<long>::max();
      ao.adaptive = options.adaptive;
      const auto observer = [&](const AcrcdIterate& it) {
        if (it.block == 0) {
          const auto& at_x = oracle.last_gradient_evaluation();
          averager.add(it.alpha, at_x.flows, at_x.trips);
        }
        current = oracle.unpack(it.y);
        const auto ev = evaluate_dual(problem, current);
        return add_row(it.iteration, oracle.calls_t(), oracle.calls_lm(), ev, averaged_primal(ev));
      };
      run.status = acrcd_minimize(oracle, lipschitz, oracle.pack(current), ao, observer).status;
      break;
    }
  }

  run.final_point = current;
  run.lambda_ref = current.lambda;
  run.mu_ref = current.mu;
  min_norm_potentials(od, run.lambda_ref, run.mu_ref);
  run.reference_norm = euclidean_norm(run.lambda_ref, run.mu_ref);
  for (auto& row : run.rows) {
    const auto report =
        make_quality_report(row.primal, row.dual, row.residual_norm, run.reference_norm);
    row.denominator = report.denominator;
    row.metric = report.metric;
  }
  return run;
}

void write_transport_csv(std::ostream& out, const TransportRun& run, bool with_timing) {
  out << "iter,oracle_calls_t,oracle_calls_lm,dual_value,primal_value,gap,residual_norm,"
         "metric,wall_ms\n";
  for (const auto& r : run.rows) {
    out << r.iteration << ',' << r.calls_t << ',' << r.calls_lm << ',' << format_double(r.dual)
        << ',' << format_double(r.primal) << ',' << format_double(r.gap) << ','
        << format_double(r.residual_norm) << ',' << format_double(r.metric) << ','
        << format_double(with_timing ? r.wall_ms : 0.0) << '\n';
  }
}

std::optional<std::string> audit_transport_rows(const std::vector<TransportRow>& rows) {
  for (const auto& r : rows) {
    const double sum = r.primal + r.dual;
    const double scale = std::max({1.0, std::abs(r.primal), std::abs(r.dual)});
    if (!(std::abs(r.gap - sum) <= 1e-12 * scale)) {
      return "row " + std::to_string(r.iteration) + ": gap differs from primal + dual";
    }
    if (r.denominator < 0.0) {
      return "row " + std::to_string(r.iteration) + ": negative denominator";
    }
    const bool ok = r.denominator > 0.0 ? std::abs(r.metric * r.denominator - 1.0) <= 1e-12
                                        : std::isinf(r.metric);
    if (!ok) return "row " + std::to_string(r.iteration) + ": metric inconsistent";
  }
  return std::nullopt;
}

SyntheticSolver parse_synthetic_solver(const std::string& name) {
  if (name == "ustm") return SyntheticSolver::kUstm;
  if (name == "acrcd") return SyntheticSolver::kAcrcd;
  throw ValidationError("unknown solver '" + name + "' (expected ustm or acrcd)");
}

const char* to_string(SyntheticSolver solver) {
  return solver == SyntheticSolver::kUstm ? "ustm" : "acrcd";
}

SyntheticRun run_synthetic(const SyntheticProblem& problem, SyntheticSolver solver,
                           const SyntheticRunOptions& options) {
  if (options.iterations < 1) throw ValidationError("iteration count must be positive");
  SyntheticOracle base(problem);
  CountingOracle oracle(base);
  const std::vector<double> z0(problem.dimension(), 1.0);

  SyntheticRun run;
  run.solver = solver;
  auto add_row = [&](long iteration, std::span<const double> z) {
    const Eigen::Map<const Eigen::VectorXd> v(z.data(), static_cast<long>(z.size()));
    const Eigen::VectorXd x = v.head(problem.dim_x), y = v.tail(problem.dim_y);
    run.rows.push_back({iteration, oracle.calls()[0], oracle.calls()[1],
                        synth_value(problem, x, y),
                        inverse_gradient_norm(synth_block_grads(problem, x, y))});
  };
  add_row(0, z0);

  if (solver == SyntheticSolver::kUstm) {
    UstmOptions uo;
    uo.initial_lipschitz = options.initial_lipschitz;
    uo.eps = options.eps;
    uo.max_calls = 2 * options.iterations + 1;
    run.status = ustm_minimize(oracle, z0, uo, [&](const UstmIterate& it) {
                   add_row(it.iteration, it.x);
                   return false;
                 }).status;
  } else {
    const std::vector<double> lipschitz{problem.lipschitz_x(), problem.lipschitz_y()};
    AcrcdOptions ao;
    ao.seed = options.seed;
    ao.max_iterations = options.iterations;
    run.status = acrcd_minimize(oracle, lipschitz, z0, ao, [&](const AcrcdIterate& it) {
                   add_row(it.iteration, it.y);
                   return false;
                 }).status;
  }
  return run;
}

void write_synthetic_csv(std::ostream& out, const std::vector<SyntheticRun>& runs) {
  out << "solver,iter,calls_grad_x,calls_grad_y,value,metric,metric_smoothed\n";
  for (const auto& run : runs) {
    std::vector<double> metric;
    metric.reserve(run.rows.size());
    for (const auto& r : run.rows) metric.push_back(r.metric);
    const auto smoothed = smooth_trace(metric, 30);
    for (std::size_t i = 0; i < run.rows.size(); ++i) {
      const auto& r = run.rows[i];
      out << to_string(run.solver) << ',' << r.iteration << ',' << r.calls_x << ',' << r.calls_y
          << ',' << format_double(r.value) << ',' << format_double(r.metric) << ','
          << format_double(smoothed[i]) << '\n';
    }
  }
}

}  // namespace twostage
