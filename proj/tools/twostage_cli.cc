// Batch front end: runs a solver and writes the convergence trace as CSV.

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "twostage/errors.h"
#include "twostage/netio.h"
#include "twostage/runner.h"
#include "twostage/synthetic.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct TransportArgs {
  std::string net_path;
  std::string trips_path;
  double gamma = 10.0;
  std::string solver = "ustm-sinkhorn";
  double eps = 3e-4;
  double inner_tol = 1e-8;
  int inner_max_iters = 10000;
  long budget = 10000;
  std::uint64_t seed = 0;
  double l_t = 0.0;
  double l_lm = 0.0;
  int threads = 0;
  std::string out = "-";
  bool timing = false;
  bool full_budget = false;
  bool adaptive = false;
};

struct SyntheticArgs {
  twostage::SyntheticConfig cfg;
  std::string a_mode = "zero";
  std::string solver = "both";
  long iters = 20000;
  std::string out = "-";
  std::string save_instance;
};

// Writes to `path`, or to stdout for "-".
template <typename Fn>
void with_output(const std::string& path, Fn&& write) {
  if (path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw twostage::Error("cannot open output file " + path);
  write(file);
  if (!file) throw twostage::Error("failed writing " + path);
}

int run_transport(const TransportArgs& a) {
  twostage::ParseReport report;
  auto net = twostage::read_network(a.net_path, {}, &report);
  auto demand = twostage::read_trips(a.trips_path, net.num_zones, &report);
  for (const auto& note : report.notes) std::cerr << "note: " << note << '\n';
  const int threads =
      a.threads > 0 ? a.threads : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  const twostage::TransportProblem problem(std::move(net), std::move(demand), a.gamma, threads);

  twostage::TransportRunOptions opts;
  opts.solver = twostage::parse_transport_solver(a.solver);
  opts.eps = a.eps;
  opts.stop_at_tolerance = !a.full_budget;
  opts.inner.tol = a.inner_tol;
  opts.inner.max_iters = a.inner_max_iters;
  opts.budget = a.budget;
  opts.seed = a.seed;
  opts.lipschitz_t = a.l_t;
  opts.adaptive = a.adaptive;
  opts.lipschitz_lm = a.l_lm;
  const auto run = twostage::run_transport(problem, opts);
  if (const auto issue = twostage::audit_transport_rows(run.rows)) {
    throw twostage::Error("trace audit failed: " + *issue);
  }
  with_output(a.out, [&](std::ostream& os) { twostage::write_transport_csv(os, run, a.timing); });

  const auto& last = run.rows.back();
  std::cerr << twostage::to_string(opts.solver) << ": " << twostage::to_string(run.status)
            << " after " << last.iteration << " iterations, " << last.calls_t << " t-calls, "
            << last.calls_lm << " lambda/mu calls; dual " << last.dual << ", gap " << last.gap
            << '\n';
  if (a.full_budget) return kExitOk;
  return run.status == twostage::SolveStatus::kConverged ? kExitOk : kExitNotConverged;
}

int run_synthetic(SyntheticArgs a) {
  if (a.a_mode == "zero") {
    a.cfg.a_mode = twostage::AMode::kZero;
  } else if (a.a_mode == "random") {
    a.cfg.a_mode = twostage::AMode::kRandom;
  } else {
    throw twostage::ValidationError("--a-mode must be zero or random");
  }
  const auto problem = twostage::make_problem(a.cfg);
  if (!a.save_instance.empty()) {
    with_output(a.save_instance,
                [&](std::ostream& os) { os << nlohmann::json(a.cfg).dump(2) << '\n'; });
  }
  twostage::SyntheticRunOptions opts;
  opts.iterations = a.iters;
  opts.seed = a.cfg.seed;
  std::vector<twostage::SyntheticRun> runs;
  if (a.solver == "both" || a.solver == "ustm") {
    runs.push_back(twostage::run_synthetic(problem, twostage::SyntheticSolver::kUstm, opts));
  }
  if (a.solver == "both" || a.solver == "acrcd") {
    runs.push_back(twostage::run_synthetic(problem, twostage::SyntheticSolver::kAcrcd, opts));
  }
  if (runs.empty()) throw twostage::ValidationError("--solver must be ustm, acrcd or both");
  with_output(a.out, [&](std::ostream& os) { twostage::write_synthetic_csv(os, runs); });
  for (const auto& run : runs) {
    const auto& last = run.rows.back();
    std::cerr << twostage::to_string(run.solver) << ": " << last.iteration << " iterations, "
              << last.calls_x << " x-gradient calls, " << last.calls_y
              << " y-gradient calls, value " << last.value << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage traffic model solvers"};
  app.set_config("--config", "", "Read options from a TOML/INI file (command-line flags win)");
  app.require_subcommand(1);

  TransportArgs ta;
  auto* transport = app.add_subcommand("transport", "Solve the combined transport dual");
  transport->add_option("--net", ta.net_path, "Network file (TNTP)")->required();
  transport->add_option("--trips", ta.trips_path, "Trip table (TNTP)")->required();
  transport->add_option("--gamma", ta.gamma, "Entropy parameter (cost units)")
      ->check(CLI::PositiveNumber);
  transport->add_option("--solver", ta.solver, "ustm, ustm-sinkhorn or acrcd")
      ->check(CLI::IsMember({"ustm", "ustm-sinkhorn", "acrcd"}));
  transport->add_option("--eps", ta.eps, "Relative tolerance on the quality-metric denominator")
      ->check(CLI::PositiveNumber);
  transport->add_option("--inner-tol", ta.inner_tol, "Sinkhorn tolerance (relative to N)")
      ->check(CLI::PositiveNumber);
  transport->add_option("--inner-max-iters", ta.inner_max_iters, "Sinkhorn sweep limit")
      ->check(CLI::PositiveNumber);
  transport->add_option("--budget", ta.budget, "Shortest-path oracle calls")
      ->check(CLI::PositiveNumber);
  transport->add_option("--seed", ta.seed, "Block sampling seed (acrcd)");
  transport->add_option("--l-t", ta.l_t, "Time block constant (acrcd; default 10 N / gamma)");
  transport->add_option("--l-lm", ta.l_lm, "Potential block constant (acrcd; default N / gamma)");
  transport->add_option("--threads", ta.threads, "Shortest-path workers (default: all cores)");
  transport->add_option("--out", ta.out, "CSV output path, '-' for stdout");
  transport->add_flag("--timing", ta.timing, "Fill the wall_ms column");
  transport->add_flag("--full-budget", ta.full_budget, "Ignore --eps as a stopping rule");
  transport->add_flag("--adaptive", ta.adaptive, "acrcd: backtracking on the block constants");

  SyntheticArgs sa;
  auto* synthetic = app.add_subcommand("synthetic", "Block-splitting test problem");
  synthetic->add_option("--dim-x", sa.cfg.dim_x)->check(CLI::PositiveNumber);
  synthetic->add_option("--dim-y", sa.cfg.dim_y)->check(CLI::PositiveNumber);
  synthetic->add_option("--m", sa.cfg.m)->check(CLI::PositiveNumber);
  synthetic->add_option("--gamma", sa.cfg.gamma)->check(CLI::PositiveNumber);
  synthetic->add_option("--lmax-b", sa.cfg.lambda_max)->check(CLI::PositiveNumber);
  synthetic->add_option("--a-mode", sa.a_mode, "zero or random")
      ->check(CLI::IsMember({"zero", "random"}));
  synthetic->add_option("--seed", sa.cfg.seed);
  synthetic->add_option("--iters", sa.iters, "acrcd iterations / ustm gradient calls")
      ->check(CLI::PositiveNumber);
  synthetic->add_option("--solver", sa.solver, "ustm, acrcd or both")
      ->check(CLI::IsMember({"ustm", "acrcd", "both"}));
  synthetic->add_option("--out", sa.out, "CSV output path, '-' for stdout");
  synthetic->add_option("--save-instance", sa.save_instance, "Write the instance config as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (transport->parsed()) return run_transport(ta);
    return run_synthetic(sa);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kExitError;
}
