#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "test_util.h"
#include "twostage/runner.h"

namespace twostage {

void PrintTo(TransportSolver solver, std::ostream* os) { *os << to_string(solver); }

namespace {

TransportProblem small_problem(std::uint64_t seed, double gamma = 1.0) {
  std::mt19937_64 rng(seed);
  auto inst = testing::random_instance(rng, 5, 4, 2.0);
  return TransportProblem(inst.net, inst.demand, gamma);
}

DualPoint random_point(const TransportProblem& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DualPoint x = DualPoint::initial(p);
  for (auto& v : x.t) v *= 1.0 + u(rng);
  for (auto& v : x.lambda) v = u(rng) - 0.5;
  for (auto& v : x.mu) v = u(rng) - 0.5;
  return x;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    out.push_back(cells);
  }
  return out;
}

TEST(TransportOracle, MatchesDualEvaluation) {
  const auto p = small_problem(1);
  std::mt19937_64 rng(1);
  const auto x = random_point(p, rng);
  TransportOracle oracle(p);
  const auto flat = oracle.pack(x);
  EXPECT_EQ(flat.size(), oracle.dimension());
  EXPECT_EQ(flat.size(), p.num_links() + 2 * static_cast<std::size_t>(p.num_zones()));
  std::vector<double> grad(flat.size());
  const double v = oracle.value_and_gradient(flat, grad);
  const auto ev = evaluate_dual(p, x);
  EXPECT_EQ(v, ev.value);
  EXPECT_EQ(oracle.value(flat), ev.value);
  const auto back = oracle.unpack(flat);
  EXPECT_EQ(back.t, x.t);
  EXPECT_EQ(back.lambda, x.lambda);
  EXPECT_EQ(back.mu, x.mu);
  std::vector<double> expected = ev.grad_t;
  expected.insert(expected.end(), ev.grad_lambda.begin(), ev.grad_lambda.end());
  expected.insert(expected.end(), ev.grad_mu.begin(), ev.grad_mu.end());
  EXPECT_EQ(grad, expected);
}

TEST(TransportOracle, BlockGradientsAndCounters) {
  const auto p = small_problem(2);
  std::mt19937_64 rng(2);
  TransportOracle oracle(p);
  const auto flat = oracle.pack(random_point(p, rng));
  std::vector<double> full(flat.size());
  oracle.value_and_gradient(flat, full);
  EXPECT_EQ(oracle.calls_t(), 1);
  EXPECT_EQ(oracle.calls_lm(), 1);
  const auto [b0, e0] = oracle.block_range(0);
  const auto [b1, e1] = oracle.block_range(1);
  EXPECT_EQ(b0, 0u);
  EXPECT_EQ(e0, b1);
  EXPECT_EQ(e1, flat.size());
  std::vector<double> g0(e0 - b0), g1(e1 - b1);
  oracle.block_gradient(0, flat, g0);
  EXPECT_EQ(oracle.calls_t(), 2);
  EXPECT_EQ(oracle.calls_lm(), 1);
  oracle.block_gradient(1, flat, g1);
  EXPECT_EQ(oracle.calls_t(), 2);
  EXPECT_EQ(oracle.calls_lm(), 2);
  for (std::size_t i = 0; i < g0.size(); ++i) EXPECT_EQ(g0[i], full[b0 + i]);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g1[i], full[b1 + i]);
}

TEST(TransportOracle, ProjectionClampsTimesOnly) {
  const auto p = small_problem(3);
  TransportOracle oracle(p);
  auto x = DualPoint::initial(p);
  for (auto& v : x.t) v -= 0.5;
  x.lambda[0] = -7.0;
  auto flat = oracle.pack(x);
  oracle.project(flat);
  const auto back = oracle.unpack(flat);
  EXPECT_EQ(back.t, p.free_flow_times());
  EXPECT_EQ(back.lambda[0], -7.0);
}

TEST(ReducedDualOracle, BelowFullDualAndCountsSweeps) {
  const auto p = small_problem(4);
  std::mt19937_64 rng(4);
  const auto x = random_point(p, rng);
  ReducedDualOracle reduced(p, SinkhornOptions{});
  std::vector<double> g(p.num_links());
  const double v = reduced.value_and_gradient(x.t, g);
  EXPECT_LE(v, dual_value(p, x) + 1e-12);
  EXPECT_EQ(reduced.calls_t(), 1);
  EXPECT_EQ(reduced.calls_lm(), reduced.last_gradient_evaluation().sinkhorn.iterations);
  EXPECT_EQ(g, reduced.last_gradient_evaluation().dual.grad_t);
}

TEST(TransportSolverNames, RoundTrip) {
  for (auto s : {TransportSolver::kUstm, TransportSolver::kUstmSinkhorn, TransportSolver::kAcrcd}) {
    EXPECT_EQ(parse_transport_solver(to_string(s)), s);
  }
  EXPECT_ANY_THROW(parse_transport_solver("newton"));
  EXPECT_EQ(parse_synthetic_solver("acrcd"), SyntheticSolver::kAcrcd);
  EXPECT_ANY_THROW(parse_synthetic_solver("both"));
}

class RunTransport : public ::testing::TestWithParam<TransportSolver> {};

TEST_P(RunTransport, RowsAreConsistent) {
  const auto p = small_problem(5);
  TransportRunOptions opt;
  opt.solver = GetParam();
  opt.budget = 200;
  opt.eps = 1e-12;
  const auto run = run_transport(p, opt);
  ASSERT_GE(run.rows.size(), 2u);
  EXPECT_FALSE(audit_transport_rows(run.rows).has_value());
  EXPECT_EQ(run.rows.front().iteration, 0);
  for (std::size_t k = 1; k < run.rows.size(); ++k) {
    EXPECT_EQ(run.rows[k].iteration, run.rows[k - 1].iteration + 1);
    EXPECT_GE(run.rows[k].calls_t, run.rows[k - 1].calls_t);
    EXPECT_GE(run.rows[k].calls_lm, run.rows[k - 1].calls_lm);
  }
  EXPECT_LE(run.rows.back().calls_t, opt.budget);
  EXPECT_LT(run.rows.back().denominator, run.rows.front().denominator);
  // The reference potentials are centred over active zones.
  double sl = 0.0, sm = 0.0;
  for (int i : p.od().origins()) sl += run.lambda_ref[i];
  for (int j : p.od().destinations()) sm += run.mu_ref[j];
  EXPECT_NEAR(sl, 0.0, 1e-9);
  EXPECT_NEAR(sm, 0.0, 1e-9);
  EXPECT_NEAR(run.reference_norm, euclidean_norm(run.lambda_ref, run.mu_ref), 1e-12);
}

TEST_P(RunTransport, CsvIsDeterministic) {
  const auto p = small_problem(6);
  TransportRunOptions opt;
  opt.solver = GetParam();
  opt.budget = 60;
  std::ostringstream a, b;
  write_transport_csv(a, run_transport(p, opt));
  write_transport_csv(b, run_transport(p, opt));
  EXPECT_EQ(a.str(), b.str());
  const auto rows = parse_csv(a.str());
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')),
            "iter,oracle_calls_t,oracle_calls_lm,dual_value,primal_value,gap,residual_norm,"
            "metric,wall_ms");
  for (std::size_t k = 1; k < rows.size(); ++k) {
    ASSERT_EQ(rows[k].size(), 9u);
    EXPECT_EQ(rows[k][8], "0");
  }
}

INSTANTIATE_TEST_SUITE_P(Solvers, RunTransport,
                         ::testing::Values(TransportSolver::kUstm, TransportSolver::kUstmSinkhorn,
                                           TransportSolver::kAcrcd),
                         [](const auto& info) {
                           std::string name = to_string(info.param);
                           std::replace(name.begin(), name.end(), '-', '_');
                           return name;
                         });

TEST(RunTransport, AdaptiveAcrcdRowsAreConsistent) {
  const auto p = small_problem(9);
  TransportRunOptions opt;
  opt.solver = TransportSolver::kAcrcd;
  opt.adaptive = true;
  opt.budget = 300;
  const auto run = run_transport(p, opt);
  EXPECT_FALSE(audit_transport_rows(run.rows).has_value());
  EXPECT_LE(run.rows.back().calls_t, opt.budget + 64);
  EXPECT_LT(run.rows.back().dual, run.rows.front().dual);
}

TEST(RunTransport, SinkhornPrimalIsNearlyFeasible) {
  const auto p = small_problem(7);
  TransportRunOptions opt;
  opt.budget = 100;
  const auto run = run_transport(p, opt);
  for (const auto& row : run.rows) {
    EXPECT_GE(row.gap, -1e-6 * std::max(1.0, std::abs(row.primal)));
  }
}

TEST(RunTransport, StopsAtTolerance) {
  const auto p = small_problem(8);
  TransportRunOptions opt;
  opt.eps = 1e-2;
  opt.budget = 5000;
  const auto run = run_transport(p, opt);
  EXPECT_EQ(run.status, SolveStatus::kConverged);
  const auto& last = run.rows.back();
  EXPECT_LE(last.denominator, 1e-2 * std::max(1.0, std::abs(last.dual)) * (1 + 1e-9));
}

TEST(AuditTransportRows, FlagsBrokenRows) {
  TransportRow row;
  row.primal = 2.0;
  row.dual = -1.0;
  row.gap = 1.0;
  row.residual_norm = 0.0;
  row.denominator = 1.0;
  row.metric = 1.0;
  EXPECT_FALSE(audit_transport_rows({row}).has_value());
  auto bad = row;
  bad.gap = 1.5;
  EXPECT_TRUE(audit_transport_rows({bad}).has_value());
  bad = row;
  bad.metric = 2.0;
  EXPECT_TRUE(audit_transport_rows({bad}).has_value());
}

SyntheticProblem small_synthetic() {
  SyntheticConfig cfg;
  cfg.dim_x = 3;
  cfg.dim_y = 20;
  cfg.m = 10;
  cfg.gamma = 0.05;
  cfg.seed = 3;
  return make_problem(cfg);
}

TEST(RunSynthetic, UstmCountsBothBlocksPerCall) {
  const auto p = small_synthetic();
  SyntheticRunOptions opt;
  opt.iterations = 300;
  const auto run = run_synthetic(p, SyntheticSolver::kUstm, opt);
  ASSERT_FALSE(run.rows.empty());
  for (const auto& r : run.rows) EXPECT_EQ(r.calls_x, r.calls_y);
  EXPECT_LE(run.rows.back().calls_x, 2 * opt.iterations + 1);
  EXPECT_LT(run.rows.back().value, run.rows.front().value);
}

TEST(RunSynthetic, AcrcdOneBlockPerIteration) {
  const auto p = small_synthetic();
  SyntheticRunOptions opt;
  opt.iterations = 500;
  const auto run = run_synthetic(p, SyntheticSolver::kAcrcd, opt);
  ASSERT_FALSE(run.rows.empty());
  for (const auto& r : run.rows) EXPECT_EQ(r.calls_x + r.calls_y, r.iteration);
  EXPECT_EQ(run.rows.back().iteration, opt.iterations);
  EXPECT_LT(run.rows.back().value, run.rows.front().value);
}

TEST(RunSynthetic, CsvSmoothedColumn) {
  const auto p = small_synthetic();
  SyntheticRunOptions opt;
  opt.iterations = 120;
  const std::vector<SyntheticRun> runs{run_synthetic(p, SyntheticSolver::kUstm, opt),
                                       run_synthetic(p, SyntheticSolver::kAcrcd, opt)};
  std::ostringstream out;
  write_synthetic_csv(out, runs);
  const auto rows = parse_csv(out.str());
  ASSERT_EQ(rows.front(), (std::vector<std::string>{"solver", "iter", "calls_grad_x",
                                                    "calls_grad_y", "value", "metric",
                                                    "metric_smoothed"}));
  std::size_t line = 1;
  for (const auto& run : runs) {
    std::vector<double> metric;
    for (const auto& r : run.rows) metric.push_back(r.metric);
    const auto smoothed = smooth_trace(metric, 30);
    for (std::size_t k = 0; k < run.rows.size(); ++k, ++line) {
      ASSERT_LT(line, rows.size());
      EXPECT_EQ(rows[line][0], to_string(run.solver));
      EXPECT_EQ(std::stod(rows[line][5]), metric[k]);
      EXPECT_EQ(std::stod(rows[line][6]), smoothed[k]);
    }
  }
  EXPECT_EQ(line, rows.size());
}

}  // namespace
}  // namespace twostage
