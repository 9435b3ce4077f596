#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "twostage/costs.h"
#include "twostage/errors.h"
#include "twostage/metrics.h"
#include "twostage/netio.h"
#include "twostage/runner.h"
#include "twostage/synthetic.h"

namespace py = pybind11;
using namespace twostage;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), a.data() + a.size()};
}

DualPoint make_point(const TransportProblem& p, const py::object& t, const py::object& lambda,
                     const py::object& mu) {
  DualPoint x = DualPoint::initial(p);
  if (!t.is_none()) x.t = to_vector(t.cast<py::array_t<double>>());
  if (!lambda.is_none()) x.lambda = to_vector(lambda.cast<py::array_t<double>>());
  if (!mu.is_none()) x.mu = to_vector(mu.cast<py::array_t<double>>());
  if (x.t.size() != p.num_links() || x.lambda.size() != static_cast<std::size_t>(p.num_zones()) ||
      x.mu.size() != static_cast<std::size_t>(p.num_zones())) {
    throw ValidationError("dual point has the wrong size");
  }
  return x;
}

py::dict rows_to_dict(const TransportRun& run) {
  std::vector<double> iter, calls_t, calls_lm, dual, primal, gap, res, metric;
  for (const auto& r : run.rows) {
    iter.push_back(static_cast<double>(r.iteration));
    calls_t.push_back(static_cast<double>(r.calls_t));
    calls_lm.push_back(static_cast<double>(r.calls_lm));
    dual.push_back(r.dual);
    primal.push_back(r.primal);
    gap.push_back(r.gap);
    res.push_back(r.residual_norm);
    metric.push_back(r.metric);
  }
  py::dict d;
  d["iter"] = to_array(iter);
  d["oracle_calls_t"] = to_array(calls_t);
  d["oracle_calls_lm"] = to_array(calls_lm);
  d["dual_value"] = to_array(dual);
  d["primal_value"] = to_array(primal);
  d["gap"] = to_array(gap);
  d["residual_norm"] = to_array(res);
  d["metric"] = to_array(metric);
  d["status"] = std::string(to_string(run.status));
  d["t"] = to_array(run.final_point.t);
  d["lambda"] = to_array(run.final_point.lambda);
  d["mu"] = to_array(run.final_point.mu);
  std::ostringstream csv;
  write_transport_csv(csv, run);
  d["csv"] = csv.str();
  return d;
}

}  // namespace

PYBIND11_MODULE(_twostage, m) {
  m.doc() = "Combined trip distribution and traffic assignment solvers";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::class_<BprParams>(m, "BprParams")
      .def(py::init([](double fft, double cap, double kappa, double mu) {
             return BprParams{fft, cap, kappa, mu};
           }),
           py::arg("free_flow_time") = 1.0, py::arg("capacity") = 1.0, py::arg("kappa") = 0.15,
           py::arg("mu") = 0.25)
      .def_readwrite("free_flow_time", &BprParams::free_flow_time)
      .def_readwrite("capacity", &BprParams::capacity)
      .def_readwrite("kappa", &BprParams::kappa)
      .def_readwrite("mu", &BprParams::mu);

  m.def("link_time", &link_time, py::arg("bpr"), py::arg("flow"));
  m.def("inverse_link_time", &inverse_link_time, py::arg("bpr"), py::arg("time"));
  m.def("sigma", &sigma, py::arg("bpr"), py::arg("flow"));
  m.def("sigma_star", &sigma_star, py::arg("bpr"), py::arg("time"));

  py::class_<TransportProblem>(m, "TransportProblem")
      .def(py::init([](const std::string& net, const std::string& trips, double gamma,
                       int threads) {
             auto network = read_network(net);
             auto demand = read_trips(trips, network.num_zones);
             return TransportProblem(std::move(network), std::move(demand), gamma, threads);
           }),
           py::arg("net"), py::arg("trips"), py::arg("gamma") = 10.0, py::arg("threads") = 1)
      .def_property_readonly("num_links", &TransportProblem::num_links)
      .def_property_readonly("num_zones", &TransportProblem::num_zones)
      .def_property_readonly("gamma", &TransportProblem::gamma)
      .def_property_readonly("total_demand", &TransportProblem::total_demand)
      .def_property_readonly("free_flow_times",
                             [](const TransportProblem& p) { return to_array(p.free_flow_times()); })
      .def_property_readonly("links",
                             [](const TransportProblem& p) {
                               py::list out;
                               for (const auto& l : p.network().links) {
                                 out.append(py::make_tuple(l.tail, l.head, l.bpr));
                               }
                               return out;
                             })
      .def_property_readonly("od_pairs",
                             [](const TransportProblem& p) {
                               py::list out;
                               for (const auto& pr : p.od().pairs()) {
                                 out.append(py::make_tuple(pr.origin, pr.destination));
                               }
                               return out;
                             })
      .def_property_readonly("origin_totals",
                             [](const TransportProblem& p) {
                               return to_array(p.demand().origin_totals);
                             })
      .def_property_readonly("destination_totals", [](const TransportProblem& p) {
        return to_array(p.demand().destination_totals);
      });

  m.def(
      "dual_value",
      [](const TransportProblem& p, py::object t, py::object lambda, py::object mu) {
        return dual_value(p, make_point(p, t, lambda, mu));
      },
      py::arg("problem"), py::arg("t") = py::none(), py::arg("lam") = py::none(),
      py::arg("mu") = py::none());

  m.def(
      "evaluate_dual",
      [](const TransportProblem& p, py::object t, py::object lambda, py::object mu) {
        const auto ev = evaluate_dual(p, make_point(p, t, lambda, mu));
        py::dict d;
        d["value"] = ev.value;
        d["od_costs"] = to_array(ev.od_costs);
        d["trips"] = to_array(ev.trips);
        d["flows"] = to_array(ev.flows);
        d["grad_t"] = to_array(ev.grad_t);
        d["grad_lambda"] = to_array(ev.grad_lambda);
        d["grad_mu"] = to_array(ev.grad_mu);
        return d;
      },
      py::arg("problem"), py::arg("t") = py::none(), py::arg("lam") = py::none(),
      py::arg("mu") = py::none());

  m.def(
      "primal_value",
      [](const TransportProblem& p, py::array_t<double> flows, py::array_t<double> trips) {
        return primal_value(p, to_vector(flows), to_vector(trips));
      },
      py::arg("problem"), py::arg("flows"), py::arg("trips"));

  m.def(
      "sinkhorn",
      [](const TransportProblem& p, py::object t, double tol, int max_iters) {
        auto x = make_point(p, t, py::none(), py::none());
        const auto r = sinkhorn_solve(p, x.t, x.lambda, x.mu, {tol, max_iters});
        py::dict d;
        d["lambda"] = to_array(x.lambda);
        d["mu"] = to_array(x.mu);
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        d["residual"] = r.residual;
        return d;
      },
      py::arg("problem"), py::arg("t") = py::none(), py::arg("tol") = 1e-8,
      py::arg("max_iters") = 10000);

  m.def(
      "run_transport",
      [](const TransportProblem& p, const std::string& solver, double eps, long budget,
         std::uint64_t seed, bool full_budget) {
        TransportRunOptions opt;
        opt.solver = parse_transport_solver(solver);
        opt.eps = eps;
        opt.budget = budget;
        opt.seed = seed;
        opt.stop_at_tolerance = !full_budget;
        py::gil_scoped_release release;
        auto run = run_transport(p, opt);
        py::gil_scoped_acquire acquire;
        return rows_to_dict(run);
      },
      py::arg("problem"), py::arg("solver") = "ustm-sinkhorn", py::arg("eps") = 3e-4,
      py::arg("budget") = 10000, py::arg("seed") = 0, py::arg("full_budget") = false);

  py::class_<SyntheticProblem>(m, "SyntheticProblem")
      .def(py::init([](int dim_x, int dim_y, int m_cols, double gamma, double lambda_max,
                       const std::string& a_mode, std::uint64_t seed) {
             nlohmann::json j = {{"dim_x", dim_x},           {"dim_y", dim_y},
                                 {"m", m_cols},              {"gamma", gamma},
                                 {"lambda_max", lambda_max}, {"a_mode", a_mode},
                                 {"seed", seed}};
             return make_problem(j.get<SyntheticConfig>());
           }),
           py::arg("dim_x") = 10, py::arg("dim_y") = 200, py::arg("m") = 100,
           py::arg("gamma") = 1e-3, py::arg("lambda_max") = 0.1, py::arg("a_mode") = "zero",
           py::arg("seed") = 0)
      .def_readonly("A", &SyntheticProblem::A)
      .def_readonly("b", &SyntheticProblem::b)
      .def_readonly("B", &SyntheticProblem::B)
      .def_readonly("gamma", &SyntheticProblem::gamma)
      .def_property_readonly("lipschitz_x", &SyntheticProblem::lipschitz_x)
      .def_property_readonly("lipschitz_y", &SyntheticProblem::lipschitz_y)
      .def("value", [](const SyntheticProblem& p, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& y) { return synth_value(p, x, y); })
      .def("gradients", [](const SyntheticProblem& p, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& y) {
        const auto g = synth_block_grads(p, x, y);
        return py::make_tuple(g.x, g.y);
      });

  m.def(
      "run_synthetic",
      [](const SyntheticProblem& p, const std::string& solver, long iterations,
         std::uint64_t seed) {
        SyntheticRunOptions opt;
        opt.iterations = iterations;
        opt.seed = seed;
        const auto run = run_synthetic(p, parse_synthetic_solver(solver), opt);
        std::vector<double> iter, cx, cy, value, metric;
        for (const auto& r : run.rows) {
          iter.push_back(static_cast<double>(r.iteration));
          cx.push_back(static_cast<double>(r.calls_x));
          cy.push_back(static_cast<double>(r.calls_y));
          value.push_back(r.value);
          metric.push_back(r.metric);
        }
        py::dict d;
        d["iter"] = to_array(iter);
        d["calls_grad_x"] = to_array(cx);
        d["calls_grad_y"] = to_array(cy);
        d["value"] = to_array(value);
        d["metric"] = to_array(metric);
        d["metric_smoothed"] = to_array(smooth_trace(metric, 30));
        d["status"] = std::string(to_string(run.status));
        return d;
      },
      py::arg("problem"), py::arg("solver") = "acrcd", py::arg("iterations") = 20000,
      py::arg("seed") = 0);

  m.def(
      "smooth_trace",
      [](py::array_t<double> values, int window) {
        return to_array(smooth_trace(to_vector(values), window));
      },
      py::arg("values"), py::arg("window") = 30);
}
