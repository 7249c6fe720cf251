#include "etso/bench_runner.hpp"
#include "etso/change_trigger.hpp"
#include "etso/errors.hpp"
#include "etso/kernel_gp.hpp"
#include "etso/optimizer.hpp"
#include "etso/plant_env.hpp"
#include "etso/records.hpp"
#include "etso/safe_sets.hpp"
#include "etso/scenario.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>
#include <sstream>

namespace py = pybind11;
using namespace etso;

namespace {

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict posterior_dict(const Posterior& p) {
  py::dict d;
  d["mean"] = p.mean;
  d["std_dev"] = p.std_dev;
  if (p.has_bounds()) {
    d["lower"] = p.lower;
    d["upper"] = p.upper;
  }
  return d;
}

Dataset make_dataset(const Matrix& inputs, const Vector& values) {
  if (inputs.rows() != values.size()) throw DomainError("inputs and values differ in length");
  Dataset d;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) d.add(inputs.row(i).transpose(), values(i));
  return d;
}

// Holds a scenario's environment together with its grid so Python can probe costs.
struct ScenarioHandle {
  Scenario scenario;
  Environment env;
  explicit ScenarioHandle(Scenario sc, std::uint64_t seed)
      : scenario(std::move(sc)),
        env(scenario.environment, scenario.etso.grid, scenario.etso.backup_controller,
            stream_seed(seed, Stream::Objective)) {}
};

}  // namespace

PYBIND11_MODULE(_etso, m) {
  m.doc() = "Event-triggered safe Bayesian optimization core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<KernelParams>(m, "KernelParams")
      .def(py::init<>())
      .def_static("defaults", &KernelParams::defaults)
      .def_readwrite("lengthscales", &KernelParams::lengthscales)
      .def_readwrite("prior_std_dev", &KernelParams::prior_std_dev)
      .def_readwrite("noise_std_dev", &KernelParams::noise_std_dev)
      .def_readwrite("prior_mean", &KernelParams::prior_mean);

  m.def("kernel_matrix", &kernel_matrix, py::arg("params"), py::arg("a"), py::arg("b"));
  m.def(
      "posterior",
      [](const KernelParams& params, const Matrix& inputs, const Vector& values, const Matrix& queries,
         std::optional<double> beta) {
        Posterior p = posterior(params, make_dataset(inputs, values), queries);
        if (beta) p = confidence_bounds(std::move(p), *beta);
        return posterior_dict(p);
      },
      py::arg("params"), py::arg("inputs"), py::arg("values"), py::arg("queries"),
      py::arg("beta") = py::none());

  py::class_<GridDomain>(m, "GridDomain")
      .def(py::init<std::vector<double>, std::vector<double>, std::vector<std::size_t>>(),
           py::arg("lower"), py::arg("upper"), py::arg("counts"))
      .def_static("uniform", &GridDomain::uniform, py::arg("dimension"), py::arg("points_per_dim"),
                  py::arg("lower") = 0.0, py::arg("upper") = 10.0)
      .def_property_readonly("points", &GridDomain::points)
      .def("__len__", &GridDomain::size)
      .def("neighbors", &GridDomain::neighbors)
      .def("nearest", &GridDomain::nearest);

  m.def(
      "safe_sets",
      [](const KernelParams& params, const Matrix& inputs, const Vector& values, const GridDomain& grid,
         double j_min, double beta) {
        const GpModel model(params, make_dataset(inputs, values));
        const Posterior post = confidence_bounds(model.predict(grid.points()), beta);
        const SetMasks s = compute_sets(model, post, grid, j_min, beta);
        py::dict d;
        d["safe"] = s.safe;
        d["maximizers"] = s.maximizers;
        d["expanders"] = s.expanders;
        return d;
      },
      py::arg("params"), py::arg("inputs"), py::arg("values"), py::arg("grid"), py::arg("j_min"),
      py::arg("beta"));

  m.def("rho", &rho, py::arg("t_prime"), py::arg("delta_b"));
  m.def("noise_bound", &noise_bound, py::arg("t_prime"), py::arg("delta_b"), py::arg("sigma_n"));
  m.def(
      "threshold",
      [](int t_prime, double sigma, double delta_b, double sigma_n, bool scaled) {
        TriggerConfig cfg{delta_b, sigma_n, scaled ? ThresholdScaling::Scaled : ThresholdScaling::Unscaled};
        return threshold(cfg, TriggerState{t_prime}, sigma);
      },
      py::arg("t_prime"), py::arg("sigma"), py::arg("delta_b") = 0.1, py::arg("sigma_n") = 0.016,
      py::arg("scaled") = true);

  m.def("normalization_scale", &normalization_scale);
  m.def("safety_threshold", &safety_threshold, py::arg("prior_mean") = -1.0, py::arg("beta") = 2.0,
        py::arg("noise_std_dev") = 0.016, py::arg("epsilon") = 0.2);
  m.def("normalized_performance", &normalized_performance);

  m.def(
      "episode",
      [](const Vector& theta, const std::string& shape, double gain_factor, std::size_t waypoints) {
        Plant plant;
        plant.gain_factor = gain_factor;
        const auto ref = ReferenceTrajectory::make(parse_shape(shape), waypoints);
        const EpisodeResult r = simulate_episode(plant, theta, ref, waypoints);
        py::dict d;
        d["cost"] = episode_cost(r.trajectory, ref.waypoints, 0.5);
        d["crashed"] = r.crashed;
        return d;
      },
      py::arg("theta"), py::arg("shape") = "figure-eight-planar", py::arg("gain_factor") = 1.0,
      py::arg("waypoints") = 10);

  py::class_<EtsoOptimizer>(m, "Optimizer")
      .def(py::init([](const std::string& scenario, const std::string& policy, double raw_backup_cost) {
             return EtsoOptimizer(load_scenario(scenario).etso, parse_policy(policy), raw_backup_cost);
           }),
           py::arg("scenario"), py::arg("policy") = "etso", py::arg("raw_backup_cost"))
      .def("next_query", &EtsoOptimizer::next_query)
      .def(
          "observe",
          [](EtsoOptimizer& o, double cost, bool crashed) {
            const StepEvents e = o.observe(cost, crashed);
            py::dict d;
            d["reset_requested"] = e.reset_requested;
            d["crash"] = e.crash;
            d["psi"] = e.psi;
            d["kappa"] = e.kappa;
            return d;
          },
          py::arg("cost"), py::arg("crashed") = false)
      .def("reset_commit", &EtsoOptimizer::reset_commit)
      .def_property_readonly("reset_pending", &EtsoOptimizer::reset_pending)
      .def_property_readonly("t_prime", [](const EtsoOptimizer& o) { return o.state().t_prime; })
      .def_property_readonly("dataset_size", [](const EtsoOptimizer& o) { return o.state().dataset.size(); })
      .def_property_readonly("raw_j_min", &EtsoOptimizer::raw_j_min)
      .def_property_readonly("backup_point", &EtsoOptimizer::backup_point)
      .def_property_readonly("grid_posterior",
                             [](const EtsoOptimizer& o) { return posterior_dict(o.grid_posterior()); })
      .def("checkpoint", [](const EtsoOptimizer& o) { return to_py(o.checkpoint()); });

  m.def("scenario_ids", &scenario_ids);
  m.def(
      "validate_scenario",
      [](const std::string& id, const std::vector<std::string>& overrides) {
        const ValidationReport r = validate_scenario(load_scenario(id, overrides));
        py::list out;
        for (const auto& c : r.checks) out.append(py::make_tuple(c.name, c.passed, c.detail));
        return out;
      },
      py::arg("scenario"), py::arg("overrides") = std::vector<std::string>{});

  py::class_<ScenarioHandle>(m, "Scenario")
      .def(py::init([](const std::string& id, const std::vector<std::string>& overrides, std::uint64_t seed) {
             return ScenarioHandle(load_scenario(id, overrides), seed);
           }),
           py::arg("scenario"), py::arg("overrides") = std::vector<std::string>{}, py::arg("seed") = 1)
      .def_property_readonly("id", [](const ScenarioHandle& h) { return h.scenario.id; })
      .def_property_readonly("grid", [](const ScenarioHandle& h) { return h.scenario.etso.grid; })
      .def_property_readonly("backup", [](const ScenarioHandle& h) { return h.scenario.etso.backup_controller; })
      .def_property_readonly("document", [](const ScenarioHandle& h) { return to_py(h.scenario.document); })
      .def("mode_at", [](const ScenarioHandle& h, int round) { return h.env.mode_at(round); })
      .def(
          "true_cost",
          [](const ScenarioHandle& h, int round, const Vector& theta) {
            const Evaluation e = h.env.true_cost(round, theta);
            return py::make_tuple(e.true_cost, e.crashed);
          },
          py::arg("round"), py::arg("theta"))
      .def("sweep", [](const ScenarioHandle& h, std::size_t mode) {
        const ModeSweep s = sweep_mode(h.scenario, h.env, mode);
        return py::make_tuple(s.cost, s.crashed);
      });

  m.def(
      "run",
      [](const std::string& scenario, const std::vector<std::string>& policies,
         const std::vector<std::uint64_t>& seeds, const std::vector<std::string>& overrides,
         bool free_backup_requery, unsigned threads) {
        RunConfig cfg;
        cfg.scenario = scenario;
        cfg.policies.clear();
        for (const auto& p : policies) cfg.policies.push_back(parse_policy(p));
        cfg.seeds = seeds;
        cfg.overrides = overrides;
        cfg.free_backup_requery = free_backup_requery;
        cfg.threads = threads;
        MatrixResult result;
        {
          py::gil_scoped_release release;
          result = run_matrix(cfg);
        }
        py::list out;
        for (const auto& r : result.records) out.append(to_py(record_to_json(r)));
        return out;
      },
      py::arg("scenario"), py::arg("policies") = std::vector<std::string>{"etso"},
      py::arg("seeds") = std::vector<std::uint64_t>{1}, py::arg("overrides") = std::vector<std::string>{},
      py::arg("free_backup_requery") = false, py::arg("threads") = 1);
}
