// Python bindings for the main operations: model loading, the mean-field and
// joint solvers, policy lifting, transport distances and the experiment
// suite. Thin wrappers only; all numerics live in the core library.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "mfmdp/bench.hpp"
#include "mfmdp/cmkv_solver.hpp"
#include "mfmdp/core_model.hpp"
#include "mfmdp/errors.hpp"
#include "mfmdp/nagent_mdp.hpp"
#include "mfmdp/policy_lift.hpp"
#include "mfmdp/transport.hpp"

namespace py = pybind11;
using namespace mfmdp;

namespace {

KernelFamily parse_family(const std::string& name, int step) {
  if (name == "deterministic") return KernelFamily::deterministic();
  if (name == "randomized") return KernelFamily::randomized(step);
  throw ValidationError("kernel family must be 'deterministic' or 'randomized'");
}

LiftMode parse_mode(const std::string& name) {
  if (name == "feedback") return LiftMode::feedback;
  if (name == "randomized") return LiftMode::randomized;
  throw ValidationError("lift mode must be 'feedback' or 'randomized'");
}

FiniteMetricSpace space_from_matrix(const std::vector<std::vector<double>>& dist) {
  const int k = static_cast<int>(dist.size());
  std::vector<std::string> labels(static_cast<std::size_t>(k));
  std::vector<double> flat(static_cast<std::size_t>(k) * k);
  for (int i = 0; i < k; ++i) {
    labels[static_cast<std::size_t>(i)] = std::to_string(i);
    if (static_cast<int>(dist[static_cast<std::size_t>(i)].size()) != k) {
      throw ValidationError("distance matrix must be square");
    }
    for (int j = 0; j < k; ++j) {
      flat[static_cast<std::size_t>(i) * k + j] = dist[static_cast<std::size_t>(i)][j];
    }
  }
  return make_metric_space(std::move(labels), std::move(flat));
}

struct MeanFieldSolution {
  ModelSpec model;
  SolveResult solved;
};

struct JointSolution {
  NSolveResult solved;
};

py::dict gap_to_dict(const GapReport& g) {
  py::dict d;
  d["n"] = g.n;
  d["mode"] = lift_mode_name(g.mode);
  d["v_opt"] = g.v_opt;
  d["v_lift"] = g.v_lift;
  d["gap"] = g.gap;
  d["se"] = g.se;
  d["truncation_bias"] = g.truncation_bias;
  d["mn_hat"] = g.mn_hat;
  d["gamma"] = g.gamma;
  d["epsilon"] = g.epsilon;
  return d;
}

}  // namespace

PYBIND11_MODULE(_mfmdp, m) {
  m.doc() =
      "solvers and benchmarks for finite-space mean-field control: "
      "mean-field and exact joint value iteration, policy lifting, "
      "transport distances and the convergence experiment suite";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<CapError>(m, "CapError", PyExc_RuntimeError);

  py::class_<ModelSpec>(m, "Model")
      .def_property_readonly("n_states", &ModelSpec::n_states)
      .def_property_readonly("n_actions", &ModelSpec::n_actions)
      .def_readonly("beta", &ModelSpec::beta)
      .def_property_readonly(
          "gamma", [](const ModelSpec& mdl) { return gamma_exponent(mdl.beta, mdl.k_big_f); })
      .def_property_readonly("reward_range", &ModelSpec::reward_range);

  m.def(
      "load_model", [](const std::string& path) { return model_from_config_file(path); },
      py::arg("path"), "Parse and validate a model config file.");
  m.def(
      "model_from_json", [](const std::string& text) { return model_from_config(text); },
      py::arg("text"), "Parse and validate a model config from a JSON string.");

  py::class_<MeanFieldSolution>(m, "MeanFieldSolution")
      .def_property_readonly("residual",
                             [](const MeanFieldSolution& s) { return s.solved.residual; })
      .def_property_readonly("sweeps", [](const MeanFieldSolution& s) { return s.solved.sweeps; })
      .def_property_readonly("epsilon",
                             [](const MeanFieldSolution& s) { return s.solved.policy.epsilon; })
      .def_property_readonly("q",
                             [](const MeanFieldSolution& s) { return s.solved.table.grid->q; })
      .def_property_readonly("values",
                             [](const MeanFieldSolution& s) { return s.solved.table.values; })
      .def(
          "value",
          [](const MeanFieldSolution& s, const std::vector<double>& mu) {
            return s.solved.table(make_measure(mu));
          },
          py::arg("mu"), "Value at the grid node nearest the given distribution.");

  m.def(
      "solve_mean_field",
      [](const ModelSpec& mdl, int q, const std::string& family, int step, double tol,
         int workers) {
        SimplexGrid grid = make_simplex_grid(mdl.states, q);
        SolveResult solved = value_iteration(mdl, grid, parse_family(family, step), tol, workers);
        solved.policy.epsilon = policy_epsilon(mdl, solved).epsilon;
        return MeanFieldSolution{mdl, std::move(solved)};
      },
      py::arg("model"), py::arg("q") = 50, py::arg("family") = "randomized", py::arg("step") = 8,
      py::arg("tol") = 1e-8, py::arg("workers") = 0,
      "Value iteration on the simplex grid; returns the value table and the "
      "extracted kernel policy with its optimality slack.");

  py::class_<JointSolution>(m, "JointSolution")
      .def_property_readonly("n", [](const JointSolution& s) { return s.solved.table.n; })
      .def_property_readonly("residual",
                             [](const JointSolution& s) { return s.solved.residual; })
      .def_property_readonly("sweeps", [](const JointSolution& s) { return s.solved.sweeps; })
      .def(
          "value",
          [](const JointSolution& s, const JointState& x) { return s.solved.table.at(x); },
          py::arg("x"), "Exact optimum started from the given joint state.");

  m.def(
      "solve_joint",
      [](const ModelSpec& mdl, int n, double tol, int workers) {
        return JointSolution{solve_VN(mdl, n, tol, kDefaultSolveCap, workers)};
      },
      py::arg("model"), py::arg("n"), py::arg("tol") = 1e-8, py::arg("workers") = 0,
      "Exact n-agent value iteration over symmetry classes.");

  m.def(
      "lift_gap",
      [](const MeanFieldSolution& s, const std::string& mode, int n,
         const std::vector<int>& x0, int mn_trials, std::uint64_t seed, int workers) {
        LiftGapParams params;
        params.mn_trials = mn_trials;
        params.seed = seed;
        params.workers = workers;
        return gap_to_dict(lift_gap(s.model, s.solved.policy, parse_mode(mode), n, x0, params));
      },
      py::arg("solution"), py::arg("mode"), py::arg("n"), py::arg("x0"),
      py::arg("mn_trials") = 256, py::arg("seed") = 1, py::arg("workers") = 0,
      "Lift the solved policy to n agents and compare its exact value against "
      "the exact joint optimum from x0.");

  m.def(
      "wasserstein1",
      [](const std::vector<double>& mu, const std::vector<double>& nu,
         const std::optional<std::vector<std::vector<double>>>& dist) {
        FiniteMetricSpace space = dist ? space_from_matrix(*dist)
                                       : discrete_space(static_cast<int>(mu.size()));
        return wasserstein1(space, make_measure(mu), make_measure(nu));
      },
      py::arg("mu"), py::arg("nu"), py::arg("dist") = py::none(),
      "W1 between two distributions; the default metric is discrete.");

  m.def(
      "kantorovich_dual",
      [](const std::vector<double>& mu, const std::vector<double>& nu,
         const std::optional<std::vector<std::vector<double>>>& dist) {
        FiniteMetricSpace space = dist ? space_from_matrix(*dist)
                                       : discrete_space(static_cast<int>(mu.size()));
        return kantorovich_dual_value(space, make_measure(mu), make_measure(nu));
      },
      py::arg("mu"), py::arg("nu"), py::arg("dist") = py::none(),
      "The same distance through the dual program, for cross-checking.");

  m.def(
      "estimate_mn",
      [](int k, int n, int trials, std::uint64_t seed, int workers) {
        FiniteMetricSpace space = discrete_space(k);
        return estimate_MN(space, n, default_mn_candidates(space, seed), trials, seed, workers);
      },
      py::arg("k"), py::arg("n"), py::arg("trials") = 256, py::arg("seed") = 1,
      py::arg("workers") = 0,
      "Sampled worst-case mean W1 deviation of n-sample empirical measures on "
      "the k-point discrete space.");

  m.def(
      "exact_mn",
      [](int k, int n, const std::optional<std::vector<double>>& mu) {
        return estimate_MN_exact(discrete_space(k), n,
                                 mu ? make_measure(*mu) : uniform_measure(k));
      },
      py::arg("k"), py::arg("n"), py::arg("mu") = py::none(),
      "Exact mean W1 deviation by enumerating count vectors (small n).");

  m.def(
      "run_chaos_suite",
      [](const std::string& config_path, const std::string& out_dir, std::vector<int> n_list,
         int q, const std::string& family, int step, double tol, int trials, std::uint64_t seed,
         int workers) {
        ExperimentConfig cfg;
        cfg.model = model_from_config_file(config_path);
        cfg.model_ref = config_path;
        cfg.n_list = std::move(n_list);
        cfg.q = q;
        cfg.family = parse_family(family, step);
        cfg.tol = tol;
        cfg.trials = trials;
        cfg.seed = seed;
        cfg.out_dir = out_dir;
        cfg.workers = workers;
        ChaosSummary summary = run_chaos_suite(cfg);
        py::dict checks;
        for (const auto& [name, ok] : summary.checks) checks[py::str(name)] = ok;
        return checks;
      },
      py::arg("config_path"), py::arg("out_dir") = "", py::arg("n_list") = std::vector<int>{2, 4, 6, 8},
      py::arg("q") = 50, py::arg("family") = "randomized", py::arg("step") = 8,
      py::arg("tol") = 1e-8, py::arg("trials") = 256, py::arg("seed") = 1, py::arg("workers") = 0,
      "Full convergence experiment; returns the named check outcomes and, when "
      "out_dir is set, writes the CSV/JSON artifacts there.");
}
