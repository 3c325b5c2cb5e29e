// Command-line front end: binds model configs to the solvers and the
// experiment harness. Exit codes: 0 success, 1 bad input or config,
// 2 cap or parameter error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfmdp/bench.hpp"
#include "mfmdp/cmkv_solver.hpp"
#include "mfmdp/core_model.hpp"
#include "mfmdp/errors.hpp"
#include "mfmdp/nagent_mdp.hpp"
#include "mfmdp/policy_lift.hpp"
#include "mfmdp/transport.hpp"
#include "mfmdp/version.hpp"

namespace {

using nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string slurp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mfmdp::ValidationError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mfmdp::ValidationError("cannot open output file " + path.string());
  out << text;
  if (!out) throw mfmdp::ValidationError("failed writing " + path.string());
}

// key=value with a dotted path into the config; the key must already exist.
void apply_override(ordered_json& root, const std::string& expr) {
  const std::size_t eq = expr.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw mfmdp::ValidationError("override must look like key=value: " + expr);
  }
  const std::string key = expr.substr(0, eq);
  const std::string raw = expr.substr(eq + 1);

  ordered_json* node = &root;
  std::size_t start = 0;
  while (start <= key.size()) {
    const std::size_t dot = key.find('.', start);
    const std::string part =
        key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (node->is_object() && node->contains(part)) {
      node = &(*node)[part];
    } else if (node->is_array() && !part.empty() &&
               part.find_first_not_of("0123456789") == std::string::npos &&
               std::stoul(part) < node->size()) {
      node = &(*node)[std::stoul(part)];
    } else {
      throw mfmdp::ValidationError("override references an unknown config key: " + key);
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }

  ordered_json value = ordered_json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;  // unquoted strings pass through
  *node = value;
}

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 1;
  std::string out_dir;
  int workers = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("config", c.config_path, "model config file (json)")->required();
  cmd->add_option("overrides", c.overrides, "key=value overrides into existing config keys");
  cmd->add_option("--seed", c.seed, "random seed (default 1)");
  cmd->add_option("--out", c.out_dir, "output directory (default $MFMDP_OUT_DIR, else .)");
  cmd->add_option("--workers", c.workers, "worker threads; 0 = all hardware threads");
}

struct SolverOpts {
  int q = 50;
  std::string family = "randomized";
  int step = 8;
  double tol = 1e-8;
};

void add_solver(CLI::App* cmd, SolverOpts& s) {
  cmd->add_option("--q", s.q, "simplex grid denominator (default 50)");
  cmd->add_option("--kernel-family", s.family, "action kernel family (default randomized)")
      ->check(CLI::IsMember({"deterministic", "randomized"}));
  cmd->add_option("--kernel-step", s.step, "denominator of randomized kernel rows (default 8)");
  cmd->add_option("--tol", s.tol, "fixed-point residual tolerance (default 1e-8)");
}

mfmdp::KernelFamily family_of(const SolverOpts& s) {
  return s.family == "deterministic" ? mfmdp::KernelFamily::deterministic()
                                     : mfmdp::KernelFamily::randomized(s.step);
}

ordered_json family_json(const mfmdp::KernelFamily& family) {
  ordered_json j;
  j["kind"] =
      family.kind == mfmdp::KernelFamily::Kind::deterministic ? "deterministic" : "randomized";
  j["denominator"] = family.denominator;
  return j;
}

ordered_json resolve_config(const Common& c) {
  ordered_json j = ordered_json::parse(slurp_file(c.config_path), nullptr, false);
  if (j.is_discarded()) {
    throw mfmdp::ValidationError("config file is not valid json: " + c.config_path);
  }
  for (const std::string& o : c.overrides) apply_override(j, o);
  return j;
}

std::filesystem::path resolve_out_dir(const Common& c) {
  std::string dir = c.out_dir;
  if (dir.empty()) {
    const char* env = std::getenv("MFMDP_OUT_DIR");
    dir = (env != nullptr && *env != '\0') ? env : ".";
  }
  std::filesystem::create_directories(dir);
  return dir;
}

// Every run logs what it resolved to; artifacts embed the same config.
void log_run(const ordered_json& resolved, const Common& c) {
  std::fprintf(stderr, "config: %s\n", resolved.dump().c_str());
  std::fprintf(stderr, "seed: %llu workers: %d\n",
               static_cast<unsigned long long>(c.seed), c.workers);
}

void run_validate(const Common& c) {
  ordered_json resolved = resolve_config(c);
  log_run(resolved, c);
  mfmdp::ModelSpec model = mfmdp::model_from_config(resolved.dump());
  std::printf("state space diameter: %s\n", fmt(model.states.diameter).c_str());
  std::printf("action space diameter: %s\n", fmt(model.actions.diameter).c_str());
  std::printf("gamma exponent: %s\n",
              fmt(mfmdp::gamma_exponent(model.beta, model.k_big_f)).c_str());
  std::printf("reward range: %s\n", fmt(model.reward_range()).c_str());
  mfmdp::LipschitzReport lip = mfmdp::estimate_lipschitz_constants(model, 64, c.seed);
  for (const std::string& w : lip.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

void run_solve_mkv(const Common& c, const SolverOpts& s) {
  ordered_json resolved = resolve_config(c);
  log_run(resolved, c);
  mfmdp::ModelSpec model = mfmdp::model_from_config(resolved.dump());
  mfmdp::SimplexGrid grid = mfmdp::make_simplex_grid(model.states, s.q);
  mfmdp::SolveResult solved =
      mfmdp::value_iteration(model, grid, family_of(s), s.tol, c.workers);
  std::filesystem::path path = resolve_out_dir(c) / "solve_mkv.json";
  write_file(path, mfmdp::solve_artifact_to_json(model, solved));
  std::printf("nodes: %d residual: %s sweeps: %d\n", solved.table.grid->size(),
              fmt(solved.residual).c_str(), solved.sweeps);
  std::printf("artifact: %s\n", path.string().c_str());
}

void run_solve_nagent(const Common& c, const SolverOpts& s, int n) {
  ordered_json resolved = resolve_config(c);
  log_run(resolved, c);
  mfmdp::ModelSpec model = mfmdp::model_from_config(resolved.dump());
  mfmdp::NSolveResult solved = mfmdp::solve_VN(model, n, s.tol, mfmdp::kDefaultSolveCap,
                                               c.workers);
  std::filesystem::path path = resolve_out_dir(c) / "solve_nagent.json";
  write_file(path, mfmdp::nagent_artifact_to_json(model, solved));
  for (const auto& [id, x0] : mfmdp::initial_state_family(n, model.n_states())) {
    std::printf("V_%d(%s) = %s\n", n, id.c_str(), fmt(solved.table.at(x0)).c_str());
  }
  std::printf("classes: %d residual: %s sweeps: %d\n",
              static_cast<int>(solved.table.values.size()), fmt(solved.residual).c_str(),
              solved.sweeps);
  std::printf("artifact: %s\n", path.string().c_str());
}

void run_lift(const Common& c, const SolverOpts& s, int n, const std::string& mode,
              const std::string& x0_id, int mn_trials) {
  ordered_json resolved = resolve_config(c);
  log_run(resolved, c);
  mfmdp::ModelSpec model = mfmdp::model_from_config(resolved.dump());
  mfmdp::SimplexGrid grid = mfmdp::make_simplex_grid(model.states, s.q);
  mfmdp::SolveResult solved =
      mfmdp::value_iteration(model, grid, family_of(s), s.tol, c.workers);
  solved.policy.epsilon = mfmdp::policy_epsilon(model, solved).epsilon;

  mfmdp::JointState x0;
  for (const auto& [id, state] : mfmdp::initial_state_family(n, model.n_states())) {
    if (id == x0_id || (x0_id == "all-last" && id.rfind("all", 0) == 0 && id != "all0")) {
      x0 = state;
    }
  }
  if (x0.empty()) throw mfmdp::ValidationError("unknown initial state id: " + x0_id);

  std::vector<mfmdp::LiftMode> modes;
  if (mode == "feedback" || mode == "both") modes.push_back(mfmdp::LiftMode::feedback);
  if (mode == "randomized" || mode == "both") modes.push_back(mfmdp::LiftMode::randomized);

  mfmdp::LiftGapParams params;
  params.exact = true;
  params.tol = s.tol;
  params.seed = c.seed;
  params.mn_trials = mn_trials;
  params.workers = c.workers;

  ordered_json rows = ordered_json::array();
  for (mfmdp::LiftMode lm : modes) {
    mfmdp::GapReport r = mfmdp::lift_gap(model, solved.policy, lm, n, x0, params);
    ordered_json row;
    row["mode"] = mfmdp::lift_mode_name(lm);
    row["v_opt"] = r.v_opt;
    row["v_lift"] = r.v_lift;
    row["gap"] = r.gap;
    row["mn_hat"] = r.mn_hat;
    row["gamma"] = r.gamma;
    row["eps_source"] = r.epsilon;
    rows.push_back(row);
    std::printf("%s: v_opt=%s v_lift=%s gap=%s\n", mfmdp::lift_mode_name(lm),
                fmt(r.v_opt).c_str(), fmt(r.v_lift).c_str(), fmt(r.gap).c_str());
  }

  ordered_json j;
  j["artifact"] = "lift";
  j["version"] = mfmdp::kVersion;
  j["config"]["model"] = resolved;
  j["config"]["n"] = n;
  j["config"]["x0"] = x0_id;
  j["config"]["q"] = s.q;
  j["config"]["family"] = family_json(family_of(s));
  j["config"]["tol"] = s.tol;
  j["config"]["mn_trials"] = mn_trials;
  j["config"]["seed"] = c.seed;
  j["rows"] = rows;
  std::filesystem::path path = resolve_out_dir(c) / "lift.json";
  write_file(path, j.dump(2) + "\n");
  std::printf("artifact: %s\n", path.string().c_str());
}

void run_bench_chaos(const Common& c, const SolverOpts& s, std::vector<int> n_list,
                     int trials) {
  ordered_json resolved = resolve_config(c);
  log_run(resolved, c);
  mfmdp::ExperimentConfig cfg;
  cfg.model = mfmdp::model_from_config(resolved.dump());
  cfg.model_ref = c.config_path;
  cfg.n_list = std::move(n_list);
  cfg.q = s.q;
  cfg.family = family_of(s);
  cfg.tol = s.tol;
  cfg.trials = trials;
  cfg.seed = c.seed;
  cfg.out_dir = resolve_out_dir(c).string();
  cfg.workers = c.workers;
  mfmdp::ChaosSummary summary = mfmdp::run_chaos_suite(cfg);
  for (const auto& [name, ok] : summary.checks) {
    std::printf("check %s: %s\n", name.c_str(), ok ? "ok" : "FAIL");
  }
  std::printf("artifacts: %s\n", cfg.out_dir.c_str());
}

void run_estimate_mn(const Common& c, std::vector<int> n_list, int trials) {
  ordered_json resolved = resolve_config(c);
  log_run(resolved, c);
  mfmdp::ExperimentConfig cfg;
  cfg.model = mfmdp::model_from_config(resolved.dump());
  cfg.model_ref = c.config_path;
  cfg.trials = trials;
  cfg.seed = c.seed;
  cfg.workers = c.workers;
  mfmdp::MnRateReport rep = mfmdp::run_mn_rate(cfg, n_list);

  ordered_json j;
  j["artifact"] = "estimate-mn";
  j["version"] = mfmdp::kVersion;
  j["config"]["model"] = resolved;
  j["config"]["n_list"] = n_list.empty() ? ordered_json("default") : ordered_json(n_list);
  j["config"]["trials"] = trials;
  j["config"]["seed"] = c.seed;
  j["accepted"] = rep.accepted;
  j["diagnostic"] = rep.diagnostic;
  ordered_json points = ordered_json::array();
  for (const mfmdp::MnRatePoint& p : rep.points) {
    ordered_json row;
    row["n"] = p.n;
    row["mn_hat"] = p.mn_hat;
    points.push_back(row);
  }
  j["points"] = points;
  if (rep.accepted) {
    j["fit"]["slope"] = rep.fit.slope;
    j["fit"]["intercept"] = rep.fit.intercept;
    j["fit"]["residual"] = rep.fit.residual;
  }
  std::filesystem::path dir = resolve_out_dir(c);
  write_file(dir / "mn_rate.csv", rep.csv);
  write_file(dir / "mn_rate.json", j.dump(2) + "\n");
  if (rep.accepted) {
    std::printf("slope: %s residual: %s\n", fmt(rep.fit.slope).c_str(),
                fmt(rep.fit.residual).c_str());
  } else {
    std::printf("fit rejected: %s\n", rep.diagnostic.c_str());
  }
  std::printf("artifacts: %s\n", dir.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"solvers and convergence experiments for finite mean-field control"};
  app.require_subcommand(1);

  Common c_validate, c_mkv, c_nagent, c_lift, c_bench, c_mn;
  SolverOpts s_mkv, s_nagent, s_lift, s_bench;
  int nagent_n = 2;
  int lift_n = 2;
  std::string lift_mode = "both";
  std::string lift_x0 = "balanced";
  int lift_mn_trials = 256;
  std::vector<int> bench_n_list = {2, 4, 6, 8};
  int bench_trials = 256;
  std::vector<int> mn_n_list;
  int mn_trials = 2000;

  CLI::App* validate = app.add_subcommand("validate-model", "parse and validate a model config");
  add_common(validate, c_validate);
  validate->callback([&] { run_validate(c_validate); });

  CLI::App* mkv = app.add_subcommand("solve-mkv", "solve the mean-field control problem");
  add_common(mkv, c_mkv);
  add_solver(mkv, s_mkv);
  mkv->callback([&] { run_solve_mkv(c_mkv, s_mkv); });

  CLI::App* nagent = app.add_subcommand("solve-nagent", "solve the exact N-agent problem");
  add_common(nagent, c_nagent);
  add_solver(nagent, s_nagent);
  nagent->add_option("--n", nagent_n, "number of agents")->required();
  nagent->callback([&] { run_solve_nagent(c_nagent, s_nagent, nagent_n); });

  CLI::App* lift = app.add_subcommand("lift", "lift the mean-field policy to N agents");
  add_common(lift, c_lift);
  add_solver(lift, s_lift);
  lift->add_option("--n", lift_n, "number of agents")->required();
  lift->add_option("--mode", lift_mode, "lift construction (default both)")
      ->check(CLI::IsMember({"feedback", "randomized", "both"}));
  lift->add_option("--x0", lift_x0, "initial joint state (default balanced)")
      ->check(CLI::IsMember({"all0", "balanced", "all-last"}));
  lift->add_option("--mn-trials", lift_mn_trials, "deviation-estimate trials (default 256)");
  lift->callback([&] { run_lift(c_lift, s_lift, lift_n, lift_mode, lift_x0, lift_mn_trials); });

  CLI::App* bench = app.add_subcommand("bench-chaos", "run the full convergence experiment suite");
  add_common(bench, c_bench);
  add_solver(bench, s_bench);
  bench->add_option("--n-list", bench_n_list, "agent counts (default 2 4 6 8)");
  bench->add_option("--trials", bench_trials, "deviation-estimate trials (default 256)");
  bench->callback([&] { run_bench_chaos(c_bench, s_bench, bench_n_list, bench_trials); });

  CLI::App* mn = app.add_subcommand("estimate-mn", "estimate the empirical-measure deviation rate");
  add_common(mn, c_mn);
  mn->add_option("--n-list", mn_n_list, "sample sizes (default 16..1024 doubling)");
  mn->add_option("--trials", mn_trials, "Monte-Carlo trials per point (default 2000)");
  mn->callback([&] { run_estimate_mn(c_mn, mn_n_list, mn_trials); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const mfmdp::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const mfmdp::CapError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
