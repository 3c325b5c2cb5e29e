#include "mfmdp/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "mfmdp/combinatorics.hpp"
#include "mfmdp/errors.hpp"
#include "mfmdp/nagent_mdp.hpp"
#include "mfmdp/parallel.hpp"
#include "mfmdp/rng.hpp"
#include "mfmdp/transport.hpp"
#include "mfmdp/version.hpp"

namespace mfmdp {

namespace {

using ordered_json = nlohmann::ordered_json;

// Substream tags keeping the runs' draws disjoint under a shared seed.
constexpr std::uint64_t kStreamOps = 0xb001;
constexpr std::uint64_t kStreamConcentration = 0xb002;

// Shortest-round-trip would do, but a fixed width is easier to diff.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<int> balanced_counts(int n, int n_states) {
  std::vector<int> counts(static_cast<std::size_t>(n_states), n / n_states);
  for (int s = 0; s < n % n_states; ++s) counts[static_cast<std::size_t>(s)] += 1;
  return counts;
}

double pow_gamma(double base, double gamma) { return base <= 0.0 ? 0.0 : std::pow(base, gamma); }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("bench: cannot open output file " + path.string());
  out << text;
  if (!out) throw ValidationError("bench: failed writing " + path.string());
}

ordered_json family_json(const KernelFamily& family) {
  ordered_json j;
  j["kind"] = family.kind == KernelFamily::Kind::deterministic ? "deterministic" : "randomized";
  j["denominator"] = family.denominator;
  return j;
}

}  // namespace

// The fixed initial-state family: everyone at the first state, the most even
// split, everyone at the last state.
std::vector<std::pair<std::string, JointState>> initial_state_family(int n, int n_states) {
  std::vector<std::pair<std::string, JointState>> out;
  out.emplace_back("all0", JointState(static_cast<std::size_t>(n), 0));
  out.emplace_back("balanced", class_representative(balanced_counts(n, n_states)));
  out.emplace_back("all" + std::to_string(n_states - 1),
                   JointState(static_cast<std::size_t>(n), n_states - 1));
  return out;
}

RateFit fit_loglog(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw ValidationError("fit_loglog: needs at least 3 points");
  std::vector<double> lx, ly;
  lx.reserve(points.size());
  ly.reserve(points.size());
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) {
      throw ValidationError("fit_loglog: coordinates must be strictly positive");
    }
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx <= 0.0) throw ValidationError("fit_loglog: all x coordinates coincide");
  RateFit fit;
  fit.points = points;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

void check_experiment_config(const ExperimentConfig& cfg) {
  if (cfg.model.n_states() < 1 || cfg.model.n_actions() < 1 ||
      cfg.model.pairs.size() != cfg.model.n_states() * cfg.model.n_actions()) {
    throw ValidationError("bench: model is not finalized");
  }
  if (cfg.n_list.empty()) throw ValidationError("bench: empty N-list");
  int prev = 0;
  for (int n : cfg.n_list) {
    if (n <= prev) throw ValidationError("bench: N-list must be strictly increasing and >= 1");
    prev = n;
    long double raw = 1.0L;
    for (int i = 0; i < n; ++i) {
      raw *= static_cast<long double>(cfg.model.n_states()) * cfg.model.n_actions() *
             cfg.model.n_idio();
    }
    if (raw > static_cast<long double>(kDefaultSolveCap)) {
      throw CapError("bench: N=" + std::to_string(n) + " exceeds the exact-solver cap");
    }
  }
  if (cfg.q < 1) throw ValidationError("bench: q must be >= 1");
  if (!(cfg.tol > 0.0)) throw ValidationError("bench: tol must be positive");
  if (cfg.trials < 1) throw ValidationError("bench: trials must be >= 1");
}

// ---------------------------------------------------------------------------
// Value convergence

ValueConvergenceReport run_value_convergence(const ExperimentConfig& cfg) {
  check_experiment_config(cfg);
  const ModelSpec& model = cfg.model;
  SimplexGrid grid = make_simplex_grid(model.states, cfg.q);
  SolveResult mf = value_iteration(model, grid, cfg.family, cfg.tol, cfg.workers);
  const double gamma = gamma_exponent(model.beta, model.k_big_f);
  const std::vector<Measure> candidates = default_mn_candidates(model.states, cfg.seed);

  ValueConvergenceReport rep;
  for (int n : cfg.n_list) {
    NSolveResult joint = solve_VN(model, n, cfg.tol, kDefaultSolveCap, cfg.workers);
    double mn = estimate_MN(model.states, n, candidates, cfg.trials, cfg.seed, cfg.workers);
    for (const auto& [id, x0] : initial_state_family(n, model.n_states())) {
      ValueConvergenceRow row;
      row.n = n;
      row.x0_id = id;
      row.v_n = joint.table.at(x0);
      row.v_check = mf.table(empirical_state(x0, model.n_states()));
      row.gap = row.v_n - row.v_check;
      row.mn_hat = mn;
      row.gamma = gamma;
      double denom = pow_gamma(mn, gamma);
      row.ratio = denom > 0.0 ? std::abs(row.gap) / denom
                              : (std::abs(row.gap) <= 10.0 * cfg.tol
                                     ? 0.0
                                     : std::numeric_limits<double>::infinity());
      rep.rows.push_back(std::move(row));
    }
  }

  for (const ValueConvergenceRow& row : rep.rows) {
    rep.c_fit = std::max(rep.c_fit, row.ratio);
  }
  for (ValueConvergenceRow& row : rep.rows) row.c_fit = rep.c_fit;

  std::vector<const ValueConvergenceRow*> balanced;
  for (const ValueConvergenceRow& row : rep.rows) {
    if (row.x0_id == "balanced") balanced.push_back(&row);
  }
  rep.c_at_smallest_n = balanced.front()->ratio;
  double first = std::abs(balanced.front()->gap);
  double last = std::abs(balanced.back()->gap);
  rep.monotone_ok = last < first || (first <= 10.0 * cfg.tol && last <= 10.0 * cfg.tol);
  for (const ValueConvergenceRow* row : balanced) {
    double bound = 2.0 * rep.c_at_smallest_n * pow_gamma(row->mn_hat, gamma);
    if (std::abs(row->gap) > std::max(bound, 10.0 * cfg.tol)) rep.rate_bound_ok = false;
  }

  std::string csv = "N,x0_id,V_N,V_check,gap,M_N_hat,gamma,C_fit,q,tol,seed\n";
  for (const ValueConvergenceRow& row : rep.rows) {
    csv += std::to_string(row.n) + "," + row.x0_id + "," + fmt(row.v_n) + "," +
           fmt(row.v_check) + "," + fmt(row.gap) + "," + fmt(row.mn_hat) + "," +
           fmt(row.gamma) + "," + fmt(row.c_fit) + "," + std::to_string(cfg.q) + "," +
           fmt(cfg.tol) + "," + std::to_string(cfg.seed) + "\n";
  }
  rep.csv = std::move(csv);
  return rep;
}

// ---------------------------------------------------------------------------
// Operator comparison

OperatorComparisonReport run_operator_comparison(const ExperimentConfig& cfg, int pairs_per_n) {
  check_experiment_config(cfg);
  if (pairs_per_n < 1) throw ValidationError("bench: pairs_per_n must be >= 1");
  const ModelSpec& model = cfg.model;
  const int ns = model.n_states();
  const int na = model.n_actions();
  SimplexGrid grid = make_simplex_grid(model.states, cfg.q);
  SolveResult mf = value_iteration(model, grid, cfg.family, cfg.tol, cfg.workers);
  const std::vector<ActionKernel> pool = enumerate_kernels(ns, na, cfg.family);
  const double gamma = gamma_exponent(model.beta, model.k_big_f);
  const std::vector<Measure> candidates = default_mn_candidates(model.states, cfg.seed);

  OperatorComparisonReport rep;
  rep.gamma = gamma;
  for (int n : cfg.n_list) {
    // The solved table evaluated at every occupancy class's empirical measure.
    CompositionIndexer classes(n, ns);
    NAgentValueTable w_check = make_nagent_table(n, ns);
    for (std::int64_t c = 0; c < classes.size(); ++c) {
      std::vector<int> counts = classes.unrank(c);
      Measure mu;
      mu.w.resize(static_cast<std::size_t>(ns));
      for (int s = 0; s < ns; ++s) {
        mu.w[static_cast<std::size_t>(s)] = static_cast<double>(counts[static_cast<std::size_t>(s)]) / n;
      }
      w_check.values[static_cast<std::size_t>(c)] = mf.table(mu);
    }
    double mn = estimate_MN(model.states, n, candidates, cfg.trials, cfg.seed, cfg.workers);

    for (int t = 0; t < pairs_per_n; ++t) {
      Rng rng(cfg.seed, kStreamOps, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(t));
      JointState x(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = rng.uniform_int(ns);
      const ActionKernel& kappa = pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))];

      MeanFieldPolicy applied{mf.table.grid,
                              std::vector<ActionKernel>(static_cast<std::size_t>(grid.size()), kappa),
                              0.0};
      LiftResult lift = lift_feedback(model, applied, x);
      Measure mu_x = empirical_state(x, ns);

      OperatorComparisonRow row;
      row.n = n;
      row.trial = t;
      row.lhs = std::abs(bellman_apply_kernel(model, mf.table, mu_x, kappa) -
                         bellman_TN_action(model, w_check, x, lift.actions));
      row.coupling = lift.cost;
      row.mn_hat = mn;
      row.ratio = row.lhs / (pow_gamma(row.coupling, gamma) + pow_gamma(mn, gamma));
      rep.c_max = std::max(rep.c_max, row.ratio);
      rep.max_coupling = std::max(rep.max_coupling, row.coupling);
      if (row.coupling > 2.0 * mn + 1e-12) rep.lift_cost_ok = false;

      // Disintegration round trip on the realized joint law.
      Measure joint = empirical_joint(x, lift.actions, ns, na);
      ActionKernel back = kernel_from_joint(joint, ns, na);
      Measure rebuilt = joint_measure(mu_x, back);
      double err = 0.0;
      for (int i = 0; i < joint.size(); ++i) err = std::max(err, std::abs(rebuilt[i] - joint[i]));
      MeanFieldPolicy reproduced{mf.table.grid,
                                 std::vector<ActionKernel>(static_cast<std::size_t>(grid.size()), back),
                                 0.0};
      err = std::max(err, lift_feedback(model, reproduced, x).cost);
      rep.round_trip_max_err = std::max(rep.round_trip_max_err, err);
      if (err > 1e-12) rep.round_trip_ok = false;

      rep.rows.push_back(row);
    }
  }

  std::string csv = "N,trial,lhs,coupling,M_N_hat,ratio\n";
  for (const OperatorComparisonRow& row : rep.rows) {
    csv += std::to_string(row.n) + "," + std::to_string(row.trial) + "," + fmt(row.lhs) + "," +
           fmt(row.coupling) + "," + fmt(row.mn_hat) + "," + fmt(row.ratio) + "\n";
  }
  rep.csv = std::move(csv);
  return rep;
}

// ---------------------------------------------------------------------------
// Deviation rate

MnRateReport run_mn_rate(const ExperimentConfig& cfg, std::vector<int> n_values,
                         std::vector<Measure> candidates) {
  check_experiment_config(cfg);
  const FiniteMetricSpace& space = cfg.model.pairs;
  if (n_values.empty()) n_values = {16, 32, 64, 128, 256, 512, 1024};
  int prev = 0;
  for (int n : n_values) {
    if (n <= prev) throw ValidationError("bench: rate N-values must be strictly increasing");
    prev = n;
  }
  if (candidates.empty()) candidates = default_mn_candidates(space, cfg.seed);

  MnRateReport rep;
  for (int n : n_values) {
    double mn = estimate_MN(space, n, candidates, cfg.trials, cfg.seed, cfg.workers);
    rep.points.push_back({n, mn});
  }

  std::vector<std::pair<double, double>> pts;
  bool positive = true;
  for (const MnRatePoint& p : rep.points) {
    if (!(p.mn_hat > 0.0)) positive = false;
    pts.emplace_back(static_cast<double>(p.n), p.mn_hat);
  }
  if (!positive) {
    rep.accepted = false;
    rep.diagnostic =
        "deviation estimate is zero at some N; the candidate laws cannot exhibit a rate "
        "(an empirical sample of a point mass never moves)";
  } else if (pts.size() < 3) {
    rep.accepted = false;
    rep.diagnostic = "fewer than 3 ladder points; no fit attempted";
  } else {
    rep.fit = fit_loglog(pts);
    rep.accepted = true;
  }

  std::string csv = "N,M_N_hat\n";
  for (const MnRatePoint& p : rep.points) {
    csv += std::to_string(p.n) + "," + fmt(p.mn_hat) + "\n";
  }
  rep.csv = std::move(csv);
  return rep;
}

// ---------------------------------------------------------------------------
// Policy-lift gaps

PolicyGapReport run_policy_gap(const ExperimentConfig& cfg, double c_fit) {
  check_experiment_config(cfg);
  const ModelSpec& model = cfg.model;
  SimplexGrid grid = make_simplex_grid(model.states, cfg.q);
  SolveResult mf = value_iteration(model, grid, cfg.family, cfg.tol, cfg.workers);
  EpsilonReport eps = policy_epsilon(model, mf);
  MeanFieldPolicy policy = mf.policy;
  policy.epsilon = eps.epsilon;

  LiftGapParams params;
  params.exact = true;
  params.tol = cfg.tol;
  params.seed = cfg.seed;
  params.mn_trials = cfg.trials;
  params.workers = cfg.workers;

  PolicyGapReport rep;
  rep.eps_source = eps.epsilon;
  const double gamma = gamma_exponent(model.beta, model.k_big_f);
  for (int n : cfg.n_list) {
    JointState x0 = class_representative(balanced_counts(n, model.n_states()));
    for (LiftMode mode : {LiftMode::feedback, LiftMode::randomized}) {
      GapReport g = lift_gap(model, policy, mode, n, x0, params);
      double allowance = g.epsilon + 2.0 * c_fit * pow_gamma(g.mn_hat, gamma);
      if (g.v_lift < g.v_opt - allowance - 10.0 * cfg.tol) rep.bound_ok = false;
      rep.rows.push_back(g);
    }
  }

  for (LiftMode mode : {LiftMode::feedback, LiftMode::randomized}) {
    double first = -1.0, last = -1.0;
    for (const GapReport& g : rep.rows) {
      if (g.mode != mode) continue;
      if (first < 0.0) first = std::abs(g.gap);
      last = std::abs(g.gap);
    }
    bool ok = last < first || (first <= 10.0 * cfg.tol && last <= 10.0 * cfg.tol);
    rep.monotone_ok = rep.monotone_ok && ok;
  }
  for (std::size_t i = 0; i + 1 < rep.rows.size(); i += 2) {
    double a = std::abs(rep.rows[i].gap);
    double b = std::abs(rep.rows[i + 1].gap);
    if (std::max(a, b) > 2.0 * std::min(a, b) + 10.0 * cfg.tol) rep.modes_within_2x = false;
  }

  std::string csv = "N,mode,V_N,V_lift,gap,eps_source,M_N_hat,gamma,seed\n";
  for (const GapReport& g : rep.rows) {
    csv += std::to_string(g.n) + "," + lift_mode_name(g.mode) + "," + fmt(g.v_opt) + "," +
           fmt(g.v_lift) + "," + fmt(g.gap) + "," + fmt(g.epsilon) + "," + fmt(g.mn_hat) + "," +
           fmt(g.gamma) + "," + std::to_string(cfg.seed) + "\n";
  }
  rep.csv = std::move(csv);
  return rep;
}

std::vector<ConcentrationRow> run_lift_concentration(const ExperimentConfig& cfg, int draws) {
  check_experiment_config(cfg);
  if (draws < 2) throw ValidationError("bench: concentration needs at least 2 draws");
  const ModelSpec& model = cfg.model;
  const int ns = model.n_states();
  const int na = model.n_actions();
  SimplexGrid grid = make_simplex_grid(model.states, cfg.q);
  SolveResult mf = value_iteration(model, grid, cfg.family, cfg.tol, cfg.workers);
  const std::vector<Measure> candidates = default_mn_candidates(model.states, cfg.seed);

  std::vector<ConcentrationRow> rows;
  for (int n : cfg.n_list) {
    JointState x0 = class_representative(balanced_counts(n, ns));
    Measure mu = empirical_state(x0, ns);
    Measure target = joint_measure(mu, mf.policy.at(mu));

    std::vector<double> costs(static_cast<std::size_t>(draws));
    parallel_for(costs.size(), cfg.workers, [&](std::size_t d) {
      Rng rng(cfg.seed, kStreamConcentration, static_cast<std::uint64_t>(n),
              static_cast<std::uint64_t>(d));
      std::vector<double> u(static_cast<std::size_t>(n));
      for (double& v : u) v = rng.u01();
      JointAction a = lift_randomized(mf.policy, x0, u);
      costs[d] = wasserstein1(model.pairs, target, empirical_joint(x0, a, ns, na));
    });
    MeanSe ms = mean_se(costs);

    ConcentrationRow row;
    row.n = n;
    row.mean_cost = ms.mean;
    row.se = ms.se;
    row.mn_hat = estimate_MN(model.states, n, candidates, cfg.trials, cfg.seed, cfg.workers);
    row.bound = (2.0 + model.actions.diameter) * row.mn_hat;
    row.ok = row.mean_cost <= row.bound + 3.0 * row.se;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Smoothness diagnostic

HolderReport holder_diagnostic(const ModelSpec& model, int q, const KernelFamily& family,
                               double tol, int workers) {
  if (q < 1) throw ValidationError("bench: q must be >= 1");
  HolderReport rep;
  rep.gamma = gamma_exponent(model.beta, model.k_big_f);

  auto max_quotient = [&](int qq) {
    SimplexGrid grid = make_simplex_grid(model.states, qq);
    SolveResult solved = value_iteration(model, grid, family, tol, workers);
    std::vector<double> best(static_cast<std::size_t>(grid.size()), 0.0);
    parallel_for(best.size(), workers, [&](std::size_t i) {
      for (std::size_t j = i + 1; j < best.size(); ++j) {
        double w = wasserstein1(model.states, grid.nodes[i], grid.nodes[j]);
        double quot = std::abs(solved.table.values[i] - solved.table.values[j]) /
                      pow_gamma(w, rep.gamma);
        best[i] = std::max(best[i], quot);
      }
    });
    double out = 0.0;
    for (double b : best) out = std::max(out, b);
    return out;
  };

  rep.ratio_base = max_quotient(q);
  rep.ratio_double = max_quotient(2 * q);
  if (rep.ratio_base == 0.0 && rep.ratio_double == 0.0) {
    rep.factor = 1.0;  // flat value function is as smooth as it gets
  } else if (rep.ratio_base == 0.0 || rep.ratio_double == 0.0) {
    rep.factor = std::numeric_limits<double>::infinity();
  } else {
    rep.factor = std::max(rep.ratio_double / rep.ratio_base, rep.ratio_base / rep.ratio_double);
  }
  rep.ok = std::isfinite(rep.ratio_base) && std::isfinite(rep.ratio_double) && rep.factor < 2.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Full suite

ChaosSummary run_chaos_suite(const ExperimentConfig& cfg) {
  check_experiment_config(cfg);
  ChaosSummary s;
  s.value = run_value_convergence(cfg);
  s.ops = run_operator_comparison(cfg);
  s.mn = run_mn_rate(cfg);
  s.gaps = run_policy_gap(cfg, s.value.c_fit);
  s.concentration = run_lift_concentration(cfg);
  s.holder = holder_diagnostic(cfg.model, cfg.q, cfg.family, cfg.tol, cfg.workers);

  bool concentration_ok = true;
  for (const ConcentrationRow& row : s.concentration) concentration_ok &= row.ok;
  s.checks = {
      {"mn_rate_slope", s.mn.accepted && std::abs(s.mn.fit.slope + 0.5) <= 0.1},
      {"value_gap_monotone", s.value.monotone_ok},
      {"value_gap_rate_bound", s.value.rate_bound_ok},
      {"lift_value_bound", s.gaps.bound_ok},
      {"lift_gap_monotone", s.gaps.monotone_ok},
      {"lift_modes_within_2x", s.gaps.modes_within_2x},
      {"lift_concentration", concentration_ok},
      {"lift_cost_bound", s.ops.lift_cost_ok},
      {"kernel_round_trip", s.ops.round_trip_ok},
      {"holder_factor_two", s.holder.ok},
  };

  ordered_json j;
  j["artifact"] = "bench-chaos";
  j["version"] = kVersion;
  j["config"]["model"] = cfg.model.config_json.empty()
                             ? ordered_json()
                             : ordered_json::parse(cfg.model.config_json);
  j["config"]["model_ref"] = cfg.model_ref;
  j["config"]["n_list"] = cfg.n_list;
  j["config"]["q"] = cfg.q;
  j["config"]["family"] = family_json(cfg.family);
  j["config"]["tol"] = cfg.tol;
  j["config"]["trials"] = cfg.trials;
  j["config"]["seed"] = cfg.seed;

  j["value_convergence"]["c_fit"] = s.value.c_fit;
  j["value_convergence"]["c_at_smallest_n"] = s.value.c_at_smallest_n;
  j["value_convergence"]["rows"] = s.value.rows.size();

  j["operator_comparison"]["c_max"] = s.ops.c_max;
  j["operator_comparison"]["max_coupling"] = s.ops.max_coupling;
  j["operator_comparison"]["round_trip_max_err"] = s.ops.round_trip_max_err;

  ordered_json mn_points = ordered_json::array();
  for (const MnRatePoint& p : s.mn.points) mn_points.push_back({{"n", p.n}, {"mn_hat", p.mn_hat}});
  j["mn_rate"]["points"] = std::move(mn_points);
  j["mn_rate"]["accepted"] = s.mn.accepted;
  if (s.mn.accepted) {
    j["mn_rate"]["slope"] = s.mn.fit.slope;
    j["mn_rate"]["intercept"] = s.mn.fit.intercept;
    j["mn_rate"]["residual"] = s.mn.fit.residual;
  } else {
    j["mn_rate"]["diagnostic"] = s.mn.diagnostic;
  }

  ordered_json gap_rows = ordered_json::array();
  for (const GapReport& g : s.gaps.rows) {
    gap_rows.push_back({{"n", g.n},
                        {"mode", lift_mode_name(g.mode)},
                        {"v_opt", g.v_opt},
                        {"v_lift", g.v_lift},
                        {"gap", g.gap},
                        {"eps_source", g.epsilon},
                        {"mn_hat", g.mn_hat},
                        {"gamma", g.gamma}});
  }
  j["policy_gap"]["rows"] = std::move(gap_rows);
  j["policy_gap"]["eps_source"] = s.gaps.eps_source;

  ordered_json conc = ordered_json::array();
  for (const ConcentrationRow& row : s.concentration) {
    conc.push_back({{"n", row.n},
                    {"mean_cost", row.mean_cost},
                    {"se", row.se},
                    {"mn_hat", row.mn_hat},
                    {"bound", row.bound},
                    {"ok", row.ok}});
  }
  j["lift_concentration"] = std::move(conc);

  j["holder"]["gamma"] = s.holder.gamma;
  j["holder"]["ratio_base"] = s.holder.ratio_base;
  j["holder"]["ratio_double"] = s.holder.ratio_double;
  j["holder"]["factor"] = s.holder.factor;
  j["holder"]["ok"] = s.holder.ok;

  ordered_json checks;
  for (const auto& [name, ok] : s.checks) checks[name] = ok;
  j["checks"] = std::move(checks);
  s.summary_json = j.dump(2) + "\n";

  if (!cfg.out_dir.empty()) {
    std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    write_text_file(dir / "value_convergence.csv", s.value.csv);
    write_text_file(dir / "operator_comparison.csv", s.ops.csv);
    write_text_file(dir / "mn_rate.csv", s.mn.csv);
    write_text_file(dir / "policy_gap.csv", s.gaps.csv);
    write_text_file(dir / "summary.json", s.summary_json);

    PlotSeries fb{"feedback", {}}, rd{"randomized", {}}, vc{"value", {}};
    for (const GapReport& g : s.gaps.rows) {
      (g.mode == LiftMode::feedback ? fb : rd)
          .points.emplace_back(static_cast<double>(g.n), std::abs(g.gap));
    }
    for (const ValueConvergenceRow& row : s.value.rows) {
      if (row.x0_id == "balanced") vc.points.emplace_back(static_cast<double>(row.n), std::abs(row.gap));
    }
    write_text_file(dir / "gap_vs_n.svg",
                    svg_loglog("gap vs N", "N", "gap", {vc, fb, rd}));
    PlotSeries mnp{"mn_hat", {}};
    for (const MnRatePoint& p : s.mn.points) {
      mnp.points.emplace_back(static_cast<double>(p.n), p.mn_hat);
    }
    write_text_file(dir / "mn_vs_n.svg", svg_loglog("deviation vs N", "N", "M_N_hat", {mnp}));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Plotting

std::string svg_loglog(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<PlotSeries>& series) {
  constexpr int kW = 640, kH = 480, kPad = 56;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};

  std::vector<PlotSeries> kept;
  double lx0 = std::numeric_limits<double>::infinity(), lx1 = -lx0;
  double ly0 = lx0, ly1 = -lx0;
  for (const PlotSeries& s : series) {
    PlotSeries k{s.label, {}};
    for (const auto& [x, y] : s.points) {
      if (x > 0.0 && y > 0.0) {
        k.points.emplace_back(std::log10(x), std::log10(y));
        lx0 = std::min(lx0, k.points.back().first);
        lx1 = std::max(lx1, k.points.back().first);
        ly0 = std::min(ly0, k.points.back().second);
        ly1 = std::max(ly1, k.points.back().second);
      }
    }
    if (!k.points.empty()) kept.push_back(std::move(k));
  }

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
      << "</text>\n";
  if (kept.empty()) {
    svg << "<text x=\"" << kW / 2 << "\" y=\"" << kH / 2
        << "\" text-anchor=\"middle\" font-size=\"14\">no positive data</text>\n</svg>\n";
    return svg.str();
  }
  if (lx1 - lx0 < 1e-9) {
    lx0 -= 0.5;
    lx1 += 0.5;
  }
  if (ly1 - ly0 < 1e-9) {
    ly0 -= 0.5;
    ly1 += 0.5;
  }
  auto px = [&](double lx) { return kPad + (lx - lx0) / (lx1 - lx0) * (kW - 2 * kPad); };
  auto py = [&](double ly) { return kH - kPad - (ly - ly0) / (ly1 - ly0) * (kH - 2 * kPad); };

  svg << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\""
      << kH - kPad << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\""
      << kH - kPad << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">log10 " << x_label << "</text>\n";
  svg << "<text x=\"16\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
      << "transform=\"rotate(-90 16 " << kH / 2 << ")\">log10 " << y_label << "</text>\n";

  for (std::size_t si = 0; si < kept.size(); ++si) {
    const char* color = kColors[si % 5];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const auto& [lx, ly] : kept[si].points) svg << px(lx) << "," << py(ly) << " ";
    svg << "\"/>\n";
    for (const auto& [lx, ly] : kept[si].points) {
      svg << "<circle cx=\"" << px(lx) << "\" cy=\"" << py(ly) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    svg << "<text x=\"" << kW - kPad + 4 << "\" y=\"" << kPad + 16 * static_cast<int>(si)
        << "\" font-size=\"12\" fill=\"" << color << "\">" << kept[si].label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace mfmdp
