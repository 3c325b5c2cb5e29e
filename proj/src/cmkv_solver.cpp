#include "mfmdp/cmkv_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "mfmdp/combinatorics.hpp"
#include "mfmdp/parallel.hpp"
#include "mfmdp/rng.hpp"
#include "mfmdp/transport.hpp"
#include "mfmdp/version.hpp"

namespace mfmdp {

using ordered_json = nlohmann::ordered_json;

SimplexGrid make_simplex_grid(const FiniteMetricSpace& space, int q) {
  if (q < 1) throw ValidationError("make_simplex_grid: q must be >= 1");
  SimplexGrid g;
  g.space = space;
  g.q = q;
  int n = space.size();
  for (const auto& counts : enumerate_compositions(q, n)) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = static_cast<double>(counts[i]) / q;
    g.nodes.push_back(Measure{std::move(w)});
  }
  return g;
}

int SimplexGrid::nearest(const Measure& mu) const {
  check_measure(mu, space.size(), "grid lookup");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  if (space.size() == 2) {
    // W1 between two-point measures is |mass difference| * d(0,1).
    double d01 = space.d(0, 1);
    for (int i = 0; i < size(); ++i) {
      double d = std::abs(mu[0] - nodes[static_cast<std::size_t>(i)][0]) * d01;
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }
  for (int i = 0; i < size(); ++i) {
    double d = wasserstein1(space, mu, nodes[static_cast<std::size_t>(i)]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

double SimplexGrid::mesh_bound() const {
  return space.diameter * space.size() / (2.0 * q);
}

Measure joint_measure(const Measure& mu, const ActionKernel& kernel) {
  int nx = mu.size();
  if (kernel.n_states() != nx) throw ValidationError("joint_measure: kernel row count mismatch");
  int na = kernel.row(0).size();
  std::vector<double> w(static_cast<std::size_t>(nx) * na);
  for (int x = 0; x < nx; ++x) {
    const Measure& row = kernel.row(x);
    if (row.size() != na) throw ValidationError("joint_measure: ragged kernel rows");
    for (int a = 0; a < na; ++a) {
      w[static_cast<std::size_t>(pair_index(x, a, na))] = mu[x] * row[a];
    }
  }
  return Measure{std::move(w)};
}

ActionKernel kernel_from_joint(const Measure& joint, int n_states, int n_actions) {
  if (joint.size() != n_states * n_actions) {
    throw ValidationError("kernel_from_joint: joint size does not factor as states x actions");
  }
  ActionKernel k;
  for (int x = 0; x < n_states; ++x) {
    double mass = 0.0;
    for (int a = 0; a < n_actions; ++a) mass += joint[pair_index(x, a, n_actions)];
    std::vector<double> row(static_cast<std::size_t>(n_actions));
    if (mass <= 1e-12) {
      for (double& v : row) v = 1.0 / n_actions;
    } else {
      for (int a = 0; a < n_actions; ++a) {
        row[static_cast<std::size_t>(a)] = joint[pair_index(x, a, n_actions)] / mass;
      }
    }
    k.rows.push_back(Measure{std::move(row)});
  }
  return k;
}

int sample_action(const Measure& dist, double u) { return sample_index(dist, u); }

std::vector<ActionKernel> enumerate_kernels(int n_states, int n_actions,
                                            const KernelFamily& family, std::int64_t cap) {
  if (n_states < 1 || n_actions < 1) throw ValidationError("enumerate_kernels: empty spaces");
  std::vector<Measure> rows;
  if (family.kind == KernelFamily::Kind::deterministic) {
    for (int a = 0; a < n_actions; ++a) rows.push_back(point_mass(n_actions, a));
  } else {
    int m = family.denominator;
    if (m < 1) throw ValidationError("enumerate_kernels: randomized denominator must be >= 1");
    for (const auto& counts : enumerate_compositions(m, n_actions)) {
      std::vector<double> w(static_cast<std::size_t>(n_actions));
      for (int a = 0; a < n_actions; ++a) {
        w[static_cast<std::size_t>(a)] = static_cast<double>(counts[a]) / m;
      }
      rows.push_back(Measure{std::move(w)});
    }
  }

  std::int64_t nrows = static_cast<std::int64_t>(rows.size());
  std::int64_t count = 1;
  for (int x = 0; x < n_states; ++x) {
    if (count > cap / nrows + 1) throw CapError("enumerate_kernels: family size exceeds the cap");
    count *= nrows;
  }
  if (count > cap) throw CapError("enumerate_kernels: family size exceeds the cap");

  std::vector<ActionKernel> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t idx = 0; idx < count; ++idx) {
    ActionKernel k;
    std::int64_t rem = idx;
    for (int x = 0; x < n_states; ++x) {  // state-0 row varies fastest
      k.rows.push_back(rows[static_cast<std::size_t>(rem % nrows)]);
      rem /= nrows;
    }
    out.push_back(std::move(k));
  }
  return out;
}

double ValueTable::operator()(const Measure& mu) const {
  if (interpolation == Interp::nearest) return values[static_cast<std::size_t>(grid->nearest(mu))];
  check_measure(mu, grid->space.size(), "table lookup");
  for (int i = 0; i < grid->size(); ++i) {
    const Measure& node = grid->nodes[static_cast<std::size_t>(i)];
    bool match = true;
    for (int j = 0; j < mu.size(); ++j) {
      if (std::abs(node[j] - mu[j]) > 1e-12) {
        match = false;
        break;
      }
    }
    if (match) return values[static_cast<std::size_t>(i)];
  }
  throw ValidationError("ValueTable: measure is not a grid node and interpolation is off");
}

Measure next_measure(const ModelSpec& model, const Measure& mu, const ActionKernel& kernel,
                     int e0) {
  if (e0 < 0 || e0 >= model.n_common()) throw ValidationError("next_measure: e0 out of range");
  Measure joint = joint_measure(mu, kernel);
  int nx = model.n_states(), na = model.n_actions(), ne = model.n_idio();
  std::vector<double> out(static_cast<std::size_t>(nx), 0.0);
  for (int x = 0; x < nx; ++x) {
    for (int a = 0; a < na; ++a) {
      double mass = joint[pair_index(x, a, na)];
      if (mass == 0.0) continue;
      for (int e = 0; e < ne; ++e) {
        int y = model.transition(x, a, joint, e, e0);
        if (y < 0 || y >= nx) throw ValidationError("next_measure: transition left the state space");
        out[static_cast<std::size_t>(y)] += mass * model.noise.idio[e];
      }
    }
  }
  return Measure{std::move(out)};
}

double expected_reward(const ModelSpec& model, const Measure& joint) {
  int nx = model.n_states(), na = model.n_actions();
  if (joint.size() != nx * na) throw ValidationError("expected_reward: joint size mismatch");
  double acc = 0.0;
  for (int x = 0; x < nx; ++x) {
    for (int a = 0; a < na; ++a) {
      double mass = joint[pair_index(x, a, na)];
      if (mass == 0.0) continue;
      acc += mass * model.reward(x, a, joint);
    }
  }
  return acc;
}

double bellman_apply_kernel(const ModelSpec& model, const ValueTable& w, const Measure& mu,
                            const ActionKernel& kernel) {
  Measure joint = joint_measure(mu, kernel);
  double r = expected_reward(model, joint);
  double acc = 0.0;
  for (int e0 = 0; e0 < model.n_common(); ++e0) {
    acc += model.noise.common[e0] * w(next_measure(model, mu, kernel, e0));
  }
  return r + model.beta * acc;
}

std::pair<double, ActionKernel> bellman_sup(const ModelSpec& model, const ValueTable& w,
                                            const Measure& mu, const KernelFamily& family) {
  std::vector<ActionKernel> kernels =
      enumerate_kernels(model.n_states(), model.n_actions(), family);
  double best = -std::numeric_limits<double>::infinity();
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    double v = bellman_apply_kernel(model, w, mu, kernels[k]);
    if (v > best) {
      best = v;
      best_k = k;
    }
  }
  return {best, kernels[best_k]};
}

SolveResult value_iteration(const ModelSpec& model, const SimplexGrid& grid,
                            const KernelFamily& family, double tol, int workers) {
  if (!(tol > 0.0)) throw ValidationError("value_iteration: tol must be positive");
  if (grid.space.size() != model.n_states()) {
    throw ValidationError("value_iteration: grid does not live on the model state space");
  }
  auto grid_sp = std::make_shared<SimplexGrid>(grid);
  std::vector<ActionKernel> kernels =
      enumerate_kernels(model.n_states(), model.n_actions(), family);
  int n_nodes = grid.size();
  int n_kernels = static_cast<int>(kernels.size());
  int n_common = model.n_common();
  int nw = resolve_workers(workers);

  // The one-step data never changes across sweeps: expected reward per
  // (node, kernel) and the successor node index per (node, kernel, e0).
  std::vector<double> fhat(static_cast<std::size_t>(n_nodes) * n_kernels);
  std::vector<int> succ(static_cast<std::size_t>(n_nodes) * n_kernels * n_common);
  parallel_for(n_nodes, nw, [&](int i) {
    const Measure& mu = grid.nodes[static_cast<std::size_t>(i)];
    for (int k = 0; k < n_kernels; ++k) {
      Measure joint = joint_measure(mu, kernels[static_cast<std::size_t>(k)]);
      fhat[static_cast<std::size_t>(i) * n_kernels + k] = expected_reward(model, joint);
      for (int e0 = 0; e0 < n_common; ++e0) {
        Measure nu = next_measure(model, mu, kernels[static_cast<std::size_t>(k)], e0);
        succ[(static_cast<std::size_t>(i) * n_kernels + k) * n_common + e0] = grid.nearest(nu);
      }
    }
  });

  double span = std::max(model.reward_range(), model.reward_bound());
  int max_sweeps = 64;
  if (span > 0.0) {
    max_sweeps = static_cast<int>(
                     std::ceil(std::log(tol * (1.0 - model.beta) / span) / std::log(model.beta))) *
                     4 +
                 64;
  }

  std::vector<double> prev(static_cast<std::size_t>(n_nodes), 0.0);
  std::vector<double> next(static_cast<std::size_t>(n_nodes), 0.0);
  std::vector<int> argmax(static_cast<std::size_t>(n_nodes), 0);
  double residual = std::numeric_limits<double>::infinity();
  int sweeps = 0;
  while (residual > tol) {
    if (sweeps >= max_sweeps) {
      throw CapError("value_iteration: failed to reach the residual within the sweep cap");
    }
    parallel_for(n_nodes, nw, [&](int i) {
      double best = -std::numeric_limits<double>::infinity();
      int best_k = 0;
      for (int k = 0; k < n_kernels; ++k) {
        double acc = 0.0;
        for (int e0 = 0; e0 < n_common; ++e0) {
          acc += model.noise.common[e0] *
                 prev[static_cast<std::size_t>(
                     succ[(static_cast<std::size_t>(i) * n_kernels + k) * n_common + e0])];
        }
        double v = fhat[static_cast<std::size_t>(i) * n_kernels + k] + model.beta * acc;
        if (v > best) {
          best = v;
          best_k = k;
        }
      }
      next[static_cast<std::size_t>(i)] = best;
      argmax[static_cast<std::size_t>(i)] = best_k;
    });
    residual = 0.0;
    for (int i = 0; i < n_nodes; ++i) {
      residual = std::max(residual, std::abs(next[static_cast<std::size_t>(i)] -
                                             prev[static_cast<std::size_t>(i)]));
    }
    prev.swap(next);
    ++sweeps;
  }

  SolveResult res;
  res.table = ValueTable{grid_sp, prev, Interp::nearest};
  res.policy.grid = grid_sp;
  for (int i = 0; i < n_nodes; ++i) {
    res.policy.kernels.push_back(kernels[static_cast<std::size_t>(argmax[static_cast<std::size_t>(i)])]);
  }
  res.family = family;
  res.residual = residual;
  res.sweeps = sweeps;
  return res;
}

EpsilonReport policy_epsilon(const ModelSpec& model, const SolveResult& solved, int probes) {
  if (probes < 1) throw ValidationError("policy_epsilon: probes must be >= 1");
  KernelFamily finer = solved.family.kind == KernelFamily::Kind::deterministic
                           ? KernelFamily::randomized(8)
                           : KernelFamily::randomized(solved.family.denominator * 2);
  const SimplexGrid& grid = *solved.table.grid;
  std::vector<int> idx;
  if (grid.size() <= probes) {
    for (int i = 0; i < grid.size(); ++i) idx.push_back(i);
  } else {
    for (int j = 0; j < probes; ++j) {
      int i = static_cast<int>(std::llround(static_cast<double>(j) * (grid.size() - 1) / (probes - 1)));
      if (idx.empty() || idx.back() != i) idx.push_back(i);
    }
  }
  EpsilonReport rep;
  rep.residual = solved.residual;
  for (int i : idx) {
    const Measure& node = grid.nodes[static_cast<std::size_t>(i)];
    double base = bellman_sup(model, solved.table, node, solved.family).first;
    double fine = bellman_sup(model, solved.table, node, finer).first;
    rep.family_gap = std::max(rep.family_gap, fine - base);
  }
  rep.epsilon = rep.residual + rep.family_gap;
  return rep;
}

GainEstimate policy_gain(const ModelSpec& model, const MeanFieldPolicy& policy,
                         const Measure& mu0, int horizon, int common_paths, std::uint64_t seed,
                         int workers) {
  if (horizon < 1) throw ValidationError("policy_gain: horizon must be >= 1");
  if (common_paths < 1) throw ValidationError("policy_gain: common_paths must be >= 1");
  check_measure(mu0, model.n_states(), "policy_gain start law");
  int nw = resolve_workers(workers);
  std::vector<double> vals(static_cast<std::size_t>(common_paths));
  parallel_for(common_paths, nw, [&](int path) {
    Rng rng(seed, static_cast<std::uint64_t>(path));
    Measure mu = mu0;
    double gain = 0.0;
    double disc = 1.0;
    for (int t = 0; t < horizon; ++t) {
      const ActionKernel& kernel = policy.at(mu);
      gain += disc * expected_reward(model, joint_measure(mu, kernel));
      int e0 = sample_index(model.noise.common, rng.u01());
      mu = next_measure(model, mu, kernel, e0);
      disc *= model.beta;
    }
    vals[static_cast<std::size_t>(path)] = gain;
  });
  MeanSe ms = mean_se(vals);
  GainEstimate g;
  g.mean = ms.mean;
  g.se = ms.se;
  g.truncation_bias =
      std::pow(model.beta, horizon) * model.reward_bound() / (1.0 - model.beta);
  return g;
}

std::string solve_artifact_to_json(const ModelSpec& model, const SolveResult& solved) {
  ordered_json j;
  j["artifact"] = "mkv-solver";
  j["version"] = kVersion;
  j["config"] = model.config_json.empty() ? ordered_json()
                                          : ordered_json::parse(model.config_json);
  j["q"] = solved.table.grid->q;
  j["family"]["kind"] =
      solved.family.kind == KernelFamily::Kind::deterministic ? "deterministic" : "randomized";
  j["family"]["denominator"] = solved.family.denominator;
  j["residual"] = solved.residual;
  j["sweeps"] = solved.sweeps;
  j["epsilon"] = solved.policy.epsilon;
  j["values"] = solved.table.values;
  ordered_json kernels = ordered_json::array();
  for (const ActionKernel& k : solved.policy.kernels) {
    ordered_json rows = ordered_json::array();
    for (const Measure& r : k.rows) rows.push_back(r.w);
    kernels.push_back(std::move(rows));
  }
  j["kernels"] = std::move(kernels);
  return j.dump(2) + "\n";
}

SolveResult solve_artifact_from_json(const ModelSpec& model, const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("artifact: parse error: ") + e.what());
  }
  if (!j.is_object() || j.value("artifact", "") != "mkv-solver") {
    throw ValidationError("artifact: not a solver artifact");
  }
  SolveResult res;
  int q = j.at("q").get<int>();
  auto grid_sp = std::make_shared<SimplexGrid>(make_simplex_grid(model.states, q));
  std::string kind = j.at("family").at("kind").get<std::string>();
  res.family = kind == "deterministic"
                   ? KernelFamily::deterministic()
                   : KernelFamily::randomized(j.at("family").at("denominator").get<int>());
  res.residual = j.at("residual").get<double>();
  res.sweeps = j.at("sweeps").get<int>();
  std::vector<double> values = j.at("values").get<std::vector<double>>();
  if (static_cast<int>(values.size()) != grid_sp->size()) {
    throw ValidationError("artifact: value count does not match the grid");
  }
  res.table = ValueTable{grid_sp, std::move(values), Interp::nearest};
  res.policy.grid = grid_sp;
  res.policy.epsilon = j.at("epsilon").get<double>();
  for (const auto& jk : j.at("kernels")) {
    ActionKernel k;
    for (const auto& jr : jk) {
      Measure row{jr.get<std::vector<double>>()};
      check_measure(row, model.n_actions(), "artifact kernel row");
      k.rows.push_back(std::move(row));
    }
    if (k.n_states() != model.n_states()) throw ValidationError("artifact: kernel row count");
    res.policy.kernels.push_back(std::move(k));
  }
  if (static_cast<int>(res.policy.kernels.size()) != grid_sp->size()) {
    throw ValidationError("artifact: kernel count does not match the grid");
  }
  return res;
}

}  // namespace mfmdp
