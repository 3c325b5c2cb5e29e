#include "mfmdp/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mfmdp/combinatorics.hpp"
#include "mfmdp/rng.hpp"
#include "mfmdp/transport.hpp"

namespace mfmdp {

using ordered_json = nlohmann::ordered_json;

static void validate_metric_space(const FiniteMetricSpace& s, const char* what) {
  int n = s.size();
  if (n < 1) throw ValidationError(std::string(what) + ": needs at least one point");
  if (s.dist.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    throw ValidationError(std::string(what) + ": distance matrix shape mismatch");
  }
  for (int i = 0; i < n; ++i) {
    if (!(s.d(i, i) == 0.0)) {
      throw ValidationError(std::string(what) + ": nonzero diagonal distance");
    }
    for (int j = 0; j < n; ++j) {
      double dij = s.d(i, j);
      if (!std::isfinite(dij)) throw ValidationError(std::string(what) + ": non-finite distance");
      if (i != j && !(dij > 0.0)) {
        throw ValidationError(std::string(what) + ": off-diagonal distances must be positive");
      }
      if (dij != s.d(j, i)) throw ValidationError(std::string(what) + ": asymmetric distances");
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        if (s.d(i, j) > s.d(i, k) + s.d(k, j) + 1e-12) {
          throw ValidationError(std::string(what) + ": triangle inequality violated");
        }
      }
    }
  }
}

FiniteMetricSpace make_metric_space(std::vector<std::string> labels, std::vector<double> dist) {
  FiniteMetricSpace s;
  s.labels = std::move(labels);
  s.dist = std::move(dist);
  validate_metric_space(s, "metric space");
  s.diameter = *std::max_element(s.dist.begin(), s.dist.end());
  return s;
}

FiniteMetricSpace discrete_space(int n, const std::string& label_prefix) {
  if (n < 1) throw ValidationError("discrete_space: needs at least one point");
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels.push_back(label_prefix + std::to_string(i));
  std::vector<double> dist(static_cast<std::size_t>(n) * n, 1.0);
  for (int i = 0; i < n; ++i) dist[static_cast<std::size_t>(i) * n + i] = 0.0;
  return make_metric_space(std::move(labels), std::move(dist));
}

FiniteMetricSpace product_space(const FiniteMetricSpace& x, const FiniteMetricSpace& a) {
  int nx = x.size(), na = a.size(), n = nx * na;
  FiniteMetricSpace p;
  p.labels.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < na; ++j) p.labels.push_back(x.labels[i] + "|" + a.labels[j]);
  }
  p.dist.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < na; ++j) {
      for (int k = 0; k < nx; ++k) {
        for (int l = 0; l < na; ++l) {
          p.dist[static_cast<std::size_t>(pair_index(i, j, na)) * n + pair_index(k, l, na)] =
              x.d(i, k) + a.d(j, l);
        }
      }
    }
  }
  validate_metric_space(p, "product space");
  p.diameter = x.diameter + a.diameter;
  return p;
}

Measure make_measure(std::vector<double> w) {
  Measure m{std::move(w)};
  check_measure(m, -1, "measure");
  return m;
}

Measure uniform_measure(int n) {
  if (n < 1) throw ValidationError("uniform_measure: empty support");
  return Measure{std::vector<double>(static_cast<std::size_t>(n), 1.0 / n)};
}

Measure point_mass(int n, int at) {
  if (at < 0 || at >= n) throw ValidationError("point_mass: index out of range");
  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  w[static_cast<std::size_t>(at)] = 1.0;
  return Measure{std::move(w)};
}

int sample_index(const Measure& m, double u) {
  if (!(u >= 0.0 && u < 1.0)) throw ValidationError("sample_index: u must lie in [0,1)");
  double c = 0.0;
  for (int k = 0; k < m.size(); ++k) {
    c += m[k];
    if (u < c) return k;
  }
  return m.size() - 1;
}

void check_measure(const Measure& m, int expected_size, const char* what) {
  if (m.size() < 1) throw ValidationError(std::string(what) + ": empty weight vector");
  if (expected_size >= 0 && m.size() != expected_size) {
    throw ValidationError(std::string(what) + ": weight vector has wrong length");
  }
  double sum = 0.0;
  for (double v : m.w) {
    if (!std::isfinite(v)) throw ValidationError(std::string(what) + ": non-finite weight");
    if (v < 0.0) throw ValidationError(std::string(what) + ": negative weight");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError(std::string(what) + ": weights sum to " + std::to_string(sum));
  }
}

double ModelSpec::reward_bound() const {
  return std::max(std::abs(reward_min), std::abs(reward_max));
}

// Sweep nodes: the full denominator-`denom` grid when small enough, otherwise
// all vertices, the uniform measure and multinomially sampled grid nodes.
static std::vector<Measure> sweep_measures(int n_points, int denom) {
  std::vector<Measure> out;
  if (composition_count(denom, n_points) <= 200000) {
    for (const auto& c : enumerate_compositions(denom, n_points)) {
      std::vector<double> w(static_cast<std::size_t>(n_points));
      for (int i = 0; i < n_points; ++i) w[static_cast<std::size_t>(i)] = double(c[i]) / denom;
      out.push_back(Measure{std::move(w)});
    }
    return out;
  }
  for (int i = 0; i < n_points; ++i) out.push_back(point_mass(n_points, i));
  out.push_back(uniform_measure(n_points));
  Rng rng(0x5eedf00dull);
  for (int s = 0; s < 200000 / denom; ++s) {
    std::vector<int> counts(static_cast<std::size_t>(n_points), 0);
    for (int t = 0; t < denom; ++t) counts[static_cast<std::size_t>(rng.uniform_int(n_points))]++;
    std::vector<double> w(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) w[static_cast<std::size_t>(i)] = double(counts[i]) / denom;
    out.push_back(Measure{std::move(w)});
  }
  return out;
}

ModelSpec finalize_model(ModelSpec m, int reward_sweep_denominator) {
  validate_metric_space(m.states, "state space");
  validate_metric_space(m.actions, "action space");
  m.states.diameter = *std::max_element(m.states.dist.begin(), m.states.dist.end());
  m.actions.diameter = *std::max_element(m.actions.dist.begin(), m.actions.dist.end());
  check_measure(m.noise.idio, -1, "idiosyncratic noise law");
  check_measure(m.noise.common, -1, "common noise law");
  if (!(m.beta > 0.0 && m.beta < 1.0)) throw ValidationError("beta must lie in (0,1)");
  if (!(m.k_big_f > 0.0)) throw ValidationError("k_big_f must be positive");
  if (!(m.k_f > 0.0)) throw ValidationError("k_f must be positive");
  if (!m.transition) throw ValidationError("transition not set (custom family without a registered function?)");
  if (!m.reward) throw ValidationError("reward not set (custom family without a registered function?)");
  if (reward_sweep_denominator < 1) throw ValidationError("reward sweep denominator must be >= 1");

  m.pairs = product_space(m.states, m.actions);

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Measure& mu : sweep_measures(m.pairs.size(), reward_sweep_denominator)) {
    for (int x = 0; x < m.n_states(); ++x) {
      for (int a = 0; a < m.n_actions(); ++a) {
        double v = m.reward(x, a, mu);
        if (!std::isfinite(v)) throw ValidationError("reward returned a non-finite value");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  m.reward_min = lo;
  m.reward_max = hi;
  return m;
}

double gamma_exponent(double beta, double k_big_f) {
  if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("gamma_exponent: beta must lie in (0,1)");
  if (!(k_big_f > 0.0)) throw ValidationError("gamma_exponent: k_big_f must be positive");
  double lg = std::log(2.0 * k_big_f);
  if (lg <= 0.0) return 1.0;
  return std::min(1.0, -std::log(beta) / lg);
}

int truncation_horizon(double beta, double reward_bound, double tol, int max_horizon) {
  if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("truncation_horizon: beta must lie in (0,1)");
  if (!(tol > 0.0)) throw ValidationError("truncation_horizon: tol must be positive");
  if (reward_bound < 0.0) throw ValidationError("truncation_horizon: negative reward bound");
  double tail = reward_bound / (1.0 - beta);
  for (int t = 0; t <= max_horizon; ++t) {
    if (tail <= tol) return t;
    tail *= beta;
  }
  throw CapError("truncation_horizon: exceeded the horizon cap");
}

LipschitzReport estimate_lipschitz_constants(const ModelSpec& m, int samples, std::uint64_t seed,
                                             int grid_denominator) {
  if (samples < 1) throw ValidationError("estimate_lipschitz_constants: samples must be >= 1");
  std::vector<Measure> nodes = sweep_measures(m.pairs.size(), grid_denominator);

  LipschitzReport rep;
  int nx = m.n_states(), na = m.n_actions();
  for (int s = 0; s < samples; ++s) {
    Rng rng(seed, static_cast<std::uint64_t>(s));
    const Measure& mu = nodes[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(nodes.size())))];
    const Measure& nu = nodes[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(nodes.size())))];
    double w = wasserstein1(m.pairs, mu, nu);
    for (int x = 0; x < nx; ++x) {
      for (int a = 0; a < na; ++a) {
        for (int xp = 0; xp < nx; ++xp) {
          for (int ap = 0; ap < na; ++ap) {
            double denom = m.states.d(x, xp) + m.actions.d(a, ap) + w;
            if (denom <= 1e-12) continue;
            for (int e0 = 0; e0 < m.n_common(); ++e0) {
              double acc = 0.0;
              for (int e = 0; e < m.n_idio(); ++e) {
                int y = m.transition(x, a, mu, e, e0);
                int yp = m.transition(xp, ap, nu, e, e0);
                acc += m.noise.idio[e] * m.states.d(y, yp);
              }
              rep.k_big_f_hat = std::max(rep.k_big_f_hat, acc / denom);
            }
            double df = std::abs(m.reward(x, a, mu) - m.reward(xp, ap, nu));
            rep.k_f_hat = std::max(rep.k_f_hat, df / denom);
          }
        }
      }
    }
  }
  if (rep.k_big_f_hat > m.k_big_f + 1e-9) {
    rep.warnings.push_back("empirical transition constant " + std::to_string(rep.k_big_f_hat) +
                           " exceeds declared " + std::to_string(m.k_big_f));
  }
  if (rep.k_f_hat > m.k_f + 1e-9) {
    rep.warnings.push_back("empirical reward constant " + std::to_string(rep.k_f_hat) +
                           " exceeds declared " + std::to_string(m.k_f));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

void require_keys(const ordered_json& obj, const std::vector<std::string>& allowed,
                  const std::string& where) {
  if (!obj.is_object()) throw ValidationError("config: " + where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ValidationError("config: unknown key \"" + it.key() + "\" in " + where);
    }
  }
}

const ordered_json& require(const ordered_json& obj, const std::string& key,
                            const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError("config: missing key \"" + key + "\" in " + where);
  return *it;
}

double as_number(const ordered_json& v, const std::string& where) {
  if (!v.is_number()) throw ValidationError("config: " + where + " must be a number");
  return v.get<double>();
}

int as_int(const ordered_json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ValidationError("config: " + where + " must be an integer");
  return v.get<int>();
}

std::vector<double> as_number_list(const ordered_json& v, const std::string& where) {
  if (!v.is_array()) throw ValidationError("config: " + where + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(as_number(e, where + " entry"));
  return out;
}

FiniteMetricSpace parse_space(const ordered_json& j, const std::string& where) {
  require_keys(j, {"labels", "dist"}, where);
  const auto& jl = require(j, "labels", where);
  if (!jl.is_array() || jl.empty()) {
    throw ValidationError("config: " + where + ".labels must be a nonempty array");
  }
  std::vector<std::string> labels;
  for (const auto& e : jl) {
    if (!e.is_string()) throw ValidationError("config: " + where + ".labels entries must be strings");
    labels.push_back(e.get<std::string>());
  }
  const auto& jd = require(j, "dist", where);
  if (!jd.is_array() || jd.size() != labels.size()) {
    throw ValidationError("config: " + where + ".dist must be a full square matrix");
  }
  std::vector<double> dist;
  for (const auto& row : jd) {
    if (!row.is_array() || row.size() != labels.size()) {
      throw ValidationError("config: " + where + ".dist must be a full square matrix");
    }
    for (const auto& e : row) dist.push_back(as_number(e, where + ".dist entry"));
  }
  return make_metric_space(std::move(labels), std::move(dist));
}

Measure parse_weights(const ordered_json& v, int size, const std::string& where) {
  if (v.is_string() && v.get<std::string>() == "uniform") return uniform_measure(size);
  Measure m{as_number_list(v, where)};
  check_measure(m, size, where.c_str());
  return m;
}

TransitionFn build_transition(const std::string& family, const ordered_json& params,
                              const ModelSpec& m) {
  if (family == "influence_threshold") {
    require_keys(params, {"eta", "common_shift"}, "transition.params");
    if (m.n_states() != 2 || m.n_actions() != 2) {
      throw ValidationError("config: influence_threshold requires two states and two actions");
    }
    double eta = as_number(require(params, "eta", "transition.params"), "transition.params.eta");
    std::vector<double> shift = as_number_list(require(params, "common_shift", "transition.params"),
                                               "transition.params.common_shift");
    if (static_cast<int>(shift.size()) != m.n_common()) {
      throw ValidationError("config: common_shift length must match the common noise size");
    }
    int n_idio = m.n_idio();
    int na = m.n_actions();
    // Next state is 1 iff the agent's noise cell midpoint falls below the
    // clamped influence level: mass currently in state 1, plus eta per unit of
    // action, plus the common shift.
    return [eta, shift, n_idio, na](int /*x*/, int a, const Measure& joint, int e, int e0) {
      double m1 = 0.0;
      for (int j = 0; j < na; ++j) m1 += joint[pair_index(1, j, na)];
      double p = m1 + eta * a + shift[static_cast<std::size_t>(e0)];
      p = std::clamp(p, 0.0, 1.0);
      double u = (e + 0.5) / n_idio;
      return u < p ? 1 : 0;
    };
  }
  if (family == "constant") {
    require_keys(params, {"target"}, "transition.params");
    int target = as_int(require(params, "target", "transition.params"), "transition.params.target");
    if (target < 0 || target >= m.n_states()) {
      throw ValidationError("config: constant transition target out of range");
    }
    return [target](int, int, const Measure&, int, int) { return target; };
  }
  throw ValidationError("config: unknown transition family \"" + family + "\"");
}

RewardFn build_reward(const std::string& family, const ordered_json& params, const ModelSpec& m) {
  if (family == "constant") {
    require_keys(params, {"value"}, "reward.params");
    double v = as_number(require(params, "value", "reward.params"), "reward.params.value");
    return [v](int, int, const Measure&) { return v; };
  }
  if (family == "affine") {
    require_keys(params, {"state_coef", "action_coef", "constant"}, "reward.params");
    std::vector<double> sc = as_number_list(require(params, "state_coef", "reward.params"),
                                            "reward.params.state_coef");
    std::vector<double> ac = as_number_list(require(params, "action_coef", "reward.params"),
                                            "reward.params.action_coef");
    double c = params.contains("constant")
                   ? as_number(params.at("constant"), "reward.params.constant")
                   : 0.0;
    if (static_cast<int>(sc.size()) != m.n_states() || static_cast<int>(ac.size()) != m.n_actions()) {
      throw ValidationError("config: affine reward coefficient lengths must match the spaces");
    }
    return [sc, ac, c](int x, int a, const Measure&) {
      return c + sc[static_cast<std::size_t>(x)] + ac[static_cast<std::size_t>(a)];
    };
  }
  if (family == "distance_to") {
    require_keys(params, {"point"}, "reward.params");
    int p = as_int(require(params, "point", "reward.params"), "reward.params.point");
    if (p < 0 || p >= m.n_states()) throw ValidationError("config: distance_to point out of range");
    FiniteMetricSpace states = m.states;
    return [states, p](int x, int, const Measure&) { return states.d(x, p); };
  }
  throw ValidationError("config: unknown reward family \"" + family + "\"");
}

}  // namespace

ModelSpec model_from_config(const std::string& json_text, TransitionFn custom_transition,
                            RewardFn custom_reward) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("config: parse error: ") + e.what());
  }
  require_keys(j, {"state_space", "action_space", "noise", "transition", "reward", "beta",
                   "k_big_f", "k_f"},
               "top level");

  ModelSpec m;
  m.states = parse_space(require(j, "state_space", "top level"), "state_space");
  m.actions = parse_space(require(j, "action_space", "top level"), "action_space");

  const auto& jn = require(j, "noise", "top level");
  require_keys(jn, {"idio_size", "idio_weights", "common_size", "common_weights"}, "noise");
  int idio_size = as_int(require(jn, "idio_size", "noise"), "noise.idio_size");
  int common_size = as_int(require(jn, "common_size", "noise"), "noise.common_size");
  if (idio_size < 1 || common_size < 1) throw ValidationError("config: noise sizes must be >= 1");
  m.noise.idio = parse_weights(require(jn, "idio_weights", "noise"), idio_size, "noise.idio_weights");
  m.noise.common =
      parse_weights(require(jn, "common_weights", "noise"), common_size, "noise.common_weights");

  m.beta = as_number(require(j, "beta", "top level"), "beta");
  m.k_big_f = as_number(require(j, "k_big_f", "top level"), "k_big_f");
  m.k_f = as_number(require(j, "k_f", "top level"), "k_f");

  const auto& jt = require(j, "transition", "top level");
  require_keys(jt, {"family", "params"}, "transition");
  const auto& jr = require(j, "reward", "top level");
  require_keys(jr, {"family", "params"}, "reward");
  std::string tfam = require(jt, "family", "transition").get<std::string>();
  std::string rfam = require(jr, "family", "reward").get<std::string>();

  if (tfam == "custom") {
    if (jt.contains("params")) throw ValidationError("config: custom transition takes no params");
    m.transition = std::move(custom_transition);
  } else {
    ordered_json params = jt.contains("params") ? jt.at("params") : ordered_json::object();
    m.transition = build_transition(tfam, params, m);
  }
  if (rfam == "custom") {
    if (jr.contains("params")) throw ValidationError("config: custom reward takes no params");
    m.reward = std::move(custom_reward);
  } else {
    ordered_json params = jr.contains("params") ? jr.at("params") : ordered_json::object();
    m.reward = build_reward(rfam, params, m);
  }

  m.config_json = j.dump();
  return finalize_model(std::move(m));
}

ModelSpec model_from_config_file(const std::string& path, TransitionFn custom_transition,
                                 RewardFn custom_reward) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_config(ss.str(), std::move(custom_transition), std::move(custom_reward));
}

}  // namespace mfmdp
