#include "mfmdp/nagent_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

#include <json.hpp>

#include "mfmdp/parallel.hpp"
#include "mfmdp/rng.hpp"
#include "mfmdp/version.hpp"

namespace mfmdp {

using ordered_json = nlohmann::ordered_json;

namespace {

double ipow(double base, int exp) {
  double out = 1.0;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}

std::int64_t multinomial_coefficient(const std::vector<int>& counts) {
  std::int64_t coef = 1;
  int running = 0;
  for (int c : counts) {
    running += c;
    coef *= binomial(running, c);
  }
  return coef;
}

void check_joint_state(const JointState& x, int n_states, const char* what) {
  if (x.empty()) throw ValidationError(std::string(what) + ": joint state is empty");
  for (int xi : x) {
    if (xi < 0 || xi >= n_states) {
      throw ValidationError(std::string(what) + ": state index out of range");
    }
  }
}

void check_joint_action(const JointAction& a, std::size_t n, int n_actions,
                        const char* what) {
  if (a.size() != n) throw ValidationError(std::string(what) + ": action length mismatch");
  for (int ai : a) {
    if (ai < 0 || ai >= n_actions) {
      throw ValidationError(std::string(what) + ": action index out of range");
    }
  }
}

// Law of one agent's next state given its own (state, action), the shared
// joint measure and the common draw; the agent's own noise is summed out.
std::vector<double> agent_law(const ModelSpec& model, int x, int a, const Measure& mu,
                              int e0) {
  std::vector<double> p(static_cast<std::size_t>(model.n_states()), 0.0);
  for (int e = 0; e < model.n_idio(); ++e) {
    int y = model.transition(x, a, mu, e, e0);
    if (y < 0 || y >= model.n_states()) {
      throw ValidationError("transition returned a state index out of range");
    }
    p[static_cast<std::size_t>(y)] += model.noise.idio[e];
  }
  return p;
}

// Exact occupancy distribution of `count` independent draws from `p`:
// one term per composition, weighted by the multinomial pmf.
std::vector<std::pair<std::vector<int>, double>> multinomial_terms(
    int count, const std::vector<double>& p) {
  std::vector<std::pair<std::vector<int>, double>> out;
  for (const std::vector<int>& c :
       enumerate_compositions(count, static_cast<int>(p.size()))) {
    double prob = static_cast<double>(multinomial_coefficient(c));
    for (std::size_t i = 0; i < p.size(); ++i) prob *= ipow(p[i], c[i]);
    if (prob > 0.0) out.emplace_back(c, prob);
  }
  return out;
}

Measure measure_from_counts(const std::vector<int>& counts, int n) {
  std::vector<double> w(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    w[i] = static_cast<double>(counts[i]) / n;
  }
  return make_measure(std::move(w));
}

std::vector<int> xa_counts_of(const JointState& x, const JointAction& a, int n_states,
                              int n_actions) {
  std::vector<int> counts(static_cast<std::size_t>(n_states) * n_actions, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    ++counts[static_cast<std::size_t>(pair_index(x[i], a[i], n_actions))];
  }
  return counts;
}

// Occupancy distribution of the next joint state, given the (state, action)
// occupancy and the common draw. Agents move independently here, so the
// product over |E|^N noise tuples reduces to a convolution of per-(x, a)
// multinomials; the result is exactly that product sum, term-regrouped.
std::vector<std::pair<std::vector<int>, double>> class_step_distribution(
    const ModelSpec& model, const std::vector<int>& xa_counts, int n, int e0) {
  int nx = model.n_states();
  int na = model.n_actions();
  Measure mu = measure_from_counts(xa_counts, n);
  std::vector<std::pair<std::vector<int>, double>> dist;
  dist.emplace_back(std::vector<int>(static_cast<std::size_t>(nx), 0), 1.0);
  for (int x = 0; x < nx; ++x) {
    for (int a = 0; a < na; ++a) {
      int count = xa_counts[static_cast<std::size_t>(pair_index(x, a, na))];
      if (count == 0) continue;
      auto terms = multinomial_terms(count, agent_law(model, x, a, mu, e0));
      std::map<std::vector<int>, double> next;
      for (const auto& [base, pb] : dist) {
        for (const auto& [add, pa] : terms) {
          std::vector<int> merged = base;
          for (int s = 0; s < nx; ++s) merged[static_cast<std::size_t>(s)] += add[s];
          next[merged] += pb * pa;
        }
      }
      dist.assign(next.begin(), next.end());
    }
  }
  return dist;
}

double reward_from_counts(const ModelSpec& model, const std::vector<int>& xa_counts,
                          int n) {
  Measure mu = measure_from_counts(xa_counts, n);
  double r = 0.0;
  for (int x = 0; x < model.n_states(); ++x) {
    for (int a = 0; a < model.n_actions(); ++a) {
      int count = xa_counts[static_cast<std::size_t>(pair_index(x, a, model.n_actions()))];
      if (count == 0) continue;
      r += static_cast<double>(count) / n * model.reward(x, a, mu);
    }
  }
  return r;
}

void check_xa_counts(const ModelSpec& model, const std::vector<int>& xa_counts, int n,
                     const char* what) {
  if (static_cast<int>(xa_counts.size()) != model.n_states() * model.n_actions()) {
    throw ValidationError(std::string(what) + ": occupancy vector has the wrong length");
  }
  int total = 0;
  for (int c : xa_counts) {
    if (c < 0) throw ValidationError(std::string(what) + ": negative occupancy");
    total += c;
  }
  if (total != n) {
    throw ValidationError(std::string(what) + ": occupancy does not sum to the agent count");
  }
}

bool product_exceeds(std::uint64_t cap, std::initializer_list<std::pair<int, int>> factors) {
  long double prod = 1.0L;
  for (auto [base, exp] : factors) {
    for (int i = 0; i < exp; ++i) prod *= base;
  }
  return prod > static_cast<long double>(cap);
}

int sweep_cap(const ModelSpec& model, double tol) {
  double span = std::max(model.reward_range(), model.reward_bound());
  if (span <= 0.0) return 64;
  return static_cast<int>(
             std::ceil(std::log(tol * (1.0 - model.beta) / span) / std::log(model.beta))) *
             4 +
         64;
}

}  // namespace

CanonicalClass canonical_class(const JointState& x, int n_states) {
  check_joint_state(x, n_states, "canonical_class");
  CanonicalClass cls;
  cls.counts.assign(static_cast<std::size_t>(n_states), 0);
  for (int xi : x) ++cls.counts[static_cast<std::size_t>(xi)];
  cls.representatives = multinomial_coefficient(cls.counts);
  return cls;
}

JointState class_representative(const std::vector<int>& counts) {
  JointState x;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    if (counts[s] < 0) throw ValidationError("class_representative: negative count");
    x.insert(x.end(), static_cast<std::size_t>(counts[s]), static_cast<int>(s));
  }
  if (x.empty()) throw ValidationError("class_representative: empty class");
  return x;
}

double NAgentValueTable::at_counts(const std::vector<int>& counts) const {
  if (static_cast<int>(counts.size()) != n_states) {
    throw ValidationError("value table: count vector has the wrong length");
  }
  int total = 0;
  for (int c : counts) {
    if (c < 0) throw ValidationError("value table: negative count");
    total += c;
  }
  if (total != n) throw ValidationError("value table: counts do not sum to the agent count");
  CompositionIndexer idx(n, n_states);
  return values[static_cast<std::size_t>(idx.rank(counts))];
}

double NAgentValueTable::at(const JointState& x) const {
  if (static_cast<int>(x.size()) != n) {
    throw ValidationError("value table: joint state has the wrong number of agents");
  }
  return at_counts(canonical_class(x, n_states).counts);
}

NAgentValueTable make_nagent_table(int n, int n_states, double fill) {
  if (n < 1) throw ValidationError("value table: need at least one agent");
  if (n_states < 1) throw ValidationError("value table: need at least one state");
  NAgentValueTable t;
  t.n = n;
  t.n_states = n_states;
  t.values.assign(static_cast<std::size_t>(composition_count(n, n_states)), fill);
  return t;
}

Measure empirical_joint(const JointState& x, const JointAction& a, int n_states,
                        int n_actions) {
  check_joint_state(x, n_states, "empirical_joint");
  check_joint_action(a, x.size(), n_actions, "empirical_joint");
  return measure_from_counts(xa_counts_of(x, a, n_states, n_actions),
                             static_cast<int>(x.size()));
}

JointState step_joint(const ModelSpec& model, const JointState& x, const JointAction& a,
                      const std::vector<int>& e, int e0) {
  check_joint_state(x, model.n_states(), "step_joint");
  check_joint_action(a, x.size(), model.n_actions(), "step_joint");
  if (e.size() != x.size()) throw ValidationError("step_joint: noise length mismatch");
  for (int ei : e) {
    if (ei < 0 || ei >= model.n_idio()) {
      throw ValidationError("step_joint: noise index out of range");
    }
  }
  if (e0 < 0 || e0 >= model.n_common()) {
    throw ValidationError("step_joint: common noise index out of range");
  }
  Measure mu = empirical_joint(x, a, model.n_states(), model.n_actions());
  JointState y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    int yi = model.transition(x[i], a[i], mu, e[i], e0);
    if (yi < 0 || yi >= model.n_states()) {
      throw ValidationError("step_joint: transition returned a state index out of range");
    }
    y[i] = yi;
  }
  return y;
}

double reward_joint(const ModelSpec& model, const JointState& x, const JointAction& a) {
  check_joint_state(x, model.n_states(), "reward_joint");
  check_joint_action(a, x.size(), model.n_actions(), "reward_joint");
  return reward_from_counts(model,
                            xa_counts_of(x, a, model.n_states(), model.n_actions()),
                            static_cast<int>(x.size()));
}

double bellman_count_action(const ModelSpec& model, const NAgentValueTable& W,
                            const std::vector<int>& xa_counts) {
  check_xa_counts(model, xa_counts, W.n, "bellman_count_action");
  if (W.n_states != model.n_states()) {
    throw ValidationError("bellman_count_action: table state count mismatch");
  }
  double acc = 0.0;
  for (int e0 = 0; e0 < model.n_common(); ++e0) {
    double cont = 0.0;
    for (const auto& [counts, prob] : class_step_distribution(model, xa_counts, W.n, e0)) {
      cont += prob * W.at_counts(counts);
    }
    acc += model.noise.common[e0] * cont;
  }
  return reward_from_counts(model, xa_counts, W.n) + model.beta * acc;
}

double bellman_TN_action(const ModelSpec& model, const NAgentValueTable& W,
                         const JointState& x, const JointAction& a) {
  check_joint_state(x, model.n_states(), "bellman_TN_action");
  check_joint_action(a, x.size(), model.n_actions(), "bellman_TN_action");
  if (static_cast<int>(x.size()) != W.n) {
    throw ValidationError("bellman_TN_action: table agent count mismatch");
  }
  return bellman_count_action(model, W,
                              xa_counts_of(x, a, model.n_states(), model.n_actions()));
}

NSolveResult solve_VN(const ModelSpec& model, int n, double tol, std::uint64_t cap,
                      int workers) {
  if (n < 1) throw ValidationError("solve_VN: need at least one agent");
  if (!(tol > 0.0)) throw ValidationError("solve_VN: tol must be positive");
  if (product_exceeds(cap, {{model.n_states(), n}, {model.n_actions(), n},
                            {model.n_idio(), n}})) {
    throw CapError("solve_VN: |X|^n * |A|^n * |E|^n exceeds the cap");
  }
  int nx = model.n_states();
  int na = model.n_actions();
  int n_common = model.n_common();
  int nw = resolve_workers(workers);
  CompositionIndexer idx(n, nx);
  std::size_t n_classes = static_cast<std::size_t>(idx.size());

  // Per class, every per-state split of its agents over actions; per split,
  // the sweep-invariant pieces: expected reward and, per common draw, the
  // sparse successor-class distribution.
  struct Option {
    double fhat = 0.0;
    std::vector<std::vector<std::pair<std::int64_t, double>>> succ;  // [e0] -> (class, p)
  };
  std::vector<std::vector<Option>> options(n_classes);
  parallel_for(n_classes, nw, [&](std::size_t ci) {
    std::vector<int> counts = idx.unrank(static_cast<std::int64_t>(ci));
    // splits per state, state 0 varying fastest
    std::vector<std::vector<std::vector<int>>> splits(static_cast<std::size_t>(nx));
    std::size_t n_options = 1;
    for (int s = 0; s < nx; ++s) {
      splits[static_cast<std::size_t>(s)] =
          enumerate_compositions(counts[static_cast<std::size_t>(s)], na);
      n_options *= splits[static_cast<std::size_t>(s)].size();
    }
    std::vector<std::size_t> pick(static_cast<std::size_t>(nx), 0);
    for (std::size_t oi = 0; oi < n_options; ++oi) {
      std::vector<int> xa(static_cast<std::size_t>(nx) * na, 0);
      for (int s = 0; s < nx; ++s) {
        const std::vector<int>& split = splits[static_cast<std::size_t>(s)][pick[static_cast<std::size_t>(s)]];
        for (int a = 0; a < na; ++a) xa[static_cast<std::size_t>(pair_index(s, a, na))] = split[static_cast<std::size_t>(a)];
      }
      Option opt;
      opt.fhat = reward_from_counts(model, xa, n);
      opt.succ.resize(static_cast<std::size_t>(n_common));
      for (int e0 = 0; e0 < n_common; ++e0) {
        for (const auto& [scounts, prob] : class_step_distribution(model, xa, n, e0)) {
          opt.succ[static_cast<std::size_t>(e0)].emplace_back(idx.rank(scounts), prob);
        }
      }
      options[ci].push_back(std::move(opt));
      for (int s = 0; s < nx; ++s) {
        if (++pick[static_cast<std::size_t>(s)] < splits[static_cast<std::size_t>(s)].size()) break;
        pick[static_cast<std::size_t>(s)] = 0;
      }
    }
  });

  int max_sweeps = sweep_cap(model, tol);
  std::vector<double> prev(n_classes, 0.0);
  std::vector<double> next(n_classes, 0.0);
  double residual = std::numeric_limits<double>::infinity();
  int sweeps = 0;
  while (residual > tol) {
    if (sweeps >= max_sweeps) {
      throw CapError("solve_VN: failed to reach the residual within the sweep cap");
    }
    parallel_for(n_classes, nw, [&](std::size_t ci) {
      double best = -std::numeric_limits<double>::infinity();
      for (const Option& opt : options[ci]) {
        double acc = 0.0;
        for (int e0 = 0; e0 < n_common; ++e0) {
          double cont = 0.0;
          for (const auto& [cls, p] : opt.succ[static_cast<std::size_t>(e0)]) {
            cont += p * prev[static_cast<std::size_t>(cls)];
          }
          acc += model.noise.common[e0] * cont;
        }
        double v = opt.fhat + model.beta * acc;
        if (v > best) best = v;
      }
      next[ci] = best;
    });
    residual = 0.0;
    for (std::size_t i = 0; i < n_classes; ++i) {
      residual = std::max(residual, std::abs(next[i] - prev[i]));
    }
    prev.swap(next);
    ++sweeps;
  }

  NSolveResult res;
  res.table.n = n;
  res.table.n_states = nx;
  res.table.values = std::move(prev);
  res.residual = residual;
  res.sweeps = sweeps;
  return res;
}

std::vector<double> solve_VN_unreduced(const ModelSpec& model, int n, double tol,
                                       std::uint64_t cap) {
  if (n < 1) throw ValidationError("solve_VN_unreduced: need at least one agent");
  if (!(tol > 0.0)) throw ValidationError("solve_VN_unreduced: tol must be positive");
  if (product_exceeds(cap, {{model.n_states(), n}, {model.n_actions(), n},
                            {model.n_idio(), n}, {model.n_common(), 1}})) {
    throw CapError("solve_VN_unreduced: enumeration exceeds the cap");
  }
  int nx = model.n_states();
  int na = model.n_actions();
  int ne = model.n_idio();
  int n_common = model.n_common();
  std::size_t n_x = 1, n_a = 1, n_e = 1;
  for (int i = 0; i < n; ++i) {
    n_x *= static_cast<std::size_t>(nx);
    n_a *= static_cast<std::size_t>(na);
    n_e *= static_cast<std::size_t>(ne);
  }
  auto decode = [n](std::size_t r, int radix) {
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] = static_cast<int>(r % static_cast<std::size_t>(radix));
      r /= static_cast<std::size_t>(radix);
    }
    return out;
  };
  auto encode = [n, nx](const JointState& x) {
    std::size_t r = 0;
    for (int i = n - 1; i >= 0; --i) r = r * static_cast<std::size_t>(nx) + static_cast<std::size_t>(x[static_cast<std::size_t>(i)]);
    return r;
  };

  // sweep-invariant tables: reward and per-(x, a, e0) successor distribution
  std::vector<double> fhat(n_x * n_a);
  std::vector<std::vector<std::pair<std::size_t, double>>> succ(n_x * n_a *
                                                                static_cast<std::size_t>(n_common));
  for (std::size_t xi = 0; xi < n_x; ++xi) {
    JointState x = decode(xi, nx);
    for (std::size_t ai = 0; ai < n_a; ++ai) {
      JointAction a = decode(ai, na);
      fhat[xi * n_a + ai] = reward_joint(model, x, a);
      for (int e0 = 0; e0 < n_common; ++e0) {
        std::vector<double> dense(n_x, 0.0);
        for (std::size_t ei = 0; ei < n_e; ++ei) {
          std::vector<int> e = decode(ei, ne);
          double pe = 1.0;
          for (int i = 0; i < n; ++i) pe *= model.noise.idio[e[static_cast<std::size_t>(i)]];
          dense[encode(step_joint(model, x, a, e, e0))] += pe;
        }
        auto& sp = succ[(xi * n_a + ai) * static_cast<std::size_t>(n_common) +
                        static_cast<std::size_t>(e0)];
        for (std::size_t yi = 0; yi < n_x; ++yi) {
          if (dense[yi] > 0.0) sp.emplace_back(yi, dense[yi]);
        }
      }
    }
  }

  int max_sweeps = sweep_cap(model, tol);
  std::vector<double> prev(n_x, 0.0), next(n_x, 0.0);
  double residual = std::numeric_limits<double>::infinity();
  int sweeps = 0;
  while (residual > tol) {
    if (sweeps >= max_sweeps) {
      throw CapError("solve_VN_unreduced: failed to reach the residual within the sweep cap");
    }
    for (std::size_t xi = 0; xi < n_x; ++xi) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t ai = 0; ai < n_a; ++ai) {
        double acc = 0.0;
        for (int e0 = 0; e0 < n_common; ++e0) {
          double cont = 0.0;
          for (const auto& [yi, p] : succ[(xi * n_a + ai) * static_cast<std::size_t>(n_common) +
                                          static_cast<std::size_t>(e0)]) {
            cont += p * prev[yi];
          }
          acc += model.noise.common[e0] * cont;
        }
        double v = fhat[xi * n_a + ai] + model.beta * acc;
        if (v > best) best = v;
      }
      next[xi] = best;
    }
    residual = 0.0;
    for (std::size_t i = 0; i < n_x; ++i) {
      residual = std::max(residual, std::abs(next[i] - prev[i]));
    }
    prev.swap(next);
    ++sweeps;
  }
  return prev;
}

namespace {

constexpr std::size_t kPolicyTermCap = std::size_t{1} << 16;
constexpr int kPolicyMcDraws = 4096;

double policy_class_value(const ModelSpec& model, const NAgentValueTable& W,
                          const JointFeedbackPolicy& policy, std::size_t,
                          const JointState& rep) {
  JointAction a = policy.act(rep);
  check_joint_action(a, rep.size(), model.n_actions(), "bellman_TN_policy");
  return bellman_count_action(
      model, W, xa_counts_of(rep, a, model.n_states(), model.n_actions()));
}

double policy_class_value(const ModelSpec& model, const NAgentValueTable& W,
                          const JointRandomizedPolicy& policy, std::size_t class_id,
                          const JointState& rep) {
  int na = model.n_actions();
  std::vector<Measure> rows = policy.rows(rep);
  if (rows.size() != rep.size()) {
    throw ValidationError("bellman_TN_policy: one action row per agent required");
  }
  for (const Measure& row : rows) check_measure(row, na, "policy action row");

  // Agents sharing a state and an identical row are exchangeable; their
  // action counts follow one multinomial per group.
  std::map<std::pair<int, std::vector<double>>, int> groups;
  for (std::size_t i = 0; i < rep.size(); ++i) {
    ++groups[{rep[i], rows[i].w}];
  }
  std::vector<std::pair<int, std::vector<std::pair<std::vector<int>, double>>>> group_terms;
  std::size_t n_terms = 1;
  for (const auto& [key, count] : groups) {
    group_terms.emplace_back(key.first, multinomial_terms(count, key.second));
    n_terms *= group_terms.back().second.size();
  }

  if (n_terms <= kPolicyTermCap) {
    // exact expectation over the per-agent action draws
    double val = 0.0;
    std::vector<std::size_t> pick(group_terms.size(), 0);
    for (std::size_t t = 0; t < n_terms; ++t) {
      std::vector<int> xa(static_cast<std::size_t>(model.n_states()) * na, 0);
      double prob = 1.0;
      for (std::size_t g = 0; g < group_terms.size(); ++g) {
        const auto& [state, terms] = group_terms[g];
        const auto& [acounts, p] = terms[pick[g]];
        prob *= p;
        for (int a = 0; a < na; ++a) {
          xa[static_cast<std::size_t>(pair_index(state, a, na))] += acounts[static_cast<std::size_t>(a)];
        }
      }
      if (prob > 0.0) val += prob * bellman_count_action(model, W, xa);
      for (std::size_t g = 0; g < group_terms.size(); ++g) {
        if (++pick[g] < group_terms[g].second.size()) break;
        pick[g] = 0;
      }
    }
    return val;
  }

  // seeded fallback: average exact-in-noise values over sampled action draws
  double val = 0.0;
  for (int d = 0; d < kPolicyMcDraws; ++d) {
    Rng r(0x7a11bac5ULL, static_cast<std::uint64_t>(class_id),
          static_cast<std::uint64_t>(d));
    JointAction a(rep.size());
    for (std::size_t i = 0; i < rep.size(); ++i) a[i] = sample_action(rows[i], r.u01());
    val += bellman_count_action(
        model, W, xa_counts_of(rep, a, model.n_states(), model.n_actions()));
  }
  return val / kPolicyMcDraws;
}

template <class Policy>
NAgentValueTable bellman_policy_impl(const ModelSpec& model, const NAgentValueTable& W,
                                     const Policy& policy) {
  if (W.n_states != model.n_states()) {
    throw ValidationError("bellman_TN_policy: table state count mismatch");
  }
  CompositionIndexer idx(W.n, W.n_states);
  NAgentValueTable out = make_nagent_table(W.n, W.n_states);
  for (std::size_t ci = 0; ci < out.values.size(); ++ci) {
    JointState rep = class_representative(idx.unrank(static_cast<std::int64_t>(ci)));
    out.values[ci] = policy_class_value(model, W, policy, ci, rep);
  }
  return out;
}

template <class Policy>
NSolveResult solve_policy_impl(const ModelSpec& model, const Policy& policy, int n,
                               double tol) {
  if (n < 1) throw ValidationError("solve_policy_value: need at least one agent");
  if (!(tol > 0.0)) throw ValidationError("solve_policy_value: tol must be positive");
  int max_sweeps = sweep_cap(model, tol);
  NSolveResult res;
  res.table = make_nagent_table(n, model.n_states());
  res.residual = std::numeric_limits<double>::infinity();
  while (res.residual > tol) {
    if (res.sweeps >= max_sweeps) {
      throw CapError("solve_policy_value: failed to reach the residual within the sweep cap");
    }
    NAgentValueTable next = bellman_policy_impl(model, res.table, policy);
    res.residual = 0.0;
    for (std::size_t i = 0; i < next.values.size(); ++i) {
      res.residual = std::max(res.residual, std::abs(next.values[i] - res.table.values[i]));
    }
    res.table = std::move(next);
    ++res.sweeps;
  }
  return res;
}

JointAction policy_actions(const ModelSpec& model, const JointFeedbackPolicy& policy,
                           const JointState& x, Rng&) {
  JointAction a = policy.act(x);
  check_joint_action(a, x.size(), model.n_actions(), "mc_gain_N");
  return a;
}

JointAction policy_actions(const ModelSpec& model, const JointRandomizedPolicy& policy,
                           const JointState& x, Rng& r) {
  std::vector<Measure> rows = policy.rows(x);
  if (rows.size() != x.size()) {
    throw ValidationError("mc_gain_N: one action row per agent required");
  }
  JointAction a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    check_measure(rows[i], model.n_actions(), "policy action row");
    a[i] = sample_action(rows[i], r.u01());
  }
  return a;
}

// Per path, per step, the draw order is pinned: the common cell first, then
// action draws agent by agent (randomized policies only), then one noise cell
// per agent. This makes runs reproducible across worker counts.
template <class Policy>
GainEstimate mc_gain_impl(const ModelSpec& model, const Policy& policy,
                          const JointState& x0, int horizon, int paths,
                          std::uint64_t seed, int workers) {
  check_joint_state(x0, model.n_states(), "mc_gain_N");
  if (horizon < 1) throw ValidationError("mc_gain_N: horizon must be >= 1");
  if (paths < 1) throw ValidationError("mc_gain_N: paths must be >= 1");
  int nw = resolve_workers(workers);
  std::vector<double> vals(static_cast<std::size_t>(paths));
  parallel_for(static_cast<std::size_t>(paths), nw, [&](std::size_t p) {
    Rng r(seed, static_cast<std::uint64_t>(p));
    JointState x = x0;
    std::vector<int> e(x0.size());
    double gain = 0.0, disc = 1.0;
    for (int t = 0; t < horizon; ++t) {
      int e0 = sample_index(model.noise.common, r.u01());
      JointAction a = policy_actions(model, policy, x, r);
      gain += disc * reward_joint(model, x, a);
      for (std::size_t i = 0; i < x.size(); ++i) {
        e[i] = sample_index(model.noise.idio, r.u01());
      }
      x = step_joint(model, x, a, e, e0);
      disc *= model.beta;
    }
    vals[p] = gain;
  });
  MeanSe ms = mean_se(vals);
  GainEstimate out;
  out.mean = ms.mean;
  out.se = ms.se;
  out.truncation_bias =
      std::pow(model.beta, horizon) * model.reward_bound() / (1.0 - model.beta);
  return out;
}

}  // namespace

NAgentValueTable bellman_TN_policy(const ModelSpec& model, const NAgentValueTable& W,
                                   const JointFeedbackPolicy& policy) {
  return bellman_policy_impl(model, W, policy);
}

NAgentValueTable bellman_TN_policy(const ModelSpec& model, const NAgentValueTable& W,
                                   const JointRandomizedPolicy& policy) {
  return bellman_policy_impl(model, W, policy);
}

NSolveResult solve_policy_value(const ModelSpec& model, const JointFeedbackPolicy& policy,
                                int n, double tol) {
  return solve_policy_impl(model, policy, n, tol);
}

NSolveResult solve_policy_value(const ModelSpec& model,
                                const JointRandomizedPolicy& policy, int n, double tol) {
  return solve_policy_impl(model, policy, n, tol);
}

GainEstimate mc_gain_N(const ModelSpec& model, const JointFeedbackPolicy& policy,
                       const JointState& x0, int horizon, int paths, std::uint64_t seed,
                       int workers) {
  return mc_gain_impl(model, policy, x0, horizon, paths, seed, workers);
}

GainEstimate mc_gain_N(const ModelSpec& model, const JointRandomizedPolicy& policy,
                       const JointState& x0, int horizon, int paths, std::uint64_t seed,
                       int workers) {
  return mc_gain_impl(model, policy, x0, horizon, paths, seed, workers);
}

std::string nagent_artifact_to_json(const ModelSpec& model, const NSolveResult& result) {
  ordered_json j;
  j["artifact"] = "nagent-solver";
  j["version"] = kVersion;
  j["config"] = model.config_json.empty() ? ordered_json()
                                          : ordered_json::parse(model.config_json);
  j["n"] = result.table.n;
  j["n_states"] = result.table.n_states;
  j["residual"] = result.residual;
  j["sweeps"] = result.sweeps;
  j["values"] = result.table.values;
  return j.dump(2) + "\n";
}

NSolveResult nagent_artifact_from_json(const ModelSpec& model, const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& ex) {
    throw ValidationError(std::string("nagent artifact: not valid JSON: ") + ex.what());
  }
  if (!j.is_object() || !j.contains("artifact") || j["artifact"] != "nagent-solver") {
    throw ValidationError("nagent artifact: missing or wrong artifact tag");
  }
  for (const char* key : {"n", "n_states", "residual", "sweeps", "values"}) {
    if (!j.contains(key)) {
      throw ValidationError(std::string("nagent artifact: missing field ") + key);
    }
  }
  NSolveResult res;
  res.table.n = j["n"].get<int>();
  res.table.n_states = j["n_states"].get<int>();
  if (res.table.n < 1) throw ValidationError("nagent artifact: bad agent count");
  if (res.table.n_states != model.n_states()) {
    throw ValidationError("nagent artifact: state count does not match the model");
  }
  res.table.values = j["values"].get<std::vector<double>>();
  if (res.table.values.size() !=
      static_cast<std::size_t>(composition_count(res.table.n, res.table.n_states))) {
    throw ValidationError("nagent artifact: value count does not match the class count");
  }
  res.residual = j["residual"].get<double>();
  res.sweeps = j["sweeps"].get<int>();
  return res;
}

}  // namespace mfmdp
