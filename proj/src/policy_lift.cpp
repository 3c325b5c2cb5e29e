#include "mfmdp/policy_lift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mfmdp/transport.hpp"

namespace mfmdp {

namespace {

struct CountsLift {
  std::vector<int> action_counts;  // per (state, action) cell
  double cost = 0.0;
};

Measure joint_from_counts(const std::vector<int>& counts, int n) {
  std::vector<double> w(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    w[i] = static_cast<double>(counts[i]) / n;
  }
  return make_measure(std::move(w));
}

// Largest-remainder rounding of the target joint mass to integer action
// counts, per state; remainder ties fall to the smaller action index.
CountsLift lift_counts(const ModelSpec& model, const MeanFieldPolicy& policy,
                       const std::vector<int>& state_counts, int n) {
  int nx = model.n_states();
  int na = model.n_actions();
  Measure mu_x = joint_from_counts(state_counts, n);
  const ActionKernel& kernel = policy.at(mu_x);
  CountsLift out;
  out.action_counts.assign(static_cast<std::size_t>(nx) * na, 0);
  for (int s = 0; s < nx; ++s) {
    int ns = state_counts[static_cast<std::size_t>(s)];
    if (ns == 0) continue;
    const Measure& row = kernel.row(s);
    std::vector<double> frac(static_cast<std::size_t>(na));
    int assigned = 0;
    for (int a = 0; a < na; ++a) {
      double ideal = ns * row[a];
      int base = static_cast<int>(std::floor(ideal));
      frac[static_cast<std::size_t>(a)] = ideal - base;
      out.action_counts[static_cast<std::size_t>(pair_index(s, a, na))] = base;
      assigned += base;
    }
    std::vector<int> order(static_cast<std::size_t>(na));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return frac[static_cast<std::size_t>(a)] > frac[static_cast<std::size_t>(b)];
    });
    for (int k = 0; k < ns - assigned; ++k) {
      ++out.action_counts[static_cast<std::size_t>(pair_index(s, order[static_cast<std::size_t>(k)], na))];
    }
  }
  FiniteMetricSpace prod = product_space(model.states, model.actions);
  Measure target = joint_measure(mu_x, kernel);
  out.cost = wasserstein1(prod, target, joint_from_counts(out.action_counts, n));
  return out;
}

// Hands the counted actions to agents: within each state, agents appear in
// index order and actions in ascending order.
JointAction assign_actions(const JointState& x, const std::vector<int>& action_counts,
                           int na) {
  std::vector<int> cursor(action_counts.size());
  for (std::size_t i = 0; i < action_counts.size(); ++i) {
    cursor[i] = action_counts[i];
  }
  JointAction a(x.size());
  std::vector<int> next_action(static_cast<std::size_t>(action_counts.size()) / na, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    int s = x[i];
    int& na_cursor = next_action[static_cast<std::size_t>(s)];
    while (cursor[static_cast<std::size_t>(pair_index(s, na_cursor, na))] == 0) ++na_cursor;
    --cursor[static_cast<std::size_t>(pair_index(s, na_cursor, na))];
    a[i] = na_cursor;
  }
  return a;
}

}  // namespace

Measure empirical_state(const JointState& x, int n_states) {
  if (x.empty()) throw ValidationError("empirical_state: joint state is empty");
  std::vector<double> w(static_cast<std::size_t>(n_states), 0.0);
  for (int xi : x) {
    if (xi < 0 || xi >= n_states) {
      throw ValidationError("empirical_state: state index out of range");
    }
    w[static_cast<std::size_t>(xi)] += 1.0 / static_cast<double>(x.size());
  }
  return make_measure(std::move(w));
}

LiftResult lift_feedback(const ModelSpec& model, const MeanFieldPolicy& policy,
                         const JointState& x) {
  CanonicalClass cls = canonical_class(x, model.n_states());
  CountsLift lifted = lift_counts(model, policy, cls.counts, static_cast<int>(x.size()));
  return LiftResult{assign_actions(x, lifted.action_counts, model.n_actions()),
                    lifted.cost};
}

LiftResult lift_feedback_exhaustive(const ModelSpec& model, const MeanFieldPolicy& policy,
                                    const JointState& x, std::uint64_t cap) {
  int n = static_cast<int>(x.size());
  int na = model.n_actions();
  long double total = 1.0L;
  for (int i = 0; i < n; ++i) total *= na;
  if (total > static_cast<long double>(cap)) {
    throw CapError("lift_feedback_exhaustive: |A|^N exceeds the cap");
  }
  Measure mu_x = empirical_state(x, model.n_states());
  const ActionKernel& kernel = policy.at(mu_x);
  Measure target = joint_measure(mu_x, kernel);
  FiniteMetricSpace prod = product_space(model.states, model.actions);

  std::uint64_t n_joint = 1;
  for (int i = 0; i < n; ++i) n_joint *= static_cast<std::uint64_t>(na);
  LiftResult best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::uint64_t ai = 0; ai < n_joint; ++ai) {
    std::uint64_t r = ai;
    JointAction a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      a[i] = static_cast<int>(r % static_cast<std::uint64_t>(na));
      r /= static_cast<std::uint64_t>(na);
    }
    Measure emp = empirical_joint(x, a, model.n_states(), na);
    double cost = wasserstein1(prod, target, emp);
    if (cost < best_cost) {
      best_cost = cost;
      best = LiftResult{std::move(a), cost};
    }
  }
  return best;
}

JointAction lift_randomized(const MeanFieldPolicy& policy, const JointState& x,
                            const std::vector<double>& u) {
  int n_states = policy.grid->space.size();
  if (u.size() != x.size()) {
    throw ValidationError("lift_randomized: one uniform draw per agent required");
  }
  for (double ui : u) {
    if (!(ui >= 0.0) || ui >= 1.0) {
      throw ValidationError("lift_randomized: draws must lie in [0, 1)");
    }
  }
  Measure mu_x = empirical_state(x, n_states);
  const ActionKernel& kernel = policy.at(mu_x);
  JointAction a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    a[i] = sample_action(kernel.row(x[i]), u[i]);
  }
  return a;
}

LiftedFeedbackPolicy::LiftedFeedbackPolicy(ModelSpec model, MeanFieldPolicy source)
    : model_(std::make_shared<const ModelSpec>(std::move(model))),
      source_(std::move(source)) {
  if (source_.grid == nullptr || source_.kernels.empty()) {
    throw ValidationError("lifted policy: source policy has no kernels");
  }
  if (source_.grid->space.size() != model_->n_states()) {
    throw ValidationError("lifted policy: source grid does not match the model");
  }
}

LiftedFeedbackPolicy::LiftedFeedbackPolicy(const LiftedFeedbackPolicy& other)
    : model_(other.model_), source_(other.source_) {
  std::lock_guard<std::mutex> guard(other.lock_);
  cache_ = other.cache_;
}

LiftResult LiftedFeedbackPolicy::at(const JointState& x) const {
  CanonicalClass cls = canonical_class(x, model_->n_states());
  {
    std::lock_guard<std::mutex> guard(lock_);
    auto it = cache_.find(cls.counts);
    if (it != cache_.end()) {
      return LiftResult{assign_actions(x, it->second.action_counts, model_->n_actions()),
                        it->second.cost};
    }
  }
  CountsLift lifted =
      lift_counts(*model_, source_, cls.counts, static_cast<int>(x.size()));
  {
    std::lock_guard<std::mutex> guard(lock_);
    cache_.insert({cls.counts, Cached{lifted.action_counts, lifted.cost}});
  }
  return LiftResult{assign_actions(x, lifted.action_counts, model_->n_actions()),
                    lifted.cost};
}

JointFeedbackPolicy LiftedFeedbackPolicy::as_joint() const {
  auto self = std::make_shared<LiftedFeedbackPolicy>(*this);
  return JointFeedbackPolicy{
      [self](const JointState& x) { return self->at(x).actions; }};
}

JointRandomizedPolicy lifted_randomized_policy(const ModelSpec& model,
                                               const MeanFieldPolicy& source) {
  if (source.grid == nullptr || source.kernels.empty()) {
    throw ValidationError("lifted policy: source policy has no kernels");
  }
  if (source.grid->space.size() != model.n_states()) {
    throw ValidationError("lifted policy: source grid does not match the model");
  }
  int n_states = model.n_states();
  auto src = std::make_shared<MeanFieldPolicy>(source);
  return JointRandomizedPolicy{[src, n_states](const JointState& x) {
    Measure mu_x = empirical_state(x, n_states);
    const ActionKernel& kernel = src->at(mu_x);
    std::vector<Measure> rows;
    rows.reserve(x.size());
    for (int xi : x) rows.push_back(kernel.row(xi));
    return rows;
  }};
}

const char* lift_mode_name(LiftMode mode) {
  return mode == LiftMode::feedback ? "feedback" : "randomized";
}

GapReport lift_gap(const ModelSpec& model, const MeanFieldPolicy& policy, LiftMode mode,
                   int n, const JointState& x0, const LiftGapParams& params) {
  if (static_cast<int>(x0.size()) != n) {
    throw ValidationError("lift_gap: x0 must list one state per agent");
  }
  check_measure(empirical_state(x0, model.n_states()), model.n_states(), "lift_gap x0");

  GapReport rep;
  rep.n = n;
  rep.mode = mode;
  rep.epsilon = policy.epsilon;
  rep.gamma = gamma_exponent(model.beta, model.k_big_f);
  rep.mn_hat = estimate_MN(model.states, n, default_mn_candidates(model.states, params.seed),
                           params.mn_trials, params.seed, params.workers);
  rep.v_opt = solve_VN(model, n, params.tol, kDefaultSolveCap, params.workers).table.at(x0);

  if (mode == LiftMode::feedback) {
    LiftedFeedbackPolicy lifted(model, policy);
    JointFeedbackPolicy jp = lifted.as_joint();
    if (params.exact) {
      rep.v_lift = solve_policy_value(model, jp, n, params.tol).table.at(x0);
    } else {
      GainEstimate g =
          mc_gain_N(model, jp, x0, params.horizon, params.paths, params.seed, params.workers);
      rep.v_lift = g.mean;
      rep.se = g.se;
      rep.truncation_bias = g.truncation_bias;
    }
  } else {
    JointRandomizedPolicy jp = lifted_randomized_policy(model, policy);
    if (params.exact) {
      rep.v_lift = solve_policy_value(model, jp, n, params.tol).table.at(x0);
    } else {
      GainEstimate g =
          mc_gain_N(model, jp, x0, params.horizon, params.paths, params.seed, params.workers);
      rep.v_lift = g.mean;
      rep.se = g.se;
      rep.truncation_bias = g.truncation_bias;
    }
  }
  rep.gap = rep.v_opt - rep.v_lift;
  return rep;
}

}  // namespace mfmdp
