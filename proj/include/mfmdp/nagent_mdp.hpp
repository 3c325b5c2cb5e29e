#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfmdp/cmkv_solver.hpp"
#include "mfmdp/combinatorics.hpp"
#include "mfmdp/core_model.hpp"

namespace mfmdp {

// One state index per agent.
using JointState = std::vector<int>;
// One action index per agent; must have the same length as the acting state.
using JointAction = std::vector<int>;

// Occupancy signature of a joint state: how many agents sit in each state,
// plus the number of joint states sharing that signature (a multinomial
// coefficient). The dynamics and the average reward are invariant under
// relabeling agents, so value tables only need one entry per signature.
struct CanonicalClass {
  std::vector<int> counts;
  std::int64_t representatives = 0;
};

CanonicalClass canonical_class(const JointState& x, int n_states);

// The sorted (ascending) joint state representing an occupancy vector.
JointState class_representative(const std::vector<int>& counts);

// Value table over occupancy classes, indexed in the ascending lexicographic
// order of count vectors.
struct NAgentValueTable {
  int n = 0;
  int n_states = 0;
  std::vector<double> values;

  std::int64_t n_classes() const { return static_cast<std::int64_t>(values.size()); }
  double at_counts(const std::vector<int>& counts) const;
  double at(const JointState& x) const;
};

NAgentValueTable make_nagent_table(int n, int n_states, double fill = 0.0);

// Empirical measure of the (state, action) pairs, weight 1/N each, laid out
// with pair_index.
Measure empirical_joint(const JointState& x, const JointAction& a, int n_states,
                        int n_actions);

// Componentwise transition: every agent is pushed through the shared rule at
// the joint empirical measure, agent i consuming its own noise cell e[i].
JointState step_joint(const ModelSpec& model, const JointState& x, const JointAction& a,
                      const std::vector<int>& e, int e0);

// Average per-agent reward at the joint empirical measure.
double reward_joint(const ModelSpec& model, const JointState& x, const JointAction& a);

// One-action Bellman application: average reward plus the discounted exact
// expectation of W over the product idiosyncratic-noise law and the common
// noise. Conditionally on the common draw the agents move independently, so
// the |E|^N-term product sum collapses to a convolution over occupancy counts
// and stays exact at any N the solver caps admit.
double bellman_TN_action(const ModelSpec& model, const NAgentValueTable& W,
                         const JointState& x, const JointAction& a);

// Same computation keyed directly by (state, action) occupancy counts, the
// quantity the dynamics actually depend on.
double bellman_count_action(const ModelSpec& model, const NAgentValueTable& W,
                            const std::vector<int>& xa_counts);

struct NSolveResult {
  NAgentValueTable table;
  double residual = 0.0;
  int sweeps = 0;
};

inline constexpr std::uint64_t kDefaultSolveCap = std::uint64_t{1} << 32;

// Value iteration of the joint-state Bellman operator, reduced to occupancy
// classes; the action supremum runs over per-state action-count assignments.
// Refuses when |X|^n * |A|^n * |E|^n exceeds the cap.
NSolveResult solve_VN(const ModelSpec& model, int n, double tol,
                      std::uint64_t cap = kDefaultSolveCap, int workers = 0);

// Unreduced reference solver over all |X|^n joint states and |A|^n joint
// actions with the noise product enumerated term by term. Joint state r maps
// to indices via mixed radix with agent 0 least significant. Only meant for
// small n; refuses when |X|^n * |A|^n * |E|^n * |E0| exceeds the cap.
std::vector<double> solve_VN_unreduced(const ModelSpec& model, int n, double tol,
                                       std::uint64_t cap = std::uint64_t{1} << 22);

// Deterministic feedback rule on joint states. Class-valued evaluation below
// queries it at sorted representatives; for the results to mean anything the
// rule's (state, action) occupancy must not depend on agent labels, which
// holds for every policy this toolkit constructs.
struct JointFeedbackPolicy {
  std::function<JointAction(const JointState&)> act;
};

// Per-agent randomized rule: each agent draws its action from its own row,
// independently given the joint state.
struct JointRandomizedPolicy {
  std::function<std::vector<Measure>(const JointState&)> rows;
};

// One application of the policy Bellman operator on every class. For the
// randomized form the action expectation is exact: agents are grouped by
// (state, row) and the group action counts follow independent multinomials.
// If the term count explodes past the internal cap the expectation falls back
// to averaging a fixed number of seeded action draws.
NAgentValueTable bellman_TN_policy(const ModelSpec& model, const NAgentValueTable& W,
                                   const JointFeedbackPolicy& policy);
NAgentValueTable bellman_TN_policy(const ModelSpec& model, const NAgentValueTable& W,
                                   const JointRandomizedPolicy& policy);

// Iterates the policy operator from zero to its fixed point.
NSolveResult solve_policy_value(const ModelSpec& model, const JointFeedbackPolicy& policy,
                                int n, double tol);
NSolveResult solve_policy_value(const ModelSpec& model, const JointRandomizedPolicy& policy,
                                int n, double tol);

// Monte-Carlo estimate of the truncated discounted gain along full sampled
// trajectories. Per-path substreams make the result independent of the worker
// count; the same seed gives byte-identical output.
GainEstimate mc_gain_N(const ModelSpec& model, const JointFeedbackPolicy& policy,
                       const JointState& x0, int horizon, int paths, std::uint64_t seed,
                       int workers = 0);
GainEstimate mc_gain_N(const ModelSpec& model, const JointRandomizedPolicy& policy,
                       const JointState& x0, int horizon, int paths, std::uint64_t seed,
                       int workers = 0);

// Artifact serialization, same container format as the mean-field solver.
std::string nagent_artifact_to_json(const ModelSpec& model, const NSolveResult& result);
NSolveResult nagent_artifact_from_json(const ModelSpec& model, const std::string& text);

}  // namespace mfmdp
