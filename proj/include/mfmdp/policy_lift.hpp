#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "mfmdp/cmkv_solver.hpp"
#include "mfmdp/nagent_mdp.hpp"

namespace mfmdp {

struct LiftResult {
  JointAction actions;
  double cost = 0.0;  // transport distance between the target joint law and
                      // the realized empirical (state, action) measure
};

// Empirical state measure of a joint state, weight 1/N per agent.
Measure empirical_state(const JointState& x, int n_states);

// Transport-matching lift: looks up the kernel at the node nearest to the
// empirical state measure, forms the target joint law, rounds the ideal
// per-state action mass to integer counts by largest remainder (rounding ties
// toward the smaller action index) and hands actions to agents grouped by
// state in agent-index order. For product metrics and candidates sharing the
// state marginal the transport problem splits per state, so these counts
// attain the minimal distance; the exhaustive variant below checks that.
LiftResult lift_feedback(const ModelSpec& model, const MeanFieldPolicy& policy,
                         const JointState& x);

// Reference implementation minimizing over all |A|^N joint actions; refuses
// above the cap.
LiftResult lift_feedback_exhaustive(const ModelSpec& model, const MeanFieldPolicy& policy,
                                    const JointState& x, std::uint64_t cap = 4096);

// Per-agent randomized lift: agent i inverse-CDF samples its action from the
// kernel row of its own state, the kernel being looked up once at the
// empirical state measure.
JointAction lift_randomized(const MeanFieldPolicy& policy, const JointState& x,
                            const std::vector<double>& u);

// Feedback lift with a per-class memo: the counts-to-actions computation runs
// once per occupancy class, then gets de-canonicalized per joint state.
// Thread-safe; population is idempotent.
class LiftedFeedbackPolicy {
 public:
  LiftedFeedbackPolicy(ModelSpec model, MeanFieldPolicy source);
  LiftedFeedbackPolicy(const LiftedFeedbackPolicy& other);
  LiftedFeedbackPolicy& operator=(const LiftedFeedbackPolicy&) = delete;

  LiftResult at(const JointState& x) const;
  const MeanFieldPolicy& source() const { return source_; }

  // adapter for the joint-MDP evaluation operators
  JointFeedbackPolicy as_joint() const;

 private:
  std::shared_ptr<const ModelSpec> model_;
  MeanFieldPolicy source_;
  struct Cached {
    std::vector<int> action_counts;  // per (state, action) cell
    double cost = 0.0;
  };
  mutable std::mutex lock_;
  mutable std::map<std::vector<int>, Cached> cache_;  // keyed by state counts
};

// Randomized lift as a joint policy: every agent in state s draws from the
// kernel row at s, rows looked up at the empirical state measure.
JointRandomizedPolicy lifted_randomized_policy(const ModelSpec& model,
                                               const MeanFieldPolicy& source);

enum class LiftMode { feedback, randomized };

struct LiftGapParams {
  bool exact = true;        // fixed-point evaluation; false = Monte-Carlo
  double tol = 1e-9;        // solver residual tolerance (both solvers)
  int horizon = 64;         // Monte-Carlo mode
  int paths = 4096;
  std::uint64_t seed = 1;
  int mn_trials = 256;      // sampling effort for the mean-deviation estimate
  int workers = 0;
};

struct GapReport {
  int n = 0;
  LiftMode mode = LiftMode::feedback;
  double v_opt = 0.0;     // exact joint optimum at x0
  double v_lift = 0.0;    // lifted-policy value at x0
  double gap = 0.0;       // v_opt - v_lift
  double se = 0.0;        // Monte-Carlo mode only
  double truncation_bias = 0.0;
  double mn_hat = 0.0;
  double gamma = 0.0;
  double epsilon = 0.0;   // the source policy's suboptimality accounting
};

const char* lift_mode_name(LiftMode mode);

// Compares the exact joint optimum against the performance of the lifted
// policy started at x0, alongside the constants the convergence bound is
// phrased in.
GapReport lift_gap(const ModelSpec& model, const MeanFieldPolicy& policy, LiftMode mode,
                   int n, const JointState& x0, const LiftGapParams& params = {});

}  // namespace mfmdp
