#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mfmdp/cmkv_solver.hpp"
#include "mfmdp/core_model.hpp"
#include "mfmdp/policy_lift.hpp"

namespace mfmdp {

// Least-squares line through (ln x, ln y).
struct RateFit {
  std::vector<std::pair<double, double>> points;  // raw coordinates, all positive
  double slope = 0.0;
  double intercept = 0.0;  // value of the fitted line at ln x = 0
  double residual = 0.0;   // root-mean-square residual in log space
};

// Requires at least 3 points with strictly positive coordinates.
RateFit fit_loglog(const std::vector<std::pair<double, double>>& points);

// The canonical initial joint states the experiments start from: everyone at
// the first state ("all0"), the most even split ("balanced"), everyone at the
// last state ("all<last>"). Representatives are sorted ascending.
std::vector<std::pair<std::string, JointState>> initial_state_family(int n, int n_states);

// Shared knobs for the experiment runs below. `model` must be finalized.
// Every run is a pure function of (config, seed): rerunning with the same
// values reproduces all tables byte for byte, for any worker count.
struct ExperimentConfig {
  ModelSpec model;
  std::string model_ref;  // provenance label echoed into artifacts
  std::vector<int> n_list{2, 4, 6, 8};  // strictly increasing agent counts
  int q = 50;                           // simplex grid denominator
  KernelFamily family = KernelFamily::randomized(8);
  double tol = 1e-8;
  int trials = 256;  // sampling effort for deviation estimates
  std::uint64_t seed = 1;
  std::string out_dir;  // consumed by run_chaos_suite; empty: nothing written
  int workers = 0;
};

// Throws ValidationError for nonpositive parameters or a non-increasing
// N-list, CapError when an N exceeds the exact joint-solver cap.
void check_experiment_config(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Value convergence: exact joint optimum against the mean-field value looked
// up at the grid node nearest the initial empirical measure.

struct ValueConvergenceRow {
  int n = 0;
  std::string x0_id;     // "all0", "balanced", "all<last>"
  double v_n = 0.0;      // exact joint optimum started at x0
  double v_check = 0.0;  // mean-field value at the empirical measure of x0
  double gap = 0.0;      // v_n - v_check
  double mn_hat = 0.0;   // state-space deviation estimate at this n
  double gamma = 0.0;
  double ratio = 0.0;  // |gap| / mn_hat^gamma
  double c_fit = 0.0;  // table-level constant, repeated on every row
};

struct ValueConvergenceReport {
  std::vector<ValueConvergenceRow> rows;  // n ascending, then x0 family order
  double c_fit = 0.0;            // max of |gap| / mn_hat^gamma over all rows
  double c_at_smallest_n = 0.0;  // same ratio at the balanced smallest-n row
  // Checks below track the balanced start; the vertex starts feed c_fit and
  // the table only. Gaps carry their sign in the table: the joint optimum can
  // sit on either side of the mean-field value, so the checks bound the
  // magnitude instead of asserting an ordering.
  bool monotone_ok = true;    // |gap| at the largest n < |gap| at the smallest
  bool rate_bound_ok = true;  // |gap_n| <= 2 c_at_smallest * mn_hat^gamma
  std::string csv;  // N,x0_id,V_N,V_check,gap,M_N_hat,gamma,C_fit,q,tol,seed
};

ValueConvergenceReport run_value_convergence(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Operator comparison: one-kernel mean-field application versus the one-action
// joint application on the unlifted table, at sampled (state, kernel) pairs.

struct OperatorComparisonRow {
  int n = 0;
  int trial = 0;
  double lhs = 0.0;       // |mean-field side - joint side|
  double coupling = 0.0;  // transport cost of the lifted action profile
  double mn_hat = 0.0;
  double ratio = 0.0;  // lhs / (coupling^gamma + mn_hat^gamma)
};

struct OperatorComparisonReport {
  std::vector<OperatorComparisonRow> rows;
  double gamma = 0.0;
  double c_max = 0.0;  // max ratio, the empirical constant of the comparison
  bool lift_cost_ok = true;  // coupling <= 2 mn_hat on every sampled row
  double max_coupling = 0.0;
  // Disintegrating a realized empirical joint law and lifting with that
  // kernel must reproduce the law at zero cost.
  bool round_trip_ok = true;
  double round_trip_max_err = 0.0;
  std::string csv;  // N,trial,lhs,coupling,M_N_hat,ratio
};

OperatorComparisonReport run_operator_comparison(const ExperimentConfig& cfg,
                                                 int pairs_per_n = 8);

// ---------------------------------------------------------------------------
// Empirical-deviation rate: M-hat over a doubling ladder of sample counts,
// with a log-log fit. Measured on the joint (state, action) space.

struct MnRatePoint {
  int n = 0;
  double mn_hat = 0.0;
};

struct MnRateReport {
  std::vector<MnRatePoint> points;
  RateFit fit;  // meaningful only when accepted
  bool accepted = false;
  std::string diagnostic;  // why a fit was rejected; empty when accepted
  std::string csv;         // N,M_N_hat
};

// n_values empty: {16, 32, ..., 1024}. candidates empty: the default set for
// the joint space (uniform, vertices, Dirichlet draws).
MnRateReport run_mn_rate(const ExperimentConfig& cfg, std::vector<int> n_values = {},
                         std::vector<Measure> candidates = {});

// ---------------------------------------------------------------------------
// Policy-lift gaps: both lift constructions evaluated exactly against the
// joint optimum, from the balanced start, over the N-list.

struct PolicyGapReport {
  std::vector<GapReport> rows;  // n ascending; feedback then randomized
  double eps_source = 0.0;      // optimality slack of the source policy
  bool bound_ok = true;  // v_lift >= v_opt - (eps + 2 c_fit mn^gamma) per row
  bool monotone_ok = true;      // per mode: |gap| shrinks from first to last n
  bool modes_within_2x = true;  // per n: larger |gap| <= 2x smaller |gap|
  std::string csv;  // N,mode,V_N,V_lift,gap,eps_source,M_N_hat,gamma,seed
};

// c_fit is the constant fitted by run_value_convergence; the per-row bound
// check is phrased against it.
PolicyGapReport run_policy_gap(const ExperimentConfig& cfg, double c_fit);

// Randomized-lift concentration: mean transport cost between the target joint
// law and the realized empirical law over repeated draws, against the
// (2 + action-diameter) * mn_hat ceiling.
struct ConcentrationRow {
  int n = 0;
  double mean_cost = 0.0;
  double se = 0.0;
  double mn_hat = 0.0;
  double bound = 0.0;  // (2 + action diameter) * mn_hat
  bool ok = false;     // mean_cost <= bound + 3 se
};

std::vector<ConcentrationRow> run_lift_concentration(const ExperimentConfig& cfg,
                                                     int draws = 5000);

// ---------------------------------------------------------------------------
// Smoothness diagnostic: the largest pairwise difference quotient
// |V(mu) - V(mu')| / W1(mu, mu')^gamma over grid nodes, at q and 2q. A finite
// quotient that moves by less than a factor two under refinement is the
// behavior the convergence exponent predicts.

struct HolderReport {
  double gamma = 0.0;
  double ratio_base = 0.0;    // max quotient at denominator q
  double ratio_double = 0.0;  // max quotient at denominator 2q
  double factor = 0.0;        // larger of the two ratios over the smaller
  bool ok = false;            // both finite, factor < 2
};

HolderReport holder_diagnostic(const ModelSpec& model, int q, const KernelFamily& family,
                               double tol, int workers = 0);

// ---------------------------------------------------------------------------
// Full suite: all runs above plus a named pass/fail list, serialized into a
// JSON summary. When cfg.out_dir is set, writes the CSV tables, the summary
// and log-log plots into that directory.

struct ChaosSummary {
  ValueConvergenceReport value;
  OperatorComparisonReport ops;
  MnRateReport mn;
  PolicyGapReport gaps;
  std::vector<ConcentrationRow> concentration;
  HolderReport holder;
  std::vector<std::pair<std::string, bool>> checks;
  std::string summary_json;
};

ChaosSummary run_chaos_suite(const ExperimentConfig& cfg);

// Minimal static log-log plot; series with nonpositive coordinates are
// dropped point-wise.
struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

std::string svg_loglog(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<PlotSeries>& series);

}  // namespace mfmdp
