#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfmdp/errors.hpp"

namespace mfmdp {

// Indexed point set with an explicit metric matrix.
struct FiniteMetricSpace {
  std::vector<std::string> labels;
  std::vector<double> dist;  // row-major size() x size()
  double diameter = 0.0;

  int size() const { return static_cast<int>(labels.size()); }
  double d(int i, int j) const {
    return dist[static_cast<std::size_t>(i) * labels.size() + static_cast<std::size_t>(j)];
  }
};

// Validates symmetry, zero diagonal, strictly positive off-diagonal entries
// and the triangle inequality (exhaustive over all triples), then records the
// diameter. Throws ValidationError.
FiniteMetricSpace make_metric_space(std::vector<std::string> labels, std::vector<double> dist);

// n points, all off-diagonal distances 1.
FiniteMetricSpace discrete_space(int n, const std::string& label_prefix = "");

// Product with the sum metric d((x,a),(x',a')) = d(x,x') + d(a,a').
// Point (x,a) sits at index x * |A| + a; labels are "x|a".
FiniteMetricSpace product_space(const FiniteMetricSpace& x, const FiniteMetricSpace& a);

inline int pair_index(int x, int a, int n_actions) { return x * n_actions + a; }

struct Measure {
  std::vector<double> w;

  int size() const { return static_cast<int>(w.size()); }
  double operator[](int i) const { return w[static_cast<std::size_t>(i)]; }
};

// Checks weights >= 0 and |sum - 1| <= 1e-9.
Measure make_measure(std::vector<double> w);
Measure uniform_measure(int n);
Measure point_mass(int n, int at);
// Validation helper for API boundaries; expected_size < 0 skips the size check.
void check_measure(const Measure& m, int expected_size, const char* what);
// Inverse-CDF lookup with half-open cells [c_{k-1}, c_k); u in [0,1).
int sample_index(const Measure& m, double u);

struct NoiseSpec {
  Measure idio;    // law of each agent's private shock, support {0..|E|-1}
  Measure common;  // law of the shared shock, support {0..|E0|-1}
};

// Both mappings must be pure: same inputs, same outputs, no hidden state.
// `joint` is a measure on the product space (index x * |A| + a).
using TransitionFn = std::function<int(int x, int a, const Measure& joint, int e, int e0)>;
using RewardFn = std::function<double(int x, int a, const Measure& joint)>;

struct ModelSpec {
  FiniteMetricSpace states;
  FiniteMetricSpace actions;
  FiniteMetricSpace pairs;  // product of the two, built by finalize_model
  NoiseSpec noise;
  TransitionFn transition;
  RewardFn reward;
  double beta = 0.0;
  double k_big_f = 0.0;  // declared in-expectation Lipschitz constant of the transition
  double k_f = 0.0;      // declared Lipschitz constant of the reward

  // Recorded by finalize_model over a measure-grid sweep.
  double reward_min = 0.0;
  double reward_max = 0.0;

  // Resolved config echoed into artifacts; empty for hand-assembled models.
  std::string config_json;

  int n_states() const { return states.size(); }
  int n_actions() const { return actions.size(); }
  int n_idio() const { return noise.idio.size(); }
  int n_common() const { return noise.common.size(); }

  double reward_range() const { return reward_max - reward_min; }
  // Sup-norm bound on the reward; this (not the range) controls value bounds
  // and truncation horizons, since a constant reward has range zero but a
  // nonzero value function.
  double reward_bound() const;
};

// Validates spaces, noise, beta and declared constants, builds the product
// space, and records the reward range by sweeping every (x, a) against a
// measure grid of the given denominator on the product space (random grid
// nodes are substituted once the full grid would exceed ~200k nodes).
ModelSpec finalize_model(ModelSpec m, int reward_sweep_denominator = 20);

// Builds a model from the structured-text config. Unknown keys anywhere are a
// hard error. Families "custom" require the corresponding function argument.
ModelSpec model_from_config(const std::string& json_text,
                            TransitionFn custom_transition = nullptr,
                            RewardFn custom_reward = nullptr);
ModelSpec model_from_config_file(const std::string& path,
                                 TransitionFn custom_transition = nullptr,
                                 RewardFn custom_reward = nullptr);

// min(1, |ln beta| / ln(2 K_F)); when 2 K_F <= 1 the ratio is +inf and the
// exponent is 1.
double gamma_exponent(double beta, double k_big_f);

// Smallest T >= 0 with beta^T * reward_bound / (1 - beta) <= tol.
int truncation_horizon(double beta, double reward_bound, double tol, int max_horizon = 1000000);

struct LipschitzReport {
  double k_big_f_hat = 0.0;
  double k_f_hat = 0.0;
  std::vector<std::string> warnings;  // nonempty when an empirical bound exceeds a declared one
};

// Empirical lower bounds on the model's Lipschitz constants: maximizes, over
// all state/action pairs and sampled pairs of grid measures (denominator
// `grid_denominator` on the product space), the quotient of the exact
// idiosyncratic expectation E_e[d(F, F')] (per fixed common shock) and of
// |f - f'| against d((x,a),(x',a')) + W(mu, mu'). Advisory: exceeding a
// declared constant produces a warning, not a failure.
LipschitzReport estimate_lipschitz_constants(const ModelSpec& m, int samples, std::uint64_t seed,
                                             int grid_denominator = 20);

}  // namespace mfmdp
