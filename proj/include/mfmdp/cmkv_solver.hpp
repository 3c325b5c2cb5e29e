#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mfmdp/core_model.hpp"

namespace mfmdp {

// All measures on `space` with weights k_i / q; node order is the ascending
// lexicographic order of the count vectors, which downstream tie-breaks rely
// on.
struct SimplexGrid {
  FiniteMetricSpace space;
  int q = 1;
  std::vector<Measure> nodes;

  int size() const { return static_cast<int>(nodes.size()); }
  // Index of the W1-closest node; ties resolved to the smaller index.
  int nearest(const Measure& mu) const;
  // Upper bound on the distance from any measure to its assigned node.
  double mesh_bound() const;
};

SimplexGrid make_simplex_grid(const FiniteMetricSpace& space, int q);

// Per-state distribution over actions; the row for state x is the conditional
// action law given x.
struct ActionKernel {
  std::vector<Measure> rows;

  int n_states() const { return static_cast<int>(rows.size()); }
  const Measure& row(int x) const { return rows[static_cast<std::size_t>(x)]; }
};

// joint(x,a) = mu(x) * kernel(a|x); lives on the product space.
Measure joint_measure(const Measure& mu, const ActionKernel& kernel);

// Disintegration of a joint law into state marginal conditionals. Rows at
// states with marginal mass <= 1e-12 are uniform by convention.
ActionKernel kernel_from_joint(const Measure& joint, int n_states, int n_actions);

// Inverse-CDF action draw, half-open cells.
int sample_action(const Measure& dist, double u);

// Search family for the per-node action optimization.
struct KernelFamily {
  enum class Kind { deterministic, randomized };
  Kind kind = Kind::deterministic;
  int denominator = 8;  // randomized rows live on the 1/denominator grid

  static KernelFamily deterministic() { return {Kind::deterministic, 0}; }
  static KernelFamily randomized(int denominator) { return {Kind::randomized, denominator}; }
};

// Every kernel in the family, in the pinned enumeration order (state-0 row
// varies fastest; rows ordered by their composition rank).
std::vector<ActionKernel> enumerate_kernels(int n_states, int n_actions,
                                            const KernelFamily& family,
                                            std::int64_t cap = std::int64_t(1) << 20);

struct MeanFieldPolicy {
  std::shared_ptr<const SimplexGrid> grid;
  std::vector<ActionKernel> kernels;  // one per grid node
  double epsilon = 0.0;               // accounted optimality slack of the policy

  const ActionKernel& at(const Measure& mu) const {
    return kernels[static_cast<std::size_t>(grid->nearest(mu))];
  }
  const ActionKernel& at_node(int i) const { return kernels[static_cast<std::size_t>(i)]; }
};

enum class Interp { nearest, none };

struct ValueTable {
  std::shared_ptr<const SimplexGrid> grid;
  std::vector<double> values;
  Interp interpolation = Interp::nearest;

  double at_node(int i) const { return values[static_cast<std::size_t>(i)]; }
  // nearest: value at the W1-closest node; none: exact node match required.
  double operator()(const Measure& mu) const;
};

// Conditional law of the next state given the common-noise outcome e0, with
// the idiosyncratic noise integrated out exactly.
Measure next_measure(const ModelSpec& model, const Measure& mu, const ActionKernel& kernel,
                     int e0);

// Expected reward under a joint state-action law.
double expected_reward(const ModelSpec& model, const Measure& joint);

// One-kernel Bellman application: expected reward plus discounted expectation
// of W at the next conditional law over the common noise.
double bellman_apply_kernel(const ModelSpec& model, const ValueTable& w, const Measure& mu,
                            const ActionKernel& kernel);

// Maximizes bellman_apply_kernel over the family; ties go to the first kernel
// in enumeration order.
std::pair<double, ActionKernel> bellman_sup(const ModelSpec& model, const ValueTable& w,
                                            const Measure& mu, const KernelFamily& family);

struct SolveResult {
  ValueTable table;
  MeanFieldPolicy policy;
  KernelFamily family;
  double residual = 0.0;
  int sweeps = 0;
};

// Synchronous value-iteration sweeps from the zero table until the sup-norm
// residual drops to tol. Node updates within a sweep parallelize; results are
// independent of the worker count.
SolveResult value_iteration(const ModelSpec& model, const SimplexGrid& grid,
                            const KernelFamily& family, double tol, int workers = 0);

struct EpsilonReport {
  double residual = 0.0;
  double family_gap = 0.0;  // finer-family sup minus family sup, max over probes
  double epsilon = 0.0;     // residual + family_gap
};

// Optimality slack of the extracted policy: iteration residual plus the
// family-discretization gap measured against a twice-finer family at up to
// `probes` evenly spaced grid nodes.
EpsilonReport policy_epsilon(const ModelSpec& model, const SolveResult& solved, int probes = 16);

struct GainEstimate {
  double mean = 0.0;
  double se = 0.0;
  double truncation_bias = 0.0;  // geometric tail bound of the cut-off sum
};

// Gain of a mean-field policy from mu0: the conditional state law is
// propagated exactly; only common-noise paths are sampled.
GainEstimate policy_gain(const ModelSpec& model, const MeanFieldPolicy& policy,
                         const Measure& mu0, int horizon, int common_paths, std::uint64_t seed,
                         int workers = 0);

// Structured-text artifact round trip (embeds version and resolved config).
std::string solve_artifact_to_json(const ModelSpec& model, const SolveResult& solved);
SolveResult solve_artifact_from_json(const ModelSpec& model, const std::string& text);

}  // namespace mfmdp
