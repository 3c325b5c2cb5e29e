#pragma once

#include <cstdint>
#include <vector>

#include "mfmdp/core_model.hpp"
#include "mfmdp/rng.hpp"

namespace mfmdp {

// Transport plan between two measures on the same space.
struct Coupling {
  Measure source;
  Measure target;
  int n = 0;
  std::vector<double> plan;  // row-major n x n, plan[i*n+j] = mass moved i -> j
  double cost = 0.0;

  double at(int i, int j) const { return plan[static_cast<std::size_t>(i) * n + j]; }
};

struct PermutationResult {
  std::vector<int> sigma;  // agent i of the first list is matched to sigma[i] of the second
  double cost = 0.0;       // (1/N) sum_i d(y_i, y'_{sigma_i})
};

Measure empirical_measure(const std::vector<int>& points, const FiniteMetricSpace& space);

// Exact optimal transport for the ground metric of `space`. Common mass is
// kept in place (optimal for metric costs) and the remainder is solved by
// successive shortest augmenting paths on the bipartite residual graph.
Coupling optimal_coupling(const FiniteMetricSpace& space, const Measure& mu, const Measure& nu);
double wasserstein1(const FiniteMetricSpace& space, const Measure& mu, const Measure& nu);

// Independent engine: maximizes the 1-Lipschitz potential objective
// sum_i phi_i (mu_i - nu_i) subject to phi_i - phi_j <= d(i,j), solved as a
// dense linear program. Agrees with wasserstein1 by strong duality.
double kantorovich_dual_value(const FiniteMetricSpace& space, const Measure& mu, const Measure& nu);

// Minimum-mean-distance matching of two equally sized point lists. Ties are
// broken by the lexicographically smallest permutation in one-line notation.
PermutationResult optimal_permutation_exhaustive(const FiniteMetricSpace& space,
                                                 const std::vector<int>& y,
                                                 const std::vector<int>& y_prime);
PermutationResult optimal_permutation_assignment(const FiniteMetricSpace& space,
                                                 const std::vector<int>& y,
                                                 const std::vector<int>& y_prime);
// Dispatch: exhaustive enumeration (with the pinned tie-break) for N <= 8,
// assignment algorithm above that.
PermutationResult optimal_permutation(const FiniteMetricSpace& space, const std::vector<int>& y,
                                      const std::vector<int>& y_prime);

// Inverse-CDF draw of n i.i.d. indices from mu.
std::vector<int> sample_iid(const Measure& mu, int n, Rng& rng);

// Candidate laws for the worst-case empirical-deviation estimate: the uniform
// measure, every vertex, and 32 flat-Dirichlet draws.
std::vector<Measure> default_mn_candidates(const FiniteMetricSpace& space, std::uint64_t seed);

// Lower bound on sup_mu E[W1(empirical_n, mu)]: Monte-Carlo average per
// candidate, maximum over candidates. Bit-stable for a given seed regardless
// of worker count.
double estimate_MN(const FiniteMetricSpace& space, int n,
                   const std::vector<Measure>& candidates, int trials, std::uint64_t seed,
                   int workers = 0);

// Exact E[W1(empirical_n, mu)] by enumerating all count vectors with their
// multinomial probabilities. Intended for small n.
double estimate_MN_exact(const FiniteMetricSpace& space, int n, const Measure& mu);

}  // namespace mfmdp
