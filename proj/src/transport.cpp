#include "mfmdp/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mfmdp/combinatorics.hpp"
#include "mfmdp/parallel.hpp"

namespace mfmdp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Measure empirical_measure(const std::vector<int>& points, const FiniteMetricSpace& space) {
  if (points.empty()) throw ValidationError("empirical_measure: empty point list");
  std::vector<double> w(static_cast<std::size_t>(space.size()), 0.0);
  double unit = 1.0 / static_cast<double>(points.size());
  for (int p : points) {
    if (p < 0 || p >= space.size()) throw ValidationError("empirical_measure: index out of range");
    w[static_cast<std::size_t>(p)] += unit;
  }
  return Measure{std::move(w)};
}

Coupling optimal_coupling(const FiniteMetricSpace& space, const Measure& mu, const Measure& nu) {
  int n = space.size();
  check_measure(mu, n, "transport source");
  check_measure(nu, n, "transport target");

  Coupling cp;
  cp.source = mu;
  cp.target = nu;
  cp.n = n;
  cp.plan.assign(static_cast<std::size_t>(n) * n, 0.0);

  // Keep common mass in place; for a metric cost there is always an optimal
  // plan whose diagonal carries min(mu_i, nu_i).
  std::vector<double> s(static_cast<std::size_t>(n)), t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double keep = std::min(mu[i], nu[i]);
    cp.plan[static_cast<std::size_t>(i) * n + i] = keep;
    s[static_cast<std::size_t>(i)] = mu[i] - keep;
    t[static_cast<std::size_t>(i)] = nu[i] - keep;
  }

  // Masses below this are rounding dust (inputs are only certified to sum to
  // one within 1e-9); leftovers this small are dropped rather than shipped.
  constexpr double kDust = 1e-12;

  std::vector<double> f(static_cast<std::size_t>(n) * n, 0.0);
  for (int round = 0;; ++round) {
    if (round > 10000) throw std::logic_error("optimal_coupling: augmentation did not terminate");
    bool active = false;
    for (int i = 0; i < n; ++i) {
      if (s[static_cast<std::size_t>(i)] > kDust) active = true;
    }
    if (!active) break;

    // Bellman-Ford over 2n nodes (0..n-1 surplus side, n..2n-1 deficit side);
    // backward arcs carry negative cost wherever flow is already assigned.
    std::vector<double> dist(static_cast<std::size_t>(2 * n), kInf);
    std::vector<int> par(static_cast<std::size_t>(2 * n), -1);
    for (int i = 0; i < n; ++i) {
      if (s[static_cast<std::size_t>(i)] > kDust) dist[static_cast<std::size_t>(i)] = 0.0;
    }
    for (int pass = 0; pass < 2 * n; ++pass) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        if (dist[static_cast<std::size_t>(i)] == kInf) continue;
        for (int j = 0; j < n; ++j) {
          double nd = dist[static_cast<std::size_t>(i)] + space.d(i, j);
          if (nd < dist[static_cast<std::size_t>(n + j)] - 1e-15) {
            dist[static_cast<std::size_t>(n + j)] = nd;
            par[static_cast<std::size_t>(n + j)] = i;
            changed = true;
          }
        }
      }
      for (int j = 0; j < n; ++j) {
        if (dist[static_cast<std::size_t>(n + j)] == kInf) continue;
        for (int i = 0; i < n; ++i) {
          if (f[static_cast<std::size_t>(i) * n + j] > kDust) {
            double nd = dist[static_cast<std::size_t>(n + j)] - space.d(i, j);
            if (nd < dist[static_cast<std::size_t>(i)] - 1e-15) {
              dist[static_cast<std::size_t>(i)] = nd;
              par[static_cast<std::size_t>(i)] = n + j;
              changed = true;
            }
          }
        }
      }
      if (!changed) break;
    }

    int sink = -1;
    for (int j = 0; j < n; ++j) {
      if (t[static_cast<std::size_t>(j)] > kDust && dist[static_cast<std::size_t>(n + j)] < kInf) {
        if (sink < 0 || dist[static_cast<std::size_t>(n + j)] < dist[static_cast<std::size_t>(n + sink)]) {
          sink = j;
        }
      }
    }
    if (sink < 0) break;  // only dust left on one side

    // Trace the path back to a surplus node, collecting forward/backward arcs.
    std::vector<std::pair<int, int>> fwd, bwd;
    int node = n + sink;
    while (par[static_cast<std::size_t>(node)] >= 0) {
      int p = par[static_cast<std::size_t>(node)];
      if (node >= n) {
        fwd.emplace_back(p, node - n);
      } else {
        bwd.emplace_back(node, p - n);
      }
      node = p;
    }
    int src = node;

    double a = std::min(s[static_cast<std::size_t>(src)], t[static_cast<std::size_t>(sink)]);
    for (auto [i, j] : bwd) a = std::min(a, f[static_cast<std::size_t>(i) * n + j]);
    for (auto [i, j] : fwd) f[static_cast<std::size_t>(i) * n + j] += a;
    for (auto [i, j] : bwd) f[static_cast<std::size_t>(i) * n + j] -= a;
    s[static_cast<std::size_t>(src)] -= a;
    t[static_cast<std::size_t>(sink)] -= a;
  }

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      cp.plan[static_cast<std::size_t>(i) * n + j] += f[static_cast<std::size_t>(i) * n + j];
    }
  }
  double cost = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) cost += cp.plan[static_cast<std::size_t>(i) * n + j] * space.d(i, j);
  }
  cp.cost = cost;
  return cp;
}

double wasserstein1(const FiniteMetricSpace& space, const Measure& mu, const Measure& nu) {
  return optimal_coupling(space, mu, nu).cost;
}

namespace {

// Dense tableau simplex for max c.x subject to A x <= b, x >= 0, with b >= 0
// (the slack basis is feasible, so no phase one). Bland's rule throughout.
double simplex_max(const std::vector<double>& c, const std::vector<std::vector<double>>& a,
                   const std::vector<double>& b) {
  int m = static_cast<int>(a.size());
  int n = static_cast<int>(c.size());
  std::vector<std::vector<double>> tab(static_cast<std::size_t>(m + 1),
                                       std::vector<double>(static_cast<std::size_t>(n + m + 1), 0.0));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) tab[i][static_cast<std::size_t>(j)] = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    tab[i][static_cast<std::size_t>(n + i)] = 1.0;
    tab[i][static_cast<std::size_t>(n + m)] = b[static_cast<std::size_t>(i)];
  }
  for (int j = 0; j < n; ++j) tab[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)] = -c[static_cast<std::size_t>(j)];
  std::vector<int> basis(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;

  const double eps = 1e-9;
  for (int iter = 0; iter < 200000; ++iter) {
    int enter = -1;
    for (int j = 0; j < n + m; ++j) {
      if (tab[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)] < -eps) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return tab[static_cast<std::size_t>(m)][static_cast<std::size_t>(n + m)];
    int leave = -1;
    double best = 0.0;
    for (int i = 0; i < m; ++i) {
      double aij = tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(enter)];
      if (aij > eps) {
        double ratio = tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(n + m)] / aij;
        if (leave < 0 || ratio < best - 1e-15 ||
            (std::abs(ratio - best) <= 1e-15 && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
          leave = i;
          best = ratio;
        }
      }
    }
    if (leave < 0) throw std::logic_error("simplex_max: unbounded program");
    double piv = tab[static_cast<std::size_t>(leave)][static_cast<std::size_t>(enter)];
    for (auto& v : tab[static_cast<std::size_t>(leave)]) v /= piv;
    for (int i = 0; i <= m; ++i) {
      if (i == leave) continue;
      double factor = tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(enter)];
      if (factor == 0.0) continue;
      for (int j = 0; j <= n + m; ++j) {
        tab[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -=
            factor * tab[static_cast<std::size_t>(leave)][static_cast<std::size_t>(j)];
      }
    }
    basis[static_cast<std::size_t>(leave)] = enter;
  }
  throw std::logic_error("simplex_max: iteration cap reached");
}

}  // namespace

double kantorovich_dual_value(const FiniteMetricSpace& space, const Measure& mu, const Measure& nu) {
  int n = space.size();
  check_measure(mu, n, "dual source");
  check_measure(nu, n, "dual target");
  if (n == 1) return 0.0;

  // Potentials are translation invariant and the objective weights sum to
  // zero, so phi >= 0 can be imposed without loss.
  std::vector<double> c(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = mu[i] - nu[i];
  std::vector<std::vector<double>> a;
  std::vector<double> b;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      std::vector<double> row(static_cast<std::size_t>(n), 0.0);
      row[static_cast<std::size_t>(i)] = 1.0;
      row[static_cast<std::size_t>(j)] = -1.0;
      a.push_back(std::move(row));
      b.push_back(space.d(i, j));
    }
  }
  return simplex_max(c, a, b);
}

static void check_point_lists(const FiniteMetricSpace& space, const std::vector<int>& y,
                              const std::vector<int>& y_prime) {
  if (y.empty() || y.size() != y_prime.size()) {
    throw ValidationError("optimal_permutation: point lists must be nonempty and equally long");
  }
  for (int p : y) {
    if (p < 0 || p >= space.size()) throw ValidationError("optimal_permutation: index out of range");
  }
  for (int p : y_prime) {
    if (p < 0 || p >= space.size()) throw ValidationError("optimal_permutation: index out of range");
  }
}

PermutationResult optimal_permutation_exhaustive(const FiniteMetricSpace& space,
                                                 const std::vector<int>& y,
                                                 const std::vector<int>& y_prime) {
  check_point_lists(space, y, y_prime);
  int n = static_cast<int>(y.size());
  if (n > 8) throw CapError("optimal_permutation_exhaustive: N > 8");
  std::vector<int> sigma(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sigma[static_cast<std::size_t>(i)] = i;
  PermutationResult best;
  best.cost = kInf;
  // next_permutation walks one-line notation in lexicographic order, so the
  // first permutation attaining the minimum is the pinned tie-break winner.
  do {
    double cost = 0.0;
    for (int i = 0; i < n; ++i) cost += space.d(y[static_cast<std::size_t>(i)], y_prime[static_cast<std::size_t>(sigma[static_cast<std::size_t>(i)])]);
    if (cost < best.cost) {
      best.cost = cost;
      best.sigma = sigma;
    }
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  best.cost /= n;
  return best;
}

PermutationResult optimal_permutation_assignment(const FiniteMetricSpace& space,
                                                 const std::vector<int>& y,
                                                 const std::vector<int>& y_prime) {
  check_point_lists(space, y, y_prime);
  int n = static_cast<int>(y.size());
  auto cost_at = [&](int i, int j) { return space.d(y[static_cast<std::size_t>(i)], y_prime[static_cast<std::size_t>(j)]); };

  // O(n^3) shortest-augmenting-path assignment with dual potentials
  // (1-indexed internally, column 0 is the virtual root).
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), kInf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      int i0 = p[static_cast<std::size_t>(j0)], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        double cur = cost_at(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  PermutationResult res;
  res.sigma.assign(static_cast<std::size_t>(n), -1);
  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    int i = p[static_cast<std::size_t>(j)];
    res.sigma[static_cast<std::size_t>(i - 1)] = j - 1;
    total += cost_at(i - 1, j - 1);
  }
  res.cost = total / n;
  return res;
}

PermutationResult optimal_permutation(const FiniteMetricSpace& space, const std::vector<int>& y,
                                      const std::vector<int>& y_prime) {
  if (y.size() <= 8) return optimal_permutation_exhaustive(space, y, y_prime);
  return optimal_permutation_assignment(space, y, y_prime);
}

std::vector<int> sample_iid(const Measure& mu, int n, Rng& rng) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(sample_index(mu, rng.u01()));
  return out;
}

std::vector<Measure> default_mn_candidates(const FiniteMetricSpace& space, std::uint64_t seed) {
  int n = space.size();
  std::vector<Measure> out;
  out.push_back(uniform_measure(n));
  for (int i = 0; i < n; ++i) out.push_back(point_mass(n, i));
  for (int k = 0; k < 32; ++k) {
    Rng rng(seed, 4242, static_cast<std::uint64_t>(k));
    std::vector<double> w(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      double e = -std::log(1.0 - rng.u01());
      w[static_cast<std::size_t>(i)] = e;
      sum += e;
    }
    if (sum <= 0.0) {
      out.push_back(uniform_measure(n));
      continue;
    }
    for (double& v : w) v /= sum;
    out.push_back(Measure{std::move(w)});
  }
  return out;
}

double estimate_MN(const FiniteMetricSpace& space, int n,
                   const std::vector<Measure>& candidates, int trials, std::uint64_t seed,
                   int workers) {
  if (n < 1) throw ValidationError("estimate_MN: n must be >= 1");
  if (trials < 1) throw ValidationError("estimate_MN: trials must be >= 1");
  if (candidates.empty()) throw ValidationError("estimate_MN: candidate list is empty");
  for (const Measure& c : candidates) check_measure(c, space.size(), "estimate_MN candidate");

  int nw = resolve_workers(workers);
  double best = 0.0;
  std::vector<double> vals(static_cast<std::size_t>(trials));
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const Measure& mu = candidates[c];
    parallel_for(trials, nw, [&](int t) {
      Rng rng(seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(t));
      Measure emp = empirical_measure(sample_iid(mu, n, rng), space);
      vals[static_cast<std::size_t>(t)] = wasserstein1(space, emp, mu);
    });
    double mean = fixed_tree_sum(vals) / trials;
    best = std::max(best, mean);
  }
  return best;
}

double estimate_MN_exact(const FiniteMetricSpace& space, int n, const Measure& mu) {
  if (n < 1) throw ValidationError("estimate_MN_exact: n must be >= 1");
  int k = space.size();
  check_measure(mu, k, "estimate_MN_exact law");
  double acc = 0.0;
  for (const auto& counts : enumerate_compositions(n, k)) {
    // multinomial coefficient n! / prod counts_i!, built from binomials
    double coeff = 1.0;
    int used = 0;
    for (int i = 0; i < k; ++i) {
      used += counts[static_cast<std::size_t>(i)];
      coeff *= static_cast<double>(binomial(used, counts[static_cast<std::size_t>(i)]));
    }
    double prob = coeff;
    std::vector<double> w(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
      int ci = counts[static_cast<std::size_t>(i)];
      prob *= std::pow(mu[i], ci);
      w[static_cast<std::size_t>(i)] = static_cast<double>(ci) / n;
    }
    if (prob == 0.0) continue;
    acc += prob * wasserstein1(space, Measure{std::move(w)}, mu);
  }
  return acc;
}

}  // namespace mfmdp
