#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "mfmdp/cmkv_solver.hpp"
#include "mfmdp/combinatorics.hpp"
#include "mfmdp/rng.hpp"
#include "mfmdp/transport.hpp"
#include "test_models.hpp"

using namespace mfmdp;

namespace {

// Test-local reimplementation of the one-step conditional law: plain loops
// over (x, a, e), no shortcuts.
Measure oracle_next_measure(const ModelSpec& m, const Measure& mu, const ActionKernel& k,
                            int e0) {
  int nx = m.n_states(), na = m.n_actions(), ne = m.n_idio();
  Measure joint = joint_measure(mu, k);
  std::vector<double> nu(static_cast<std::size_t>(nx), 0.0);
  for (int x = 0; x < nx; ++x)
    for (int a = 0; a < na; ++a)
      for (int e = 0; e < ne; ++e)
        nu[static_cast<std::size_t>(m.transition(x, a, joint, e, e0))] +=
            mu[x] * k.row(x)[a] * m.noise.idio[e];
  return Measure{std::move(nu)};
}

// Test-local one-kernel Bellman application by exhaustive enumeration over
// (x, a) for the reward and (e0) for the continuation.
double oracle_apply(const ModelSpec& m, const ValueTable& w, const Measure& mu,
                    const ActionKernel& k) {
  Measure joint = joint_measure(mu, k);
  double val = 0.0;
  for (int x = 0; x < m.n_states(); ++x)
    for (int a = 0; a < m.n_actions(); ++a)
      val += joint[pair_index(x, a, m.n_actions())] * m.reward(x, a, joint);
  for (int e0 = 0; e0 < m.n_common(); ++e0)
    val += m.beta * m.noise.common[e0] * w(oracle_next_measure(m, mu, k, e0));
  return val;
}

// Independent finite-horizon backward recursion on the same grid and lookup
// rule; after `depth` steps it sits within beta^depth * bound / (1 - beta) of
// the infinite-horizon fixed point.
std::vector<double> oracle_horizon_values(const ModelSpec& m, const SimplexGrid& g,
                                          const KernelFamily& fam, int depth) {
  std::vector<ActionKernel> kernels = enumerate_kernels(m.n_states(), m.n_actions(), fam);
  std::vector<double> v(static_cast<std::size_t>(g.size()), 0.0);
  for (int d = 0; d < depth; ++d) {
    std::vector<double> nv(static_cast<std::size_t>(g.size()));
    for (int i = 0; i < g.size(); ++i) {
      const Measure& mu = g.nodes[static_cast<std::size_t>(i)];
      double best = -1e300;
      for (const ActionKernel& k : kernels) {
        Measure joint = joint_measure(mu, k);
        double val = 0.0;
        for (int x = 0; x < m.n_states(); ++x)
          for (int a = 0; a < m.n_actions(); ++a)
            val += joint[pair_index(x, a, m.n_actions())] * m.reward(x, a, joint);
        for (int e0 = 0; e0 < m.n_common(); ++e0) {
          Measure nu = oracle_next_measure(m, mu, k, e0);
          val += m.beta * m.noise.common[e0] * v[static_cast<std::size_t>(g.nearest(nu))];
        }
        best = std::max(best, val);
      }
      nv[static_cast<std::size_t>(i)] = best;
    }
    v = std::move(nv);
  }
  return v;
}

ValueTable constant_table(std::shared_ptr<const SimplexGrid> g, double c) {
  return ValueTable{g, std::vector<double>(static_cast<std::size_t>(g->size()), c),
                    Interp::nearest};
}

}  // namespace

TEST_CASE("simplex grid enumerates all rational nodes") {
  FiniteMetricSpace two = discrete_space(2, "");
  SimplexGrid g = make_simplex_grid(two, 50);
  CHECK(g.size() == 51);
  FiniteMetricSpace three = discrete_space(3, "");
  SimplexGrid g3 = make_simplex_grid(three, 4);
  CHECK(g3.size() == static_cast<int>(binomial(6, 2)));
  for (const Measure& node : g3.nodes) CHECK_NOTHROW(check_measure(node, 3, "node"));
  // ascending lexicographic count order: first node is all mass on the last point
  CHECK(g3.nodes[0][2] == 1.0);
  CHECK(g3.nodes[static_cast<std::size_t>(g3.size() - 1)][0] == 1.0);
}

TEST_CASE("grid lookup picks the closest node, ties to the smaller index") {
  FiniteMetricSpace two = discrete_space(2, "");
  SimplexGrid g = make_simplex_grid(two, 2);  // nodes (0,1), (.5,.5), (1,0)
  CHECK(g.nearest(make_measure({0.0, 1.0})) == 0);
  CHECK(g.nearest(make_measure({0.6, 0.4})) == 1);
  CHECK(g.nearest(make_measure({0.95, 0.05})) == 2);
  // equidistant between nodes 0 and 1
  CHECK(g.nearest(make_measure({0.25, 0.75})) == 0);
}

TEST_CASE("grid mesh bound holds on random measures") {
  Rng rng(301);
  FiniteMetricSpace three =
      make_metric_space({"a", "b", "c"}, {0, 0.7, 1.0, 0.7, 0, 0.6, 1.0, 0.6, 0});
  SimplexGrid g = make_simplex_grid(three, 7);
  for (int inst = 0; inst < 200; ++inst) {
    std::vector<double> w(3);
    double sum = 0;
    for (double& v : w) {
      v = -std::log(1.0 - rng.u01());
      sum += v;
    }
    for (double& v : w) v /= sum;
    Measure mu = make_measure(w);
    double d = wasserstein1(three, mu, g.nodes[static_cast<std::size_t>(g.nearest(mu))]);
    CHECK(d <= g.mesh_bound() + 1e-12);
  }
}

TEST_CASE("joint measure has the exact state marginal") {
  Measure mu = make_measure({0.3, 0.7});
  ActionKernel k{{make_measure({0.25, 0.75}), make_measure({1.0, 0.0})}};
  Measure joint = joint_measure(mu, k);
  CHECK(joint.size() == 4);
  for (int x = 0; x < 2; ++x) {
    double marg = joint[pair_index(x, 0, 2)] + joint[pair_index(x, 1, 2)];
    CHECK(std::abs(marg - mu[x]) <= 1e-15);
  }
  CHECK(joint[pair_index(1, 0, 2)] == 0.7);
  CHECK(joint[pair_index(1, 1, 2)] == 0.0);
}

TEST_CASE("kernel disintegration pinned values and round trip") {
  // joint mass {(0,0):0.25, (0,1):0.25, (1,1):0.5}
  Measure joint = make_measure({0.25, 0.25, 0.0, 0.5});
  ActionKernel k = kernel_from_joint(joint, 2, 2);
  CHECK(k.row(0)[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(k.row(0)[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(k.row(1)[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(k.row(1)[1] == doctest::Approx(1.0).epsilon(1e-12));

  // zero-marginal state gets the uniform row
  Measure degenerate = make_measure({0.6, 0.4, 0.0, 0.0});
  ActionKernel kd = kernel_from_joint(degenerate, 2, 2);
  CHECK(kd.row(1)[0] == doctest::Approx(0.5));
  CHECK(kd.row(1)[1] == doctest::Approx(0.5));

  // mu (x) kernel_from_joint(joint) reproduces joint on positive-mass states
  Measure marginal = make_measure({0.5, 0.5});
  Measure rebuilt = joint_measure(marginal, k);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(rebuilt[i] - joint[i]) <= 1e-12);
}

TEST_CASE("action sampling reproduces the law") {
  Measure dist = make_measure({0.3, 0.7});
  CHECK(sample_action(dist, 0.2) == 0);
  CHECK(sample_action(dist, 0.3) == 1);
  CHECK(sample_action(point_mass(3, 2), 0.77) == 2);
  Rng rng(302);
  int n = 1000000;
  int ones = 0;
  for (int i = 0; i < n; ++i) ones += sample_action(dist, rng.u01());
  double phat = static_cast<double>(ones) / n;
  CHECK(std::abs(phat - 0.7) <= 3.0 * std::sqrt(0.7 * 0.3 / n));
}

TEST_CASE("kernel family enumeration order and caps") {
  std::vector<ActionKernel> det = enumerate_kernels(2, 2, KernelFamily::deterministic());
  CHECK(det.size() == 4);
  // state-0 row varies fastest; deterministic rows ordered by action index
  CHECK(det[0].row(0)[0] == 1.0);
  CHECK(det[1].row(0)[1] == 1.0);
  CHECK(det[1].row(1)[0] == 1.0);

  std::vector<ActionKernel> r2 = enumerate_kernels(2, 2, KernelFamily::randomized(2));
  CHECK(r2.size() == 9);
  // rows follow the composition order (0,2), (1,1), (2,0) scaled by 1/2
  CHECK(r2[0].row(0)[0] == 0.0);
  CHECK(r2[1].row(0)[0] == 0.5);
  CHECK(r2[2].row(0)[0] == 1.0);
  CHECK(r2[3].row(1)[0] == 0.5);

  CHECK(enumerate_kernels(2, 2, KernelFamily::randomized(8)).size() == 81);
  CHECK_THROWS_AS(enumerate_kernels(3, 2, KernelFamily::randomized(2000)), CapError);
}

TEST_CASE("next measure pinned values") {
  // constant transition: point mass regardless of inputs
  ModelSpec cm = testmodels::influence_model(4);
  cm.transition = [](int, int, const Measure&, int, int) { return 0; };
  cm = finalize_model(std::move(cm));
  ActionKernel unif{{uniform_measure(2), uniform_measure(2)}};
  Measure nu = next_measure(cm, make_measure({0.4, 0.6}), unif, 0);
  CHECK(nu[0] == doctest::Approx(1.0).epsilon(1e-15));

  // identity transition: law is preserved
  ModelSpec im = testmodels::influence_model(4);
  im.transition = [](int x, int, const Measure&, int, int) { return x; };
  im = finalize_model(std::move(im));
  Measure mu = make_measure({0.4, 0.6});
  Measure id = next_measure(im, mu, unif, 1);
  CHECK(id[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(id[1] == doctest::Approx(0.6).epsilon(1e-12));

  // threshold model, 10 noise cells, everyone plays action 1, no common shift:
  // level is 0.5 + 0.3 = 0.8, and 8 of the 10 cell midpoints fall below it
  ModelSpec tm = testmodels::influence_model(10, 0.3, 0.5, false);
  ActionKernel all_one{{point_mass(2, 1), point_mass(2, 1)}};
  Measure res = next_measure(tm, make_measure({0.5, 0.5}), all_one, 0);
  CHECK(res[1] == doctest::Approx(0.8).epsilon(1e-12));

  // mass conservation on random kernels
  Rng rng(303);
  ModelSpec ref = testmodels::influence_model(4);
  for (int inst = 0; inst < 100; ++inst) {
    double p = rng.u01(), q1 = rng.u01(), q2 = rng.u01();
    ActionKernel k{{make_measure({q1, 1 - q1}), make_measure({q2, 1 - q2})}};
    Measure out = next_measure(ref, make_measure({p, 1 - p}), k, rng.u01() < 0.5 ? 0 : 1);
    double sum = out[0] + out[1];
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("next measure is affine in the kernel when the rule ignores the law") {
  ModelSpec m = testmodels::influence_model(8);
  m.transition = [](int, int a, const Measure&, int e, int) {
    return (e + 0.5) / 8.0 < 0.3 + 0.5 * a ? 1 : 0;
  };
  m = finalize_model(std::move(m));
  Measure mu = make_measure({0.35, 0.65});
  ActionKernel k1{{make_measure({0.25, 0.75}), point_mass(2, 0)}};
  ActionKernel k2{{uniform_measure(2), make_measure({0.8, 0.2})}};
  for (double lam : {0.0, 0.3, 0.5, 0.9}) {
    ActionKernel mix{{make_measure({lam * k1.row(0)[0] + (1 - lam) * k2.row(0)[0],
                                    lam * k1.row(0)[1] + (1 - lam) * k2.row(0)[1]}),
                      make_measure({lam * k1.row(1)[0] + (1 - lam) * k2.row(1)[0],
                                    lam * k1.row(1)[1] + (1 - lam) * k2.row(1)[1]})}};
    Measure a = next_measure(m, mu, mix, 0);
    Measure b1 = next_measure(m, mu, k1, 0);
    Measure b2 = next_measure(m, mu, k2, 0);
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(a[i] - (lam * b1[i] + (1 - lam) * b2[i])) <= 1e-12);
    }
  }
}

TEST_CASE("one-kernel Bellman application matches the exhaustive enumerator") {
  ModelSpec m = testmodels::influence_model(4);
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(m.states, 4));

  SUBCASE("constant continuation value") {
    ValueTable w = constant_table(grid, 3.25);
    ActionKernel k{{make_measure({0.25, 0.75}), uniform_measure(2)}};
    Measure mu = make_measure({0.5, 0.5});
    Measure joint = joint_measure(mu, k);
    double expect = expected_reward(m, joint) + 0.5 * 3.25;
    CHECK(bellman_apply_kernel(m, w, mu, k) == doctest::Approx(expect).epsilon(1e-14));
  }

  SUBCASE("near-zero discount returns the expected reward") {
    ModelSpec m0 = testmodels::influence_model(4, 0.3, 1e-12);
    auto g0 = std::make_shared<SimplexGrid>(make_simplex_grid(m0.states, 4));
    ValueTable w = constant_table(g0, 1.0);
    ActionKernel k{{point_mass(2, 1), point_mass(2, 0)}};
    Measure mu = make_measure({0.25, 0.75});
    double fhat = expected_reward(m0, joint_measure(mu, k));
    CHECK(std::abs(bellman_apply_kernel(m0, w, mu, k) - fhat) <= 1e-11);
  }

  SUBCASE("random kernels against the oracle") {
    Rng rng(304);
    std::vector<double> vals(static_cast<std::size_t>(grid->size()));
    for (double& v : vals) v = -2.0 + 4.0 * rng.u01();
    ValueTable w{grid, vals, Interp::nearest};
    for (int inst = 0; inst < 50; ++inst) {
      double p = rng.u01(), q1 = rng.u01(), q2 = rng.u01();
      ActionKernel k{{make_measure({q1, 1 - q1}), make_measure({q2, 1 - q2})}};
      Measure mu = make_measure({p, 1 - p});
      CHECK(bellman_apply_kernel(m, w, mu, k) ==
            doctest::Approx(oracle_apply(m, w, mu, k)).epsilon(1e-13));
    }
  }
}

TEST_CASE("kernel-family supremum") {
  ModelSpec m = testmodels::influence_model(4);
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(m.states, 4));
  Rng rng(305);
  std::vector<double> vals(static_cast<std::size_t>(grid->size()));
  for (double& v : vals) v = rng.u01();
  ValueTable w{grid, vals, Interp::nearest};
  Measure mu = make_measure({0.25, 0.75});

  SUBCASE("reward independent of the action with a flat table") {
    ModelSpec ma = testmodels::influence_model(4);
    ma.reward = [](int x, int, const Measure&) { return 1.0 * x; };
    ma = finalize_model(std::move(ma));
    ValueTable flat = constant_table(grid, 0.7);
    auto [v, k] = bellman_sup(ma, flat, mu, KernelFamily::deterministic());
    ActionKernel any{{point_mass(2, 1), point_mass(2, 0)}};
    CHECK(v == doctest::Approx(bellman_apply_kernel(ma, flat, mu, any)).epsilon(1e-13));
  }

  SUBCASE("step-1/2 family equals brute force over its 9 kernels") {
    auto [v, k] = bellman_sup(m, w, mu, KernelFamily::randomized(2));
    double best = -1e300;
    for (const ActionKernel& cand : enumerate_kernels(2, 2, KernelFamily::randomized(2))) {
      best = std::max(best, oracle_apply(m, w, mu, cand));
    }
    CHECK(v == doctest::Approx(best).epsilon(1e-13));
  }

  SUBCASE("randomized family dominates the deterministic one") {
    for (int i = 0; i < grid->size(); ++i) {
      double det = bellman_sup(m, w, grid->nodes[static_cast<std::size_t>(i)],
                               KernelFamily::deterministic())
                       .first;
      double rnd = bellman_sup(m, w, grid->nodes[static_cast<std::size_t>(i)],
                               KernelFamily::randomized(8))
                       .first;
      CHECK(rnd >= det - 1e-12);
    }
  }
}

TEST_CASE("bellman operator contracts and preserves order") {
  ModelSpec m = testmodels::influence_model(4);
  SimplexGrid grid = make_simplex_grid(m.states, 5);
  auto gsp = std::make_shared<SimplexGrid>(grid);
  KernelFamily fam = KernelFamily::randomized(4);
  Rng rng(306);
  for (int inst = 0; inst < 50; ++inst) {
    std::vector<double> v1(static_cast<std::size_t>(grid.size())), v2 = v1;
    for (auto& v : v1) v = -2.0 + 4.0 * rng.u01();
    for (auto& v : v2) v = -2.0 + 4.0 * rng.u01();
    ValueTable w1{gsp, v1, Interp::nearest}, w2{gsp, v2, Interp::nearest};
    double diff = 0.0, tdiff = 0.0;
    for (int i = 0; i < grid.size(); ++i) {
      diff = std::max(diff, std::abs(v1[static_cast<std::size_t>(i)] - v2[static_cast<std::size_t>(i)]));
      const Measure& node = grid.nodes[static_cast<std::size_t>(i)];
      tdiff = std::max(tdiff, std::abs(bellman_sup(m, w1, node, fam).first -
                                       bellman_sup(m, w2, node, fam).first));
    }
    CHECK(tdiff <= m.beta * diff + 1e-12);

    // monotonicity: push w2 above w1 pointwise
    std::vector<double> hi = v1;
    for (auto& v : hi) v += rng.u01();
    ValueTable wh{gsp, hi, Interp::nearest};
    for (int i = 0; i < grid.size(); ++i) {
      const Measure& node = grid.nodes[static_cast<std::size_t>(i)];
      CHECK(bellman_sup(m, w1, node, fam).first <=
            bellman_sup(m, wh, node, fam).first + 1e-12);
    }
  }
}

TEST_CASE("value iteration solves the constant-reward model in closed form") {
  ModelSpec m = testmodels::constant_reward_model(1.0, 0.5);
  SimplexGrid grid = make_simplex_grid(m.states, 10);
  SolveResult res = value_iteration(m, grid, KernelFamily::deterministic(), 1e-8);
  CHECK(res.residual <= 1e-8);
  for (int i = 0; i < grid.size(); ++i) {
    CHECK(res.table.at_node(i) == doctest::Approx(2.0).epsilon(1e-7));
  }
}

TEST_CASE("value iteration with near-zero discount is a one-step supremum") {
  ModelSpec m = testmodels::influence_model(4, 0.3, 1e-12);
  SimplexGrid grid = make_simplex_grid(m.states, 8);
  SolveResult res = value_iteration(m, grid, KernelFamily::deterministic(), 1e-9);
  auto gsp = std::make_shared<SimplexGrid>(grid);
  ValueTable zero = constant_table(gsp, 0.0);
  for (int i = 0; i < grid.size(); ++i) {
    double one_step =
        bellman_sup(m, zero, grid.nodes[static_cast<std::size_t>(i)], KernelFamily::deterministic())
            .first;
    CHECK(std::abs(res.table.at_node(i) - one_step) <= 1e-9);
  }
}

TEST_CASE("value iteration matches the finite-horizon oracle on the reference model") {
  ModelSpec m = testmodels::influence_model(4);
  SimplexGrid grid = make_simplex_grid(m.states, 50);
  KernelFamily fam = KernelFamily::randomized(8);
  SolveResult res = value_iteration(m, grid, fam, 1e-8);
  CHECK(res.residual <= 1e-8);

  // beta-contraction sweep bound for tol 1e-8 and reward range 1.2
  int bound = static_cast<int>(
      std::ceil(std::log(1e-8 * (1.0 - m.beta) / m.reward_range()) / std::log(m.beta)));
  CHECK(bound == 28);
  CHECK(res.sweeps <= bound);

  int depth = truncation_horizon(m.beta, m.reward_bound(), 1e-4);
  CHECK(depth == 15);
  std::vector<double> oracle = oracle_horizon_values(m, grid, fam, depth);
  for (int i = 0; i < grid.size(); ++i) {
    CHECK(std::abs(res.table.at_node(i) - oracle[static_cast<std::size_t>(i)]) <= 1e-3);
  }
}

TEST_CASE("returned table is a fixed point within tolerance") {
  ModelSpec m = testmodels::influence_model(4);
  SimplexGrid grid = make_simplex_grid(m.states, 10);
  KernelFamily fam = KernelFamily::randomized(8);
  SolveResult res = value_iteration(m, grid, fam, 1e-9);
  for (int i = 0; i < grid.size(); ++i) {
    double applied = bellman_sup(m, res.table, grid.nodes[static_cast<std::size_t>(i)], fam).first;
    CHECK(std::abs(applied - res.table.at_node(i)) <= 1e-9);
    // the recorded argmax kernel attains the same value
    double via_policy =
        bellman_apply_kernel(m, res.table, grid.nodes[static_cast<std::size_t>(i)], res.policy.at_node(i));
    CHECK(std::abs(applied - via_policy) <= 1e-12);
  }
}

TEST_CASE("value iteration is independent of the worker count") {
  ModelSpec m = testmodels::influence_model(4);
  SimplexGrid grid = make_simplex_grid(m.states, 20);
  KernelFamily fam = KernelFamily::randomized(8);
  SolveResult a = value_iteration(m, grid, fam, 1e-8, 1);
  SolveResult b = value_iteration(m, grid, fam, 1e-8, 4);
  REQUIRE(a.table.values.size() == b.table.values.size());
  for (std::size_t i = 0; i < a.table.values.size(); ++i) {
    CHECK(a.table.values[i] == b.table.values[i]);
  }
  CHECK(a.sweeps == b.sweeps);
}

TEST_CASE("policy gain pinned values") {
  SUBCASE("constant reward has the exact truncated geometric gain") {
    ModelSpec m = testmodels::constant_reward_model(1.0, 0.5);
    SimplexGrid grid = make_simplex_grid(m.states, 10);
    SolveResult res = value_iteration(m, grid, KernelFamily::deterministic(), 1e-8);
    GainEstimate g = policy_gain(m, res.policy, uniform_measure(2), 20, 16, 5);
    double expect = (1.0 - std::pow(0.5, 20)) / 0.5;
    CHECK(g.mean == doctest::Approx(expect).epsilon(1e-12));
    CHECK(g.se == 0.0);
    CHECK(g.truncation_bias == doctest::Approx(std::pow(0.5, 20) * 2.0).epsilon(1e-12));
  }

  SUBCASE("no common noise gives zero standard error") {
    ModelSpec m = testmodels::influence_model(10, 0.3, 0.5, false);
    SimplexGrid grid = make_simplex_grid(m.states, 20);
    SolveResult res = value_iteration(m, grid, KernelFamily::randomized(4), 1e-8);
    GainEstimate g = policy_gain(m, res.policy, uniform_measure(2), 25, 8, 6);
    CHECK(g.se == 0.0);
  }

  SUBCASE("gain never beats the solved value beyond tolerances") {
    ModelSpec m = testmodels::influence_model(4);
    SimplexGrid grid = make_simplex_grid(m.states, 50);
    SolveResult res = value_iteration(m, grid, KernelFamily::randomized(8), 1e-8);
    Measure mu0 = uniform_measure(2);
    GainEstimate g = policy_gain(m, res.policy, mu0, 40, 64, 7);
    CHECK(g.mean <= res.table(mu0) + 0.05);
  }

  SUBCASE("worker independence") {
    ModelSpec m = testmodels::influence_model(4);
    SimplexGrid grid = make_simplex_grid(m.states, 20);
    SolveResult res = value_iteration(m, grid, KernelFamily::randomized(8), 1e-8);
    GainEstimate a = policy_gain(m, res.policy, uniform_measure(2), 30, 33, 8, 1);
    GainEstimate b = policy_gain(m, res.policy, uniform_measure(2), 30, 33, 8, 4);
    CHECK(a.mean == b.mean);
    CHECK(a.se == b.se);
  }
}

TEST_CASE("policy epsilon accounting") {
  ModelSpec m = testmodels::influence_model(4);
  SimplexGrid grid = make_simplex_grid(m.states, 20);
  SolveResult res = value_iteration(m, grid, KernelFamily::randomized(8), 1e-8);
  EpsilonReport rep = policy_epsilon(m, res);
  CHECK(rep.residual == res.residual);
  CHECK(rep.family_gap >= 0.0);
  CHECK(rep.epsilon == rep.residual + rep.family_gap);
  CHECK(rep.epsilon < 0.1);
}

TEST_CASE("table lookup without interpolation requires a grid node") {
  ModelSpec m = testmodels::influence_model(4);
  auto grid = std::make_shared<SimplexGrid>(make_simplex_grid(m.states, 4));
  std::vector<double> vals;
  for (int i = 0; i < grid->size(); ++i) vals.push_back(static_cast<double>(i));
  ValueTable w{grid, vals, Interp::none};
  CHECK(w(make_measure({0.25, 0.75})) == 1.0);
  CHECK_THROWS_AS(w(make_measure({0.3, 0.7})), ValidationError);
  ValueTable wn{grid, vals, Interp::nearest};
  CHECK(wn(make_measure({0.3, 0.7})) == 1.0);
}

TEST_CASE("solver artifact round trip") {
  ModelSpec m = model_from_config_file(std::string(MFMDP_SOURCE_DIR) + "/configs/reference.json");
  SimplexGrid grid = make_simplex_grid(m.states, 10);
  SolveResult res = value_iteration(m, grid, KernelFamily::randomized(8), 1e-8);
  res.policy.epsilon = policy_epsilon(m, res).epsilon;
  std::string text = solve_artifact_to_json(m, res);
  CHECK(text.find("\"version\"") != std::string::npos);
  CHECK(text.find("\"config\"") != std::string::npos);
  SolveResult back = solve_artifact_from_json(m, text);
  CHECK(back.table.grid->q == 10);
  CHECK(back.residual == res.residual);
  CHECK(back.sweeps == res.sweeps);
  CHECK(back.policy.epsilon == res.policy.epsilon);
  REQUIRE(back.table.values.size() == res.table.values.size());
  for (std::size_t i = 0; i < res.table.values.size(); ++i) {
    CHECK(back.table.values[i] == res.table.values[i]);
    for (int x = 0; x < 2; ++x) {
      for (int a = 0; a < 2; ++a) {
        CHECK(back.policy.kernels[i].row(x)[a] == res.policy.kernels[i].row(x)[a]);
      }
    }
  }
}
