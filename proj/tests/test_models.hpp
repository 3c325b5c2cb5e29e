#pragma once

// Model builders used across the test suite. They construct models through
// the C++ API directly, independent of the config parser, so they double as
// oracles for config-built models.

#include <algorithm>
#include <cmath>

#include "mfmdp/core_model.hpp"

namespace testmodels {

// Two-state two-action threshold model: next state is 1 iff the agent's noise
// cell midpoint lies below clamp(mass(state 1) + eta * a + shift[e0], 0, 1).
inline mfmdp::ModelSpec influence_model(int n_idio, double eta = 0.3, double beta = 0.5,
                                        bool with_common = true) {
  using namespace mfmdp;
  ModelSpec m;
  m.states = discrete_space(2, "");
  m.actions = discrete_space(2, "");
  m.noise.idio = uniform_measure(n_idio);
  m.noise.common = with_common ? make_measure({0.5, 0.5}) : point_mass(1, 0);
  std::vector<double> shift = with_common ? std::vector<double>{-0.1, 0.1}
                                          : std::vector<double>{0.0};
  m.transition = [n_idio, eta, shift](int, int a, const Measure& joint, int e, int e0) {
    double m1 = joint[2] + joint[3];
    double p = std::clamp(m1 + eta * a + shift[static_cast<std::size_t>(e0)], 0.0, 1.0);
    return (e + 0.5) / n_idio < p ? 1 : 0;
  };
  m.reward = [](int x, int a, const Measure&) { return x - 0.2 * a; };
  m.beta = beta;
  m.k_big_f = 1.0;
  m.k_f = 1.0;
  return finalize_model(std::move(m));
}

// Constant-reward variant; every policy is optimal and V = c / (1 - beta).
inline mfmdp::ModelSpec constant_reward_model(double c, double beta = 0.5) {
  using namespace mfmdp;
  ModelSpec m = influence_model(4, 0.3, beta);
  m.reward = [c](int, int, const Measure&) { return c; };
  return finalize_model(std::move(m));
}

// Model with action-determined moves and measure-free reward: the joint
// problem decouples per agent, so single-agent values have a hand-derivable
// closed form (0.6 in state 0, 1.6 in state 1 at beta = 0.5).
inline mfmdp::ModelSpec action_moves_model() {
  using namespace mfmdp;
  ModelSpec m;
  m.states = discrete_space(2, "x");
  m.actions = discrete_space(2, "a");
  m.noise.idio = make_measure(std::vector<double>(4, 0.25));
  m.noise.common = make_measure({1.0});
  m.transition = [](int, int a, const Measure&, int, int) { return a; };
  m.reward = [](int x, int a, const Measure&) { return x - 0.2 * a; };
  m.beta = 0.5;
  m.k_big_f = 1.0;
  m.k_f = 1.0;
  return finalize_model(std::move(m));
}

}  // namespace testmodels
