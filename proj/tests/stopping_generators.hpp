#pragma once

// Random finite stopping problems for the lookahead-versus-DP checks.

#include <random>

#include "osco/stopping.hpp"

namespace gen {

/// Upper-triangular chain with an absorbing last state and a stationary reward.
/// The lookahead stopping set is the suffix {s >= threshold}, which upper-triangular
/// transitions keep closed.
inline osco::StoppingInstance monotone_instance(std::mt19937_64& rng, int max_states = 20, int max_horizon = 15) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  osco::StoppingInstance inst;
  inst.n_states = std::uniform_int_distribution<int>(1, max_states)(rng);
  inst.horizon = std::uniform_int_distribution<int>(1, max_horizon)(rng);
  inst.gamma = u(rng) < 0.5 ? 1.0 : 0.8 + 0.2 * u(rng);
  inst.continuation_cost = u(rng) < 0.2 ? 0.0 : 2.0 * u(rng);
  const int n = inst.n_states;
  inst.transition.assign(n, std::vector<double>(n, 0.0));
  for (int s = 0; s + 1 < n; ++s) {
    double total = 0.0;
    std::vector<double> w(n, 0.0);
    w[s] = 0.5 * u(rng);
    for (int t = s + 1; t < n; ++t) w[t] = u(rng) < 0.6 ? u(rng) : 0.0;
    w[n - 1] += 0.05;
    for (double x : w) total += x;
    for (int t = s; t < n; ++t) inst.transition[s][t] = w[t] / total;
  }
  inst.transition[n - 1][n - 1] = 1.0;

  const int threshold = std::uniform_int_distribution<int>(0, n - 1)(rng);
  inst.reward.assign(n, 0.0);
  for (int s = n - 1; s >= 0; --s) {
    double ahead = 0.0;
    for (int t = s + 1; t < n; ++t) ahead += inst.transition[s][t] * inst.reward[t];
    const double self = inst.gamma * inst.transition[s][s];
    const double margin = 0.1 + u(rng);
    if (self >= 1.0) {
      inst.reward[s] = 4.0 * u(rng) - 2.0;  // absorbing with gamma = 1: stopping never loses
      continue;
    }
    // Fixed point of r = gamma (P_ss r + ahead) - c, shifted by the margin.
    const double balance = (inst.gamma * ahead - inst.continuation_cost) / (1.0 - self);
    inst.reward[s] = s >= threshold ? balance + margin : balance - margin;
  }
  inst.terminal_reward = inst.reward;
  return inst;
}

/// Dense random transitions and rewards; no structure.
inline osco::StoppingInstance random_instance(std::mt19937_64& rng, int max_states = 20, int max_horizon = 15) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  osco::StoppingInstance inst;
  inst.n_states = std::uniform_int_distribution<int>(1, max_states)(rng);
  inst.horizon = std::uniform_int_distribution<int>(1, max_horizon)(rng);
  inst.gamma = 0.7 + 0.3 * u(rng);
  inst.continuation_cost = 0.5 * u(rng);
  const int n = inst.n_states;
  inst.transition.assign(n, std::vector<double>(n));
  for (auto& row : inst.transition) {
    double total = 0.0;
    for (auto& p : row) total += (p = u(rng));
    for (auto& p : row) p /= total;
  }
  for (int s = 0; s < n; ++s) inst.reward.push_back(z(rng));
  inst.terminal_reward = inst.reward;
  return inst;
}

}  // namespace gen
