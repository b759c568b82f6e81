#pragma once

#include <cstdint>
#include <optional>

#include "rffpsr/dataset.hpp"
#include "rffpsr/oracles.hpp"

namespace rffpsr {

/// The two-state nonlinear benchmark
///   x1' = x2 - 0.1 cos(x1)(5 x1 - 4 x1^3 + x1^5) - 0.5 cos(x1) a
///   x2' = -65 x1 + 50 x1^3 - 15 x1^5 - x2 - 100 a
///   o   = x1
/// driven by zero-order-hold actions uniform in [-0.5, 0.5], sampled at `sample_rate`.
struct BenchmarkOptions {
  std::size_t n_traj = 20;
  Eigen::Index length = 100;
  double sample_rate = 20.0;
  int substeps = 8;  // RK4 steps per sample
  std::uint64_t seed = 0;
  std::optional<double> constant_action;  // replaces the random draws
};

Dataset simulate_benchmark(const BenchmarkOptions& opts);

/// Right-hand side of the benchmark ODE, exposed for tests.
Eigen::Vector2d benchmark_dynamics(const Eigen::Vector2d& x, double a);

enum class ActionDistribution { uniform, gaussian };

struct LdsOptions {
  std::size_t n_traj = 20;
  Eigen::Index length = 100;
  ActionDistribution actions = ActionDistribution::uniform;
  double action_scale = 1.0;  // half-width for uniform, stddev for gaussian
  std::uint64_t seed = 0;     // action streams
  std::optional<std::uint64_t> noise_seed;  // noise streams; derived from `seed` if unset
  /// Fixed action value instead of random draws (oracle tests).
  std::optional<double> constant_action;
};

/// Rollouts of x_t = A x_{t-1} + B a_t + e_t, o_t = C x_t + v_t from x_0 = 0.
/// Column t of each trajectory holds (o_{t+1}, a_{t+1}).
Dataset simulate_lds(const Lds& m, const LdsOptions& opts);

/// Stable two-state, single-input, single-output system used by the tools and tests:
/// lightly damped rotation (spectral radius 0.92), B = (0, 1), C = (1, 0),
/// process noise 0.01 I, observation noise 0.01.
Lds default_lds();

struct IoHmmSampleOptions {
  std::size_t n_traj = 1;
  Eigen::Index length = 100;
  std::uint64_t seed = 0;
};

/// Blind policy: `policy` is a distribution over actions used i.i.d. at every step.
/// Observations and actions are one-hot encoded (d_o = n_obs, d_a = n_actions).
/// At each step: a_t ~ policy, o_t ~ emission[a_t](., s_t), s_{t+1} ~ transition[a_t](., s_t).
Dataset sample_iohmm(const IoHmm& m, const Vec& policy, const IoHmmSampleOptions& opts);

/// Index of the hot entry of a one-hot column.
Eigen::Index one_hot_index(const Eigen::Ref<const Vec>& v);

}  // namespace rffpsr
