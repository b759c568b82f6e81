#include "rffpsr/datagen.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "rffpsr/log.hpp"
#include "rffpsr/random.hpp"

namespace rffpsr {

Eigen::Vector2d benchmark_dynamics(const Eigen::Vector2d& x, double a) {
  const double x1 = x[0];
  const double x2 = x[1];
  const double x1_3 = x1 * x1 * x1;
  const double x1_5 = x1_3 * x1 * x1;
  const double c = std::cos(x1);
  return {x2 - 0.1 * c * (5.0 * x1 - 4.0 * x1_3 + x1_5) - 0.5 * c * a,
          -65.0 * x1 + 50.0 * x1_3 - 15.0 * x1_5 - x2 - 100.0 * a};
}

Dataset simulate_benchmark(const BenchmarkOptions& opts) {
  if (opts.n_traj < 1 || opts.length < 1 || opts.substeps < 1 || !(opts.sample_rate > 0.0))
    throw std::invalid_argument("simulate_benchmark: invalid options");
  Dataset d;
  d.obs_dim = 1;
  d.act_dim = 1;
  d.dt = 1.0 / opts.sample_rate;
  d.seed = opts.seed;
  const double h = d.dt / opts.substeps;
  for (std::size_t n = 0; n < opts.n_traj; ++n) {
    Rng rng(derive_seed(opts.seed, n));
    std::uniform_real_distribution<double> action(-0.5, 0.5);
    Trajectory traj{Mat(1, opts.length), Mat(1, opts.length)};
    Eigen::Vector2d x = Eigen::Vector2d::Zero();
    for (Eigen::Index t = 0; t < opts.length; ++t) {
      const double a = opts.constant_action ? *opts.constant_action : action(rng);
      traj.observations(0, t) = x[0];
      traj.actions(0, t) = a;
      for (int s = 0; s < opts.substeps; ++s) {
        const Eigen::Vector2d k1 = benchmark_dynamics(x, a);
        const Eigen::Vector2d k2 = benchmark_dynamics(x + 0.5 * h * k1, a);
        const Eigen::Vector2d k3 = benchmark_dynamics(x + 0.5 * h * k2, a);
        const Eigen::Vector2d k4 = benchmark_dynamics(x + h * k3, a);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      if (!x.allFinite())
        throw NumericalError("simulate_benchmark: trajectory " + std::to_string(n) +
                             " diverged at step " + std::to_string(t));
    }
    d.trajectories.push_back(std::move(traj));
  }
  d.splits = default_splits(d.trajectories.size());
  return d;
}

namespace {

// Square root factor L with L L^T = cov, valid for PSD covariances.
Mat psd_sqrt(const Mat& cov) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(symmetrize(cov));
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

Dataset simulate_lds(const Lds& m, const LdsOptions& opts) {
  m.validate();
  if (opts.n_traj < 1 || opts.length < 1) throw std::invalid_argument("simulate_lds: empty request");
  const auto spectral_radius = Eigen::EigenSolver<Mat>(m.a).eigenvalues().cwiseAbs().maxCoeff();
  if (spectral_radius >= 1.0)
    log_warning("simulate_lds: spectral radius of A is " + std::to_string(spectral_radius) +
                " (non-stationary)");
  const Mat q_sqrt = psd_sqrt(m.process_cov);
  const Mat r_sqrt = psd_sqrt(m.obs_cov);
  const std::uint64_t noise_base = opts.noise_seed.value_or(mix_seed(opts.seed ^ 0x5eedULL));

  Dataset d;
  d.obs_dim = m.obs_dim();
  d.act_dim = m.act_dim();
  d.seed = opts.seed;
  for (std::size_t n = 0; n < opts.n_traj; ++n) {
    Rng action_rng(derive_seed(opts.seed, n));
    Rng noise_rng(derive_seed(noise_base, n));
    std::uniform_real_distribution<double> uni(-opts.action_scale, opts.action_scale);
    std::normal_distribution<double> gauss(0.0, opts.action_scale);
    Trajectory traj{Mat(d.obs_dim, opts.length), Mat(d.act_dim, opts.length)};
    Vec x = Vec::Zero(m.state_dim());
    for (Eigen::Index t = 0; t < opts.length; ++t) {
      Vec a(d.act_dim);
      for (Eigen::Index i = 0; i < d.act_dim; ++i) {
        if (opts.constant_action)
          a[i] = *opts.constant_action;
        else if (opts.actions == ActionDistribution::uniform)
          a[i] = uni(action_rng);
        else
          a[i] = gauss(action_rng);
      }
      const Mat e = gaussian_matrix(m.state_dim(), 1, noise_rng);
      const Mat v = gaussian_matrix(m.obs_dim(), 1, noise_rng);
      x = m.a * x + m.b * a + q_sqrt * e.col(0);
      traj.observations.col(t) = m.c * x + r_sqrt * v.col(0);
      traj.actions.col(t) = a;
    }
    d.trajectories.push_back(std::move(traj));
  }
  d.splits = default_splits(d.trajectories.size());
  return d;
}

Lds default_lds() {
  Lds m;
  m.a = (Mat(2, 2) << 0.9, 0.2, -0.2, 0.9).finished();
  m.b = (Mat(2, 1) << 0.0, 1.0).finished();
  m.c = (Mat(1, 2) << 1.0, 0.0).finished();
  m.process_cov = 0.01 * Mat::Identity(2, 2);
  m.obs_cov = 0.01 * Mat::Identity(1, 1);
  return m;
}

Dataset sample_iohmm(const IoHmm& m, const Vec& policy, const IoHmmSampleOptions& opts) {
  m.validate();
  if (policy.size() != m.n_actions() || (policy.array() < 0.0).any() ||
      std::abs(policy.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("sample_iohmm: policy is not a distribution over actions");
  auto as_weights = [](const Eigen::Ref<const Vec>& p) {
    return std::vector<double>(p.data(), p.data() + p.size());
  };
  const std::vector<double> policy_w = as_weights(policy);

  Dataset d;
  d.obs_dim = m.n_obs();
  d.act_dim = m.n_actions();
  d.seed = opts.seed;
  for (std::size_t n = 0; n < opts.n_traj; ++n) {
    Rng rng(derive_seed(opts.seed, n));
    std::discrete_distribution<Eigen::Index> init(m.initial.data(),
                                                  m.initial.data() + m.initial.size());
    std::discrete_distribution<Eigen::Index> act(policy_w.begin(), policy_w.end());
    Trajectory traj{Mat::Zero(d.obs_dim, opts.length), Mat::Zero(d.act_dim, opts.length)};
    Eigen::Index s = init(rng);
    for (Eigen::Index t = 0; t < opts.length; ++t) {
      const Eigen::Index a = act(rng);
      const auto au = static_cast<std::size_t>(a);
      const Vec emit = m.emission[au].col(s);
      const Vec trans = m.transition[au].col(s);
      std::discrete_distribution<Eigen::Index> obs(emit.data(), emit.data() + emit.size());
      const Eigen::Index o = obs(rng);
      std::discrete_distribution<Eigen::Index> next(trans.data(), trans.data() + trans.size());
      s = next(rng);
      traj.observations(o, t) = 1.0;
      traj.actions(a, t) = 1.0;
    }
    d.trajectories.push_back(std::move(traj));
  }
  d.splits = default_splits(d.trajectories.size());
  return d;
}

Eigen::Index one_hot_index(const Eigen::Ref<const Vec>& v) {
  Eigen::Index idx = 0;
  v.maxCoeff(&idx);
  return idx;
}

}  // namespace rffpsr
