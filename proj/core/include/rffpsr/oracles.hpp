#pragma once

#include <vector>

#include "rffpsr/numerics.hpp"

namespace rffpsr {

/// Discrete input-output HMM. For action a, transition[a](s', s) = Pr[s' | s, a]
/// and emission[a](o, s) = Pr[o | s, a]; both are column-stochastic.
struct IoHmm {
  std::vector<Mat> transition;
  std::vector<Mat> emission;
  Vec initial;

  [[nodiscard]] Eigen::Index n_states() const { return initial.size(); }
  [[nodiscard]] Eigen::Index n_obs() const { return emission.empty() ? 0 : emission[0].rows(); }
  [[nodiscard]] Eigen::Index n_actions() const {
    return static_cast<Eigen::Index>(transition.size());
  }

  /// Throws std::invalid_argument unless every table is a valid conditional distribution.
  void validate() const;

  /// Transition tensor with modes (next state, state, action).
  [[nodiscard]] Tensor transition_tensor() const;
  /// Observation tensor with modes (observation, state, action).
  [[nodiscard]] Tensor observation_tensor() const;
};

/// Extended observation tensor O^k with modes
/// (observation-window indicator n_obs^k, state, action-window indicator n_actions^k).
/// Window indicators are row-major over time: the first step is most significant.
Tensor iohmm_extended_obs(const IoHmm& m, int k);

/// Q = O^k x_s belief, as an n_obs^k x n_actions^k conditional probability table.
Mat iohmm_predictive_state(const IoHmm& m, const Eigen::Ref<const Vec>& belief, int k);
/// Same, reusing a precomputed O^k.
Mat iohmm_predictive_state(const Tensor& ok, const Eigen::Ref<const Vec>& belief);

/// Matrix O~^k with vec_rows(Q) = O~^k * belief.
Mat iohmm_state_to_predictive(const Tensor& ok);

/// Exact Bayes update of a belief over the current state after taking action a
/// and seeing observation o; returns the belief over the next state.
/// Throws NumericalError("impossible observation") if Pr[o | belief, a] = 0.
Vec iohmm_exact_filter(const IoHmm& m, const Eigen::Ref<const Vec>& belief, Eigen::Index obs,
                       Eigen::Index action);

/// Linear-Gaussian system x_t = A x_{t-1} + B a_t + e_t, o_t = C x_t + v_t.
struct Lds {
  Mat a, b, c;
  Mat process_cov;
  Mat obs_cov;

  [[nodiscard]] Eigen::Index state_dim() const { return a.rows(); }
  [[nodiscard]] Eigen::Index obs_dim() const { return c.rows(); }
  [[nodiscard]] Eigen::Index act_dim() const { return b.cols(); }
  void validate() const;
};

/// Stacks (CA; CA^2; ...; CA^k).
Mat lds_gamma(const Lds& m, int k);

/// Block lower-triangular Toeplitz map from a_{t:t+k-1} to o_{t:t+k-1};
/// block (i, j) = C A^{i-j} B for i >= j.
Mat lds_u(const Lds& m, int k);

struct KalmanStep {
  Vec mean;  // E[x_t | o_{1:t}, a_{1:t}]
  Mat cov;
};

struct KalmanResult {
  std::vector<KalmanStep> filtered;  // one per time step
  /// predictions(h-1, t) holds E[o_t | o_{<=t-h}, a_{<=t}] (d_o x 1 per entry);
  /// columns with t < h use the prior x_0 = 0 with zero covariance.
  std::vector<Mat> predictions;
};

/// Standard predict/update recursion from x_0 = 0 (known exactly). Covariances are
/// symmetrized and eigen-clipped at 0 after each update.
/// `horizon` > 0 also produces H-step observation predictions for H = 1..horizon.
KalmanResult kalman_filter_exact(const Lds& m, const Mat& observations, const Mat& actions,
                                 int horizon = 0);

}  // namespace rffpsr
