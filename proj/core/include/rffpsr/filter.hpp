#pragma once

#include <functional>
#include <vector>

#include "rffpsr/oracles.hpp"
#include "rffpsr/two_stage.hpp"

namespace rffpsr {

/// Intermediates of one filter step in feature coordinates. Kept so the
/// backward pass can reuse them.
struct FilterTrace {
  Vec q;       // input state
  Vec phi_o;   // projected observation feature
  Vec phi_a;   // projected action feature
  Mat p_xi;    // unvec(W_xi q)
  Mat p_o;     // unvec(W_o q)
  Mat m;       // C_oo + lambda I (after symmetrization and optional clipping)
  Mat eig_vectors;  // eigen-decomposition of the symmetrized C_oo when clipping is on
  Vec eig_values;
  bool clipped = false;
  Vec v;       // m^-1 phi_o
  Mat r_o;     // U^o_xi contracted with v
  Mat r_a;     // U^a_xi contracted with phi_a
  Vec q_next;
  bool fallback = false;
};

struct FilterOptions {
  double lambda = 1e-3;
  bool clip_covariance = true;
};

FilterOptions filter_options(const RffPsrModel& m);

/// One update from projected features. `trace` may be null.
Vec filter_step(const RffPsrModel& m, const Eigen::Ref<const Vec>& q,
                const Eigen::Ref<const Vec>& phi_o, const Eigen::Ref<const Vec>& phi_a,
                const FilterOptions& opts, FilterTrace* trace = nullptr);

/// q' = f(W q, o_t, a_t) from raw observation and action vectors.
Vec filter_update(const RffPsrModel& m, const Eigen::Ref<const Vec>& q,
                  const Eigen::Ref<const Vec>& o, const Eigen::Ref<const Vec>& a);

/// Input to W_pred: [kron(q, psi_a); 1].
Vec pred_input(const Eigen::Ref<const Vec>& q, const Eigen::Ref<const Vec>& psi_a);

/// Predicted o_{t:t+k-1} stacked step-major (k*d_o) from projected future-action features.
Vec predict_window_features(const RffPsrModel& m, const Eigen::Ref<const Vec>& q,
                            const Eigen::Ref<const Vec>& psi_a);

/// Predicted o_{t:t+k-1} as a k x d_o matrix; `future_actions` is d_a x k.
Mat predict_window(const RffPsrModel& m, const Eigen::Ref<const Vec>& q, const Mat& future_actions);

/// States q_0..q_{count-1} along a trajectory: q_{s+1} = f(q_s, o_s, a_s).
std::vector<Vec> filter_states(const RffPsrModel& m, const Trajectory& traj, Eigen::Index count);

/// Per-horizon squared-error sums and target counts; index h-1 holds horizon h.
struct HorizonErrors {
  std::vector<double> sse;
  std::vector<std::size_t> count;

  explicit HorizonErrors(std::size_t max_horizon = 0) : sse(max_horizon, 0.0), count(max_horizon, 0) {}
  void add(const HorizonErrors& other);
  [[nodiscard]] double mse(int horizon) const;
};

/// Target times t for horizon h: max(h - 1, skip) <= t <= T - k + h - 1.
std::pair<Eigen::Index, Eigen::Index> target_range(Eigen::Index length, int k, int horizon,
                                                   Eigen::Index skip);

/// Predictor returning the stacked window o_{s:s+k-1} (k*d_o) for a window starting at s.
using WindowPredictor = std::function<Vec(Eigen::Index start)>;

/// Scores a window predictor: the horizon-h prediction for time t is offset h-1 of the window
/// starting at t-h+1. Target times before `skip` are excluded.
HorizonErrors score_windows(const Trajectory& traj, int k, const std::vector<int>& horizons,
                            Eigen::Index skip, const WindowPredictor& predict);

/// Filters once along the trajectory and scores every horizon in `horizons`.
/// `skip` defaults to the model's history length.
HorizonErrors rollout_eval(const RffPsrModel& m, const Trajectory& traj,
                           const std::vector<int>& horizons, std::optional<Eigen::Index> skip = {});

/// Exact-parameter model for an IO-HMM with one-hot data: indicator features,
/// identity projectors, W built from the extended observation tensors, lambda_filter 0.
/// Requires the k-step observation matrix to have full column rank.
RffPsrModel iohmm_embedding(const IoHmm& m, int k);

}  // namespace rffpsr
