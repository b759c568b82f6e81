#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rffpsr/dataset.hpp"
#include "rffpsr/features.hpp"
#include "rffpsr/numerics.hpp"

namespace rffpsr {

/// Window lengths: the predictive state covers o_{t:t+k-1}; histories cover
/// the `history_len` steps ending at t-1.
struct FutureSpec {
  int k = 10;
  int history_len = 20;

  void validate() const;
};

/// Index conventions of the extended features. Feature construction and the
/// filter's tensor decompression both go through these.
///   Xi^o = kron(psi^o_{t+1}, phi^o_t):  index = i_psi * p_phi_o + i_phi_o
///   Xi^a = kron(phi^a_t, psi^a_{t+1}):  index = i_phi_a * p_psi_a + i_psi_a
constexpr Eigen::Index xi_obs_index(Eigen::Index i_psi, Eigen::Index i_phi, Eigen::Index p_phi) {
  return i_psi * p_phi + i_phi;
}
constexpr Eigen::Index xi_act_index(Eigen::Index i_phi, Eigen::Index i_psi, Eigen::Index p_psi) {
  return i_phi * p_psi + i_psi;
}

struct FeatureConfig {
  Eigen::Index num_freq = 2000;  // D; RFF output is 2D
  Eigen::Index pca_dim = 20;     // p; 0 keeps every block unprojected
  FeatureKind obs_kind = FeatureKind::rff;      // single observations and observation windows
  FeatureKind act_kind = FeatureKind::rff;      // single actions and action windows
  FeatureKind history_kind = FeatureKind::rff;  // history windows
  double bandwidth_scale = 1.0;  // multiplies the median-trick bandwidth
  std::uint64_t seed = 0;
  std::size_t max_pairs = kDefaultMaxPairs;
};

/// Every feature map and projector a model needs, frozen after fitting.
struct FeatureSet {
  FutureSpec spec;
  Eigen::Index obs_dim = 0;
  Eigen::Index act_dim = 0;
  ProjectedFeature history;
  ProjectedFeature obs;
  ProjectedFeature act;
  ProjectedFeature fut_obs;
  ProjectedFeature fut_act;
  PcaProjector xi_obs;    // U^o_xi over Xi^o
  PcaProjector xi_act;    // U^a_xi over Xi^a
  PcaProjector obs_pair;  // U^oo over phi^o (x) phi^o

  /// Window of the last history_len (o, a) pairs ending at t-1, step-major,
  /// zero-padded before the sequence start.
  [[nodiscard]] Vec history_window(const Trajectory& traj, Eigen::Index t) const;
  /// Stacked o_{t:t+k-1} (step-major).
  [[nodiscard]] Vec obs_window(const Trajectory& traj, Eigen::Index t) const;
  [[nodiscard]] Vec act_window(const Trajectory& traj, Eigen::Index t) const;
};

/// Projected features for every valid sample, columns ordered by (trajectory, t).
struct FeaturizedData {
  FeatureSet features;
  Mat history;       // Phi^h
  Mat obs;           // Phi^o
  Mat act;           // Phi^a
  Mat fut_obs;       // Psi^o
  Mat fut_act;       // Psi^a
  Mat fut_obs_next;  // Psi^o' (shift by one step)
  Mat fut_act_next;  // Psi^a'
  Mat xi_obs;        // Xi^o after projection
  Mat xi_act;        // Xi^a after projection
  Mat obs_pair;      // Phi^oo after projection
  Mat raw_future;    // o_{t:t+k-1}, k*d_o rows
  std::vector<std::size_t> traj_index;  // trajectory of each column
  std::vector<Eigen::Index> time_index;  // t of each column

  [[nodiscard]] Eigen::Index num_samples() const { return history.cols(); }
  [[nodiscard]] std::size_t num_trajectories() const;
  /// Columns holding t = 0 of each trajectory.
  [[nodiscard]] std::vector<Eigen::Index> first_steps() const;
};

/// Valid sample times per trajectory are 0 <= t <= T - k - 2.
Eigen::Index valid_steps(Eigen::Index length, const FutureSpec& spec);

/// Fits feature maps (median-trick bandwidths) and projectors on `train`,
/// then featurizes it. Trajectories shorter than k + 2 are skipped with a warning.
FeaturizedData build_features(const std::vector<Trajectory>& train, const FutureSpec& spec,
                              const FeatureConfig& cfg);

/// Featurizes trajectories with frozen maps and projectors.
FeaturizedData featurize(const FeatureSet& features, const std::vector<Trajectory>& trajs);

enum class S1Mode { joint, conditional };
std::string to_string(S1Mode m);
S1Mode s1_mode_from_string(const std::string& s);

struct S1Output {
  std::vector<Mat> q_bar;  // p_psi_o x p_psi_a
  std::vector<Mat> p_xi;   // p_xi_o x p_xi_a
  std::vector<Mat> p_o;    // p_oo x p_phi_a
  PcaProjector state_proj;  // U^q
  Mat q_compressed;         // q_t = U^q^T vec(Q_t), one column per sample
  std::size_t inverse_fallbacks = 0;

  [[nodiscard]] Eigen::Index num_samples() const { return q_compressed.cols(); }
};

/// Joint S1: regress history features onto covariance features, then
/// Q_t = C_oa (C_aa + lambda I)^-1 per sample. `state_dim` 0 keeps states uncompressed.
S1Output s1_joint(const FeaturizedData& fd, double lambda1, Eigen::Index state_dim,
                  std::uint64_t seed = 0);

/// Conditional S1: ridge over 3-mode tensors via Khatri-Rao inputs (psi^a, phi^h).
S1Output s1_conditional(const FeaturizedData& fd, double lambda1, Eigen::Index state_dim,
                        std::uint64_t seed = 0);

/// Raw conditional-S1 tensor fit: W with targets ~ W * khatri_rao(cond, history).
/// Exposed for tests; W is d_target x (d_cond * d_history).
Mat s1_conditional_weights(const Mat& history, const Mat& cond, const Mat& targets,
                           double lambda1);

/// Applies s1_conditional_weights output at one history feature: returns d_target x d_cond.
Mat s1_conditional_state(const Mat& weights, const Eigen::Ref<const Vec>& history,
                         Eigen::Index cond_dim);

/// Compresses stacked vec(Q_t) with a rank-`state_dim` basis (0 = identity).
void project_states(S1Output& s1, Eigen::Index state_dim, std::uint64_t seed);

struct S2Output {
  Mat w_xi;  // (p_xi_o * p_xi_a) x p_q
  Mat w_o;   // (p_oo * p_phi_a) x p_q
};

S2Output s2_regress(const S1Output& s1, double lambda2);

/// Least-squares Q_0 from first-step pairs when the dataset has at least
/// `min_trajectories` trajectories, otherwise the mean compressed state.
Vec estimate_q0(const S1Output& s1, const FeaturizedData& fd, std::size_t min_trajectories,
                double lambda);

/// Ridge map from [kron(q_t, psi^a_t); 1] to o_{t:t+k-1}; the intercept column is unpenalized.
Mat train_w_pred(const S1Output& s1, const FeaturizedData& fd, double lambda2);

/// Ridge with an unpenalized intercept. Returns [W b]: d_out x (d_in + 1).
Mat ridge_solve_affine(const Mat& inputs, const Mat& targets, double lambda);

struct Hyperparams {
  FutureSpec spec;
  FeatureConfig features;
  S1Mode s1 = S1Mode::joint;
  double lambda1 = 1e-3;
  double lambda2 = 1e-3;
  std::optional<double> lambda_filter;  // defaults to lambda1
  Eigen::Index state_dim = -1;          // p_q; -1 means features.pca_dim
  std::size_t q0_min_trajectories = 0;  // 0 means 10 * p_q
  std::uint64_t seed = 0;

  [[nodiscard]] Eigen::Index resolved_state_dim() const;
};

/// Learned RFF-PSR. The four parameter blocks move during refinement;
/// everything in `features` and `state_proj` stays frozen.
struct RffPsrModel {
  Hyperparams hp;
  FeatureSet features;
  PcaProjector state_proj;
  Mat w_xi;
  Mat w_o;
  Mat w_pred;  // (k*d_o) x (p_q * p_psi_a + 1); last column is the intercept
  Vec q0;
  double lambda_filter = 1e-3;
  bool clip_covariance = true;  // eigen-clip C_oo before inversion
  std::string init = "two-stage";

  [[nodiscard]] Eigen::Index state_dim() const { return q0.size(); }
  void validate() const;
};

RffPsrModel learn_rff_psr(const Dataset& ds, const Hyperparams& hp);

/// Same, from already featurized training data.
RffPsrModel learn_from_features(const FeaturizedData& fd, const Hyperparams& hp);

/// Random parameters with the feature maps of `base`.
RffPsrModel random_init(const RffPsrModel& base, std::uint64_t seed, double scale = 0.1);

struct LambdaSelection {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double val_mse = 0.0;
};

inline const std::vector<double> kDefaultLambdaGrid = {1e-4, 1e-3, 1e-2, 1e-1, 1e0};

/// Picks (lambda1, lambda2) on `val` by horizon-1 prediction MSE over grid x grid2
/// (an empty grid2 reuses grid).
LambdaSelection select_lambdas(const FeaturizedData& train, const std::vector<Trajectory>& val,
                               const Hyperparams& hp,
                               const std::vector<double>& grid = kDefaultLambdaGrid,
                               const std::vector<double>& grid2 = {});

/// learn_rff_psr with (lambda1, lambda2) chosen by select_lambdas on the validation split.
RffPsrModel learn_selected(const Dataset& ds, const Hyperparams& hp,
                           const std::vector<double>& grid = kDefaultLambdaGrid,
                           const std::vector<double>& grid2 = {},
                           LambdaSelection* chosen = nullptr);

// Model files: one JSON document, matrices as {"rows", "cols", "data": [[...]]}.
std::string model_to_json(const RffPsrModel& m);
RffPsrModel model_from_json(const std::string& text);
void save_model(const RffPsrModel& m, const std::string& path);
RffPsrModel load_model(const std::string& path);

}  // namespace rffpsr
