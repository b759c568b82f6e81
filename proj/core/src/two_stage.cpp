#include "rffpsr/two_stage.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "rffpsr/log.hpp"
#include "rffpsr/random.hpp"

namespace rffpsr {

void FutureSpec::validate() const {
  if (k < 1) throw std::invalid_argument("future window k must be >= 1");
  if (history_len < 0) throw std::invalid_argument("history length must be >= 0");
}

Vec FeatureSet::history_window(const Trajectory& traj, Eigen::Index t) const {
  const Eigen::Index step = obs_dim + act_dim;
  Vec out = Vec::Zero(step * spec.history_len);
  for (int i = 0; i < spec.history_len; ++i) {
    const Eigen::Index s = t - spec.history_len + i;
    if (s < 0 || s >= traj.length()) continue;
    out.segment(step * i, obs_dim) = traj.observations.col(s);
    out.segment(step * i + obs_dim, act_dim) = traj.actions.col(s);
  }
  return out;
}

Vec FeatureSet::obs_window(const Trajectory& traj, Eigen::Index t) const {
  if (t < 0 || t + spec.k > traj.length()) throw DimensionError("observation window out of range");
  Vec out(obs_dim * spec.k);
  for (int i = 0; i < spec.k; ++i) out.segment(obs_dim * i, obs_dim) = traj.observations.col(t + i);
  return out;
}

Vec FeatureSet::act_window(const Trajectory& traj, Eigen::Index t) const {
  if (t < 0 || t + spec.k > traj.length()) throw DimensionError("action window out of range");
  Vec out(act_dim * spec.k);
  for (int i = 0; i < spec.k; ++i) out.segment(act_dim * i, act_dim) = traj.actions.col(t + i);
  return out;
}

std::size_t FeaturizedData::num_trajectories() const {
  if (traj_index.empty()) return 0;
  std::size_t n = 1;
  for (std::size_t i = 1; i < traj_index.size(); ++i)
    if (traj_index[i] != traj_index[i - 1]) ++n;
  return n;
}

std::vector<Eigen::Index> FeaturizedData::first_steps() const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < time_index.size(); ++i)
    if (time_index[i] == 0) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

Eigen::Index valid_steps(Eigen::Index length, const FutureSpec& spec) {
  return std::max<Eigen::Index>(0, length - spec.k - 1);
}

namespace {

// Raw (unfeaturized) inputs for every sample. Window columns for the
// shifted futures are kept separately: future windows at t and t+1.
struct RawSamples {
  Mat history, obs, act, obs_win, act_win, obs_win_next, act_win_next, raw_future;
  std::vector<std::size_t> traj_index;
  std::vector<Eigen::Index> time_index;
};

RawSamples collect_raw(const FeatureSet& fs, const std::vector<Trajectory>& trajs) {
  Eigen::Index n = 0;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const Eigen::Index v = valid_steps(trajs[i].length(), fs.spec);
    if (v == 0)
      log_warning("trajectory " + std::to_string(i) + " is shorter than k + 2 and is skipped");
    n += v;
  }
  if (n == 0) throw DataError("no trajectory is long enough for the future window");
  const Eigen::Index k = fs.spec.k;
  RawSamples r;
  r.history.resize((fs.obs_dim + fs.act_dim) * fs.spec.history_len, n);
  r.obs.resize(fs.obs_dim, n);
  r.act.resize(fs.act_dim, n);
  r.obs_win.resize(fs.obs_dim * k, n);
  r.act_win.resize(fs.act_dim * k, n);
  r.obs_win_next.resize(fs.obs_dim * k, n);
  r.act_win_next.resize(fs.act_dim * k, n);
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const Trajectory& tr = trajs[i];
    if (tr.obs_dim() != fs.obs_dim || tr.act_dim() != fs.act_dim)
      throw DimensionError("trajectory dimensions do not match the feature set");
    const Eigen::Index v = valid_steps(tr.length(), fs.spec);
    for (Eigen::Index t = 0; t < v; ++t, ++col) {
      r.history.col(col) = fs.history_window(tr, t);
      r.obs.col(col) = tr.observations.col(t);
      r.act.col(col) = tr.actions.col(t);
      r.obs_win.col(col) = fs.obs_window(tr, t);
      r.act_win.col(col) = fs.act_window(tr, t);
      r.obs_win_next.col(col) = fs.obs_window(tr, t + 1);
      r.act_win_next.col(col) = fs.act_window(tr, t + 1);
      r.traj_index.push_back(i);
      r.time_index.push_back(t);
    }
  }
  r.raw_future = r.obs_win;
  return r;
}

FeatureMap make_map(FeatureKind kind, const Mat& raw, Eigen::Index block_dim,
                    const FeatureConfig& cfg, std::uint64_t stream) {
  switch (kind) {
    case FeatureKind::rff: {
      const double bw = raw.rows() == 0 ? 1.0
                                        : median_bandwidth(raw, cfg.max_pairs,
                                                           derive_seed(cfg.seed, 100 + stream));
      return FeatureMap::make_rff(
          RffMap(raw.rows(), cfg.num_freq, bw * cfg.bandwidth_scale, derive_seed(cfg.seed, stream)));
    }
    case FeatureKind::linear: return FeatureMap::make_linear(raw.rows());
    case FeatureKind::indicator: return FeatureMap::make_indicator(raw.rows(), block_dim);
  }
  throw std::invalid_argument("unknown feature kind");
}

// Projector for feature columns; blocks already at or below p stay unprojected.
PcaProjector fit_projector(const Mat& feats, Eigen::Index p, std::uint64_t seed) {
  if (p <= 0 || feats.rows() <= p) return PcaProjector::identity(feats.rows());
  return pca_fit(feats, p, seed);
}

FeaturizedData apply_features(const FeatureSet& fs, const RawSamples& r) {
  FeaturizedData fd;
  fd.features = fs;
  fd.history = fs.history.apply_columns(r.history);
  fd.obs = fs.obs.apply_columns(r.obs);
  fd.act = fs.act.apply_columns(r.act);
  fd.fut_obs = fs.fut_obs.apply_columns(r.obs_win);
  fd.fut_act = fs.fut_act.apply_columns(r.act_win);
  fd.fut_obs_next = fs.fut_obs.apply_columns(r.obs_win_next);
  fd.fut_act_next = fs.fut_act.apply_columns(r.act_win_next);
  fd.xi_obs = fs.xi_obs.apply_columns(khatri_rao(fd.fut_obs_next, fd.obs));
  fd.xi_act = fs.xi_act.apply_columns(khatri_rao(fd.act, fd.fut_act_next));
  fd.obs_pair = fs.obs_pair.apply_columns(khatri_rao(fd.obs, fd.obs));
  fd.raw_future = r.raw_future;
  fd.traj_index = r.traj_index;
  fd.time_index = r.time_index;
  return fd;
}

}  // namespace

FeaturizedData build_features(const std::vector<Trajectory>& train, const FutureSpec& spec,
                              const FeatureConfig& cfg) {
  spec.validate();
  if (train.empty()) throw DataError("build_features: no training trajectories");
  FeatureSet fs;
  fs.spec = spec;
  fs.obs_dim = train.front().obs_dim();
  fs.act_dim = train.front().act_dim();
  const RawSamples raw = collect_raw(fs, train);
  const Eigen::Index p = cfg.pca_dim;

  auto fit_block = [&](FeatureKind kind, const Mat& inputs, Eigen::Index block,
                       std::uint64_t stream) {
    ProjectedFeature pf;
    pf.map = make_map(kind, inputs, block, cfg, stream);
    pf.pca = fit_projector(pf.map.apply_columns(inputs), p, derive_seed(cfg.seed, 200 + stream));
    return pf;
  };
  // indicator histories treat each observation and action as its own one-hot block
  if (cfg.history_kind == FeatureKind::indicator && fs.obs_dim != fs.act_dim)
    throw DimensionError("indicator history features need equal observation and action dimensions");
  fs.history = fit_block(cfg.history_kind, raw.history, fs.obs_dim, 1);
  fs.obs = fit_block(cfg.obs_kind, raw.obs, fs.obs_dim, 2);
  fs.act = fit_block(cfg.act_kind, raw.act, fs.act_dim, 3);
  fs.fut_obs = fit_block(cfg.obs_kind, raw.obs_win, fs.obs_dim, 4);
  fs.fut_act = fit_block(cfg.act_kind, raw.act_win, fs.act_dim, 5);

  const Mat phi_o = fs.obs.apply_columns(raw.obs);
  const Mat phi_a = fs.act.apply_columns(raw.act);
  const Mat psi_o_next = fs.fut_obs.apply_columns(raw.obs_win_next);
  const Mat psi_a_next = fs.fut_act.apply_columns(raw.act_win_next);
  fs.xi_obs = fit_projector(khatri_rao(psi_o_next, phi_o), p, derive_seed(cfg.seed, 206));
  fs.xi_act = fit_projector(khatri_rao(phi_a, psi_a_next), p, derive_seed(cfg.seed, 207));
  fs.obs_pair = fit_projector(khatri_rao(phi_o, phi_o), p, derive_seed(cfg.seed, 208));
  return apply_features(fs, raw);
}

FeaturizedData featurize(const FeatureSet& features, const std::vector<Trajectory>& trajs) {
  return apply_features(features, collect_raw(features, trajs));
}

std::string to_string(S1Mode m) { return m == S1Mode::joint ? "joint" : "cond"; }

S1Mode s1_mode_from_string(const std::string& s) {
  if (s == "joint") return S1Mode::joint;
  if (s == "cond" || s == "conditional") return S1Mode::conditional;
  throw std::invalid_argument("unknown S1 mode '" + s + "' (expected joint or cond)");
}

// ---------------------------------------------------------------------------
// S1

namespace {

// Per-sample C_ab (C_bb + lambda I)^-1 with both covariances regressed on history.
std::vector<Mat> joint_conditional(const Mat& hist, const Mat& a, const Mat& b, double lambda,
                                   std::size_t& fallbacks) {
  const Mat t_ab = ridge_solve(hist, khatri_rao(a, b), lambda);
  const Mat t_bb = ridge_solve(hist, khatri_rao(b, b), lambda);
  const Eigen::Index da = a.rows();
  const Eigen::Index db = b.rows();
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(hist.cols()));
  const Mat c_ab_all = t_ab * hist;
  const Mat c_bb_all = t_bb * hist;
  for (Eigen::Index t = 0; t < hist.cols(); ++t) {
    const Mat c_ab = unvec_rows(c_ab_all.col(t), da, db);
    Mat m = symmetrize(unvec_rows(c_bb_all.col(t), db, db));
    m.diagonal().array() += lambda;
    bool fb = false;
    out.push_back(symmetric_solve(m, c_ab.transpose(), &fb).transpose());
    if (fb) ++fallbacks;
  }
  return out;
}

std::vector<Mat> conditional_states(const Mat& hist, const Mat& cond, const Mat& target,
                                    double lambda) {
  const Mat w = s1_conditional_weights(hist, cond, target, lambda);
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(hist.cols()));
  for (Eigen::Index t = 0; t < hist.cols(); ++t)
    out.push_back(s1_conditional_state(w, hist.col(t), cond.rows()));
  return out;
}

void check_finite(const std::vector<Mat>& ms, const char* what) {
  for (std::size_t i = 0; i < ms.size(); ++i)
    if (!ms[i].allFinite())
      throw NumericalError(std::string(what) + ": non-finite estimate at sample " +
                           std::to_string(i));
}

}  // namespace

void project_states(S1Output& s1, Eigen::Index state_dim, std::uint64_t seed) {
  if (s1.q_bar.empty()) throw DataError("project_states: no state estimates");
  const Eigen::Index full = s1.q_bar.front().size();
  Mat stacked(full, static_cast<Eigen::Index>(s1.q_bar.size()));
  for (std::size_t i = 0; i < s1.q_bar.size(); ++i)
    stacked.col(static_cast<Eigen::Index>(i)) = vec_rows(s1.q_bar[i]);
  if (state_dim <= 0 || state_dim >= full) {
    s1.state_proj = PcaProjector::identity(full);
    s1.q_compressed = stacked;
    return;
  }
  if (state_dim > stacked.cols())
    throw DataError("S2: " + std::to_string(stacked.cols()) + " state samples, need at least " +
                    std::to_string(state_dim));
  SvdOptions opts;
  opts.seed = seed;
  RandomizedSvd svd = randomized_svd(stacked, state_dim, opts);
  s1.state_proj = PcaProjector(std::move(svd.u));
  s1.q_compressed = std::move(svd.proj);
}

S1Output s1_joint(const FeaturizedData& fd, double lambda1, Eigen::Index state_dim,
                  std::uint64_t seed) {
  S1Output s1;
  s1.q_bar = joint_conditional(fd.history, fd.fut_obs, fd.fut_act, lambda1, s1.inverse_fallbacks);
  s1.p_xi = joint_conditional(fd.history, fd.xi_obs, fd.xi_act, lambda1, s1.inverse_fallbacks);
  s1.p_o = joint_conditional(fd.history, fd.obs_pair, fd.act, lambda1, s1.inverse_fallbacks);
  if (s1.inverse_fallbacks > 0)
    log_warning("s1_joint: " + std::to_string(s1.inverse_fallbacks) +
                " action covariances were numerically singular; used pseudo-inverse");
  check_finite(s1.q_bar, "s1_joint");
  check_finite(s1.p_xi, "s1_joint");
  check_finite(s1.p_o, "s1_joint");
  project_states(s1, state_dim, seed);
  return s1;
}

Mat s1_conditional_weights(const Mat& history, const Mat& cond, const Mat& targets,
                           double lambda1) {
  return ridge_solve(khatri_rao(cond, history), targets, lambda1);
}

Mat s1_conditional_state(const Mat& weights, const Eigen::Ref<const Vec>& history,
                         Eigen::Index cond_dim) {
  const Eigen::Index dh = history.size();
  if (weights.cols() != cond_dim * dh) throw DimensionError("s1_conditional_state: shape mismatch");
  Mat q(weights.rows(), cond_dim);
  for (Eigen::Index j = 0; j < cond_dim; ++j) q.col(j) = weights.middleCols(j * dh, dh) * history;
  return q;
}

S1Output s1_conditional(const FeaturizedData& fd, double lambda1, Eigen::Index state_dim,
                        std::uint64_t seed) {
  S1Output s1;
  s1.q_bar = conditional_states(fd.history, fd.fut_act, fd.fut_obs, lambda1);
  s1.p_xi = conditional_states(fd.history, fd.xi_act, fd.xi_obs, lambda1);
  s1.p_o = conditional_states(fd.history, fd.act, fd.obs_pair, lambda1);
  check_finite(s1.q_bar, "s1_conditional");
  check_finite(s1.p_xi, "s1_conditional");
  check_finite(s1.p_o, "s1_conditional");
  project_states(s1, state_dim, seed);
  return s1;
}

// ---------------------------------------------------------------------------
// S2, initial state, predictor

namespace {

Mat stack_vec(const std::vector<Mat>& ms) {
  Mat out(ms.front().size(), static_cast<Eigen::Index>(ms.size()));
  for (std::size_t i = 0; i < ms.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = vec_rows(ms[i]);
  return out;
}

}  // namespace

S2Output s2_regress(const S1Output& s1, double lambda2) {
  const Eigen::Index n = s1.num_samples();
  if (n < s1.q_compressed.rows())
    throw DataError("S2: " + std::to_string(n) + " state samples for state dimension " +
                    std::to_string(s1.q_compressed.rows()));
  S2Output out;
  out.w_xi = ridge_solve(s1.q_compressed, stack_vec(s1.p_xi), lambda2);
  out.w_o = ridge_solve(s1.q_compressed, stack_vec(s1.p_o), lambda2);
  if (!out.w_xi.allFinite() || !out.w_o.allFinite())
    throw NumericalError("S2: non-finite regression weights");
  return out;
}

Vec estimate_q0(const S1Output& s1, const FeaturizedData& fd, std::size_t min_trajectories,
                double lambda) {
  if (s1.num_samples() < 1) throw DataError("estimate_q0: no state estimates");
  const std::vector<Eigen::Index> firsts = fd.first_steps();
  if (fd.num_trajectories() >= min_trajectories && !firsts.empty()) {
    Mat psi_a(fd.fut_act.rows(), static_cast<Eigen::Index>(firsts.size()));
    Mat psi_o(fd.fut_obs.rows(), static_cast<Eigen::Index>(firsts.size()));
    for (std::size_t i = 0; i < firsts.size(); ++i) {
      psi_a.col(static_cast<Eigen::Index>(i)) = fd.fut_act.col(firsts[i]);
      psi_o.col(static_cast<Eigen::Index>(i)) = fd.fut_obs.col(firsts[i]);
    }
    const Mat q0 = ridge_solve(psi_a, psi_o, lambda);
    return s1.state_proj.apply(vec_rows(q0));
  }
  return s1.q_compressed.rowwise().mean();
}

Mat ridge_solve_affine(const Mat& inputs, const Mat& targets, double lambda) {
  if (inputs.cols() != targets.cols() || inputs.cols() < 1)
    throw DimensionError("ridge_solve_affine: sample counts differ or are zero");
  const Vec x_mean = inputs.rowwise().mean();
  const Vec y_mean = targets.rowwise().mean();
  const Mat w = ridge_solve(inputs.colwise() - x_mean, targets.colwise() - y_mean, lambda);
  Mat out(targets.rows(), inputs.rows() + 1);
  out.leftCols(inputs.rows()) = w;
  out.col(inputs.rows()) = y_mean - w * x_mean;
  return out;
}

Mat train_w_pred(const S1Output& s1, const FeaturizedData& fd, double lambda2) {
  return ridge_solve_affine(khatri_rao(s1.q_compressed, fd.fut_act), fd.raw_future, lambda2);
}

// ---------------------------------------------------------------------------
// Orchestration

Eigen::Index Hyperparams::resolved_state_dim() const {
  return state_dim >= 0 ? state_dim : features.pca_dim;
}

void RffPsrModel::validate() const {
  const Eigen::Index pq = state_proj.output_dim();
  const Eigen::Index xi_full = features.xi_obs.output_dim() * features.xi_act.output_dim();
  const Eigen::Index o_full = features.obs_pair.output_dim() * features.act.output_dim();
  const Eigen::Index q_full = features.fut_obs.output_dim() * features.fut_act.output_dim();
  const Eigen::Index pred_in = pq * features.fut_act.output_dim() + 1;
  const Eigen::Index pred_out = static_cast<Eigen::Index>(features.spec.k) * features.obs_dim;
  if (q0.size() != pq || state_proj.input_dim() != q_full || w_xi.rows() != xi_full ||
      w_xi.cols() != pq || w_o.rows() != o_full || w_o.cols() != pq || w_pred.rows() != pred_out ||
      w_pred.cols() != pred_in)
    throw DimensionError("RffPsrModel: inconsistent parameter shapes");
  if (features.xi_obs.input_dim() != features.fut_obs.output_dim() * features.obs.output_dim() ||
      features.xi_act.input_dim() != features.act.output_dim() * features.fut_act.output_dim() ||
      features.obs_pair.input_dim() != features.obs.output_dim() * features.obs.output_dim())
    throw DimensionError("RffPsrModel: extended projectors do not match feature dimensions");
  if (!(lambda_filter >= 0.0)) throw std::invalid_argument("RffPsrModel: negative lambda_filter");
}

RffPsrModel learn_from_features(const FeaturizedData& fd, const Hyperparams& hp) {
  const Eigen::Index pq = hp.resolved_state_dim();
  const std::uint64_t state_seed = derive_seed(hp.seed, 300);
  const S1Output s1 = hp.s1 == S1Mode::joint ? s1_joint(fd, hp.lambda1, pq, state_seed)
                                             : s1_conditional(fd, hp.lambda1, pq, state_seed);
  const S2Output s2 = s2_regress(s1, hp.lambda2);
  const std::size_t min_traj =
      hp.q0_min_trajectories > 0 ? hp.q0_min_trajectories
                                 : static_cast<std::size_t>(10 * s1.state_proj.output_dim());
  RffPsrModel m;
  m.hp = hp;
  m.features = fd.features;
  m.state_proj = s1.state_proj;
  m.w_xi = s2.w_xi;
  m.w_o = s2.w_o;
  m.q0 = estimate_q0(s1, fd, min_traj, hp.lambda1);
  m.w_pred = train_w_pred(s1, fd, hp.lambda2);
  m.lambda_filter = hp.lambda_filter.value_or(hp.lambda1);
  m.validate();
  return m;
}

RffPsrModel learn_rff_psr(const Dataset& ds, const Hyperparams& hp) {
  ds.validate();
  FeatureConfig cfg = hp.features;
  const std::vector<Trajectory> train = ds.select(Split::train);
  if (train.empty()) throw DataError("learn_rff_psr: dataset has no training split");
  return learn_from_features(build_features(train, hp.spec, cfg), hp);
}

RffPsrModel random_init(const RffPsrModel& base, std::uint64_t seed, double scale) {
  RffPsrModel m = base;
  Rng rng(seed);
  const auto pq = static_cast<double>(base.state_dim());
  m.w_xi = gaussian_matrix(base.w_xi.rows(), base.w_xi.cols(), rng, scale / std::sqrt(pq));
  m.w_o = gaussian_matrix(base.w_o.rows(), base.w_o.cols(), rng, scale / std::sqrt(pq));
  m.w_pred = gaussian_matrix(base.w_pred.rows(), base.w_pred.cols(), rng,
                             scale / std::sqrt(static_cast<double>(base.w_pred.cols())));
  m.q0 = gaussian_matrix(base.q0.size(), 1, rng, scale).col(0);
  m.init = "random";
  return m;
}

}  // namespace rffpsr
