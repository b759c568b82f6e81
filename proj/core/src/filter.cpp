#include "rffpsr/filter.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <string>

#include "rffpsr/log.hpp"

namespace rffpsr {

namespace {

void require_finite(const Mat& m, const char* step) {
  if (!m.allFinite()) throw NumericalError(std::string("filter_update: non-finite ") + step);
}

std::atomic<bool> fallback_reported{false};

}  // namespace

FilterOptions filter_options(const RffPsrModel& m) {
  return FilterOptions{m.lambda_filter, m.clip_covariance};
}

Vec filter_step(const RffPsrModel& m, const Eigen::Ref<const Vec>& q,
                const Eigen::Ref<const Vec>& phi_o, const Eigen::Ref<const Vec>& phi_a,
                const FilterOptions& opts, FilterTrace* trace) {
  const FeatureSet& fs = m.features;
  const Eigen::Index p_phi_o = fs.obs.output_dim();
  const Eigen::Index p_phi_a = fs.act.output_dim();
  const Eigen::Index p_psi_o = fs.fut_obs.output_dim();
  const Eigen::Index p_psi_a = fs.fut_act.output_dim();
  const Mat& u_xo = fs.xi_obs.basis();
  const Mat& u_xa = fs.xi_act.basis();
  if (q.size() != m.w_xi.cols() || phi_o.size() != p_phi_o || phi_a.size() != p_phi_a)
    throw DimensionError("filter_update: state or feature dimension mismatch");

  Mat p_xi = unvec_rows(m.w_xi * q, u_xo.cols(), u_xa.cols());
  Mat p_o = unvec_rows(m.w_o * q, fs.obs_pair.output_dim(), p_phi_a);
  require_finite(p_xi, "extended state");
  require_finite(p_o, "observation extended state");

  Mat c = symmetrize(unvec_rows(fs.obs_pair.basis() * (p_o * phi_a), p_phi_o, p_phi_o));
  require_finite(c, "observation covariance");
  Eigen::SelfAdjointEigenSolver<Mat> eig;
  if (opts.clip_covariance) {
    eig.compute(c);
    c = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
  }
  c.diagonal().array() += opts.lambda;
  require_finite(c, "observation covariance");
  bool fallback = false;
  Vec v = symmetric_solve(c, phi_o, &fallback).col(0);
  if (fallback && !fallback_reported.exchange(true))
    log_warning("filter_update: observation covariance is ill-conditioned; used pseudo-inverse"
                " (reported once)");
  require_finite(v, "conditioned observation feature");

  Mat r_o(p_psi_o, u_xo.cols());
  for (Eigen::Index i = 0; i < p_psi_o; ++i)
    r_o.row(i) = v.transpose() * u_xo.middleRows(xi_obs_index(i, 0, p_phi_o), p_phi_o);
  Mat r_a = Mat::Zero(p_psi_a, u_xa.cols());
  for (Eigen::Index n = 0; n < p_phi_a; ++n)
    r_a += phi_a[n] * u_xa.middleRows(xi_act_index(n, 0, p_psi_a), p_psi_a);

  const Mat q_op = r_o * p_xi * r_a.transpose();
  Vec q_next = m.state_proj.apply(vec_rows(q_op));
  require_finite(q_next, "next state");
  if (trace) {
    trace->q = q;
    trace->phi_o = phi_o;
    trace->phi_a = phi_a;
    trace->p_xi = std::move(p_xi);
    trace->p_o = std::move(p_o);
    trace->m = std::move(c);
    trace->clipped = opts.clip_covariance;
    if (opts.clip_covariance) {
      trace->eig_vectors = eig.eigenvectors();
      trace->eig_values = eig.eigenvalues();
    }
    trace->v = std::move(v);
    trace->r_o = std::move(r_o);
    trace->r_a = std::move(r_a);
    trace->q_next = q_next;
    trace->fallback = fallback;
  }
  return q_next;
}

Vec filter_update(const RffPsrModel& m, const Eigen::Ref<const Vec>& q,
                  const Eigen::Ref<const Vec>& o, const Eigen::Ref<const Vec>& a) {
  return filter_step(m, q, m.features.obs.apply(o), m.features.act.apply(a), filter_options(m));
}

Vec pred_input(const Eigen::Ref<const Vec>& q, const Eigen::Ref<const Vec>& psi_a) {
  Vec z(q.size() * psi_a.size() + 1);
  z.head(z.size() - 1) = kron(q, psi_a);
  z[z.size() - 1] = 1.0;
  return z;
}

Vec predict_window_features(const RffPsrModel& m, const Eigen::Ref<const Vec>& q,
                            const Eigen::Ref<const Vec>& psi_a) {
  if (q.size() * psi_a.size() + 1 != m.w_pred.cols())
    throw DimensionError("predict_window: state or action feature dimension mismatch");
  return m.w_pred * pred_input(q, psi_a);
}

Mat predict_window(const RffPsrModel& m, const Eigen::Ref<const Vec>& q, const Mat& future_actions) {
  const int k = m.features.spec.k;
  if (future_actions.cols() != k || future_actions.rows() != m.features.act_dim)
    throw DimensionError("predict_window: expected " + std::to_string(k) + " future actions of dimension " +
                         std::to_string(m.features.act_dim));
  const Vec stacked = Eigen::Map<const Vec>(future_actions.data(), future_actions.size());
  const Vec w = predict_window_features(m, q, m.features.fut_act.apply(stacked));
  return unvec_rows(w, k, m.features.obs_dim);
}

std::vector<Vec> filter_states(const RffPsrModel& m, const Trajectory& traj, Eigen::Index count) {
  if (count > traj.length() + 1) throw DimensionError("filter_states: trajectory too short");
  std::vector<Vec> states;
  if (count <= 0) return states;
  states.reserve(static_cast<std::size_t>(count));
  states.push_back(m.q0);
  const FilterOptions opts = filter_options(m);
  const Mat phi_o = m.features.obs.apply_columns(traj.observations.leftCols(count - 1));
  const Mat phi_a = m.features.act.apply_columns(traj.actions.leftCols(count - 1));
  for (Eigen::Index s = 0; s + 1 < count; ++s)
    states.push_back(filter_step(m, states.back(), phi_o.col(s), phi_a.col(s), opts));
  return states;
}

void HorizonErrors::add(const HorizonErrors& other) {
  if (other.sse.size() > sse.size()) {
    sse.resize(other.sse.size(), 0.0);
    count.resize(other.count.size(), 0);
  }
  for (std::size_t i = 0; i < other.sse.size(); ++i) {
    sse[i] += other.sse[i];
    count[i] += other.count[i];
  }
}

double HorizonErrors::mse(int horizon) const {
  const auto i = static_cast<std::size_t>(horizon - 1);
  if (horizon < 1 || i >= count.size() || count[i] == 0) return 0.0;
  return sse[i] / static_cast<double>(count[i]);
}

std::pair<Eigen::Index, Eigen::Index> target_range(Eigen::Index length, int k, int horizon,
                                                   Eigen::Index skip) {
  return {std::max<Eigen::Index>(horizon - 1, skip), length - k + horizon - 1};
}

HorizonErrors score_windows(const Trajectory& traj, int k, const std::vector<int>& horizons,
                            Eigen::Index skip, const WindowPredictor& predict) {
  int max_h = 0;
  for (int h : horizons) {
    if (h < 1 || h > k) throw std::invalid_argument("horizon must lie in 1..k");
    max_h = std::max(max_h, h);
  }
  HorizonErrors out(static_cast<std::size_t>(max_h));
  const Eigen::Index d_o = traj.obs_dim();
  const Eigen::Index last_start = traj.length() - k;
  std::vector<Vec> windows;
  for (Eigen::Index s = 0; s <= last_start; ++s) windows.push_back(predict(s));
  for (int h : horizons) {
    const auto [lo, hi] = target_range(traj.length(), k, h, skip);
    const auto i = static_cast<std::size_t>(h - 1);
    for (Eigen::Index t = lo; t <= hi; ++t) {
      const Vec& w = windows[static_cast<std::size_t>(t - h + 1)];
      out.sse[i] += (w.segment(d_o * (h - 1), d_o) - traj.observations.col(t)).squaredNorm();
      ++out.count[i];
    }
  }
  return out;
}

HorizonErrors rollout_eval(const RffPsrModel& m, const Trajectory& traj,
                           const std::vector<int>& horizons, std::optional<Eigen::Index> skip) {
  const int k = m.features.spec.k;
  const Eigen::Index n_windows = std::max<Eigen::Index>(0, traj.length() - k + 1);
  const std::vector<Vec> states = filter_states(m, traj, n_windows);
  return score_windows(traj, k, horizons, skip.value_or(m.features.spec.history_len),
                       [&](Eigen::Index s) {
                         const Vec psi_a = m.features.fut_act.apply(m.features.act_window(traj, s));
                         return predict_window_features(m, states[static_cast<std::size_t>(s)], psi_a);
                       });
}

RffPsrModel iohmm_embedding(const IoHmm& hmm, int k) {
  hmm.validate();
  const Eigen::Index n_o = hmm.n_obs();
  const Eigen::Index n_a = hmm.n_actions();
  const Eigen::Index n_s = hmm.n_states();
  const Tensor ok = iohmm_extended_obs(hmm, k);
  const Tensor ok1 = iohmm_extended_obs(hmm, k + 1);
  const Mat obs_k = iohmm_state_to_predictive(ok);
  const Mat obs_k1 = iohmm_state_to_predictive(ok1);
  Eigen::FullPivLU<Mat> lu(obs_k);
  if (lu.rank() < n_s) throw NumericalError("iohmm_embedding: system is not k-observable");
  const Mat to_belief = pinv(obs_k);

  const auto w_o = static_cast<Eigen::Index>(ok.mode_sizes()[0]);
  const auto w_a = static_cast<Eigen::Index>(ok.mode_sizes()[2]);

  RffPsrModel m;
  m.hp.spec = FutureSpec{k, 0};
  m.hp.features.obs_kind = m.hp.features.act_kind = m.hp.features.history_kind = FeatureKind::indicator;
  m.hp.features.pca_dim = 0;
  m.hp.state_dim = 0;
  m.hp.lambda1 = 0.0;
  m.hp.lambda_filter = 0.0;
  FeatureSet& fs = m.features;
  fs.spec = m.hp.spec;
  fs.obs_dim = n_o;
  fs.act_dim = n_a;
  auto block = [](Eigen::Index input, Eigen::Index width) {
    ProjectedFeature pf;
    pf.map = FeatureMap::make_indicator(input, width);
    pf.pca = PcaProjector::identity(pf.map.output_dim());
    return pf;
  };
  fs.history = block(0, 1);
  fs.obs = block(n_o, n_o);
  fs.act = block(n_a, n_a);
  fs.fut_obs = block(n_o * k, n_o);
  fs.fut_act = block(n_a * k, n_a);
  fs.xi_obs = PcaProjector::identity(w_o * n_o);
  fs.xi_act = PcaProjector::identity(n_a * w_a);
  fs.obs_pair = PcaProjector::identity(n_o * n_o);
  m.state_proj = PcaProjector::identity(w_o * w_a);

  // Extended state: rows of O^{k+1} are (o_t, o_{t+1:t+k}); the extended feature
  // puts the future window first. Columns (a_t, a_{t+1:t+k}) already match.
  const Eigen::Index xi_cols = n_a * w_a;
  Mat ext = Mat::Zero(w_o * n_o * xi_cols, n_s);
  for (Eigen::Index o = 0; o < n_o; ++o)
    for (Eigen::Index w = 0; w < w_o; ++w)
      for (Eigen::Index c = 0; c < xi_cols; ++c)
        ext.row(xi_obs_index(w, o, n_o) * xi_cols + c) = obs_k1.row((o * w_o + w) * xi_cols + c);
  m.w_xi = ext * to_belief;

  // P^o[(o, o'), a] = delta(o, o') Pr[o | a, s]
  Mat po = Mat::Zero(n_o * n_o * n_a, n_s);
  for (Eigen::Index o = 0; o < n_o; ++o)
    for (Eigen::Index a = 0; a < n_a; ++a)
      po.row((o * n_o + o) * n_a + a) = hmm.emission[static_cast<std::size_t>(a)].row(o);
  m.w_o = po * to_belief;

  // Window prediction: E[o_{t+j}] = sum over observation windows with o_{t+j} = o.
  m.w_pred = Mat::Zero(k * n_o, w_o * w_a * w_a + 1);
  for (Eigen::Index w = 0; w < w_o; ++w) {
    Eigen::Index rest = w;
    std::vector<Eigen::Index> digits(static_cast<std::size_t>(k));
    for (int j = k - 1; j >= 0; --j) {
      digits[static_cast<std::size_t>(j)] = rest % n_o;
      rest /= n_o;
    }
    for (int j = 0; j < k; ++j)
      for (Eigen::Index l = 0; l < w_a; ++l)
        m.w_pred(j * n_o + digits[static_cast<std::size_t>(j)], (w * w_a + l) * w_a + l) = 1.0;
  }
  m.q0 = vec_rows(iohmm_predictive_state(ok, hmm.initial));
  m.lambda_filter = 0.0;
  m.init = "iohmm-embedding";
  m.validate();
  return m;
}

}  // namespace rffpsr
