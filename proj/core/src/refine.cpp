#include "rffpsr/refine.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "rffpsr/log.hpp"
#include "rffpsr/text.hpp"

namespace rffpsr {

Gradients Gradients::zeros(const RffPsrModel& m) {
  Gradients g;
  g.w_xi = Mat::Zero(m.w_xi.rows(), m.w_xi.cols());
  g.w_o = Mat::Zero(m.w_o.rows(), m.w_o.cols());
  g.w_pred = Mat::Zero(m.w_pred.rows(), m.w_pred.cols());
  g.q0 = Vec::Zero(m.q0.size());
  return g;
}

void Gradients::add(const Gradients& o) {
  w_xi += o.w_xi;
  w_o += o.w_o;
  w_pred += o.w_pred;
  q0 += o.q0;
  loss += o.loss;
  windows += o.windows;
}

void Gradients::scale(double s) {
  w_xi *= s;
  w_o *= s;
  w_pred *= s;
  q0 *= s;
  loss *= s;
}

double Gradients::squared_norm() const {
  return w_xi.squaredNorm() + w_o.squaredNorm() + w_pred.squaredNorm() + q0.squaredNorm();
}

namespace {

struct WindowData {
  Mat phi_o;    // per step
  Mat phi_a;
  Mat psi_a;    // per window start
  Mat targets;  // k*d_o per window start
  Eigen::Index windows = 0;
};

WindowData window_data(const RffPsrModel& m, const Trajectory& traj) {
  const FeatureSet& fs = m.features;
  WindowData w;
  w.windows = std::max<Eigen::Index>(0, traj.length() - fs.spec.k + 1);
  if (w.windows == 0) return w;
  w.phi_o = fs.obs.apply_columns(traj.observations.leftCols(w.windows - 1));
  w.phi_a = fs.act.apply_columns(traj.actions.leftCols(w.windows - 1));
  Mat act_windows(fs.act_dim * fs.spec.k, w.windows);
  w.targets.resize(fs.obs_dim * fs.spec.k, w.windows);
  for (Eigen::Index s = 0; s < w.windows; ++s) {
    act_windows.col(s) = fs.act_window(traj, s);
    w.targets.col(s) = fs.obs_window(traj, s);
  }
  w.psi_a = fs.fut_act.apply_columns(act_windows);
  return w;
}

// Adjoint of S -> V max(L, 0) V^T at S = V L V^T (divided differences of max(., 0)).
Mat clip_adjoint(const Mat& vectors, const Vec& values, const Mat& upstream) {
  const Eigen::Index n = values.size();
  Mat inner = vectors.transpose() * upstream * vectors;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double li = values[i];
      const double lj = values[j];
      double f;
      if (li == lj)
        f = li > 0.0 ? 1.0 : 0.0;
      else
        f = (std::max(li, 0.0) - std::max(lj, 0.0)) / (li - lj);
      inner(i, j) *= f;
    }
  return vectors * inner * vectors.transpose();
}

}  // namespace

std::pair<double, std::size_t> trajectory_loss(const RffPsrModel& m, const Trajectory& traj,
                                               const FilterOptions& opts) {
  const WindowData w = window_data(m, traj);
  double loss = 0.0;
  Vec q = m.q0;
  for (Eigen::Index s = 0; s < w.windows; ++s) {
    loss += (predict_window_features(m, q, w.psi_a.col(s)) - w.targets.col(s)).squaredNorm();
    if (s + 1 < w.windows) q = filter_step(m, q, w.phi_o.col(s), w.phi_a.col(s), opts);
  }
  return {loss, static_cast<std::size_t>(w.windows)};
}

Gradients bptt_gradients(const RffPsrModel& m, const Trajectory& traj, const FilterOptions& opts) {
  const FeatureSet& fs = m.features;
  const WindowData w = window_data(m, traj);
  if (w.windows < 1) throw DataError("bptt_gradients: trajectory shorter than one prediction window");
  const auto n = static_cast<std::size_t>(w.windows);

  std::vector<FilterTrace> traces(n > 0 ? n - 1 : 0);
  std::vector<Vec> states(n);
  states[0] = m.q0;
  for (std::size_t s = 0; s + 1 < n; ++s) {
    const auto i = static_cast<Eigen::Index>(s);
    states[s + 1] = filter_step(m, states[s], w.phi_o.col(i), w.phi_a.col(i), opts, &traces[s]);
  }

  Gradients g = Gradients::zeros(m);
  g.windows = n;
  const Eigen::Index p_a = w.psi_a.rows();
  const Eigen::Index pq = m.q0.size();
  const Eigen::Index p_phi_o = fs.obs.output_dim();
  const Eigen::Index p_psi_o = fs.fut_obs.output_dim();
  const Eigen::Index p_psi_a = fs.fut_act.output_dim();
  const Mat& u_xo = fs.xi_obs.basis();
  const Mat& u_oo = fs.obs_pair.basis();

  Vec dq_next = Vec::Zero(pq);
  for (std::size_t s = n; s-- > 0;) {
    const auto i = static_cast<Eigen::Index>(s);
    Vec dq = Vec::Zero(pq);
    if (s + 1 < n) {
      const FilterTrace& tr = traces[s];
      const Mat dqn = unvec_rows(m.state_proj.basis() * dq_next, p_psi_o, p_psi_a);
      const Mat dp_xi = tr.r_o.transpose() * dqn * tr.r_a;
      const Mat dr_o = dqn * tr.r_a * tr.p_xi.transpose();
      Vec dv = Vec::Zero(p_phi_o);
      for (Eigen::Index r = 0; r < p_psi_o; ++r)
        dv.noalias() += u_xo.middleRows(xi_obs_index(r, 0, p_phi_o), p_phi_o) * dr_o.row(r).transpose();
      const Vec wv = symmetric_solve(tr.m, dv).col(0);
      Mat dc = symmetrize(-wv * tr.v.transpose());
      if (tr.clipped) dc = symmetrize(clip_adjoint(tr.eig_vectors, tr.eig_values, dc));
      const Vec du = u_oo.transpose() * vec_rows(dc);
      const Mat dp_o = du * tr.phi_a.transpose();
      const Vec gxi = vec_rows(dp_xi);
      const Vec go = vec_rows(dp_o);
      g.w_xi.noalias() += gxi * tr.q.transpose();
      g.w_o.noalias() += go * tr.q.transpose();
      dq.noalias() += m.w_xi.transpose() * gxi + m.w_o.transpose() * go;
    }
    const Vec z = pred_input(states[s], w.psi_a.col(i));
    const Vec r = m.w_pred * z - w.targets.col(i);
    g.loss += r.squaredNorm();
    g.w_pred.noalias() += 2.0 * r * z.transpose();
    const Vec dz = 2.0 * (m.w_pred.transpose() * r);
    dq.noalias() += unvec_rows(dz.head(pq * p_a), pq, p_a) * w.psi_a.col(i);
    if (!dq.allFinite())
      throw NumericalError("bptt_gradients: non-finite gradient at step " + std::to_string(s));
    dq_next = std::move(dq);
  }
  g.q0 = dq_next;
  return g;
}

Gradients bptt_gradients(const RffPsrModel& m, const std::vector<Trajectory>& trajs,
                         const FilterOptions& opts) {
  Gradients g = Gradients::zeros(m);
  for (const Trajectory& tr : trajs)
    if (tr.length() >= m.features.spec.k) g.add(bptt_gradients(m, tr, opts));
  return g;
}

double mean_loss(const RffPsrModel& m, const std::vector<Trajectory>& trajs, const FilterOptions& opts) {
  double total = 0.0;
  std::size_t windows = 0;
  try {
    for (const Trajectory& tr : trajs) {
      const auto [loss, count] = trajectory_loss(m, tr, opts);
      total += loss;
      windows += count;
    }
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
  if (windows == 0) throw DataError("mean_loss: no complete prediction window");
  const double mean = total / static_cast<double>(windows);
  return std::isfinite(mean) ? mean : std::numeric_limits<double>::infinity();
}

namespace {

RffPsrModel step_model(const RffPsrModel& m, const Gradients& g, double rate, bool refine_q0) {
  RffPsrModel out = m;
  out.w_xi -= rate * g.w_xi;
  out.w_o -= rate * g.w_o;
  out.w_pred -= rate * g.w_pred;
  if (refine_q0) out.q0 -= rate * g.q0;
  return out;
}

Gradients mean_gradients(const RffPsrModel& m, const std::vector<Trajectory>& trajs,
                         const FilterOptions& opts) {
  Gradients g = bptt_gradients(m, trajs, opts);
  if (g.windows == 0) throw DataError("refine: no complete training window");
  g.scale(1.0 / static_cast<double>(g.windows));
  return g;
}

}  // namespace

RefineResult refine(const RffPsrModel& m, const std::vector<Trajectory>& train,
                    const std::vector<Trajectory>& val, const RefineConfig& cfg) {
  if (!(cfg.min_step > 0.0) || !(cfg.min_rel_improvement > 0.0) || cfg.initial_step < 0.0)
    throw std::invalid_argument("refine: thresholds must be positive");
  if (train.empty() || val.empty()) throw DataError("refine: empty training or validation split");

  RefineResult res;
  res.model = m;
  res.model.clip_covariance = cfg.clip_covariance;
  const FilterOptions opts = filter_options(res.model);
  res.initial_val_loss = mean_loss(res.model, val, opts);
  res.best_val_loss = res.initial_val_loss;
  if (!std::isfinite(res.initial_val_loss))
    throw NumericalError("refine: initial model fails on the validation split");

  double step = cfg.initial_step;
  if (step > 0.0 && step < cfg.min_step) return res;

  Gradients g = mean_gradients(res.model, train, opts);
  const double g0_norm = std::sqrt(g.squared_norm());
  if (!(g0_norm > 0.0)) return res;
  const double unit = 1.0 / g0_norm;

  if (step == 0.0) {
    double best = std::numeric_limits<double>::infinity();
    for (double candidate : cfg.probe_steps) {
      const double loss = mean_loss(step_model(res.model, g, candidate * unit, cfg.refine_q0), train, opts);
      if (loss < best) {
        best = loss;
        step = candidate;
      }
    }
    if (step == 0.0) step = cfg.probe_steps.empty() ? 1e-2 : cfg.probe_steps.front();
    log_info("refine: probe selected step " + format_double(step));
  }

  double current_val = res.initial_val_loss;
  for (int epoch = 1; epoch <= cfg.max_epochs && step >= cfg.min_step; ++epoch) {
    if (epoch > 1 && res.log.back().accepted) g = mean_gradients(res.model, train, opts);
    const RffPsrModel candidate = step_model(res.model, g, step * unit, cfg.refine_q0);
    const double val_loss = mean_loss(candidate, val, opts);
    EpochRecord rec{epoch, step, g.loss, val_loss, val_loss <= current_val};
    res.log.push_back(rec);
    if (rec.accepted) {
      const double rel = current_val > 0.0 ? (current_val - val_loss) / current_val : 0.0;
      res.model = candidate;
      current_val = val_loss;
      if (rel < cfg.min_rel_improvement) break;
    } else {
      step *= 0.5;
    }
  }
  res.best_val_loss = current_val;
  if (res.model.init.find("+refined") == std::string::npos) res.model.init += "+refined";
  return res;
}

std::string epoch_log_csv(const std::vector<EpochRecord>& log) {
  std::string out = "epoch,step_size,train_loss,val_loss,accepted\n";
  for (const EpochRecord& r : log)
    out += std::to_string(r.epoch) + "," + format_double(r.step_size) + "," + format_double(r.train_loss) +
           "," + format_double(r.val_loss) + "," + (r.accepted ? "true" : "false") + "\n";
  return out;
}

std::vector<EpochRecord> parse_epoch_log_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "epoch,step_size,train_loss,val_loss,accepted")
    throw ParseError("epoch log: unexpected header");
  std::vector<EpochRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
    if (cells.size() != 5) throw ParseError("epoch log line " + std::to_string(line_no) + ": expected 5 fields");
    EpochRecord r;
    r.epoch = static_cast<int>(parse_double(cells[0]));
    r.step_size = parse_double(cells[1]);
    r.train_loss = parse_double(cells[2]);
    r.val_loss = parse_double(cells[3]);
    if (cells[4] != "true" && cells[4] != "false")
      throw ParseError("epoch log line " + std::to_string(line_no) + ": accepted must be true or false");
    r.accepted = cells[4] == "true";
    out.push_back(r);
  }
  return out;
}

}  // namespace rffpsr
