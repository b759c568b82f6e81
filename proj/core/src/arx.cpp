#include "rffpsr/arx.hpp"

#include <limits>

#include "json_io.hpp"
#include "rffpsr/log.hpp"
#include "rffpsr/random.hpp"
#include "rffpsr/text.hpp"

namespace rffpsr {

using detail::field;
using detail::Json;

namespace {

constexpr const char* kArxFormat = "rffpsr-arx-1";

FeatureSet window_helper(const ArxModel& m) {
  FeatureSet fs;
  fs.spec = m.spec;
  fs.obs_dim = m.obs_dim;
  fs.act_dim = m.act_dim;
  return fs;
}

ProjectedFeature fit_feature(FeatureKind kind, const Mat& raw, Eigen::Index block, const FeatureConfig& cfg,
                             std::uint64_t stream) {
  ProjectedFeature pf;
  switch (kind) {
    case FeatureKind::rff: {
      const double bw = raw.rows() == 0
                            ? 1.0
                            : median_bandwidth(raw, cfg.max_pairs, derive_seed(cfg.seed, 100 + stream));
      pf.map = FeatureMap::make_rff(RffMap(raw.rows(), cfg.num_freq, bw * cfg.bandwidth_scale, derive_seed(cfg.seed, stream)));
      break;
    }
    case FeatureKind::linear: pf.map = FeatureMap::make_linear(raw.rows()); break;
    case FeatureKind::indicator: pf.map = FeatureMap::make_indicator(raw.rows(), block); break;
  }
  const Mat feats = pf.map.apply_columns(raw);
  pf.pca = cfg.pca_dim <= 0 || feats.rows() <= cfg.pca_dim
               ? PcaProjector::identity(feats.rows())
               : pca_fit(feats, cfg.pca_dim, derive_seed(cfg.seed, 200 + stream));
  return pf;
}

Vec arx_input(const ArxModel& m, const Eigen::Ref<const Vec>& history_window,
              const Eigen::Ref<const Vec>& future_actions) {
  const Vec h = m.history.apply(history_window);
  const Vec a = m.fut_act.apply(future_actions);
  Vec z(h.size() + a.size());
  z << h, a;
  return z;
}

}  // namespace

void ArxModel::validate() const {
  spec.validate();
  if (history.map.input_dim() != (obs_dim + act_dim) * spec.history_len ||
      fut_act.map.input_dim() != act_dim * spec.k ||
      weights.rows() != obs_dim * spec.k ||
      weights.cols() != history.output_dim() + fut_act.output_dim() + 1)
    throw DimensionError("ArxModel: inconsistent shapes");
}

ArxModel arx_train(const std::vector<Trajectory>& train, const FutureSpec& spec, const FeatureConfig& cfg,
                   double lambda) {
  spec.validate();
  if (train.empty()) throw DataError("arx_train: no training trajectories");
  ArxModel m;
  m.spec = spec;
  m.obs_dim = train.front().obs_dim();
  m.act_dim = train.front().act_dim();
  m.lambda = lambda;
  const FeatureSet fs = window_helper(m);
  Eigen::Index n = 0;
  for (const Trajectory& tr : train) {
    if (tr.obs_dim() != m.obs_dim || tr.act_dim() != m.act_dim)
      throw DimensionError("arx_train: inconsistent trajectory dimensions");
    n += std::max<Eigen::Index>(0, tr.length() - spec.k + 1);
  }
  if (n == 0) throw DataError("arx_train: no trajectory covers a full future window");
  Mat hist((m.obs_dim + m.act_dim) * spec.history_len, n);
  Mat acts(m.act_dim * spec.k, n);
  Mat targets(m.obs_dim * spec.k, n);
  Eigen::Index col = 0;
  for (const Trajectory& tr : train)
    for (Eigen::Index s = 0; s + spec.k <= tr.length(); ++s, ++col) {
      hist.col(col) = fs.history_window(tr, s);
      acts.col(col) = fs.act_window(tr, s);
      targets.col(col) = fs.obs_window(tr, s);
    }
  if (cfg.history_kind == FeatureKind::indicator && m.obs_dim != m.act_dim)
    throw DimensionError("indicator history features need equal observation and action dimensions");
  m.history = fit_feature(cfg.history_kind, hist, m.obs_dim, cfg, 11);
  m.fut_act = fit_feature(cfg.act_kind, acts, m.act_dim, cfg, 15);
  Mat inputs(m.history.output_dim() + m.fut_act.output_dim(), n);
  inputs << m.history.apply_columns(hist), m.fut_act.apply_columns(acts);
  m.weights = ridge_solve_affine(inputs, targets, lambda);
  if (!m.weights.allFinite()) throw NumericalError("arx_train: non-finite weights");
  return m;
}

ArxModel arx_train_selected(const std::vector<Trajectory>& train, const std::vector<Trajectory>& val,
                            const FutureSpec& spec, const FeatureConfig& cfg,
                            const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("arx_train_selected: empty grid");
  if (val.empty()) throw DataError("arx_train_selected: no validation trajectories");
  ArxModel best;
  double best_mse = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    ArxModel m = arx_train(train, spec, cfg, lambda);
    HorizonErrors err(1);
    for (const Trajectory& tr : val) err.add(arx_rollout_eval(m, tr, {1}));
    const double mse = err.mse(1);
    log_info("arx: lambda=" + format_double(lambda) + " val_mse=" + format_double(mse));
    if (mse < best_mse) {
      best_mse = mse;
      best = std::move(m);
    }
  }
  return best;
}

Vec arx_predict(const ArxModel& m, const Eigen::Ref<const Vec>& history_window,
                const Eigen::Ref<const Vec>& future_actions) {
  if (future_actions.size() != m.act_dim * m.spec.k)
    throw DimensionError("arx_predict: expected " + std::to_string(m.spec.k) + " future actions");
  const Vec z = arx_input(m, history_window, future_actions);
  return m.weights.leftCols(z.size()) * z + m.weights.col(z.size());
}

Vec arx_predict_at(const ArxModel& m, const Trajectory& traj, Eigen::Index s) {
  const FeatureSet fs = window_helper(m);
  return arx_predict(m, fs.history_window(traj, s), fs.act_window(traj, s));
}

HorizonErrors arx_rollout_eval(const ArxModel& m, const Trajectory& traj, const std::vector<int>& horizons,
                               std::optional<Eigen::Index> skip) {
  return score_windows(traj, m.spec.k, horizons, skip.value_or(m.spec.history_len),
                       [&](Eigen::Index s) { return arx_predict_at(m, traj, s); });
}

std::string arx_to_json(const ArxModel& m) {
  Json j{{"format", kArxFormat},
         {"k", m.spec.k},
         {"history_len", m.spec.history_len},
         {"obs_dim", m.obs_dim},
         {"act_dim", m.act_dim},
         {"lambda", m.lambda},
         {"history", detail::projected_to_json(m.history)},
         {"fut_act", detail::projected_to_json(m.fut_act)},
         {"weights", detail::mat_to_json(m.weights)}};
  return j.dump() + "\n";
}

ArxModel arx_from_json(const std::string& text) {
  try {
    const Json j = Json::parse(text);
    if (field(j, "format").get<std::string>() != kArxFormat) throw ParseError("unsupported ARX model format");
    ArxModel m;
    m.spec.k = field(j, "k").get<int>();
    m.spec.history_len = field(j, "history_len").get<int>();
    m.obs_dim = field(j, "obs_dim").get<Eigen::Index>();
    m.act_dim = field(j, "act_dim").get<Eigen::Index>();
    m.lambda = field(j, "lambda").get<double>();
    m.history = detail::projected_from_json(field(j, "history"));
    m.fut_act = detail::projected_from_json(field(j, "fut_act"));
    m.weights = detail::mat_from_json(field(j, "weights"));
    m.validate();
    return m;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed ARX model file: ") + e.what());
  } catch (const DimensionError& e) {
    throw ParseError(std::string("inconsistent ARX model file: ") + e.what());
  }
}

void save_arx(const ArxModel& m, const std::string& path) { write_file(path, arx_to_json(m)); }

ArxModel load_arx(const std::string& path) { return arx_from_json(read_file(path)); }

}  // namespace rffpsr
