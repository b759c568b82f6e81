#pragma once

#include <string>
#include <vector>

#include "rffpsr/filter.hpp"
#include "rffpsr/two_stage.hpp"

namespace rffpsr {

/// RFF-ARX: one ridge regression from [phi^h(history window); psi^a(future actions); 1]
/// to the future observation window o_{s:s+k-1}.
struct ArxModel {
  FutureSpec spec;
  Eigen::Index obs_dim = 0;
  Eigen::Index act_dim = 0;
  ProjectedFeature history;
  ProjectedFeature fut_act;
  Mat weights;  // (k*d_o) x (p_h + p_a + 1); last column is the intercept
  double lambda = 1e-3;

  void validate() const;
};

/// Fits on every full window s (s + k <= T) of every training trajectory.
ArxModel arx_train(const std::vector<Trajectory>& train, const FutureSpec& spec,
                   const FeatureConfig& cfg, double lambda);

/// arx_train at the grid lambda with the lowest horizon-1 validation MSE.
ArxModel arx_train_selected(const std::vector<Trajectory>& train, const std::vector<Trajectory>& val,
                            const FutureSpec& spec, const FeatureConfig& cfg,
                            const std::vector<double>& grid = kDefaultLambdaGrid);

/// Window prediction from a raw history window and stacked future actions.
Vec arx_predict(const ArxModel& m, const Eigen::Ref<const Vec>& history_window,
                const Eigen::Ref<const Vec>& future_actions);

/// Prediction for the window starting at s of `traj`.
Vec arx_predict_at(const ArxModel& m, const Trajectory& traj, Eigen::Index s);

HorizonErrors arx_rollout_eval(const ArxModel& m, const Trajectory& traj, const std::vector<int>& horizons,
                               std::optional<Eigen::Index> skip = {});

std::string arx_to_json(const ArxModel& m);
ArxModel arx_from_json(const std::string& text);
void save_arx(const ArxModel& m, const std::string& path);
ArxModel load_arx(const std::string& path);

}  // namespace rffpsr
