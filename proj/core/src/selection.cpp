#include <limits>
#include <string>

#include "rffpsr/filter.hpp"
#include "rffpsr/log.hpp"
#include "rffpsr/random.hpp"
#include "rffpsr/two_stage.hpp"

namespace rffpsr {

namespace {

double horizon1_mse(const RffPsrModel& m, const std::vector<Trajectory>& val) {
  HorizonErrors total(1);
  for (const Trajectory& tr : val) total.add(rollout_eval(m, tr, {1}));
  if (total.count[0] == 0) throw DataError("select_lambdas: validation trajectories are too short");
  return total.mse(1);
}

}  // namespace

LambdaSelection select_lambdas(const FeaturizedData& train, const std::vector<Trajectory>& val,
                               const Hyperparams& hp, const std::vector<double>& grid,
                               const std::vector<double>& grid2) {
  if (grid.empty()) throw std::invalid_argument("select_lambdas: empty grid");
  const std::vector<double>& second = grid2.empty() ? grid : grid2;
  if (val.empty()) throw DataError("select_lambdas: no validation trajectories");
  LambdaSelection best{grid.front(), second.front(), std::numeric_limits<double>::infinity()};
  const Eigen::Index pq = hp.resolved_state_dim();
  for (double l1 : grid) {
    Hyperparams h = hp;
    h.lambda1 = l1;
    S1Output s1;
    try {
      s1 = h.s1 == S1Mode::joint ? s1_joint(train, l1, pq, derive_seed(h.seed, 300))
                                 : s1_conditional(train, l1, pq, derive_seed(h.seed, 300));
    } catch (const NumericalError& e) {
      log_warning(std::string("select_lambdas: lambda1 skipped: ") + e.what());
      continue;
    }
    const std::size_t min_traj = h.q0_min_trajectories > 0
                                     ? h.q0_min_trajectories
                                     : static_cast<std::size_t>(10 * s1.state_proj.output_dim());
    const Vec q0 = estimate_q0(s1, train, min_traj, l1);
    for (double l2 : second) {
      h.lambda2 = l2;
      RffPsrModel m;
      m.hp = h;
      m.features = train.features;
      m.state_proj = s1.state_proj;
      try {
        const S2Output s2 = s2_regress(s1, l2);
        m.w_xi = s2.w_xi;
        m.w_o = s2.w_o;
        m.w_pred = train_w_pred(s1, train, l2);
        m.q0 = q0;
        m.lambda_filter = h.lambda_filter.value_or(l1);
        const double mse = horizon1_mse(m, val);
        log_info("select_lambdas: lambda1=" + std::to_string(l1) + " lambda2=" + std::to_string(l2) +
                 " val_mse=" + std::to_string(mse));
        if (mse < best.val_mse) best = {l1, l2, mse};
      } catch (const NumericalError& e) {
        log_warning(std::string("select_lambdas: pair skipped: ") + e.what());
      }
    }
  }
  if (!(best.val_mse < std::numeric_limits<double>::infinity()))
    throw NumericalError("select_lambdas: every grid point failed");
  return best;
}

RffPsrModel learn_selected(const Dataset& ds, const Hyperparams& hp, const std::vector<double>& grid,
                           const std::vector<double>& grid2, LambdaSelection* chosen) {
  ds.validate();
  const std::vector<Trajectory> train = ds.select(Split::train);
  const std::vector<Trajectory> val = ds.select(Split::val);
  if (train.empty()) throw DataError("learn_selected: dataset has no training split");
  const FeaturizedData fd = build_features(train, hp.spec, hp.features);
  const LambdaSelection sel = select_lambdas(fd, val, hp, grid, grid2);
  if (chosen) *chosen = sel;
  Hyperparams h = hp;
  h.lambda1 = sel.lambda1;
  h.lambda2 = sel.lambda2;
  return learn_from_features(fd, h);
}

}  // namespace rffpsr
