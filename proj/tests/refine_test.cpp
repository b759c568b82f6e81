#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "rffpsr/random.hpp"
#include "rffpsr/refine.hpp"
#include "rffpsr/text.hpp"

namespace rffpsr {
namespace {

using testing::perturbed;
using testing::small_benchmark_model;

// Central differences of trajectory_loss over one parameter block.
template <class Get>
Mat finite_difference(const RffPsrModel& m, const Trajectory& tr, const FilterOptions& opts, Get get,
                      double h = 1e-5) {
  RffPsrModel probe = m;
  auto& block = get(probe);
  Mat out(block.rows(), block.cols());
  for (Eigen::Index i = 0; i < block.rows(); ++i)
    for (Eigen::Index j = 0; j < block.cols(); ++j) {
      const double orig = block(i, j);
      block(i, j) = orig + h;
      const double up = trajectory_loss(probe, tr, opts).first;
      block(i, j) = orig - h;
      const double down = trajectory_loss(probe, tr, opts).first;
      block(i, j) = orig;
      out(i, j) = (up - down) / (2 * h);
    }
  return out;
}

double block_error(const Mat& analytic, const Mat& numeric) {
  const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-12);
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

TEST(BpttGradients, MatchFiniteDifferencesOnSmallModel) {
  Dataset ds;
  const RffPsrModel base = small_benchmark_model(5, 3, 2, 7, &ds);
  const RffPsrModel m = perturbed(base, 0.05, 11);
  Trajectory tr = ds.trajectories[0];
  tr.observations = tr.observations.leftCols(12).eval();
  tr.actions = tr.actions.leftCols(12).eval();
  const FilterOptions opts{0.5, false};
  const Gradients g = bptt_gradients(m, tr, opts);
  EXPECT_NEAR(g.loss, trajectory_loss(m, tr, opts).first, 1e-12 * std::max(1.0, g.loss));
  EXPECT_LT(block_error(g.w_pred, finite_difference(m, tr, opts, [](RffPsrModel& x) -> Mat& { return x.w_pred; })), 1e-4);
  EXPECT_LT(block_error(g.w_xi, finite_difference(m, tr, opts, [](RffPsrModel& x) -> Mat& { return x.w_xi; })), 1e-4);
  EXPECT_LT(block_error(g.w_o, finite_difference(m, tr, opts, [](RffPsrModel& x) -> Mat& { return x.w_o; })), 1e-4);
  Mat q0 = g.q0;
  EXPECT_LT(block_error(q0, finite_difference(m, tr, opts, [](RffPsrModel& x) -> Vec& { return x.q0; })), 1e-4);
}

TEST(BpttGradients, MatchFiniteDifferencesThroughCovarianceClip) {
  Dataset ds;
  const RffPsrModel base = small_benchmark_model(5, 3, 2, 7, &ds);
  const RffPsrModel m = perturbed(base, 0.05, 13);
  Trajectory tr = ds.trajectories[1];
  tr.observations = tr.observations.leftCols(12).eval();
  tr.actions = tr.actions.leftCols(12).eval();
  const FilterOptions opts{0.1, true};
  const Gradients g = bptt_gradients(m, tr, opts);
  EXPECT_LT(block_error(g.w_xi, finite_difference(m, tr, opts, [](RffPsrModel& x) -> Mat& { return x.w_xi; })), 1e-4);
  EXPECT_LT(block_error(g.w_o, finite_difference(m, tr, opts, [](RffPsrModel& x) -> Mat& { return x.w_o; })), 1e-4);
}

Trajectory prefix(const Trajectory& tr, Eigen::Index n) {
  return Trajectory{tr.observations.leftCols(n), tr.actions.leftCols(n)};
}

TEST(BpttGradients, SingleWindowIsRegressionGradient) {
  Dataset ds;
  const RffPsrModel m = perturbed(small_benchmark_model(5, 3, 2, 3, &ds), 0.05, 4);
  const Trajectory tr = prefix(ds.trajectories[0], 3);
  const FilterOptions opts = filter_options(m);
  const Gradients g = bptt_gradients(m, tr, opts);
  const Vec z = pred_input(m.q0, m.features.fut_act.apply(m.features.act_window(tr, 0)));
  const Vec err = m.w_pred * z - m.features.obs_window(tr, 0);
  EXPECT_EQ(g.windows, 1u);
  EXPECT_NEAR(g.loss, err.squaredNorm(), 1e-12);
  EXPECT_LE((g.w_pred - 2.0 * err * z.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(g.w_xi.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.w_o.cwiseAbs().maxCoeff(), 0.0);
}

TEST(BpttGradients, ZeroErrorGivesZeroGradients) {
  Dataset ds;
  RffPsrModel m = small_benchmark_model(5, 3, 2, 5, &ds);
  m.w_pred.setZero();
  Trajectory tr = prefix(ds.trajectories[0], 12);
  tr.observations.setZero();
  const Gradients g = bptt_gradients(m, tr, filter_options(m));
  EXPECT_EQ(g.loss, 0.0);
  EXPECT_EQ(g.squared_norm(), 0.0);
}

TEST(BpttGradients, AdditiveOverTrajectories) {
  Dataset ds;
  const RffPsrModel m = perturbed(small_benchmark_model(5, 3, 2, 6, &ds), 0.02, 7);
  const std::vector<Trajectory> trs(ds.trajectories.begin(), ds.trajectories.begin() + 3);
  const FilterOptions opts = filter_options(m);
  const Gradients total = bptt_gradients(m, trs, opts);
  Gradients sum = Gradients::zeros(m);
  for (const Trajectory& tr : trs) sum.add(bptt_gradients(m, tr, opts));
  EXPECT_NEAR(total.loss, sum.loss, 1e-12 * sum.loss);
  EXPECT_EQ(total.windows, sum.windows);
  EXPECT_LE((total.w_xi - sum.w_xi).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((total.w_o - sum.w_o).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((total.w_pred - sum.w_pred).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((total.q0 - sum.q0).cwiseAbs().maxCoeff(), 1e-10);
}

struct Splits {
  RffPsrModel model;
  std::vector<Trajectory> train, val;
};

Splits refine_setup(std::uint64_t seed) {
  Dataset ds;
  Splits s;
  s.model = small_benchmark_model(5, 3, 2, seed, &ds);
  s.train.assign(ds.trajectories.begin(), ds.trajectories.begin() + 6);
  s.val.assign(ds.trajectories.begin() + 6, ds.trajectories.end());
  return s;
}

TEST(Refine, ReturnsNoWorseValidationLoss) {
  const Splits s = refine_setup(8);
  RefineConfig cfg;
  cfg.max_epochs = 30;
  const RefineResult r = refine(perturbed(s.model, 0.01, 9), s.train, s.val, cfg);
  const FilterOptions opts = filter_options(r.model);
  EXPECT_LE(r.best_val_loss, r.initial_val_loss);
  EXPECT_NEAR(mean_loss(r.model, s.val, opts), r.best_val_loss, 1e-12);
  double best = r.initial_val_loss;
  for (const EpochRecord& e : r.log) {
    const double next = e.accepted ? std::min(best, e.val_loss) : best;
    EXPECT_LE(next, best);
    if (e.accepted) EXPECT_LE(e.val_loss, best);
    best = next;
  }
}

TEST(Refine, StepBelowMinimumReturnsUnchanged) {
  const Splits s = refine_setup(10);
  RefineConfig cfg;
  cfg.initial_step = 1e-6;
  const RefineResult r = refine(s.model, s.train, s.val, cfg);
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(r.model.w_xi, s.model.w_xi);
  EXPECT_EQ(r.model.w_o, s.model.w_o);
  EXPECT_EQ(r.model.w_pred, s.model.w_pred);
  EXPECT_EQ(r.model.q0, s.model.q0);
}

TEST(Refine, StepScheduleHalvesOnRejection) {
  const Splits s = refine_setup(11);
  RefineConfig cfg;
  cfg.max_epochs = 25;
  cfg.initial_step = 0.5;
  const RefineResult r = refine(perturbed(s.model, 0.01, 12), s.train, s.val, cfg);
  ASSERT_FALSE(r.log.empty());
  EXPECT_EQ(r.log.front().step_size, 0.5);
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    EXPECT_EQ(r.log[i].epoch, static_cast<int>(i) + 1);
    if (i == 0) continue;
    const double want = r.log[i - 1].accepted ? r.log[i - 1].step_size : 0.5 * r.log[i - 1].step_size;
    EXPECT_EQ(r.log[i].step_size, want);
  }
  const EpochRecord& last = r.log.back();
  const bool stopped_on_step = !last.accepted && 0.5 * last.step_size < cfg.min_step;
  EXPECT_TRUE(stopped_on_step || last.accepted || static_cast<int>(r.log.size()) == cfg.max_epochs);
}

TEST(Refine, FeatureMapsAreFrozen) {
  const Splits s = refine_setup(13);
  RefineConfig cfg;
  cfg.max_epochs = 5;
  const RefineResult r = refine(perturbed(s.model, 0.01, 14), s.train, s.val, cfg);
  const Trajectory& tr = s.train.front();
  const FeatureSet& a = s.model.features;
  const FeatureSet& b = r.model.features;
  EXPECT_EQ(a.obs.apply(tr.observations.col(3)), b.obs.apply(tr.observations.col(3)));
  EXPECT_EQ(a.act.apply(tr.actions.col(3)), b.act.apply(tr.actions.col(3)));
  EXPECT_EQ(a.fut_act.apply(a.act_window(tr, 2)), b.fut_act.apply(b.act_window(tr, 2)));
  EXPECT_EQ(a.xi_obs.basis(), b.xi_obs.basis());
  EXPECT_EQ(a.xi_act.basis(), b.xi_act.basis());
  EXPECT_EQ(a.obs_pair.basis(), b.obs_pair.basis());
  EXPECT_EQ(s.model.state_proj.basis(), r.model.state_proj.basis());
}

// least-squares W_pred for the model's own filter states
Mat optimal_w_pred(const RffPsrModel& m, const std::vector<Trajectory>& trs) {
  const int k = m.features.spec.k;
  std::vector<Vec> zs, ys;
  for (const Trajectory& tr : trs) {
    const std::vector<Vec> states = filter_states(m, tr, tr.length() - k + 1);
    for (Eigen::Index s = 0; s + k <= tr.length(); ++s) {
      zs.push_back(pred_input(states[static_cast<std::size_t>(s)], m.features.fut_act.apply(m.features.act_window(tr, s))));
      ys.push_back(m.features.obs_window(tr, s));
    }
  }
  Mat z(zs.front().size(), static_cast<Eigen::Index>(zs.size())), y(ys.front().size(), z.cols());
  for (Eigen::Index i = 0; i < z.cols(); ++i) {
    z.col(i) = zs[static_cast<std::size_t>(i)];
    y.col(i) = ys[static_cast<std::size_t>(i)];
  }
  return (z * z.transpose()).ldlt().solve(z * y.transpose()).transpose();
}

TEST(Refine, RecoversPlantedPredictor) {
  const Splits s = refine_setup(15);
  RffPsrModel planted = s.model;
  planted.w_pred = optimal_w_pred(planted, s.train);
  RffPsrModel start = planted;
  Rng rng(16);
  start.w_pred += gaussian_matrix(start.w_pred.rows(), start.w_pred.cols(), rng, 0.05);
  const FilterOptions opts = filter_options(planted);
  const double l_opt = mean_loss(planted, s.train, opts);
  const double l_start = mean_loss(start, s.train, opts);
  ASSERT_GT(l_start, l_opt);
  const RefineResult r = refine(start, s.train, s.train, {});
  const double l_end = mean_loss(r.model, s.train, opts);
  EXPECT_GE((l_start - l_end) / (l_start - l_opt), 0.9);
}

TEST(EpochLog, CsvRoundTrip) {
  const std::vector<EpochRecord> log = {{1, 0.25, 1.5, 1.25, true}, {2, 0.25, 1.0 / 3.0, 2.0, false}, {3, 0.125, 0.1, 1e-7, true}};
  const std::string text = epoch_log_csv(log);
  EXPECT_EQ(text.substr(0, text.find('\n')), "epoch,step_size,train_loss,val_loss,accepted");
  const std::vector<EpochRecord> back = parse_epoch_log_csv(text);
  ASSERT_EQ(back.size(), log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    EXPECT_EQ(back[i].epoch, log[i].epoch);
    EXPECT_EQ(back[i].step_size, log[i].step_size);
    EXPECT_EQ(back[i].train_loss, log[i].train_loss);
    EXPECT_EQ(back[i].val_loss, log[i].val_loss);
    EXPECT_EQ(back[i].accepted, log[i].accepted);
  }
  EXPECT_THROW(parse_epoch_log_csv("epoch,step\n1,2\n"), ParseError);
}

}  // namespace
}  // namespace rffpsr
