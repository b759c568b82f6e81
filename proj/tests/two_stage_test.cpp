#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>

#include "fixtures.hpp"
#include "rffpsr/random.hpp"

namespace rffpsr {
namespace {

Mat random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  return gaussian_matrix(r, c, rng);
}

Dataset benchmark(std::size_t n, Eigen::Index len, std::uint64_t seed = 0) {
  BenchmarkOptions o;
  o.n_traj = n;
  o.length = len;
  o.seed = seed;
  return simulate_benchmark(o);
}

FeatureConfig rff_config(Eigen::Index d, Eigen::Index p, std::uint64_t seed = 1) {
  FeatureConfig c;
  c.num_freq = d;
  c.pca_dim = p;
  c.seed = seed;
  return c;
}

// IO-HMM started from the stationary distribution of its uniform-policy chain, so
// the state marginal is the same at every step.
IoHmm stationary_iohmm() {
  IoHmm m = testing::small_iohmm();
  const Mat avg = 0.5 * (m.transition[0] + m.transition[1]);
  Vec s = Vec::Constant(m.n_states(), 1.0 / static_cast<double>(m.n_states()));
  for (int i = 0; i < 2000; ++i) s = avg * s;
  m.initial = s / s.sum();
  return m;
}

FeatureConfig indicator_config() {
  FeatureConfig c;
  c.pca_dim = 0;
  c.obs_kind = c.act_kind = c.history_kind = FeatureKind::indicator;
  return c;
}

Dataset discrete_data(std::size_t n, Eigen::Index len, std::uint64_t seed) {
  IoHmmSampleOptions o;
  o.n_traj = n;
  o.length = len;
  o.seed = seed;
  return sample_iohmm(stationary_iohmm(), Vec::Constant(2, 0.5), o);
}

TEST(Features, ValidStepCount) {
  EXPECT_EQ(valid_steps(100, {10, 20}), 89);
  EXPECT_EQ(valid_steps(11, {10, 20}), 0);
  const Dataset d = benchmark(3, 40);
  const FeaturizedData fd = build_features(d.trajectories, {5, 4}, rff_config(50, 6));
  EXPECT_EQ(fd.num_samples(), 3 * (40 - 5 - 1));
  EXPECT_EQ(fd.first_steps().size(), 3u);
}

TEST(Features, ShortTrajectoriesSkipped) {
  Dataset d = benchmark(3, 40);
  d.trajectories[1].observations = d.trajectories[1].observations.leftCols(6).eval();
  d.trajectories[1].actions = d.trajectories[1].actions.leftCols(6).eval();
  const FeaturizedData fd = build_features(d.trajectories, {5, 4}, rff_config(50, 6));
  EXPECT_EQ(fd.num_samples(), 2 * 34);
  std::vector<Trajectory> tiny(1, d.trajectories[1]);
  EXPECT_THROW(build_features(tiny, {5, 4}, rff_config(50, 6)), DataError);
}

TEST(Features, EmptyHistoryIsConstant) {
  const Dataset d = benchmark(2, 30);
  const FeaturizedData fd = build_features(d.trajectories, {4, 0}, rff_config(50, 6));
  for (Eigen::Index t = 1; t < fd.num_samples(); ++t)
    EXPECT_LE((fd.history.col(t) - fd.history.col(0)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Features, ProjectedDimensionsAndWindows) {
  const Dataset d = benchmark(3, 40);
  const FeaturizedData fd = build_features(d.trajectories, {5, 4}, rff_config(60, 7));
  for (const Mat* m : {&fd.history, &fd.obs, &fd.act, &fd.fut_obs, &fd.fut_act, &fd.fut_obs_next,
                       &fd.fut_act_next, &fd.xi_obs, &fd.xi_act, &fd.obs_pair})
    EXPECT_EQ(m->rows(), 7);
  const FeatureSet& fs = fd.features;
  for (Eigen::Index c : {0, 13, 50}) {
    const Trajectory& tr = d.trajectories[fd.traj_index[static_cast<std::size_t>(c)]];
    const Eigen::Index t = fd.time_index[static_cast<std::size_t>(c)];
    EXPECT_TRUE(fd.fut_obs.col(c).isApprox(fs.fut_obs.apply(fs.obs_window(tr, t)), 1e-12));
    EXPECT_TRUE(fd.fut_act_next.col(c).isApprox(fs.fut_act.apply(fs.act_window(tr, t + 1)), 1e-12));
    EXPECT_TRUE(fd.history.col(c).isApprox(fs.history.apply(fs.history_window(tr, t)), 1e-12));
    EXPECT_EQ(fd.raw_future.col(c), fs.obs_window(tr, t));
  }
  // the shifted window of t is the window of t + 1 inside a trajectory
  EXPECT_TRUE(fd.fut_obs_next.col(4).isApprox(fd.fut_obs.col(5), 1e-12));
}

TEST(Features, ExtendedFeaturesRecomputed) {
  const Dataset d = benchmark(3, 40);
  const FeaturizedData fd = build_features(d.trajectories, {5, 4}, rff_config(60, 5));
  const FeatureSet& fs = fd.features;
  for (Eigen::Index t = 0; t < fd.num_samples(); t += 17) {
    const Vec xo = kron(fd.fut_obs_next.col(t), fd.obs.col(t));
    const Vec xa = kron(fd.act.col(t), fd.fut_act_next.col(t));
    const Vec oo = kron(fd.obs.col(t), fd.obs.col(t));
    EXPECT_LE((fd.xi_obs.col(t) - fs.xi_obs.apply(xo)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((fd.xi_act.col(t) - fs.xi_act.apply(xa)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((fd.obs_pair.col(t) - fs.obs_pair.apply(oo)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(xo[xi_obs_index(2, 3, fd.obs.rows())], fd.fut_obs_next(2, t) * fd.obs(3, t));
  }
}

TEST(Features, FrozenFeaturizeMatchesTraining) {
  const Dataset d = benchmark(3, 40);
  const FeaturizedData fd = build_features(d.trajectories, {5, 4}, rff_config(40, 5));
  const FeaturizedData again = featurize(fd.features, d.trajectories);
  EXPECT_EQ(again.xi_obs, fd.xi_obs);
  EXPECT_EQ(again.history, fd.history);
}

TEST(S1Joint, RecomputedFromDefinition) {
  const Dataset d = benchmark(4, 40);
  const FeaturizedData fd = build_features(d.trajectories, {4, 3}, rff_config(50, 4));
  const double lambda = 0.05;
  const S1Output s1 = s1_joint(fd, lambda, 0);
  const Mat t_oa = ridge_solve(fd.history, khatri_rao(fd.fut_obs, fd.fut_act), lambda);
  const Mat t_aa = ridge_solve(fd.history, khatri_rao(fd.fut_act, fd.fut_act), lambda);
  for (Eigen::Index t = 0; t < fd.num_samples(); t += 11) {
    const Mat c_oa = unvec_rows(t_oa * fd.history.col(t), 4, 4);
    const Mat c_aa = unvec_rows(t_aa * fd.history.col(t), 4, 4);
    const Mat m = 0.5 * (c_aa + c_aa.transpose()) + lambda * Mat::Identity(4, 4);
    const Mat q = c_oa * m.inverse();
    EXPECT_LE((s1.q_bar[static_cast<std::size_t>(t)] - q).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, q.cwiseAbs().maxCoeff()));
  }
  // no compression: q_t is vec(Q_t)
  EXPECT_EQ(s1.q_compressed.col(3), vec_rows(s1.q_bar[3]));
}

TEST(S1Joint, DiscreteStatesConvergeToTrueTables) {
  const int k = 2;
  const Dataset d = discrete_data(5000, 30, 3);
  const FeaturizedData fd = build_features(d.trajectories, {k, 1}, indicator_config());
  const IoHmm m = stationary_iohmm();
  const Tensor ok = iohmm_extended_obs(m, k);
  for (S1Mode mode : {S1Mode::joint, S1Mode::conditional}) {
    const S1Output s1 = mode == S1Mode::joint ? s1_joint(fd, 1e-6, 0) : s1_conditional(fd, 1e-6, 0);
    double worst = 0;
    for (Eigen::Index c = 0; c < fd.num_samples(); ++c) {
      const Eigen::Index t = fd.time_index[static_cast<std::size_t>(c)];
      if (t < 1) continue;  // zero-padded history
      const Trajectory& tr = d.trajectories[fd.traj_index[static_cast<std::size_t>(c)]];
      const Vec belief = iohmm_exact_filter(m, m.initial, one_hot_index(tr.observations.col(t - 1)),
                                            one_hot_index(tr.actions.col(t - 1)));
      const Mat want = iohmm_predictive_state(ok, belief);
      worst = std::max(worst, (s1.q_bar[static_cast<std::size_t>(c)] - want).cwiseAbs().maxCoeff());
    }
    EXPECT_LE(worst, 0.05) << to_string(mode);
  }
}

TEST(S1Joint, SingleActionGivesRankOneStates) {
  LdsOptions o;
  o.n_traj = 4;
  o.length = 40;
  o.constant_action = 0.3;
  const Dataset d = simulate_lds(default_lds(), o);
  FeatureConfig c = rff_config(50, 5);
  c.act_kind = FeatureKind::linear;  // constant action windows have no RFF bandwidth
  const FeaturizedData fd = build_features(d.trajectories, {3, 2}, c);
  const S1Output s1 = s1_joint(fd, 1e-3, 0);
  for (std::size_t t = 0; t < s1.q_bar.size(); t += 9) {
    const Vec sv = Eigen::JacobiSVD<Mat>(s1.q_bar[t]).singularValues();
    EXPECT_LE(sv[1], 1e-8 * sv[0]);
  }
}

TEST(S1Joint, HeavyRegularizationShrinksToZero) {
  const Dataset d = benchmark(3, 40);
  const FeaturizedData fd = build_features(d.trajectories, {4, 3}, rff_config(40, 4));
  const S1Output s1 = s1_joint(fd, 1e8, 0);
  for (const Mat& q : s1.q_bar) EXPECT_LE(q.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(S1Conditional, RecoversPlantedTensor) {
  const Mat h = random_matrix(3, 300, 4), a = random_matrix(4, 300, 5);
  const Mat w_star = random_matrix(2, 12, 6);
  const Mat y = w_star * khatri_rao(a, h);
  const Mat w = s1_conditional_weights(h, a, y, 1e-10);
  EXPECT_LE((w - w_star).cwiseAbs().maxCoeff(), 1e-6);
  const Mat q = s1_conditional_state(w, h.col(7), 4);
  ASSERT_EQ(q.rows(), 2);
  ASSERT_EQ(q.cols(), 4);
  EXPECT_LE((q * a.col(7) - y.col(7)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(S1Conditional, ConstantHistoryIsSingleRegression) {
  const Mat h = Mat::Ones(1, 80), a = random_matrix(3, 80, 7), y = random_matrix(2, 80, 8);
  const Mat w = s1_conditional_weights(h, a, y, 0.1);
  EXPECT_LE((w - ridge_solve(a, y, 0.1)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(S1Conditional, StateShapes) {
  const Dataset d = benchmark(3, 40);
  const FeaturizedData fd = build_features(d.trajectories, {4, 3}, rff_config(40, 5));
  const S1Output s1 = s1_conditional(fd, 0.1, 6);
  ASSERT_EQ(s1.q_bar.size(), static_cast<std::size_t>(fd.num_samples()));
  for (std::size_t t = 0; t < s1.q_bar.size(); ++t) {
    EXPECT_EQ(s1.q_bar[t].rows(), 5);
    EXPECT_EQ(s1.q_bar[t].cols(), 5);
    EXPECT_TRUE(s1.p_xi[t].allFinite());
  }
  EXPECT_EQ(s1.q_compressed.rows(), 6);
  EXPECT_TRUE(s1.q_compressed.col(2).isApprox(s1.state_proj.apply(vec_rows(s1.q_bar[2])), 1e-12));
}

S1Output planted_s1(const Mat& w_xi, const Mat& w_o, Eigen::Index n, std::uint64_t seed) {
  S1Output s1;
  s1.q_compressed = random_matrix(w_xi.cols(), n, seed);
  s1.state_proj = PcaProjector::identity(w_xi.cols());
  for (Eigen::Index t = 0; t < n; ++t) {
    s1.q_bar.push_back(unvec_rows(s1.q_compressed.col(t), 1, w_xi.cols()));
    s1.p_xi.push_back(unvec_rows(w_xi * s1.q_compressed.col(t), 2, w_xi.rows() / 2));
    s1.p_o.push_back(unvec_rows(w_o * s1.q_compressed.col(t), 3, w_o.rows() / 3));
  }
  return s1;
}

TEST(S2, RecoversPlantedMaps) {
  const Mat w_xi = random_matrix(8, 5, 9), w_o = random_matrix(6, 5, 10);
  const S2Output s2 = s2_regress(planted_s1(w_xi, w_o, 40, 11), 0.0);
  EXPECT_LE((s2.w_xi - w_xi).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((s2.w_o - w_o).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(S2, HeavyRegularizationShrinksToZero) {
  const S2Output s2 = s2_regress(planted_s1(random_matrix(8, 5, 12), random_matrix(6, 5, 13), 40, 14), 1e12);
  EXPECT_LE(s2.w_xi.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(S2, TooFewSamplesRejected) {
  EXPECT_THROW(s2_regress(planted_s1(random_matrix(8, 5, 15), random_matrix(6, 5, 16), 4, 17), 0.1), DataError);
}

TEST(S2, ResidualNonIncreasingInStateDimension) {
  const Dataset d = benchmark(10, 100);
  const FeaturizedData fd = build_features(d.select(Split::train), {10, 20}, rff_config(500, 20));
  double previous = std::numeric_limits<double>::infinity();
  for (Eigen::Index p : {5, 10, 20}) {
    const S1Output s1 = s1_joint(fd, 0.1, p, 3);
    const S2Output s2 = s2_regress(s1, 1e-8);
    double residual = 0;
    for (Eigen::Index t = 0; t < s1.num_samples(); ++t)
      residual += (vec_rows(s1.p_xi[static_cast<std::size_t>(t)]) - s2.w_xi * s1.q_compressed.col(t)).squaredNorm();
    EXPECT_LE(residual, previous * (1 + 1e-9)) << "p=" << p;
    previous = residual;
  }
}

TEST(S2, DiscreteResidualShrinksWithData) {
  std::vector<double> medians;
  for (std::size_t n : {500, 2000, 5000}) {
    const Dataset d = discrete_data(n, 30, 20 + n);
    const FeaturizedData fd = build_features(d.trajectories, {2, 1}, indicator_config());
    const S1Output s1 = s1_joint(fd, 1e-6, 0);
    const S2Output s2 = s2_regress(s1, 1e-8);
    std::vector<double> r;
    for (Eigen::Index t = 0; t < s1.num_samples(); ++t)
      if (fd.time_index[static_cast<std::size_t>(t)] >= 1)
        r.push_back((vec_rows(s1.p_xi[static_cast<std::size_t>(t)]) - s2.w_xi * s1.q_compressed.col(t)).norm());
    std::nth_element(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(r.size() / 2), r.end());
    medians.push_back(r[r.size() / 2]);
  }
  EXPECT_GT(medians[0], medians[1]);
  EXPECT_GT(medians[1], medians[2]);
}

TEST(InitialState, ConstantStatesAverage) {
  const Mat w_xi = random_matrix(8, 5, 18), w_o = random_matrix(6, 5, 19);
  S1Output s1 = planted_s1(w_xi, w_o, 20, 20);
  const Vec q = random_matrix(5, 1, 21).col(0);
  s1.q_compressed = q.replicate(1, 20);
  FeaturizedData fd;
  EXPECT_TRUE(estimate_q0(s1, fd, 1000, 0.1).isApprox(q, 1e-14));
}

TEST(InitialState, AverageIsPermutationInvariant) {
  S1Output s1 = planted_s1(random_matrix(8, 5, 22), random_matrix(6, 5, 23), 30, 24);
  FeaturizedData fd;
  const Vec a = estimate_q0(s1, fd, 1000, 0.1);
  s1.q_compressed = s1.q_compressed.rowwise().reverse().eval();
  EXPECT_LE((estimate_q0(s1, fd, 1000, 0.1) - a).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(InitialState, FirstStepRegressionDecodesTrueTable) {
  const Dataset d = discrete_data(5000, 6, 25);
  const FeaturizedData fd = build_features(d.trajectories, {2, 1}, indicator_config());
  const S1Output s1 = s1_joint(fd, 1e-6, 0);
  const Vec q0 = estimate_q0(s1, fd, 1, 1e-6);
  const IoHmm m = stationary_iohmm();
  const Mat want = iohmm_predictive_state(m, m.initial, 2);
  EXPECT_LE((unvec_rows(s1.state_proj.reconstruct(q0), 4, 4) - want).cwiseAbs().maxCoeff(), 0.05);
}

FeaturizedData predictor_data(const Mat& psi_a, const Mat& targets) {
  FeaturizedData fd;
  fd.fut_act = psi_a;
  fd.raw_future = targets;
  return fd;
}

TEST(PredictionOperator, ConstantTargets) {
  S1Output s1 = planted_s1(random_matrix(8, 4, 26), random_matrix(6, 4, 27), 60, 28);
  const FeaturizedData fd = predictor_data(random_matrix(3, 60, 29), Mat::Constant(2, 60, 0.7));
  const Mat w = train_w_pred(s1, fd, 0.5);
  ASSERT_EQ(w.cols(), 4 * 3 + 1);
  for (Eigen::Index t = 0; t < 60; t += 7) {
    Vec in(13);
    in << kron(s1.q_compressed.col(t), fd.fut_act.col(t)), 1.0;
    EXPECT_NEAR((w * in)[0], 0.7, 1e-12);
  }
}

TEST(PredictionOperator, RecoversPlantedMap) {
  S1Output s1 = planted_s1(random_matrix(8, 3, 30), random_matrix(6, 3, 31), 80, 32);
  const Mat psi_a = random_matrix(2, 80, 33);
  const Mat w_star = random_matrix(2, 7, 34);
  Mat inputs(7, 80);
  for (Eigen::Index t = 0; t < 80; ++t) inputs.col(t) << kron(s1.q_compressed.col(t), psi_a.col(t)), 1.0;
  const Mat w = train_w_pred(s1, predictor_data(psi_a, w_star * inputs), 1e-12);
  EXPECT_LE((w - w_star).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(PredictionOperator, TrainingErrorBelowVariance) {
  const Dataset d = benchmark(10, 100);
  const FeaturizedData fd = build_features(d.select(Split::train), {10, 20}, rff_config(300, 10));
  const S1Output s1 = s1_joint(fd, 0.1, 10, 3);
  const Mat w = train_w_pred(s1, fd, 0.1);
  double sse = 0;
  for (Eigen::Index t = 0; t < fd.num_samples(); ++t) {
    Vec in(w.cols());
    in << kron(s1.q_compressed.col(t), fd.fut_act.col(t)), 1.0;
    sse += (w * in - fd.raw_future.col(t)).squaredNorm();
  }
  const Mat centered = fd.raw_future.colwise() - fd.raw_future.rowwise().mean();
  EXPECT_LE(sse, centered.squaredNorm());
}

Hyperparams benchmark_hyperparams(Eigen::Index d, Eigen::Index p) {
  Hyperparams hp;
  hp.features = rff_config(d, p, 5);
  hp.lambda1 = hp.lambda2 = 0.1;
  hp.seed = 6;
  return hp;
}

TEST(Learn, BenchmarkEndToEndWithinBudget) {
  const Dataset d = benchmark(20, 100);
  const auto start = std::chrono::steady_clock::now();
  const RffPsrModel m = learn_rff_psr(d, benchmark_hyperparams(2000, 20));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(secs, 300.0);
  EXPECT_EQ(m.w_xi.rows(), 20 * 20);
  EXPECT_EQ(m.w_xi.cols(), 20);
  EXPECT_EQ(m.w_pred.rows(), 10);
  EXPECT_EQ(m.w_pred.cols(), 20 * 20 + 1);
  EXPECT_NO_THROW(m.validate());
}

TEST(Learn, SameSeedsSameModelBytes) {
  const Dataset d = benchmark(10, 60);
  Hyperparams hp = benchmark_hyperparams(200, 8);
  hp.spec = {5, 5};
  const std::string a = model_to_json(learn_rff_psr(d, hp));
  const std::string b = model_to_json(learn_rff_psr(d, hp));
  EXPECT_EQ(a, b);
  hp.features.seed = 99;
  EXPECT_NE(model_to_json(learn_rff_psr(d, hp)), a);
}

TEST(Learn, ModelJsonRoundTripIsLossless) {
  const Dataset d = benchmark(10, 60);
  Hyperparams hp = benchmark_hyperparams(100, 6);
  hp.spec = {5, 5};
  hp.s1 = S1Mode::conditional;
  const RffPsrModel m = learn_rff_psr(d, hp);
  const std::string text = model_to_json(m);
  const RffPsrModel back = model_from_json(text);
  EXPECT_EQ(back.w_xi, m.w_xi);
  EXPECT_EQ(back.w_pred, m.w_pred);
  EXPECT_EQ(back.q0, m.q0);
  EXPECT_EQ(back.features.history.map.rff().frequencies(), m.features.history.map.rff().frequencies());
  EXPECT_EQ(back.hp.s1, S1Mode::conditional);
  EXPECT_EQ(model_to_json(back), text);
  EXPECT_THROW(model_from_json("{\"format\": \"rffpsr-model-1\"}"), std::exception);
}

TEST(Learn, StatesAreFinite) {
  const Dataset d = benchmark(10, 60);
  Hyperparams hp = benchmark_hyperparams(100, 6);
  hp.spec = {5, 5};
  const FeaturizedData fd = build_features(d.select(Split::train), hp.spec, hp.features);
  for (S1Mode mode : {S1Mode::joint, S1Mode::conditional}) {
    const S1Output s1 = mode == S1Mode::joint ? s1_joint(fd, 0.1, 6) : s1_conditional(fd, 0.1, 6);
    EXPECT_TRUE(s1.q_compressed.allFinite());
    for (const Mat& p : s1.p_o) EXPECT_TRUE(p.allFinite());
  }
}

}  // namespace
}  // namespace rffpsr
