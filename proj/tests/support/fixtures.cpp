#include "fixtures.hpp"

#include "rffpsr/random.hpp"

namespace rffpsr::testing {

RffPsrModel small_benchmark_model(Eigen::Index p, int k, int history, std::uint64_t seed, Dataset* data) {
  BenchmarkOptions opts;
  opts.n_traj = 8;
  opts.length = 40;
  opts.seed = seed;
  Dataset ds = simulate_benchmark(opts);
  Hyperparams hp;
  hp.spec = FutureSpec{k, history};
  hp.features.num_freq = 50;
  hp.features.pca_dim = p;
  hp.features.seed = derive_seed(seed, 1);
  hp.lambda1 = 0.1;
  hp.lambda2 = 0.1;
  hp.seed = seed;
  RffPsrModel m = learn_rff_psr(ds, hp);
  if (data) *data = std::move(ds);
  return m;
}

RffPsrModel perturbed(const RffPsrModel& m, double scale, std::uint64_t seed) {
  RffPsrModel out = m;
  Rng rng(seed);
  out.w_xi += gaussian_matrix(m.w_xi.rows(), m.w_xi.cols(), rng, scale);
  out.w_o += gaussian_matrix(m.w_o.rows(), m.w_o.cols(), rng, scale);
  out.w_pred += gaussian_matrix(m.w_pred.rows(), m.w_pred.cols(), rng, scale);
  out.q0 += gaussian_matrix(m.q0.size(), 1, rng, scale).col(0);
  return out;
}

IoHmm small_iohmm() {
  IoHmm m;
  m.transition = {(Mat(2, 2) << 0.8, 0.3, 0.2, 0.7).finished(), (Mat(2, 2) << 0.4, 0.9, 0.6, 0.1).finished()};
  m.emission = {(Mat(2, 2) << 0.9, 0.2, 0.1, 0.8).finished(), (Mat(2, 2) << 0.7, 0.25, 0.3, 0.75).finished()};
  m.initial = (Vec(2) << 0.6, 0.4).finished();
  return m;
}

}  // namespace rffpsr::testing
