#include "rffpsr/oracles.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rffpsr {

namespace {

constexpr double kStochasticTol = 1e-12;

void check_stochastic(const Mat& m, const std::string& what) {
  if ((m.array() < 0.0).any() || !m.allFinite())
    throw std::invalid_argument(what + " has negative or non-finite entries");
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    if (std::abs(m.col(j).sum() - 1.0) > kStochasticTol)
      throw std::invalid_argument(what + " column " + std::to_string(j) + " does not sum to 1");
}

Eigen::Index ipow(Eigen::Index base, int exp) {
  Eigen::Index r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

void IoHmm::validate() const {
  const Eigen::Index s = n_states();
  if (s < 1) throw std::invalid_argument("IoHmm: no states");
  if (transition.empty() || transition.size() != emission.size())
    throw std::invalid_argument("IoHmm: need one transition and one emission table per action");
  Mat init = initial;
  check_stochastic(init, "IoHmm initial belief");
  for (std::size_t a = 0; a < transition.size(); ++a) {
    if (transition[a].rows() != s || transition[a].cols() != s)
      throw std::invalid_argument("IoHmm: transition table shape");
    if (emission[a].cols() != s || emission[a].rows() != n_obs())
      throw std::invalid_argument("IoHmm: emission table shape");
    check_stochastic(transition[a], "IoHmm transition[" + std::to_string(a) + "]");
    check_stochastic(emission[a], "IoHmm emission[" + std::to_string(a) + "]");
  }
}

Tensor IoHmm::transition_tensor() const {
  const auto s = static_cast<std::size_t>(n_states());
  const auto na = static_cast<std::size_t>(n_actions());
  Tensor t({s, s, na});
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j)
        t({i, j, a}) = transition[a](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return t;
}

Tensor IoHmm::observation_tensor() const {
  const auto s = static_cast<std::size_t>(n_states());
  const auto no = static_cast<std::size_t>(n_obs());
  const auto na = static_cast<std::size_t>(n_actions());
  Tensor t({no, s, na});
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t o = 0; o < no; ++o)
      for (std::size_t j = 0; j < s; ++j)
        t({o, j, a}) = emission[a](static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(j));
  return t;
}

Tensor iohmm_extended_obs(const IoHmm& m, int k) {
  if (k < 1) throw std::invalid_argument("iohmm_extended_obs: k must be >= 1");
  m.validate();
  const Eigen::Index ns = m.n_states();
  const Eigen::Index no = m.n_obs();
  const Eigen::Index na = m.n_actions();
  Tensor prev = m.observation_tensor();
  for (int level = 2; level <= k; ++level) {
    const Eigen::Index wo_prev = ipow(no, level - 1);
    const Eigen::Index wa_prev = ipow(na, level - 1);
    Tensor next({static_cast<std::size_t>(wo_prev * no), static_cast<std::size_t>(ns),
                 static_cast<std::size_t>(wa_prev * na)});
    for (Eigen::Index i = 0; i < ns; ++i) {
      for (Eigen::Index j = 0; j < na; ++j) {
        const Vec o_ij = m.emission[static_cast<std::size_t>(j)].col(i);
        const Vec t_ij = m.transition[static_cast<std::size_t>(j)].col(i);
        for (Eigen::Index l = 0; l < wa_prev; ++l) {
          // O^{k-1} x_a e_l x_s T_ij
          Vec tail = Vec::Zero(wo_prev);
          for (Eigen::Index s2 = 0; s2 < ns; ++s2)
            for (Eigen::Index w = 0; w < wo_prev; ++w)
              tail[w] += t_ij[s2] * prev({static_cast<std::size_t>(w), static_cast<std::size_t>(s2),
                                         static_cast<std::size_t>(l)});
          const Vec slice = kron(o_ij, tail);
          for (Eigen::Index w = 0; w < slice.size(); ++w)
            next({static_cast<std::size_t>(w), static_cast<std::size_t>(i),
                  static_cast<std::size_t>(j * wa_prev + l)}) = slice[w];
        }
      }
    }
    prev = std::move(next);
  }
  return prev;
}

Mat iohmm_predictive_state(const Tensor& ok, const Eigen::Ref<const Vec>& belief) {
  if (ok.order() != 3 || ok.mode_sizes()[1] != static_cast<std::size_t>(belief.size()))
    throw DimensionError("iohmm_predictive_state: belief size does not match O^k");
  const Tensor q = mode_multiply(ok, belief.transpose(), 1);
  return unvec_rows(Eigen::Map<const Vec>(q.entries().data(), static_cast<Eigen::Index>(q.size())),
                    static_cast<Eigen::Index>(ok.mode_sizes()[0]),
                    static_cast<Eigen::Index>(ok.mode_sizes()[2]));
}

Mat iohmm_predictive_state(const IoHmm& m, const Eigen::Ref<const Vec>& belief, int k) {
  return iohmm_predictive_state(iohmm_extended_obs(m, k), belief);
}

Mat iohmm_state_to_predictive(const Tensor& ok) {
  const auto ns = static_cast<Eigen::Index>(ok.mode_sizes()[1]);
  Mat out(static_cast<Eigen::Index>(ok.mode_sizes()[0] * ok.mode_sizes()[2]), ns);
  for (Eigen::Index s = 0; s < ns; ++s)
    out.col(s) = vec_rows(iohmm_predictive_state(ok, Vec::Unit(ns, s)));
  return out;
}

Vec iohmm_exact_filter(const IoHmm& m, const Eigen::Ref<const Vec>& belief, Eigen::Index obs,
                       Eigen::Index action) {
  if (belief.size() != m.n_states()) throw DimensionError("iohmm_exact_filter: belief size");
  if (obs < 0 || obs >= m.n_obs() || action < 0 || action >= m.n_actions())
    throw DimensionError("iohmm_exact_filter: observation or action out of range");
  const auto a = static_cast<std::size_t>(action);
  const Vec weighted = belief.cwiseProduct(m.emission[a].row(obs).transpose());
  const double evidence = weighted.sum();
  if (!(evidence > 0.0)) throw NumericalError("impossible observation");
  Vec next = m.transition[a] * (weighted / evidence);
  next /= next.sum();
  return next;
}

void Lds::validate() const {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || c.cols() != n)
    throw std::invalid_argument("Lds: inconsistent A/B/C dimensions");
  if (process_cov.rows() != n || process_cov.cols() != n)
    throw std::invalid_argument("Lds: process covariance shape");
  if (obs_cov.rows() != c.rows() || obs_cov.cols() != c.rows())
    throw std::invalid_argument("Lds: observation covariance shape");
  for (const Mat* cov : {&process_cov, &obs_cov}) {
    if ((*cov - cov->transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("Lds: covariance is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> eig(*cov);
    if (eig.eigenvalues().minCoeff() < -1e-12)
      throw std::invalid_argument("Lds: covariance is not positive semidefinite");
  }
}

Mat lds_gamma(const Lds& m, int k) {
  if (k < 1) throw std::invalid_argument("lds_gamma: k must be >= 1");
  const Eigen::Index d = m.obs_dim();
  Mat out(d * k, m.state_dim());
  Mat power = m.a;
  for (int i = 0; i < k; ++i) {
    out.middleRows(d * i, d) = m.c * power;
    power = power * m.a;
  }
  return out;
}

Mat lds_u(const Lds& m, int k) {
  if (k < 1) throw std::invalid_argument("lds_u: k must be >= 1");
  const Eigen::Index d = m.obs_dim();
  const Eigen::Index u = m.act_dim();
  Mat out = Mat::Zero(d * k, u * k);
  Mat power = Mat::Identity(m.state_dim(), m.state_dim());
  for (int lag = 0; lag < k; ++lag) {
    const Mat block = m.c * power * m.b;
    for (int j = 0; j + lag < k; ++j) out.block(d * (j + lag), u * j, d, u) = block;
    power = power * m.a;
  }
  return out;
}

KalmanResult kalman_filter_exact(const Lds& m, const Mat& observations, const Mat& actions,
                                 int horizon) {
  m.validate();
  const Eigen::Index len = observations.cols();
  if (actions.cols() != len) throw DimensionError("kalman_filter_exact: length mismatch");
  const Eigen::Index n = m.state_dim();
  KalmanResult res;
  res.filtered.reserve(static_cast<std::size_t>(len));
  Vec x = Vec::Zero(n);
  Mat p = Mat::Zero(n, n);
  for (Eigen::Index t = 0; t < len; ++t) {
    const Vec x_pred = m.a * x + m.b * actions.col(t);
    const Mat p_pred = symmetrize(m.a * p * m.a.transpose() + m.process_cov);
    const Mat s = symmetrize(m.c * p_pred * m.c.transpose() + m.obs_cov);
    // K = P C^T S^-1
    const Mat gain = symmetric_solve(s, m.c * p_pred).transpose();
    x = x_pred + gain * (observations.col(t) - m.c * x_pred);
    p = clip_psd(p_pred - gain * m.c * p_pred);
    if (!x.allFinite() || !p.allFinite())
      throw NumericalError("kalman_filter_exact: non-finite state at step " + std::to_string(t));
    res.filtered.push_back({x, p});
  }
  for (int h = 1; h <= horizon; ++h) {
    Mat pred(m.obs_dim(), len);
    for (Eigen::Index t = 0; t < len; ++t) {
      const Eigen::Index last = t - h;  // last observed index
      Vec xs = last >= 0 ? res.filtered[static_cast<std::size_t>(last)].mean : Vec::Zero(n);
      for (Eigen::Index s = std::max<Eigen::Index>(last + 1, 0); s <= t; ++s)
        xs = m.a * xs + m.b * actions.col(s);
      pred.col(t) = m.c * xs;
    }
    res.predictions.push_back(std::move(pred));
  }
  return res;
}

}  // namespace rffpsr
