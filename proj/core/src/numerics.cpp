#include "rffpsr/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rffpsr/random.hpp"

namespace rffpsr {

Vec vec_rows(const Mat& m) {
  Vec v(m.size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[k++] = m(i, j);
  return v;
}

Mat unvec_rows(const Eigen::Ref<const Vec>& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols)
    throw DimensionError("unvec_rows: " + std::to_string(v.size()) + " entries cannot form " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  Mat m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v[k++];
  return m;
}

Vec kron(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b) {
  Vec out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

Mat khatri_rao(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols())
    throw DimensionError("khatri_rao: column counts differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.cols()) + ")");
  const Eigen::Index q = b.rows();
  Mat out(a.rows() * q, a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) out.col(j).segment(i * q, q) = a(i, j) * b.col(j);
  return out;
}

bool all_finite(const Mat& m) { return m.allFinite(); }

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(std::vector<std::size_t> mode_sizes) : sizes_(std::move(mode_sizes)) {
  const std::size_t n =
      std::accumulate(sizes_.begin(), sizes_.end(), std::size_t{1}, std::multiplies<>());
  data_.assign(n, 0.0);
}

Tensor::Tensor(std::vector<std::size_t> mode_sizes, std::vector<double> entries)
    : sizes_(std::move(mode_sizes)), data_(std::move(entries)) {
  const std::size_t n =
      std::accumulate(sizes_.begin(), sizes_.end(), std::size_t{1}, std::multiplies<>());
  if (n != data_.size())
    throw DimensionError("Tensor: " + std::to_string(data_.size()) +
                         " entries for mode sizes with product " + std::to_string(n));
}

std::size_t Tensor::offset(const std::vector<std::size_t>& idx) const {
  if (idx.size() != sizes_.size()) throw DimensionError("Tensor: index order mismatch");
  std::size_t off = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= sizes_[i]) throw DimensionError("Tensor: index out of range");
    off = off * sizes_[i] + idx[i];
  }
  return off;
}

namespace {

// Splits the row-major layout around `mode` into (outer, mode, inner) strides.
struct ModeSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

ModeSplit split_at(const std::vector<std::size_t>& sizes, std::size_t mode) {
  if (mode >= sizes.size()) throw DimensionError("Tensor: mode out of range");
  ModeSplit s;
  for (std::size_t i = 0; i < mode; ++i) s.outer *= sizes[i];
  s.n = sizes[mode];
  for (std::size_t i = mode + 1; i < sizes.size(); ++i) s.inner *= sizes[i];
  return s;
}

}  // namespace

Mat Tensor::unfold(std::size_t mode) const {
  const ModeSplit s = split_at(sizes_, mode);
  Mat out(static_cast<Eigen::Index>(s.n), static_cast<Eigen::Index>(s.outer * s.inner));
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.n; ++i)
      for (std::size_t r = 0; r < s.inner; ++r)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o * s.inner + r)) =
            data_[(o * s.n + i) * s.inner + r];
  return out;
}

Tensor Tensor::fold(const Mat& unfolded, std::size_t mode, std::vector<std::size_t> mode_sizes) {
  const ModeSplit s = split_at(mode_sizes, mode);
  if (static_cast<std::size_t>(unfolded.rows()) != s.n ||
      static_cast<std::size_t>(unfolded.cols()) != s.outer * s.inner)
    throw DimensionError("Tensor::fold: shape mismatch");
  Tensor t(std::move(mode_sizes));
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.n; ++i)
      for (std::size_t r = 0; r < s.inner; ++r)
        t.data_[(o * s.n + i) * s.inner + r] =
            unfolded(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o * s.inner + r));
  return t;
}

Tensor mode_multiply(const Tensor& t, const Mat& m, std::size_t mode) {
  if (mode >= t.order()) throw DimensionError("mode_multiply: mode out of range");
  if (static_cast<std::size_t>(m.cols()) != t.mode_sizes()[mode])
    throw DimensionError("mode_multiply: matrix has " + std::to_string(m.cols()) +
                         " columns, mode size is " + std::to_string(t.mode_sizes()[mode]));
  std::vector<std::size_t> sizes = t.mode_sizes();
  sizes[mode] = static_cast<std::size_t>(m.rows());
  return Tensor::fold(m * t.unfold(mode), mode, std::move(sizes));
}

// ---------------------------------------------------------------------------
// Factorizations

namespace {

Mat orthonormalize(const Mat& y) {
  Eigen::HouseholderQR<Mat> qr(y);
  return qr.householderQ() * Mat::Identity(y.rows(), y.cols());
}

}  // namespace

RandomizedSvd randomized_svd(const Mat& x, Eigen::Index p, const SvdOptions& opts) {
  const Eigen::Index m = x.rows();
  const Eigen::Index n = x.cols();
  if (p < 1 || p > std::min(m, n))
    throw DimensionError("randomized_svd: rank " + std::to_string(p) + " exceeds min(" +
                         std::to_string(m) + ", " + std::to_string(n) + ")");
  const Eigen::Index l = std::min<Eigen::Index>(p + std::max(0, opts.oversample), std::min(m, n));

  Mat basis;
  if (l == std::min(m, n) && l == m) {
    // The sketch would span the whole column space anyway.
    basis = Mat::Identity(m, m);
  } else {
    Rng rng(opts.seed);
    const Mat omega = gaussian_matrix(n, l, rng);
    basis = orthonormalize(x * omega);
    for (int it = 0; it < opts.power_iters; ++it) {
      const Mat z = orthonormalize(x.transpose() * basis);
      basis = orthonormalize(x * z);
    }
  }

  const Mat small = basis.transpose() * x;
  Eigen::BDCSVD<Mat> svd(small, Eigen::ComputeThinU);
  Mat u = basis * svd.matrixU().leftCols(p);
  // Sign convention: largest-magnitude entry of each column is positive.
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::Index imax = 0;
    u.col(j).cwiseAbs().maxCoeff(&imax);
    if (u(imax, j) < 0) u.col(j) *= -1.0;
  }
  RandomizedSvd out;
  out.proj = u.transpose() * x;
  out.u = std::move(u);
  return out;
}

Mat pinv(const Mat& x, double tol) {
  if (x.size() == 0) return Mat(x.cols(), x.rows());
  Eigen::BDCSVD<Mat> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  Vec inv = Vec::Zero(s.size());
  if (smax > 0.0) {
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s[i] > tol * smax) inv[i] = 1.0 / s[i];
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

Mat clip_psd(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(symmetrize(m));
  const Vec vals = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

Mat symmetric_solve(const Mat& a, const Mat& b, bool* fallback) {
  if (a.rows() != a.cols() || a.rows() != b.rows())
    throw DimensionError("symmetric_solve: shape mismatch");
  if (fallback) *fallback = false;
  Eigen::LDLT<Mat> ldlt(a);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const Vec d = ldlt.vectorD().cwiseAbs();
    const double dmax = d.size() ? d.maxCoeff() : 0.0;
    const double dmin = d.size() ? d.minCoeff() : 0.0;
    if (dmax > 0.0 && dmin > 1e-13 * dmax) {
      Mat x = ldlt.solve(b);
      if (x.allFinite()) return x;
    }
  }
  if (fallback) *fallback = true;
  return pinv(a) * b;
}

Mat ridge_from_gram(const Mat& gram, const Mat& cross, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("ridge_solve: lambda must be non-negative");
  if (gram.rows() != gram.cols() || cross.cols() != gram.rows())
    throw DimensionError("ridge_solve: Gram/cross shape mismatch");
  Mat normal = gram;
  normal.diagonal().array() += lambda;
  // W normal = cross  <=>  normal W^T = cross^T (normal is symmetric).
  return symmetric_solve(normal, cross.transpose()).transpose();
}

Mat ridge_solve(const Mat& inputs, const Mat& targets, double lambda) {
  if (inputs.cols() != targets.cols())
    throw DimensionError("ridge_solve: inputs have " + std::to_string(inputs.cols()) +
                         " samples, targets have " + std::to_string(targets.cols()));
  Mat gram = Mat::Zero(inputs.rows(), inputs.rows());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(inputs);
  gram = gram.selfadjointView<Eigen::Lower>();
  return ridge_from_gram(gram, targets * inputs.transpose(), lambda);
}

}  // namespace rffpsr
