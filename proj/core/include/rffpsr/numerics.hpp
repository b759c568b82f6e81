#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rffpsr {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major flattening: entry (i, j) of an r x c matrix lands at i * c + j.
/// Every vec/reshape in the library goes through this pair.
Vec vec_rows(const Mat& m);
Mat unvec_rows(const Eigen::Ref<const Vec>& v, Eigen::Index rows, Eigen::Index cols);

/// kron(a, b)[ia * b.size() + ib] = a[ia] * b[ib].
Vec kron(const Eigen::Ref<const Vec>& a, const Eigen::Ref<const Vec>& b);

/// Columnwise Kronecker product. Column j of the result is kron(a.col(j), b.col(j)).
Mat khatri_rao(const Mat& a, const Mat& b);

bool all_finite(const Mat& m);

/// Dense tensor with row-major canonical layout:
/// index = sum_i idx_i * prod_{j>i} size_j.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> mode_sizes);
  Tensor(std::vector<std::size_t> mode_sizes, std::vector<double> entries);

  [[nodiscard]] const std::vector<std::size_t>& mode_sizes() const { return sizes_; }
  [[nodiscard]] std::size_t order() const { return sizes_.size(); }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] const std::vector<double>& entries() const { return data_; }
  [[nodiscard]] std::vector<double>& entries() { return data_; }

  [[nodiscard]] std::size_t offset(const std::vector<std::size_t>& idx) const;
  double& operator()(const std::vector<std::size_t>& idx) { return data_[offset(idx)]; }
  double operator()(const std::vector<std::size_t>& idx) const { return data_[offset(idx)]; }

  /// Matricization with `mode` as rows and the remaining modes (in order) as columns.
  [[nodiscard]] Mat unfold(std::size_t mode) const;
  static Tensor fold(const Mat& unfolded, std::size_t mode, std::vector<std::size_t> mode_sizes);

 private:
  std::vector<std::size_t> sizes_;
  std::vector<double> data_;
};

/// Contract mode `mode` of t with the columns of m: result(.., r, ..) = sum_i m(r, i) t(.., i, ..).
Tensor mode_multiply(const Tensor& t, const Mat& m, std::size_t mode);

struct SvdOptions {
  int oversample = 10;
  int power_iters = 2;
  std::uint64_t seed = 0;
};

struct RandomizedSvd {
  Mat u;     // m x p, orthonormal columns
  Mat proj;  // p x n, u^T x
};

/// Halko-Martinsson-Tropp range finder followed by an exact SVD of the small
/// projected matrix. Deterministic given options.seed.
RandomizedSvd randomized_svd(const Mat& x, Eigen::Index p, const SvdOptions& opts = {});

inline constexpr double kDefaultPinvTol = 1e-10;

/// Moore-Penrose pseudo-inverse; singular values below tol * sigma_max are dropped.
Mat pinv(const Mat& x, double tol = kDefaultPinvTol);

/// W = targets * inputs^T * (inputs * inputs^T + lambda I)^-1.
/// Columns are samples. Solves the d_in x d_in normal system by LDLT and
/// falls back to a pseudo-inverse when lambda = 0 and the system is singular.
Mat ridge_solve(const Mat& inputs, const Mat& targets, double lambda);

/// Same solution as ridge_solve, from accumulated Gram blocks
/// gram = inputs * inputs^T and cross = targets * inputs^T.
Mat ridge_from_gram(const Mat& gram, const Mat& cross, double lambda);

/// Solve (a) x = b for symmetric a. Uses LDLT when a is well conditioned and
/// pinv otherwise; `fallback` is set when the pinv path was taken.
Mat symmetric_solve(const Mat& a, const Mat& b, bool* fallback = nullptr);

Mat symmetrize(const Mat& m);

/// Symmetrizes and clips negative eigenvalues to zero.
Mat clip_psd(const Mat& m);

}  // namespace rffpsr
