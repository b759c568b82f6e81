#pragma once

#include <cstdint>
#include <string>

#include "rffpsr/numerics.hpp"

namespace rffpsr {

/// Cos/sin paired random Fourier features for the Gaussian kernel
/// exp(-|x - y|^2 / (2 s^2)). Output is D^{-1/2} [cos(w_i.x), sin(w_i.x)]_i,
/// so every output has unit norm.
class RffMap {
 public:
  RffMap() = default;
  RffMap(Eigen::Index input_dim, Eigen::Index num_freq, double bandwidth, std::uint64_t seed);
  /// Rebuilds a map from stored frequencies (deserialization).
  RffMap(Mat frequencies, double bandwidth, std::uint64_t seed);

  [[nodiscard]] Eigen::Index input_dim() const { return freq_.cols(); }
  [[nodiscard]] Eigen::Index num_freq() const { return freq_.rows(); }
  [[nodiscard]] Eigen::Index output_dim() const { return 2 * freq_.rows(); }
  [[nodiscard]] double bandwidth() const { return bandwidth_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] const Mat& frequencies() const { return freq_; }

  [[nodiscard]] Vec apply(const Eigen::Ref<const Vec>& x) const;
  /// Columns of `x` are inputs; columns of the result are features.
  [[nodiscard]] Mat apply_columns(const Mat& x) const;

 private:
  Mat freq_;  // D x input_dim, rows ~ N(0, s^-2 I)
  double bandwidth_ = 1.0;
  std::uint64_t seed_ = 0;
};

inline constexpr std::size_t kDefaultMaxPairs = 100000;

/// Median Euclidean distance between columns of `points`, over all unordered
/// pairs or over `max_pairs` uniformly sampled pairs when there are more.
double median_bandwidth(const Mat& points, std::size_t max_pairs = kDefaultMaxPairs,
                        std::uint64_t seed = 0);

/// Uncentered PCA basis. apply(x) = U^T x.
class PcaProjector {
 public:
  PcaProjector() = default;
  explicit PcaProjector(Mat basis);

  static PcaProjector identity(Eigen::Index dim);

  [[nodiscard]] Eigen::Index input_dim() const { return basis_.rows(); }
  [[nodiscard]] Eigen::Index output_dim() const { return basis_.cols(); }
  [[nodiscard]] const Mat& basis() const { return basis_; }

  [[nodiscard]] Vec apply(const Eigen::Ref<const Vec>& x) const { return basis_.transpose() * x; }
  [[nodiscard]] Mat apply_columns(const Mat& x) const { return basis_.transpose() * x; }
  [[nodiscard]] Vec reconstruct(const Eigen::Ref<const Vec>& z) const { return basis_ * z; }

 private:
  Mat basis_;
};

/// Basis of the top-p left singular vectors of `data_columns` (randomized SVD).
PcaProjector pca_fit(const Mat& data_columns, Eigen::Index p, std::uint64_t seed = 0);

/// How raw vectors (single observations, stacked windows, histories) become features.
enum class FeatureKind {
  rff,        // Gaussian-kernel random Fourier features
  linear,     // the raw vector with a constant 1 appended
  indicator,  // input is a stack of one-hot blocks; output is their Kronecker product
};

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& s);

/// A feature map of one of the kinds above.
class FeatureMap {
 public:
  FeatureMap() = default;
  static FeatureMap make_rff(RffMap map);
  static FeatureMap make_linear(Eigen::Index input_dim);
  /// `block_dim` is the one-hot width of each block; input_dim must be a multiple of it.
  static FeatureMap make_indicator(Eigen::Index input_dim, Eigen::Index block_dim);

  [[nodiscard]] FeatureKind kind() const { return kind_; }
  [[nodiscard]] Eigen::Index input_dim() const { return input_dim_; }
  [[nodiscard]] Eigen::Index output_dim() const;
  [[nodiscard]] Eigen::Index block_dim() const { return block_dim_; }
  [[nodiscard]] const RffMap& rff() const { return rff_; }

  [[nodiscard]] Vec apply(const Eigen::Ref<const Vec>& x) const;
  [[nodiscard]] Mat apply_columns(const Mat& x) const;

 private:
  FeatureKind kind_ = FeatureKind::linear;
  Eigen::Index input_dim_ = 0;
  Eigen::Index block_dim_ = 1;
  RffMap rff_;
};

/// Feature map followed by its projector.
struct ProjectedFeature {
  FeatureMap map;
  PcaProjector pca;

  [[nodiscard]] Vec apply(const Eigen::Ref<const Vec>& x) const { return pca.apply(map.apply(x)); }
  [[nodiscard]] Mat apply_columns(const Mat& x) const {
    return pca.apply_columns(map.apply_columns(x));
  }
  [[nodiscard]] Eigen::Index output_dim() const { return pca.output_dim(); }
};

}  // namespace rffpsr
