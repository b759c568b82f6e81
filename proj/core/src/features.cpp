#include "rffpsr/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rffpsr/random.hpp"

namespace rffpsr {

RffMap::RffMap(Eigen::Index input_dim, Eigen::Index num_freq, double bandwidth, std::uint64_t seed)
    : bandwidth_(bandwidth), seed_(seed) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw std::invalid_argument("RffMap: bandwidth must be positive and finite");
  if (num_freq < 1) throw DimensionError("RffMap: need at least one frequency");
  Rng rng(seed);
  freq_ = gaussian_matrix(num_freq, input_dim, rng, 1.0 / bandwidth);
}

RffMap::RffMap(Mat frequencies, double bandwidth, std::uint64_t seed)
    : freq_(std::move(frequencies)), bandwidth_(bandwidth), seed_(seed) {
  if (freq_.rows() < 1) throw DimensionError("RffMap: need at least one frequency");
}

Vec RffMap::apply(const Eigen::Ref<const Vec>& x) const {
  if (x.size() != input_dim())
    throw DimensionError("RffMap: input has dimension " + std::to_string(x.size()) +
                         ", expected " + std::to_string(input_dim()));
  const Eigen::Index d = num_freq();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Vec out(2 * d);
  if (input_dim() == 0) {
    out.head(d).setConstant(scale);
    out.tail(d).setZero();
    return out;
  }
  const Vec proj = freq_ * x;
  for (Eigen::Index i = 0; i < d; ++i) {
    out[i] = scale * std::cos(proj[i]);
    out[d + i] = scale * std::sin(proj[i]);
  }
  return out;
}

Mat RffMap::apply_columns(const Mat& x) const {
  if (x.rows() != input_dim()) throw DimensionError("RffMap: input row count mismatch");
  const Eigen::Index d = num_freq();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Mat out(2 * d, x.cols());
  if (input_dim() == 0) {
    out.topRows(d).setConstant(scale);
    out.bottomRows(d).setZero();
    return out;
  }
  const Mat proj = freq_ * x;
  out.topRows(d) = scale * proj.array().cos();
  out.bottomRows(d) = scale * proj.array().sin();
  return out;
}

double median_bandwidth(const Mat& points, std::size_t max_pairs, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(points.cols());
  if (n < 2) throw std::invalid_argument("median_bandwidth: need at least two points");
  const std::size_t all_pairs = n * (n - 1) / 2;
  std::vector<double> dist;
  if (all_pairs <= max_pairs) {
    dist.reserve(all_pairs);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        dist.push_back((points.col(static_cast<Eigen::Index>(i)) -
                        points.col(static_cast<Eigen::Index>(j)))
                           .norm());
  } else {
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    dist.reserve(max_pairs);
    while (dist.size() < max_pairs) {
      const std::size_t i = pick(rng);
      const std::size_t j = pick(rng);
      if (i == j) continue;
      dist.push_back((points.col(static_cast<Eigen::Index>(i)) -
                      points.col(static_cast<Eigen::Index>(j)))
                         .norm());
    }
  }
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double median = dist[mid];
  if (dist.size() % 2 == 0) {
    const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  if (!(median > 0.0)) throw NumericalError("median_bandwidth: degenerate bandwidth");
  return median;
}

PcaProjector::PcaProjector(Mat basis) : basis_(std::move(basis)) {}

PcaProjector PcaProjector::identity(Eigen::Index dim) {
  return PcaProjector(Mat::Identity(dim, dim));
}

PcaProjector pca_fit(const Mat& data_columns, Eigen::Index p, std::uint64_t seed) {
  SvdOptions opts;
  opts.seed = seed;
  return PcaProjector(randomized_svd(data_columns, p, opts).u);
}

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::rff: return "rff";
    case FeatureKind::linear: return "linear";
    case FeatureKind::indicator: return "indicator";
  }
  return "unknown";
}

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "rff") return FeatureKind::rff;
  if (s == "linear") return FeatureKind::linear;
  if (s == "indicator") return FeatureKind::indicator;
  throw std::invalid_argument("unknown feature kind '" + s + "'");
}

FeatureMap FeatureMap::make_rff(RffMap map) {
  FeatureMap f;
  f.kind_ = FeatureKind::rff;
  f.input_dim_ = map.input_dim();
  f.rff_ = std::move(map);
  return f;
}

FeatureMap FeatureMap::make_linear(Eigen::Index input_dim) {
  FeatureMap f;
  f.kind_ = FeatureKind::linear;
  f.input_dim_ = input_dim;
  return f;
}

FeatureMap FeatureMap::make_indicator(Eigen::Index input_dim, Eigen::Index block_dim) {
  if (block_dim < 1 || input_dim % block_dim != 0)
    throw DimensionError("indicator features: input dimension is not a multiple of the block");
  FeatureMap f;
  f.kind_ = FeatureKind::indicator;
  f.input_dim_ = input_dim;
  f.block_dim_ = block_dim;
  return f;
}

Eigen::Index FeatureMap::output_dim() const {
  switch (kind_) {
    case FeatureKind::rff: return rff_.output_dim();
    case FeatureKind::linear: return input_dim_ + 1;
    case FeatureKind::indicator: {
      Eigen::Index d = 1;
      for (Eigen::Index b = 0; b < input_dim_ / block_dim_; ++b) d *= block_dim_;
      return d;
    }
  }
  return 0;
}

Vec FeatureMap::apply(const Eigen::Ref<const Vec>& x) const {
  if (x.size() != input_dim_)
    throw DimensionError("feature map: input has dimension " + std::to_string(x.size()) +
                         ", expected " + std::to_string(input_dim_));
  switch (kind_) {
    case FeatureKind::rff: return rff_.apply(x);
    case FeatureKind::linear: {
      Vec out(input_dim_ + 1);
      out.head(input_dim_) = x;
      out[input_dim_] = 1.0;
      return out;
    }
    case FeatureKind::indicator: {
      Vec out = Vec::Ones(1);
      for (Eigen::Index b = 0; b < input_dim_ / block_dim_; ++b)
        out = kron(out, x.segment(b * block_dim_, block_dim_));
      return out;
    }
  }
  return {};
}

Mat FeatureMap::apply_columns(const Mat& x) const {
  if (kind_ == FeatureKind::rff) return rff_.apply_columns(x);
  Mat out(output_dim(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) = apply(x.col(j));
  return out;
}

}  // namespace rffpsr
