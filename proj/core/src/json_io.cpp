#include "json_io.hpp"

#include <string>

#include "rffpsr/text.hpp"

namespace rffpsr::detail {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  return j.at(key);
}

Json mat_to_json(const Mat& m) {
  Json data = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    data.push_back(std::move(row));
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Mat mat_from_json(const Json& j) {
  const auto rows = field(j, "rows").get<Eigen::Index>();
  const auto cols = field(j, "cols").get<Eigen::Index>();
  const Json& data = field(j, "data");
  if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Eigen::Index>(data.size()) != rows)
    throw ParseError("matrix: row count does not match shape");
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = data[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ParseError("matrix: column count does not match shape");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Json vec_to_json(const Vec& v) { return mat_to_json(v); }

Vec vec_from_json(const Json& j) {
  const Mat m = mat_from_json(j);
  if (m.cols() != 1) throw ParseError("vector: expected a single column");
  return m.col(0);
}

Json feature_map_to_json(const FeatureMap& f) {
  Json j{{"kind", to_string(f.kind())}, {"input_dim", f.input_dim()}};
  switch (f.kind()) {
    case FeatureKind::rff:
      j["bandwidth"] = f.rff().bandwidth();
      j["seed"] = f.rff().seed();
      j["frequencies"] = mat_to_json(f.rff().frequencies());
      break;
    case FeatureKind::indicator: j["block_dim"] = f.block_dim(); break;
    case FeatureKind::linear: break;
  }
  return j;
}

FeatureMap feature_map_from_json(const Json& j) {
  const FeatureKind kind = feature_kind_from_string(field(j, "kind").get<std::string>());
  const auto input_dim = field(j, "input_dim").get<Eigen::Index>();
  switch (kind) {
    case FeatureKind::rff: {
      Mat freq = mat_from_json(field(j, "frequencies"));
      if (freq.cols() != input_dim) throw ParseError("rff map: frequency shape");
      return FeatureMap::make_rff(RffMap(std::move(freq), field(j, "bandwidth").get<double>(),
                                         field(j, "seed").get<std::uint64_t>()));
    }
    case FeatureKind::indicator:
      return FeatureMap::make_indicator(input_dim, field(j, "block_dim").get<Eigen::Index>());
    case FeatureKind::linear: return FeatureMap::make_linear(input_dim);
  }
  throw ParseError("unknown feature kind");
}

Json projected_to_json(const ProjectedFeature& f) {
  return Json{{"map", feature_map_to_json(f.map)}, {"pca", mat_to_json(f.pca.basis())}};
}

ProjectedFeature projected_from_json(const Json& j) {
  ProjectedFeature f;
  f.map = feature_map_from_json(field(j, "map"));
  f.pca = PcaProjector(mat_from_json(field(j, "pca")));
  if (f.pca.input_dim() != f.map.output_dim()) throw ParseError("projector does not match its feature map");
  return f;
}

}  // namespace rffpsr::detail
