#pragma once

#include <nlohmann/json.hpp>

#include "rffpsr/features.hpp"
#include "rffpsr/numerics.hpp"

namespace rffpsr::detail {

using Json = nlohmann::json;

Json mat_to_json(const Mat& m);
Mat mat_from_json(const Json& j);
Json vec_to_json(const Vec& v);
Vec vec_from_json(const Json& j);

Json feature_map_to_json(const FeatureMap& f);
FeatureMap feature_map_from_json(const Json& j);
Json projected_to_json(const ProjectedFeature& f);
ProjectedFeature projected_from_json(const Json& j);

/// Field lookup with a readable error naming the missing key.
const Json& field(const Json& j, const char* key);

}  // namespace rffpsr::detail
