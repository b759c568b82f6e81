#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rffpsr/arx.hpp"
#include "rffpsr/filter.hpp"

namespace rffpsr {

/// A named predictor scored trajectory by trajectory.
struct EvalMethod {
  std::string name;
  std::string content_hash;  // empty for parameter-free baselines
  std::function<HorizonErrors(const Trajectory&, const std::vector<int>& horizons, Eigen::Index skip)> score;
};

EvalMethod psr_method(std::string name, RffPsrModel m);
EvalMethod arx_method(std::string name, ArxModel m);
/// Predicts the per-dimension mean of the training observations everywhere.
EvalMethod mean_method(const std::vector<Trajectory>& train, int k);
/// Predicts zero everywhere.
EvalMethod zero_method(Eigen::Index obs_dim, int k);

struct EvalRow {
  std::string method;
  int horizon = 0;
  double mse = 0.0;
  std::size_t n_points = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // sorted by (method, horizon)
  std::string dataset_hash;
  std::map<std::string, std::string> model_hashes;
  std::vector<int> horizons;
  Eigen::Index skip = 0;  // target times t < skip are excluded
  std::uint64_t seed = 0;

  [[nodiscard]] double mse(const std::string& method, int horizon) const;
  /// Mean over the report's horizons.
  [[nodiscard]] double mean_mse(const std::string& method) const;
};

EvalReport evaluate(const std::vector<EvalMethod>& methods, const std::vector<Trajectory>& test,
                    const std::vector<int>& horizons, Eigen::Index skip);

/// `method,horizon,mse,n_points` with 17 significant digits.
std::string report_csv(const EvalReport& r);
std::vector<EvalRow> parse_report_csv(const std::string& text);
std::string report_meta_json(const EvalReport& r);

/// Content hash of a serialized model.
std::string model_hash(const std::string& serialized);

}  // namespace rffpsr
