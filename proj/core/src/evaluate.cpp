#include "rffpsr/evaluate.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "json_io.hpp"
#include "rffpsr/text.hpp"

namespace rffpsr {

namespace {

HorizonErrors constant_windows(const Trajectory& traj, int k, const std::vector<int>& horizons,
                               Eigen::Index skip, const Vec& value) {
  Vec window(value.size() * k);
  for (int i = 0; i < k; ++i) window.segment(value.size() * i, value.size()) = value;
  return score_windows(traj, k, horizons, skip, [&](Eigen::Index) { return window; });
}

}  // namespace

EvalMethod psr_method(std::string name, RffPsrModel m) {
  EvalMethod e;
  e.name = std::move(name);
  e.content_hash = model_hash(model_to_json(m));
  e.score = [m = std::move(m)](const Trajectory& tr, const std::vector<int>& h, Eigen::Index skip) {
    return rollout_eval(m, tr, h, skip);
  };
  return e;
}

EvalMethod arx_method(std::string name, ArxModel m) {
  EvalMethod e;
  e.name = std::move(name);
  e.content_hash = model_hash(arx_to_json(m));
  e.score = [m = std::move(m)](const Trajectory& tr, const std::vector<int>& h, Eigen::Index skip) {
    return arx_rollout_eval(m, tr, h, skip);
  };
  return e;
}

EvalMethod mean_method(const std::vector<Trajectory>& train, int k) {
  if (train.empty()) throw DataError("mean_method: no training trajectories");
  Vec sum = Vec::Zero(train.front().obs_dim());
  Eigen::Index n = 0;
  for (const Trajectory& tr : train) {
    sum += tr.observations.rowwise().sum();
    n += tr.length();
  }
  const Vec mean = sum / static_cast<double>(std::max<Eigen::Index>(n, 1));
  EvalMethod e;
  e.name = "mean";
  e.score = [mean, k](const Trajectory& tr, const std::vector<int>& h, Eigen::Index skip) {
    return constant_windows(tr, k, h, skip, mean);
  };
  return e;
}

EvalMethod zero_method(Eigen::Index obs_dim, int k) {
  EvalMethod e;
  e.name = "zero";
  e.score = [obs_dim, k](const Trajectory& tr, const std::vector<int>& h, Eigen::Index skip) {
    return constant_windows(tr, k, h, skip, Vec::Zero(obs_dim));
  };
  return e;
}

double EvalReport::mse(const std::string& method, int horizon) const {
  for (const EvalRow& r : rows)
    if (r.method == method && r.horizon == horizon) return r.mse;
  throw std::out_of_range("no result for " + method + " at horizon " + std::to_string(horizon));
}

double EvalReport::mean_mse(const std::string& method) const {
  double total = 0.0;
  for (int h : horizons) total += mse(method, h);
  return horizons.empty() ? 0.0 : total / static_cast<double>(horizons.size());
}

EvalReport evaluate(const std::vector<EvalMethod>& methods, const std::vector<Trajectory>& test,
                    const std::vector<int>& horizons, Eigen::Index skip) {
  if (horizons.empty()) throw std::invalid_argument("evaluate: no horizons");
  EvalReport r;
  r.horizons = horizons;
  std::sort(r.horizons.begin(), r.horizons.end());
  r.horizons.erase(std::unique(r.horizons.begin(), r.horizons.end()), r.horizons.end());
  r.skip = skip;
  for (const EvalMethod& m : methods) {
    if (!m.content_hash.empty()) r.model_hashes[m.name] = m.content_hash;
    HorizonErrors total;
    for (const Trajectory& tr : test) total.add(m.score(tr, r.horizons, skip));
    for (int h : r.horizons) {
      const auto i = static_cast<std::size_t>(h - 1);
      r.rows.push_back({m.name, h, total.mse(h), i < total.count.size() ? total.count[i] : 0});
    }
  }
  std::stable_sort(r.rows.begin(), r.rows.end(), [](const EvalRow& a, const EvalRow& b) {
    return a.method != b.method ? a.method < b.method : a.horizon < b.horizon;
  });
  return r;
}

std::string report_csv(const EvalReport& r) {
  std::string out = "method,horizon,mse,n_points\n";
  for (const EvalRow& row : r.rows)
    out += row.method + "," + std::to_string(row.horizon) + "," + format_double(row.mse) + "," +
           std::to_string(row.n_points) + "\n";
  return out;
}

std::vector<EvalRow> parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "method,horizon,mse,n_points")
    throw ParseError("results: unexpected header");
  std::vector<EvalRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
    if (cells.size() != 4) throw ParseError("results line " + std::to_string(line_no) + ": expected 4 fields");
    EvalRow r;
    r.method = cells[0];
    r.horizon = static_cast<int>(parse_double(cells[1]));
    r.mse = parse_double(cells[2]);
    r.n_points = static_cast<std::size_t>(parse_double(cells[3]));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string report_meta_json(const EvalReport& r) {
  detail::Json models = detail::Json::object();
  for (const auto& [name, hash] : r.model_hashes) models[name] = hash;
  const detail::Json j{{"dataset_hash", r.dataset_hash},
                       {"model_hashes", models},
                       {"horizons", r.horizons},
                       {"excluded_leading_steps", r.skip},
                       {"seed", r.seed}};
  return j.dump(2) + "\n";
}

std::string model_hash(const std::string& serialized) { return hex64(fnv1a(serialized)); }

}  // namespace rffpsr
