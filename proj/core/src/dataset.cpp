#include "rffpsr/dataset.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "rffpsr/text.hpp"

namespace rffpsr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "unknown";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + s + "'");
}

std::vector<Trajectory> Dataset::select(Split s) const {
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < trajectories.size(); ++i)
    if (splits.at(i) == s) out.push_back(trajectories[i]);
  return out;
}

void Dataset::validate() const {
  if (splits.size() != trajectories.size())
    throw DataError("dataset: " + std::to_string(splits.size()) + " split labels for " +
                    std::to_string(trajectories.size()) + " trajectories");
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const Trajectory& t = trajectories[i];
    if (t.obs_dim() != obs_dim || t.act_dim() != act_dim)
      throw DataError("trajectory " + std::to_string(i) + ": dimensions do not match dataset");
    if (t.observations.cols() != t.actions.cols())
      throw DataError("trajectory " + std::to_string(i) + ": observation/action lengths differ");
    if (t.length() < 1) throw DataError("trajectory " + std::to_string(i) + " is empty");
    if (!t.observations.allFinite() || !t.actions.allFinite())
      throw DataError("trajectory " + std::to_string(i) + " has non-finite entries");
  }
}

std::vector<Split> default_splits(std::size_t n) {
  const std::size_t n_train = n / 2;
  const std::size_t n_val = n / 4;
  std::vector<Split> out(n, Split::test);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train)
      out[i] = Split::train;
    else if (i < n_train + n_val)
      out[i] = Split::val;
  }
  return out;
}

namespace {

std::string traj_file_name(std::size_t idx) { return "traj_" + std::to_string(idx) + ".csv"; }

std::string trajectory_csv(const Trajectory& t) {
  std::string out;
  for (Eigen::Index i = 0; i < t.obs_dim(); ++i) out += (i ? ",o" : "o") + std::to_string(i);
  for (Eigen::Index i = 0; i < t.act_dim(); ++i)
    out += ((t.obs_dim() + i) ? ",a" : "a") + std::to_string(i);
  out += '\n';
  for (Eigen::Index s = 0; s < t.length(); ++s) {
    bool first = true;
    auto emit = [&](double v) {
      if (!first) out += ',';
      first = false;
      out += format_double(v);
    };
    for (Eigen::Index i = 0; i < t.obs_dim(); ++i) emit(t.observations(i, s));
    for (Eigen::Index i = 0; i < t.act_dim(); ++i) emit(t.actions(i, s));
    out += '\n';
  }
  return out;
}

json manifest_json(const Dataset& d) {
  json m;
  m["obs_dim"] = d.obs_dim;
  m["act_dim"] = d.act_dim;
  m["dt"] = d.dt;
  m["seed"] = d.seed;
  json trajs = json::array();
  for (std::size_t i = 0; i < d.trajectories.size(); ++i)
    trajs.push_back({{"file", traj_file_name(i)},
                     {"split", to_string(d.splits.at(i))},
                     {"length", d.trajectories[i].length()}});
  m["trajectories"] = std::move(trajs);
  return m;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

Trajectory parse_trajectory_csv(const std::string& text, const std::string& file, Eigen::Index d_o,
                                Eigen::Index d_a, Eigen::Index expected_len) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw DataError(file + ":" + std::to_string(line_no) + ": " + what);
  };
  if (!std::getline(in, line)) {
    line_no = 1;
    fail("missing header");
  }
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  if (static_cast<Eigen::Index>(header.size()) != d_o + d_a)
    fail("header has " + std::to_string(header.size()) + " columns, manifest says " +
         std::to_string(d_o + d_a));
  for (Eigen::Index i = 0; i < d_o + d_a; ++i) {
    const std::string want = (i < d_o ? "o" + std::to_string(i) : "a" + std::to_string(i - d_o));
    if (header[static_cast<std::size_t>(i)] != want) fail("unexpected column name");
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (static_cast<Eigen::Index>(fields.size()) != d_o + d_a)
      fail("expected " + std::to_string(d_o + d_a) + " fields, got " +
           std::to_string(fields.size()));
    std::vector<double> row;
    row.reserve(fields.size());
    for (auto f : fields) {
      try {
        row.push_back(parse_double(f));
      } catch (const ParseError& e) {
        fail(e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  const auto len = static_cast<Eigen::Index>(rows.size());
  if (len != expected_len)
    throw DataError(file + ": " + std::to_string(len) + " rows, manifest says " +
                    std::to_string(expected_len));
  Trajectory t{Mat(d_o, len), Mat(d_a, len)};
  for (Eigen::Index s = 0; s < len; ++s) {
    const auto& r = rows[static_cast<std::size_t>(s)];
    for (Eigen::Index i = 0; i < d_o; ++i) t.observations(i, s) = r[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 0; i < d_a; ++i)
      t.actions(i, s) = r[static_cast<std::size_t>(d_o + i)];
  }
  return t;
}

}  // namespace

void write_dataset(const Dataset& d, const fs::path& dir) {
  d.validate();
  fs::create_directories(dir);
  write_file(dir / "manifest.json", manifest_json(d).dump(2) + "\n");
  for (std::size_t i = 0; i < d.trajectories.size(); ++i)
    write_file(dir / traj_file_name(i), trajectory_csv(d.trajectories[i]));
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  json m;
  try {
    m = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw DataError(e.what());
  }
  Dataset d;
  try {
    d.obs_dim = m.at("obs_dim").get<Eigen::Index>();
    d.act_dim = m.at("act_dim").get<Eigen::Index>();
    d.dt = m.at("dt").get<double>();
    d.seed = m.at("seed").get<std::uint64_t>();
    for (const auto& entry : m.at("trajectories")) {
      const auto file = entry.at("file").get<std::string>();
      const auto length = entry.at("length").get<Eigen::Index>();
      const fs::path path = dir / file;
      if (!fs::exists(path)) throw DataError(manifest_path.string() + ": missing file " + file);
      d.trajectories.push_back(
          parse_trajectory_csv(read_file(path), path.string(), d.obs_dim, d.act_dim, length));
      d.splits.push_back(split_from_string(entry.at("split").get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
  d.validate();
  return d;
}

std::string dataset_hash(const Dataset& d) {
  std::uint64_t h = fnv1a(manifest_json(d).dump(2));
  for (const auto& t : d.trajectories) h = fnv1a(trajectory_csv(t), h);
  return hex64(h);
}

}  // namespace rffpsr
