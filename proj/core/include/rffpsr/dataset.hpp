#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rffpsr/numerics.hpp"

namespace rffpsr {

/// One rollout. Column t of each matrix is time step t.
struct Trajectory {
  Mat observations;  // d_o x T
  Mat actions;       // d_a x T

  [[nodiscard]] Eigen::Index length() const { return observations.cols(); }
  [[nodiscard]] Eigen::Index obs_dim() const { return observations.rows(); }
  [[nodiscard]] Eigen::Index act_dim() const { return actions.rows(); }
};

enum class Split { train, val, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Dataset {
  std::vector<Trajectory> trajectories;
  std::vector<Split> splits;  // one per trajectory
  Eigen::Index obs_dim = 0;
  Eigen::Index act_dim = 0;
  double dt = 1.0;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t size() const { return trajectories.size(); }
  /// Trajectories carrying `s`, in index order.
  [[nodiscard]] std::vector<Trajectory> select(Split s) const;
  /// Throws DataError if dimensions are inconsistent or entries non-finite.
  void validate() const;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Index-ordered split: first half train, next quarter validation, rest test
/// (20 trajectories give 10/5/5).
std::vector<Split> default_splits(std::size_t n);

/// Writes manifest.json and traj_<idx>.csv files into `dir` (created if missing).
void write_dataset(const Dataset& d, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// Content hash over the manifest and trajectory files as written.
std::string dataset_hash(const Dataset& d);

}  // namespace rffpsr
