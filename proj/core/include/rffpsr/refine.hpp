#pragma once

#include <string>
#include <vector>

#include "rffpsr/filter.hpp"

namespace rffpsr {

/// Gradients of the summed squared window-prediction error
/// sum_s |W_pred [kron(q_s, psi^a_s); 1] - o_{s:s+k-1}|^2 over every full window s.
struct Gradients {
  Mat w_xi;
  Mat w_o;
  Mat w_pred;
  Vec q0;
  double loss = 0.0;
  std::size_t windows = 0;

  static Gradients zeros(const RffPsrModel& m);
  void add(const Gradients& other);
  void scale(double s);
  [[nodiscard]] double squared_norm() const;
};

/// Forward-only loss (same sum as bptt_gradients) and window count.
std::pair<double, std::size_t> trajectory_loss(const RffPsrModel& m, const Trajectory& traj,
                                               const FilterOptions& opts);

/// Reverse-mode gradient through the full filter recursion.
Gradients bptt_gradients(const RffPsrModel& m, const Trajectory& traj, const FilterOptions& opts);

/// Sum over trajectories, accumulated in index order.
Gradients bptt_gradients(const RffPsrModel& m, const std::vector<Trajectory>& trajs,
                         const FilterOptions& opts);

struct RefineConfig {
  double initial_step = 0.0;  // 0 selects the step by a one-epoch probe over probe_steps
  double min_step = 1e-5;
  double min_rel_improvement = 1e-3;
  int max_epochs = 500;
  bool refine_q0 = true;
  /// Keep the eigen-clip of C_oo (differentiated exactly); false refines the unclipped filter.
  bool clip_covariance = true;
  std::vector<double> probe_steps = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
};

struct EpochRecord {
  int epoch = 0;
  double step_size = 0.0;
  double train_loss = 0.0;  // mean loss of the parameters the step started from
  double val_loss = 0.0;    // mean validation loss of the candidate parameters
  bool accepted = false;
};

struct RefineResult {
  RffPsrModel model;
  std::vector<EpochRecord> log;
  double initial_val_loss = 0.0;
  double best_val_loss = 0.0;
};

/// Mean squared window error per window over `trajs`; +inf if the filter fails.
double mean_loss(const RffPsrModel& m, const std::vector<Trajectory>& trajs, const FilterOptions& opts);

/// Full-batch gradient descent on the mean training loss. Each epoch proposes
/// theta - step * g / |g_0|; the candidate is kept if validation loss does not
/// increase, otherwise the step is halved. Stops when the step drops below
/// min_step or an accepted step improves validation by less than
/// min_rel_improvement (relative). The returned model's clip flag is cfg.clip_covariance.
RefineResult refine(const RffPsrModel& m, const std::vector<Trajectory>& train,
                    const std::vector<Trajectory>& val, const RefineConfig& cfg = {});

std::string epoch_log_csv(const std::vector<EpochRecord>& log);
std::vector<EpochRecord> parse_epoch_log_csv(const std::string& text);

}  // namespace rffpsr
