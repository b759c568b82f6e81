#pragma once

#include "rffpsr/datagen.hpp"
#include "rffpsr/filter.hpp"
#include "rffpsr/two_stage.hpp"

namespace rffpsr::testing {

/// Small RFF-PSR learned on short benchmark rollouts: p = `p` everywhere.
RffPsrModel small_benchmark_model(Eigen::Index p, int k, int history, std::uint64_t seed,
                                  Dataset* data = nullptr);

/// Adds N(0, scale^2) noise to every refinable parameter.
RffPsrModel perturbed(const RffPsrModel& m, double scale, std::uint64_t seed);

/// Two-state, two-observation, two-action IO-HMM with strictly positive tables.
IoHmm small_iohmm();

}  // namespace rffpsr::testing
