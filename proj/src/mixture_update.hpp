#pragma once

// Mixture-level prediction and update shared by the trajectory filters and
// the tag-based baselines.

#include <optional>
#include <vector>

#include "trajphd/filters.hpp"

namespace trajphd::detail {

/// Survival prediction of every component followed by the L-scan
/// approximation.
std::vector<TrajectoryComponentd> predict_survivors(const std::vector<TrajectoryComponentd>& in,
                                                    const LinearModelsd& models, int lscan);

/// Appends the birth components as trajectories born at step k.
void append_births(std::vector<TrajectoryComponentd>& out, const BirthModel& birth, int k);

struct MixtureUpdate {
  std::vector<TrajectoryComponentd> components;
  /// Index of the prior component each output component descends from.
  std::vector<std::size_t> parents;
  std::optional<CardinalityPmf> cardinality;
};

/// Output order: the missed-detection copies of all components, then for
/// each measurement in order the detection copies of all components.
MixtureUpdate phd_update(const std::vector<TrajectoryComponentd>& prior, const Measurements& z,
                         const LinearModelsd& models, const ClutterModel& clutter,
                         const UpdateOptions& options);

MixtureUpdate cphd_update(const std::vector<TrajectoryComponentd>& prior,
                          const CardinalityPmf& cardinality, const Measurements& z,
                          const LinearModelsd& models, const ClutterModel& clutter,
                          const UpdateOptions& options);

}  // namespace trajphd::detail
