#pragma once

// Set and trajectory-set metrics: OSPA, GOSPA (alpha = 2) and the metric on
// sets of trajectories with its localization / missed / false / switch
// decomposition, plus RMS aggregation across runs and time.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "trajphd/trajectory_set.hpp"

namespace trajphd {

struct MetricConfig {
  double p = 2.0;
  double c = 10.0;
  double gamma = 1.0;
  double alpha = 2.0;
  /// State rows compared by the trajectory metrics; empty compares the whole state.
  std::vector<int> position_rows = {0, 2};
  /// Upper bound on assignment states per step of the trajectory metric DP.
  std::size_t max_dp_states = 1'000'000;
  /// Return early with a constant assignment when it attains the sum of
  /// per-step GOSPA (a lower bound); exact either way.
  bool switch_free_shortcut = true;

  void validate() const;
};

/// p-th power costs; for p = 2 these are the squared costs. `total` is the
/// distance itself: total^p = localization + missed + false_targets + switches.
struct MetricBreakdown {
  double localization = 0.0;
  double missed = 0.0;
  double false_targets = 0.0;
  double switches = 0.0;
  double total = 0.0;

  double total_pow() const { return localization + missed + false_targets + switches; }
};

using PointSet = std::vector<Eigen::VectorXd>;

/// GOSPA with alpha = 2 between ground truth X and estimate Y; `switches`
/// is always zero.
MetricBreakdown gospa(const PointSet& truth, const PointSet& estimate, const MetricConfig& cfg);

double ospa(const PointSet& x, const PointSet& y, const MetricConfig& cfg);

/// Compared rows of every trajectory existing at step k.
PointSet positions_at(const TrajectorySet& set, int k, const MetricConfig& cfg);

/// Trajectory metric over steps 1..k, minimized exactly over all sequences of
/// track assignments by dynamic programming. Throws MetricIntractable when the
/// assignment space exceeds cfg.max_dp_states.
MetricBreakdown trajectory_metric(const TrajectorySet& truth, const TrajectorySet& estimate,
                                  const MetricConfig& cfg, int k);

/// sum_{s=1..k} gospa(X_s, Y_s)^p, with its decomposition.
MetricBreakdown gospa_over_time(const TrajectorySet& truth, const TrajectorySet& estimate,
                                const MetricConfig& cfg, int k);

/// sum_{s=1..k} ospa(X_s, Y_s)^p.
double ospa_pow_over_time(const TrajectorySet& truth, const TrajectorySet& estimate,
                          const MetricConfig& cfg, int k);

/// sqrt( sum_i d_i^2 / (N_mc * k) ) over the per-run squared errors at step k.
double rms_over_runs(const std::vector<double>& squared_errors, int k);

/// sqrt( mean_k d(k)^2 ).
double rms_over_time(const std::vector<double>& per_step);

}  // namespace trajphd
