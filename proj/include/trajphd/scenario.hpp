#pragma once

// Ground truth and measurement simulation for linear-Gaussian scenarios,
// and a sampler for IID-cluster densities over trajectories.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trajphd/cardinality.hpp"
#include "trajphd/filters.hpp"
#include "trajphd/trajectory_set.hpp"
#include "trajphd/trajgauss.hpp"

namespace trajphd {

using Rng = std::mt19937_64;

/// Named substreams of a run.
enum class Stream : std::uint64_t { Truth = 1, Measurements = 2, Sampler = 3 };

/// Engine seeded from (seed, run, stream) through splitmix64, so every run
/// and purpose gets an independent, reproducible stream.
Rng make_rng(std::uint64_t seed, std::uint64_t run, Stream stream);

/// Description of the generator recorded with experiment outputs.
std::string rng_description();

/// Draw from N(mean, cov) for a symmetric PSD covariance (singular allowed).
Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng);

struct ScriptedTrack {
  int birth = 1;
  int death = 1;  // last step the target exists
  /// Initial state. Without it the state is drawn from birth component
  /// `birth_component`.
  std::optional<Eigen::VectorXd> initial_state;
  /// When set, the initial state is drawn from N(mean, initial_cov) where
  /// mean is `initial_state` or the birth component mean.
  std::optional<Eigen::MatrixXd> initial_cov;
  int birth_component = 0;
};

enum class TruthMode { Scripted, Sampled };

struct ScenarioConfig {
  int n_steps = 100;
  LinearModelsd models;
  BirthModel birth;
  ClutterModel clutter;
  TruthMode truth_mode = TruthMode::Scripted;
  std::vector<ScriptedTrack> script;
  /// Sampled mode: targets present at step 1 in addition to births.
  std::vector<Eigen::VectorXd> initial_targets;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Constant-velocity model on [p_x, v_x, p_y, v_y] with position
/// measurements.
LinearModelsd constant_velocity_2d(double tau, double q, double sigma2, double p_s, double p_d);

/// Scenario with four targets born at steps 1, 1, 5, 10 and dying at 79, 79,
/// 69, 94, clutter rate 50 on [0, 2000]^2 and a three-component birth PHD.
ScenarioConfig four_target_scenario();

TrajectorySet generate_truth(const ScenarioConfig& config, Rng& rng);
/// Uses the truth substream of config.seed.
TrajectorySet generate_truth(const ScenarioConfig& config);

/// Detections of the targets alive at step k plus clutter, shuffled.
Measurements generate_measurements(const TrajectorySet& truth, const ScenarioConfig& config, int k,
                                   Rng& rng);

/// Trajectories that exist at step k, restricted to steps <= k.
TrajectorySet alive_at(const TrajectorySet& truth, int k);

/// One draw from the IID-cluster density with cardinality `cardinality`
/// and single-trajectory density phd / <1, w>. The PHD mass must match the
/// cardinality mean to 1e-6.
TrajectorySet sample_iid_cluster(const CardinalityPmf& cardinality, const GmTrajectoryPhdd& phd,
                                 Rng& rng);

}  // namespace trajphd
