#pragma once

// Gaussian-mixture trajectory PHD / CPHD filters and their tag-based
// PHD / CPHD baselines.

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "trajphd/cardinality.hpp"
#include "trajphd/trajectory_set.hpp"
#include "trajphd/trajgauss.hpp"

namespace trajphd {

using Measurements = std::vector<Eigen::VectorXd>;

struct BirthComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Birth PHD as a Gaussian mixture over the current state. The birth
/// cardinality used by the CPHD-type filters defaults to a truncated
/// Poisson with the mixture's total weight.
struct BirthModel {
  std::vector<BirthComponent> components;
  std::optional<CardinalityPmf> cardinality;

  double total_weight() const;
  CardinalityPmf cardinality_pmf(int n_max) const;
  void validate(Eigen::Index state_dim) const;
};

struct ReductionConfig {
  double prune_threshold = 1e-4;
  double absorb_threshold = 4.0;
  int max_components = 30;
  int lscan = 1;

  void validate() const;
};

/// Axis-aligned box.
struct Region {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  double volume() const { return (upper - lower).prod(); }
  bool contains(const Eigen::VectorXd& z) const {
    return (z.array() >= lower.array()).all() && (z.array() <= upper.array()).all();
  }
};

/// Clutter with uniform spatial density over `region` and count either
/// Poisson(rate) or an explicit PMF.
struct ClutterModel {
  double rate = 0.0;
  Region region;
  std::optional<CardinalityPmf> cardinality;

  double spatial_density() const { return 1.0 / region.volume(); }
  CountDistribution count() const {
    return cardinality ? CountDistribution::from_pmf(*cardinality) : CountDistribution::poisson(rate);
  }
  void validate() const;
};

struct UpdateOptions {
  /// Squared Mahalanobis gate on the innovation. Disabled when empty.
  std::optional<double> gate;
};

struct TphdState {
  GmTrajectoryPhdd phd;
};

struct TcphdState {
  GmTrajectoryPhdd phd;
  CardinalityPmf cardinality = CardinalityPmf::delta(0);
};

TphdState tphd_predict(const TphdState& state, const LinearModelsd& models, const BirthModel& birth,
                       int lscan);
TphdState tphd_update(const TphdState& state, const Measurements& z, const LinearModelsd& models,
                      const ClutterModel& clutter, const UpdateOptions& options = {});

TcphdState tcphd_predict(const TcphdState& state, const LinearModelsd& models,
                         const BirthModel& birth, int lscan);
TcphdState tcphd_update(const TcphdState& state, const Measurements& z,
                        const LinearModelsd& models, const ClutterModel& clutter,
                        const UpdateOptions& options = {});

/// Pruning and absorption. `origin`, when given, receives for each output
/// component the index of the input component it was taken from.
std::vector<TrajectoryComponentd> reduce_components(const std::vector<TrajectoryComponentd>& in,
                                                    const ReductionConfig& config,
                                                    std::vector<std::size_t>* origin = nullptr);

TphdState reduce(const TphdState& state, const ReductionConfig& config);
TcphdState reduce(const TcphdState& state, const ReductionConfig& config);

/// Indices of the `count` highest-weight components, highest first; ties
/// keep insertion order.
std::vector<std::size_t> top_components(const std::vector<TrajectoryComponentd>& components,
                                        std::size_t count);

/// round(sum of weights), capped at the number of components.
int estimate_count_tphd(const TphdState& state);
/// argmax of the cardinality PMF, capped at the number of components.
int estimate_count_tcphd(const TcphdState& state);

TrajectorySet estimate_tphd(const TphdState& state);
TrajectorySet estimate_tcphd(const TcphdState& state);

/// Tag-based track building on top of a GM-PHD or GM-CPHD over the
/// current target state.
struct TaggedState {
  GmTrajectoryPhdd phd;  // every component has duration 1
  std::vector<std::uint64_t> tags;
  std::optional<CardinalityPmf> cardinality;  // set for the CPHD variant
  std::uint64_t next_tag = 1;
  std::map<std::uint64_t, Trajectory> tracks;

  static TaggedState phd_variant() { return {}; }
  static TaggedState cphd_variant(int n_max = kDefaultMaxCardinality) {
    TaggedState s;
    s.cardinality = CardinalityPmf::delta(0, n_max);
    return s;
  }
};

struct TaggedStepResult {
  TaggedState state;
  TrajectorySet estimates;
  int n_hat = 0;
};

TaggedStepResult tagged_phd_step(const TaggedState& state, const Measurements& z,
                                 const LinearModelsd& models, const BirthModel& birth,
                                 const ClutterModel& clutter, const ReductionConfig& config);
TaggedStepResult tagged_cphd_step(const TaggedState& state, const Measurements& z,
                                  const LinearModelsd& models, const BirthModel& birth,
                                  const ClutterModel& clutter, const ReductionConfig& config);

enum class FilterKind { Tphd, Tcphd, TaggedPhd, TaggedCphd };

const char* to_string(FilterKind kind);
FilterKind filter_kind_from_string(const std::string& name);

struct FilterStep {
  TrajectorySet estimates;
  int n_hat = 0;
};

/// Runs one filter of any kind through time: predict, update, reduce,
/// estimate.
class FilterRunner {
 public:
  FilterRunner(FilterKind kind, LinearModelsd models, BirthModel birth, ClutterModel clutter,
               ReductionConfig config, int n_max = kDefaultMaxCardinality);

  FilterStep step(const Measurements& z);

  FilterKind kind() const { return kind_; }
  int time() const;
  const GmTrajectoryPhdd& phd() const;
  /// Cardinality PMF for the CPHD-type filters.
  std::optional<CardinalityPmf> cardinality() const;

 private:
  FilterKind kind_;
  LinearModelsd models_;
  BirthModel birth_;
  ClutterModel clutter_;
  ReductionConfig config_;
  TphdState tphd_;
  TcphdState tcphd_;
  TaggedState tagged_;
};

}  // namespace trajphd
