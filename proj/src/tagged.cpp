#include <algorithm>
#include <set>

#include "mixture_update.hpp"
#include "trajphd/filters.hpp"

namespace trajphd {

namespace {

// Current-state marginal of a component, as a duration-1 component at k.
TrajectoryComponentd current_marginal(const TrajectoryComponentd& c, int k) {
  return TrajectoryComponentd(c.weight(), k, c.current_mean(), c.current_cov(), c.state_dim());
}

TaggedStepResult tagged_step(const TaggedState& state, const Measurements& z,
                             const LinearModelsd& models, const BirthModel& birth,
                             const ClutterModel& clutter, const ReductionConfig& config) {
  const int k = state.phd.time + 1;
  TaggedStepResult result;
  TaggedState& next = result.state;
  next.cardinality = state.cardinality;
  next.next_tag = state.next_tag;
  next.tracks = state.tracks;

  // Prediction over the current state only; births get fresh tags.
  std::vector<TrajectoryComponentd> predicted;
  std::vector<std::uint64_t> tags;
  for (std::size_t j = 0; j < state.phd.components.size(); ++j) {
    predicted.push_back(current_marginal(predict_component(state.phd.components[j], models), k));
    tags.push_back(state.tags[j]);
  }
  detail::append_births(predicted, birth, k);
  for (std::size_t b = 0; b < birth.components.size(); ++b) tags.push_back(next.next_tag++);

  detail::MixtureUpdate upd;
  if (state.cardinality) {
    const int n_max = state.cardinality->n_max();
    const CardinalityPmf predicted_card =
        predict_cardinality(*state.cardinality, models.p_s, birth.cardinality_pmf(n_max), n_max);
    upd = detail::cphd_update(predicted, predicted_card, z, models, clutter, {});
    next.cardinality = std::move(upd.cardinality);
  } else {
    upd = detail::phd_update(predicted, z, models, clutter, {});
  }

  std::vector<std::size_t> origin;
  next.phd.time = k;
  next.phd.components = reduce_components(upd.components, config, &origin);
  next.tags.reserve(origin.size());
  for (std::size_t i : origin) next.tags.push_back(tags[upd.parents[i]]);

  // Number of targets, then the highest components with distinct tags.
  int n_hat = 0;
  if (next.cardinality) {
    n_hat = next.cardinality->argmax();
  } else {
    double total = 0.0;
    for (const auto& c : next.phd.components) total += c.weight();
    n_hat = static_cast<int>(std::lround(total));
  }
  n_hat = std::min<int>(n_hat, static_cast<int>(next.phd.components.size()));

  std::set<std::uint64_t> used;
  for (std::size_t i : top_components(next.phd.components, next.phd.components.size())) {
    if (static_cast<int>(used.size()) >= n_hat) break;
    const std::uint64_t tag = next.tags[i];
    if (!used.insert(tag).second) continue;
    auto& track = next.tracks[tag];
    track.append(k, next.phd.components[i].current_mean());
    result.estimates.push_back(track);
  }
  result.n_hat = static_cast<int>(result.estimates.size());
  return result;
}

}  // namespace

TaggedStepResult tagged_phd_step(const TaggedState& state, const Measurements& z,
                                 const LinearModelsd& models, const BirthModel& birth,
                                 const ClutterModel& clutter, const ReductionConfig& config) {
  if (state.cardinality) throw ConfigError("tagged PHD step given a CPHD state");
  return tagged_step(state, z, models, birth, clutter, config);
}

TaggedStepResult tagged_cphd_step(const TaggedState& state, const Measurements& z,
                                  const LinearModelsd& models, const BirthModel& birth,
                                  const ClutterModel& clutter, const ReductionConfig& config) {
  if (!state.cardinality) throw ConfigError("tagged CPHD step given a PHD state");
  return tagged_step(state, z, models, birth, clutter, config);
}

}  // namespace trajphd
