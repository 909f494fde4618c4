#pragma once

// Runs the 1-scan trajectory filters and the reference GM-PHD / GM-CPHD
// side by side on a random small scenario and reports the largest
// discrepancy.

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "gm_phd.hpp"
#include "trajphd/filters.hpp"
#include "trajphd/scenario.hpp"

namespace oracle {

struct Equivalence {
  bool structure_ok = true;  // same component counts and estimate counts
  double max_rel = 0.0;      // weights, cardinality, trailing marginals, estimates
  std::string detail;
};

inline trajphd::ScenarioConfig random_small_scenario(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  trajphd::ScenarioConfig sc;
  sc.n_steps = 20;
  sc.seed = seed;
  sc.models = trajphd::constant_velocity_2d(1.0, 0.5 + 1.5 * u(rng), 1.0 + 3.0 * u(rng),
                                            0.95 + 0.04 * u(rng), 0.6 + 0.35 * u(rng));
  const int n_birth = 1 + static_cast<int>(u(rng) * 2.0);
  for (int b = 0; b < n_birth; ++b) {
    sc.birth.components.push_back(trajphd::BirthComponent{
        0.05 + 0.25 * u(rng), Eigen::Vector4d(200.0 * u(rng), 0.0, 200.0 * u(rng), 0.0),
        Eigen::MatrixXd(Eigen::Vector4d(100.0, 25.0, 100.0, 25.0).asDiagonal())});
  }
  sc.clutter.rate = 4.0 * u(rng);
  sc.clutter.region.lower = Eigen::Vector2d(0.0, 0.0);
  sc.clutter.region.upper = Eigen::Vector2d(200.0, 200.0);
  const int n_targets = 1 + static_cast<int>(u(rng) * 3.0);
  for (int t = 0; t < n_targets; ++t) {
    const int birth = 1 + static_cast<int>(u(rng) * 10.0);
    const int death = std::min(20, birth + 3 + static_cast<int>(u(rng) * 15.0));
    trajphd::ScriptedTrack st;
    st.birth = birth;
    st.death = death;
    st.birth_component = static_cast<int>(u(rng) * n_birth);
    sc.script.push_back(st);
  }
  return sc;
}

inline Model reference_model(const trajphd::ScenarioConfig& sc) {
  Model m;
  m.F = sc.models.F;
  m.Q = sc.models.Q;
  m.H = sc.models.H;
  m.R = sc.models.R;
  m.p_s = sc.models.p_s;
  m.p_d = sc.models.p_d;
  for (const auto& b : sc.birth.components) m.birth.push_back({b.weight, b.mean, b.cov});
  m.clutter_rate = sc.clutter.rate;
  m.clutter_density = sc.clutter.spatial_density();
  m.n_max = trajphd::kDefaultMaxCardinality;
  return m;
}

inline double rel(double a, double b, double floor = 1e-200) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double mat_rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-300});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline void compare_mixture(const std::vector<trajphd::TrajectoryComponentd>& ours,
                            const std::vector<Component>& ref, int k, Equivalence& eq) {
  if (ours.size() != ref.size()) {
    eq.structure_ok = false;
    std::ostringstream os;
    os << "step " << k << ": " << ours.size() << " components vs " << ref.size();
    eq.detail = os.str();
    return;
  }
  for (std::size_t j = 0; j < ours.size(); ++j) {
    eq.max_rel = std::max(eq.max_rel, rel(ours[j].weight(), ref[j].w));
    eq.max_rel = std::max(eq.max_rel, mat_rel(ours[j].current_mean(), ref[j].m));
    eq.max_rel = std::max(eq.max_rel, mat_rel(ours[j].current_cov(), ref[j].P));
  }
}

inline void compare_estimates(const trajphd::TrajectorySet& ours, const std::vector<Eigen::VectorXd>& ref,
                              int k, Equivalence& eq) {
  if (ours.size() != ref.size()) {
    eq.structure_ok = false;
    eq.detail = "step " + std::to_string(k) + ": estimate counts differ";
    return;
  }
  for (std::size_t i = 0; i < ours.size(); ++i) {
    eq.max_rel = std::max(eq.max_rel, mat_rel(ours[i].state_at(k), ref[i]));
  }
}

/// L = 1 GM-TPHD against GM-PHD (cphd = false) or GM-TCPHD against GM-CPHD.
inline Equivalence one_scan_equivalence(std::uint64_t seed, bool cphd) {
  const trajphd::ScenarioConfig sc = random_small_scenario(seed);
  trajphd::Rng truth_rng = trajphd::make_rng(seed, 0, trajphd::Stream::Truth);
  const trajphd::TrajectorySet truth = trajphd::generate_truth(sc, truth_rng);
  trajphd::Rng meas_rng = trajphd::make_rng(seed, 0, trajphd::Stream::Measurements);
  const Model mdl = reference_model(sc);
  trajphd::ReductionConfig red;
  red.lscan = 1;
  const Reduction ref_red{red.prune_threshold, red.absorb_threshold,
                          static_cast<std::size_t>(red.max_components)};

  Equivalence eq;
  trajphd::TphdState tphd;
  trajphd::TcphdState tcphd;
  std::vector<Component> ref;
  Eigen::VectorXd ref_card = Eigen::VectorXd::Zero(mdl.n_max + 1);
  ref_card(0) = 1.0;

  for (int k = 1; k <= sc.n_steps && eq.structure_ok; ++k) {
    const trajphd::Measurements z = trajphd::generate_measurements(truth, sc, k, meas_rng);
    const std::vector<Eigen::VectorXd> zs(z.begin(), z.end());
    if (!cphd) {
      tphd = trajphd::reduce(trajphd::tphd_update(trajphd::tphd_predict(tphd, sc.models, sc.birth, 1), z,
                                                  sc.models, sc.clutter),
                             red);
      ref = reduce(phd_update(phd_predict(ref, mdl), zs, mdl), ref_red);
      compare_mixture(tphd.phd.components, ref, k, eq);
      if (!eq.structure_ok) break;
      compare_estimates(trajphd::estimate_tphd(tphd), top_means(ref, phd_count(ref)), k, eq);
    } else {
      tcphd = trajphd::reduce(
          trajphd::tcphd_update(trajphd::tcphd_predict(tcphd, sc.models, sc.birth, 1), z, sc.models,
                                sc.clutter),
          red);
      const auto predicted = phd_predict(ref, mdl);
      const Eigen::VectorXd card_pred = cphd_predict_card(ref_card, mdl);
      const CphdResult upd = cphd_update(predicted, card_pred, zs, mdl);
      ref = reduce(upd.comps, ref_red);
      ref_card = upd.card;
      compare_mixture(tcphd.phd.components, ref, k, eq);
      if (!eq.structure_ok) break;
      for (int n = 0; n <= mdl.n_max; ++n) {
        if (std::max(tcphd.cardinality(n), ref_card(n)) > 1e-200) {
          eq.max_rel = std::max(eq.max_rel, rel(tcphd.cardinality(n), ref_card(n)));
        }
      }
      compare_estimates(trajphd::estimate_tcphd(tcphd), top_means(ref, cphd_count(ref_card, ref.size())), k,
                        eq);
    }
  }
  return eq;
}

}  // namespace oracle
