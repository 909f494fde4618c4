#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles/equivalence.hpp"
#include "oracles/kalman.hpp"
#include "test_util.hpp"
#include "trajphd/errors.hpp"
#include "trajphd/filters.hpp"
#include "trajphd/metrics.hpp"
#include "trajphd/scenario.hpp"

using namespace trajphd;

namespace {

LinearModelsd scalar_models(double p_s = 0.99, double p_d = 0.9) {
  LinearModelsd m;
  m.F = Eigen::MatrixXd::Ones(1, 1);
  m.Q = Eigen::MatrixXd::Ones(1, 1);
  m.H = Eigen::MatrixXd::Ones(1, 1);
  m.R = Eigen::MatrixXd::Ones(1, 1);
  m.p_s = p_s;
  m.p_d = p_d;
  return m;
}

ClutterModel scalar_clutter(double rate) {
  ClutterModel c;
  c.rate = rate;
  c.region.lower = Eigen::VectorXd::Constant(1, 0.0);
  c.region.upper = Eigen::VectorXd::Constant(1, 100.0);
  return c;
}

TrajectoryComponentd unit_component(double w, double mean = 0.0, int birth = 1) {
  return TrajectoryComponentd(w, birth, Eigen::VectorXd::Constant(1, mean), Eigen::MatrixXd::Ones(1, 1), 1);
}

TphdState random_tphd_state(std::mt19937_64& rng, int J) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TphdState s;
  s.phd.time = 4;
  for (int j = 0; j < J; ++j) {
    const int birth = 1 + static_cast<int>(u(rng) * 4.0);
    const int dur = s.phd.time - birth + 1;
    s.phd.components.emplace_back(u(rng), birth, testutil::random_vector(4 * dur, rng, 50.0),
                                  testutil::random_spd(4 * dur, rng), 4);
  }
  return s;
}

}  // namespace

TEST(TphdPredict, EmptyPriorYieldsBirthOnly) {
  const ScenarioConfig sc = four_target_scenario();
  const auto out = tphd_predict(TphdState{}, sc.models, sc.birth, 1);
  ASSERT_EQ(out.phd.components.size(), 3u);
  EXPECT_NEAR(expected_count(out.phd), 0.3, 1e-15);
  for (const auto& c : out.phd.components) {
    EXPECT_EQ(c.birth_time(), 1);
    EXPECT_EQ(c.duration(), 1);
  }
}

TEST(TphdPredict, SingleSurvivorExtendsByOneStep) {
  TphdState s;
  s.phd.time = 1;
  s.phd.components.push_back(unit_component(1.0));
  const auto out = tphd_predict(s, scalar_models(), BirthModel{}, 5);
  ASSERT_EQ(out.phd.components.size(), 1u);
  EXPECT_DOUBLE_EQ(out.phd.components[0].weight(), 0.99);
  EXPECT_EQ(out.phd.components[0].duration(), 2);
  EXPECT_EQ(out.phd.time, 2);
}

TEST(TphdPredict, OneScanMakesCovarianceBlockDiagonal) {
  std::mt19937_64 rng(31);
  const ScenarioConfig sc = four_target_scenario();
  const auto out = tphd_predict(random_tphd_state(rng, 4), sc.models, sc.birth, 1);
  for (const auto& c : out.phd.components) {
    const int d = c.duration();
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        if (a != b) EXPECT_TRUE(c.cov().block(4 * a, 4 * b, 4, 4).isZero(0.0));
      }
    }
  }
}

TEST(TphdUpdate, NoMeasurementsScalesByMissProbability) {
  std::mt19937_64 rng(32);
  const ScenarioConfig sc = four_target_scenario();
  const auto prior = random_tphd_state(rng, 5);
  const auto out = tphd_update(prior, {}, sc.models, sc.clutter);
  ASSERT_EQ(out.phd.components.size(), prior.phd.components.size());
  for (std::size_t j = 0; j < prior.phd.components.size(); ++j) {
    EXPECT_LT(testutil::rel_err(out.phd.components[j].weight(), 0.1 * prior.phd.components[j].weight()), 1e-15);
    EXPECT_TRUE(out.phd.components[j].mean() == prior.phd.components[j].mean());
  }
}

TEST(TphdUpdate, SingleComponentAtPredictedMeasurement) {
  TphdState prior;
  prior.phd.time = 1;
  prior.phd.components.push_back(unit_component(1.0));
  const auto out = tphd_update(prior, {Eigen::VectorXd::Zero(1)}, scalar_models(), scalar_clutter(10.0));
  ASSERT_EQ(out.phd.components.size(), 2u);
  const double q = 1.0 / std::sqrt(2.0 * M_PI * 2.0);
  EXPECT_NEAR(out.phd.components[0].weight(), 0.1, 1e-15);
  EXPECT_LT(testutil::rel_err(out.phd.components[1].weight(), 0.9 * q / (10.0 * 0.01 + 0.9 * q)), 1e-12);
  EXPECT_NEAR(out.phd.components[1].weight(), 0.71742, 5e-6);
}

TEST(TphdUpdate, IdenticalComponentsShareWeight) {
  TphdState prior;
  prior.phd.time = 1;
  prior.phd.components.push_back(unit_component(0.5, 3.0));
  prior.phd.components.push_back(unit_component(0.5, 3.0));
  const auto out = tphd_update(prior, {Eigen::VectorXd::Constant(1, 2.0)}, scalar_models(), scalar_clutter(5.0));
  ASSERT_EQ(out.phd.components.size(), 4u);
  EXPECT_DOUBLE_EQ(out.phd.components[2].weight(), out.phd.components[3].weight());
}

TEST(TphdUpdate, ComponentCountAndDetectedMass) {
  std::mt19937_64 rng(33);
  const ScenarioConfig sc = four_target_scenario();
  for (int t = 0; t < 20; ++t) {
    const auto prior = random_tphd_state(rng, 1 + t % 5);
    Measurements z;
    for (int i = 0; i < t % 4; ++i) z.push_back(testutil::random_vector(2, rng, 60.0));
    const auto out = tphd_update(prior, z, sc.models, sc.clutter);
    const std::size_t J = prior.phd.components.size();
    ASSERT_EQ(out.phd.components.size(), J * (1 + z.size()));
    for (std::size_t m = 0; m < z.size(); ++m) {
      double s = 0.0;
      for (std::size_t j = 0; j < J; ++j) s += out.phd.components[J * (1 + m) + j].weight();
      EXPECT_LT(s, 1.0);
      EXPECT_GE(s, 0.0);
    }
  }
}

TEST(TcphdPredict, PhdMatchesTphdBitwise) {
  std::mt19937_64 rng(34);
  const ScenarioConfig sc = four_target_scenario();
  for (int t = 0; t < 50; ++t) {
    const auto ts = random_tphd_state(rng, 1 + t % 6);
    TcphdState cs;
    cs.phd = ts.phd;
    cs.cardinality = CardinalityPmf::poisson(2.0);
    const int L = 1 + t % 4;
    const auto a = tphd_predict(ts, sc.models, sc.birth, L);
    const auto b = tcphd_predict(cs, sc.models, sc.birth, L);
    ASSERT_EQ(a.phd.components.size(), b.phd.components.size());
    for (std::size_t j = 0; j < a.phd.components.size(); ++j) {
      EXPECT_EQ(a.phd.components[j].weight(), b.phd.components[j].weight());
      EXPECT_TRUE(a.phd.components[j].mean() == b.phd.components[j].mean());
      EXPECT_TRUE(a.phd.components[j].cov() == b.phd.components[j].cov());
    }
  }
}

TEST(TcphdPredict, CardinalityFromEmptyIsBirth) {
  const ScenarioConfig sc = four_target_scenario();
  const auto out = tcphd_predict(TcphdState{}, sc.models, sc.birth, 1);
  const auto expected = CardinalityPmf::poisson(0.3);
  EXPECT_LT(testutil::rel_err(out.cardinality.probs(), expected.probs(), 1e-300), 1e-12);
}

TEST(TcphdPredict, CardinalityThinsTwoTargets) {
  TcphdState s;
  s.phd.time = 1;
  s.phd.components.push_back(unit_component(1.0));
  s.phd.components.push_back(unit_component(1.0, 50.0));
  s.cardinality = CardinalityPmf::delta(2);
  const auto out = tcphd_predict(s, scalar_models(), BirthModel{}, 1);
  EXPECT_NEAR(out.cardinality(0), 0.0001, 1e-15);
  EXPECT_NEAR(out.cardinality(1), 0.0198, 1e-15);
  EXPECT_NEAR(out.cardinality(2), 0.9801, 1e-15);
}

TEST(TcphdUpdate, NoMeasurementsKnownCardinality) {
  TcphdState s;
  s.phd.time = 1;
  s.phd.components.push_back(unit_component(0.3));
  s.phd.components.push_back(unit_component(0.5, 40.0));
  s.cardinality = CardinalityPmf::delta(1);
  const auto out = tcphd_update(s, {}, scalar_models(), scalar_clutter(3.0));
  EXPECT_EQ(out.cardinality(1), 1.0);
  ASSERT_EQ(out.phd.components.size(), 2u);
  // With n = 1 known, the missed-detection scale is n / <1, v>.
  EXPECT_LT(testutil::rel_err(out.phd.components[0].weight(), 0.375), 1e-12);
  EXPECT_LT(testutil::rel_err(out.phd.components[1].weight(), 0.625), 1e-12);
}

TEST(TcphdUpdate, BlindSensorKeepsCardinality) {
  TcphdState s;
  s.phd.time = 1;
  s.phd.components.push_back(unit_component(1.2));
  s.phd.components.push_back(unit_component(0.8, 40.0));
  s.cardinality = CardinalityPmf::poisson(2.0);
  const Measurements z{Eigen::VectorXd::Constant(1, 5.0), Eigen::VectorXd::Constant(1, 60.0)};
  const auto out = tcphd_update(s, z, scalar_models(0.99, 0.0), scalar_clutter(2.0));
  EXPECT_LT(testutil::rel_err(out.cardinality.probs(), s.cardinality.probs(), 1e-300), 1e-12);
  // Total prior mass equals the cardinality mean, so the PHD is unchanged.
  EXPECT_LT(testutil::rel_err(out.phd.components[0].weight(), 1.2), 1e-12);
  EXPECT_LT(testutil::rel_err(out.phd.components[1].weight(), 0.8), 1e-12);
}

TEST(TcphdUpdate, PosteriorCardinalityNormalized) {
  std::mt19937_64 rng(35);
  const ScenarioConfig sc = four_target_scenario();
  for (int t = 0; t < 100; ++t) {
    const auto ts = random_tphd_state(rng, 1 + t % 5);
    TcphdState s;
    s.phd = ts.phd;
    s.cardinality = CardinalityPmf::poisson(0.5 + (t % 7));
    Measurements z;
    for (int i = 0; i < t % 6; ++i) z.push_back(testutil::random_vector(2, rng, 60.0));
    const auto out = tcphd_update(s, z, sc.models, sc.clutter);
    EXPECT_NEAR(out.cardinality.probs().sum(), 1.0, 1e-12);
    EXPECT_TRUE((out.cardinality.probs().array() >= 0.0).all());
  }
}

TEST(Reduce, AbsorbsIdenticalMarginals) {
  const std::vector<TrajectoryComponentd> in{unit_component(0.5, 0.0), unit_component(0.4, 0.0)};
  ReductionConfig cfg;
  const auto out = reduce_components(in, cfg);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].weight(), 0.9);
  EXPECT_TRUE(out[0].mean() == in[0].mean());
}

TEST(Reduce, AllBelowPruneThresholdIsEmpty) {
  const std::vector<TrajectoryComponentd> in{unit_component(5e-5), unit_component(1e-4, 9.0)};
  EXPECT_TRUE(reduce_components(in, ReductionConfig{}).empty());
}

TEST(Reduce, DistantComponentsStaySeparate) {
  const std::vector<TrajectoryComponentd> in{unit_component(0.5, 0.0), unit_component(0.4, 2.5)};
  EXPECT_EQ(reduce_components(in, ReductionConfig{}).size(), 2u);
  const std::vector<TrajectoryComponentd> near{unit_component(0.5, 0.0), unit_component(0.4, 2.0)};
  EXPECT_EQ(reduce_components(near, ReductionConfig{}).size(), 1u);
}

TEST(Reduce, CapKeepsHeaviest) {
  std::vector<TrajectoryComponentd> in;
  for (int j = 0; j < 40; ++j) in.push_back(unit_component(0.01 * (j + 1), 10.0 * j));
  const auto out = reduce_components(in, ReductionConfig{});
  ASSERT_EQ(out.size(), 30u);
  EXPECT_DOUBLE_EQ(out.front().weight(), 0.40);
  EXPECT_DOUBLE_EQ(out.back().weight(), 0.11);
}

TEST(Reduce, NeverIncreasesMassAndKeepsSurvivors) {
  std::mt19937_64 rng(36);
  for (int t = 0; t < 30; ++t) {
    const auto s = random_tphd_state(rng, 2 + t % 40);
    std::vector<std::size_t> origin;
    const auto out = reduce_components(s.phd.components, ReductionConfig{}, &origin);
    double before = 0.0, after = 0.0;
    for (const auto& c : s.phd.components) before += c.weight();
    for (const auto& c : out) after += c.weight();
    EXPECT_LE(after, before * (1.0 + 1e-15));
    ASSERT_EQ(origin.size(), out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_TRUE(out[i].mean() == s.phd.components[origin[i]].mean());
      EXPECT_TRUE(out[i].cov() == s.phd.components[origin[i]].cov());
      EXPECT_EQ(out[i].birth_time(), s.phd.components[origin[i]].birth_time());
    }
  }
}

TEST(ReductionConfig, RejectsInvalid) {
  ReductionConfig c;
  c.lscan = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ReductionConfig{};
  c.max_components = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ReductionConfig{};
  c.prune_threshold = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Estimate, TphdRoundsMass) {
  TphdState s;
  s.phd.time = 1;
  for (double w : {0.6, 0.3, 0.2}) s.phd.components.push_back(unit_component(w, 10.0 * w));
  EXPECT_EQ(estimate_count_tphd(s), 1);
  const auto est = estimate_tphd(s);
  ASSERT_EQ(est.size(), 1u);
  EXPECT_DOUBLE_EQ(est[0].state_at(1)(0), 6.0);

  s.phd.components = {unit_component(0.9), unit_component(0.8, 5.0)};
  EXPECT_EQ(estimate_count_tphd(s), 2);
}

TEST(Estimate, TcphdUsesCardinalityMode) {
  TcphdState s;
  s.phd.time = 1;
  for (double w : {0.2, 0.7, 0.5}) s.phd.components.push_back(unit_component(w, 10.0 * w));
  s.cardinality = CardinalityPmf::delta(2);
  const auto est = estimate_tcphd(s);
  ASSERT_EQ(est.size(), 2u);
  EXPECT_DOUBLE_EQ(est[0].state_at(1)(0), 7.0);
  EXPECT_DOUBLE_EQ(est[1].state_at(1)(0), 5.0);
  s.cardinality = CardinalityPmf::delta(9);
  EXPECT_EQ(estimate_count_tcphd(s), 3);
}

TEST(FilterKindNames, RoundTrip) {
  for (auto k : {FilterKind::Tphd, FilterKind::Tcphd, FilterKind::TaggedPhd, FilterKind::TaggedCphd}) {
    EXPECT_EQ(filter_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(filter_kind_from_string("kalman"), ConfigError);
}

TEST(Tagged, OneEstimatePerTag) {
  // Two targets inside one component's absorption region: the merged
  // component carries a single tag, so at most one estimate is produced.
  TaggedState s;
  s.phd.time = 1;
  s.phd.components.push_back(unit_component(1.0, 0.0));
  s.tags.push_back(s.next_tag++);
  const Measurements z{Eigen::VectorXd::Constant(1, 0.2), Eigen::VectorXd::Constant(1, -0.2)};
  const auto out = tagged_phd_step(s, z, scalar_models(1.0, 1.0), BirthModel{}, scalar_clutter(0.01),
                                   ReductionConfig{});
  std::set<std::uint64_t> tags(out.state.tags.begin(), out.state.tags.end());
  EXPECT_EQ(tags.size(), out.state.tags.size());
  EXPECT_LE(out.estimates.size(), 1u);
}

TEST(Tagged, TagSurvivesMissedDetection) {
  TaggedState s;
  s.phd.time = 1;
  s.phd.components.push_back(unit_component(1.0, 0.0));
  s.tags.push_back(s.next_tag++);
  const auto out = tagged_phd_step(s, {}, scalar_models(0.99, 0.9), BirthModel{}, scalar_clutter(1.0),
                                   ReductionConfig{});
  ASSERT_EQ(out.state.tags.size(), 1u);
  EXPECT_EQ(out.state.tags[0], 1u);
}

TEST(Tagged, SeparatedTargetsNeverSwitch) {
  ScenarioConfig sc;
  sc.n_steps = 100;
  sc.models = constant_velocity_2d(1.0, 0.01, 1.0, 0.99, 1.0);
  const Eigen::MatrixXd bcov = Eigen::Vector4d(25.0, 1.0, 25.0, 1.0).asDiagonal();
  sc.birth.components.push_back({0.1, Eigen::Vector4d(100.0, 1.0, 100.0, 1.0), bcov});
  sc.birth.components.push_back({0.1, Eigen::Vector4d(900.0, -1.0, 900.0, -1.0), bcov});
  sc.clutter.rate = 0.0;
  sc.clutter.region.lower = Eigen::Vector2d(0.0, 0.0);
  sc.clutter.region.upper = Eigen::Vector2d(1000.0, 1000.0);
  sc.script = {ScriptedTrack{1, 100, Eigen::VectorXd(Eigen::Vector4d(100.0, 1.0, 100.0, 1.0)), std::nullopt, 0},
               ScriptedTrack{1, 100, Eigen::VectorXd(Eigen::Vector4d(900.0, -1.0, 900.0, -1.0)), std::nullopt, 1}};
  Rng truth_rng = make_rng(5, 0, Stream::Truth);
  const auto truth = generate_truth(sc, truth_rng);
  Rng meas_rng = make_rng(5, 0, Stream::Measurements);
  for (auto kind : {FilterKind::TaggedPhd, FilterKind::TaggedCphd}) {
    FilterRunner runner(kind, sc.models, sc.birth, sc.clutter, ReductionConfig{});
    Rng mr = meas_rng;
    FilterStep step;
    for (int k = 1; k <= sc.n_steps; ++k) step = runner.step(generate_measurements(truth, sc, k, mr));
    MetricConfig mc;
    const auto d = trajectory_metric(alive_at(truth, 100), step.estimates, mc, 100);
    EXPECT_EQ(d.switches, 0.0) << to_string(kind);
  }
}

TEST(LscanInvariance, WeightsAndCountsIndependentOfWindow) {
  ScenarioConfig sc = four_target_scenario();
  sc.n_steps = 40;
  for (auto& t : sc.script) t.death = std::min(t.death, sc.n_steps);
  Rng truth_rng = make_rng(9, 0, Stream::Truth);
  const auto truth = generate_truth(sc, truth_rng);
  Rng meas_rng = make_rng(9, 0, Stream::Measurements);
  std::vector<Measurements> zs;
  for (int k = 1; k <= sc.n_steps; ++k) zs.push_back(generate_measurements(truth, sc, k, meas_rng));

  for (auto kind : {FilterKind::Tphd, FilterKind::Tcphd}) {
    std::vector<FilterRunner> runners;
    for (int L : {1, 2, 5, 10}) {
      ReductionConfig rc;
      rc.lscan = L;
      runners.emplace_back(kind, sc.models, sc.birth, sc.clutter, rc);
    }
    for (const auto& z : zs) {
      std::vector<FilterStep> steps;
      for (auto& r : runners) steps.push_back(r.step(z));
      const auto& ref = runners[0].phd().components;
      for (std::size_t i = 1; i < runners.size(); ++i) {
        EXPECT_EQ(steps[i].n_hat, steps[0].n_hat);
        const auto& other = runners[i].phd().components;
        ASSERT_EQ(other.size(), ref.size());
        for (std::size_t j = 0; j < ref.size(); ++j) {
          EXPECT_LT(testutil::rel_err(other[j].weight(), ref[j].weight()), 1e-9);
          EXPECT_EQ(other[j].birth_time(), ref[j].birth_time());
        }
      }
    }
  }
}

TEST(ReferenceFilters, OneScanTphdMatchesGmPhd) {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto eq = oracle::one_scan_equivalence(seed, false);
    EXPECT_TRUE(eq.structure_ok) << "seed " << seed << ": " << eq.detail;
    EXPECT_LT(eq.max_rel, 1e-9) << "seed " << seed;
  }
}

TEST(ReferenceFilters, OneScanTcphdMatchesGmCphd) {
  for (std::uint64_t seed = 200; seed < 210; ++seed) {
    const auto eq = oracle::one_scan_equivalence(seed, true);
    EXPECT_TRUE(eq.structure_ok) << "seed " << seed << ": " << eq.detail;
    EXPECT_LT(eq.max_rel, 1e-9) << "seed " << seed;
  }
}
