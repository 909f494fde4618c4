#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles/trajectory_metric_brute.hpp"
#include "test_util.hpp"
#include "trajphd/errors.hpp"
#include "trajphd/metrics.hpp"

using namespace trajphd;

namespace {

MetricConfig whole_state(double p = 2.0, double c = 10.0, double gamma = 1.0) {
  MetricConfig cfg;
  cfg.p = p;
  cfg.c = c;
  cfg.gamma = gamma;
  cfg.position_rows = {};
  return cfg;
}

Eigen::VectorXd pt(double x, double y) { return Eigen::Vector2d(x, y); }

Trajectory line(int birth, int length, double x0, double y, double vx = 1.0) {
  Trajectory t;
  t.birth_time = birth;
  t.states.resize(2, length);
  for (int s = 0; s < length; ++s) t.states.col(s) = pt(x0 + vx * s, y);
  return t;
}

/// Random track over steps 1..T with a contiguous lifetime, optionally with
/// gaps (as produced by the tag-based track stores).
Trajectory random_track(int T, bool gaps, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> step(1, T);
  int a = step(rng), b = step(rng);
  if (a > b) std::swap(a, b);
  std::uniform_real_distribution<double> u(0.0, 12.0);
  Trajectory t;
  for (int k = a; k <= b; ++k) {
    if (gaps && k > a && k < b && u(rng) < 3.0) continue;
    t.append(k, pt(u(rng), u(rng)));
  }
  return t;
}

oracle::Tracks to_tracks(const TrajectorySet& set, int T) {
  oracle::Tracks out;
  for (const auto& t : set) {
    std::vector<Eigen::VectorXd> row(static_cast<std::size_t>(T));
    for (int k = 1; k <= T; ++k) {
      if (t.exists_at(k)) row[k - 1] = t.state_at(k);
    }
    out.push_back(row);
  }
  return out;
}

void expect_decomposition(const MetricBreakdown& b, double p) {
  EXPECT_LT(testutil::rel_err(std::pow(b.total, p), b.total_pow(), 1e-300), 1e-9);
}

}  // namespace

TEST(Gospa, Examples) {
  const MetricConfig cfg = whole_state();
  EXPECT_EQ(gospa({}, {}, cfg).total, 0.0);
  const auto one = gospa({pt(1, 2)}, {}, cfg);
  EXPECT_NEAR(one.total, 10.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(one.total, 7.0711, 5e-5);
  EXPECT_DOUBLE_EQ(one.missed, 50.0);
  const PointSet x{pt(0, 0), pt(5, 5), pt(-3, 2)};
  EXPECT_EQ(gospa(x, x, cfg).total, 0.0);
  const auto b = gospa({pt(0, 0), pt(100, 0)}, {pt(3, 4)}, cfg);
  EXPECT_DOUBLE_EQ(b.localization, 25.0);
  EXPECT_DOUBLE_EQ(b.missed, 50.0);
  EXPECT_DOUBLE_EQ(b.false_targets, 0.0);
  EXPECT_DOUBLE_EQ(b.switches, 0.0);
}

TEST(Ospa, Examples) {
  const MetricConfig cfg = whole_state();
  EXPECT_DOUBLE_EQ(ospa({pt(1, 1)}, {}, cfg), 10.0);
  EXPECT_DOUBLE_EQ(ospa({}, {}, cfg), 0.0);
  const PointSet x{pt(0, 0), pt(5, 5)};
  EXPECT_DOUBLE_EQ(ospa(x, x, cfg), 0.0);
  EXPECT_NEAR(ospa({pt(0, 0)}, {pt(3, 0)}, cfg), 3.0, 1e-12);
}

TEST(SetMetrics, SymmetricAndIdentity) {
  std::mt19937_64 rng(41);
  const MetricConfig cfg = whole_state();
  for (int t = 0; t < 100; ++t) {
    PointSet x, y;
    for (int i = 0; i < t % 5; ++i) x.push_back(testutil::random_vector(2, rng, 8.0));
    for (int i = 0; i < (t / 5) % 4; ++i) y.push_back(testutil::random_vector(2, rng, 8.0));
    EXPECT_NEAR(gospa(x, y, cfg).total, gospa(y, x, cfg).total, 1e-12);
    EXPECT_NEAR(ospa(x, y, cfg), ospa(y, x, cfg), 1e-12);
    expect_decomposition(gospa(x, y, cfg), 2.0);
    PointSet shuffled = x;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_LT(gospa(x, shuffled, cfg).total, 1e-12);
    if (x.size() != y.size()) EXPECT_GT(gospa(x, y, cfg).total, 0.0);
  }
}

TEST(MetricConfig, RejectsInvalid) {
  MetricConfig c;
  c.p = 0.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = MetricConfig{};
  c.c = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = MetricConfig{};
  c.gamma = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TrajectoryMetric, IdenticalSetsCostNothing) {
  const TrajectorySet x{line(1, 10, 0, 0), line(3, 5, 0, 4)};
  const auto d = trajectory_metric(x, x, whole_state(), 10);
  EXPECT_EQ(d.localization, 0.0);
  EXPECT_EQ(d.missed, 0.0);
  EXPECT_EQ(d.false_targets, 0.0);
  EXPECT_EQ(d.switches, 0.0);
  EXPECT_EQ(d.total, 0.0);
}

TEST(TrajectoryMetric, EmptyEstimateMissesEveryStep) {
  const auto d = trajectory_metric({line(1, 10, 0, 0)}, {}, whole_state(), 10);
  EXPECT_DOUBLE_EQ(d.localization, 0.0);
  EXPECT_DOUBLE_EQ(d.missed, 500.0);
  EXPECT_DOUBLE_EQ(d.false_targets, 0.0);
  EXPECT_DOUBLE_EQ(d.switches, 0.0);
  expect_decomposition(d, 2.0);
}

TEST(TrajectoryMetric, SwappedParallelTracks) {
  const TrajectorySet truth{line(1, 10, 0, 0), line(1, 10, 0, 5)};
  Trajectory a = line(1, 10, 0, 0), b = line(1, 10, 0, 5);
  a.states.rightCols(5).swap(b.states.rightCols(5));
  const auto d = trajectory_metric(truth, {a, b}, whole_state(), 10);
  EXPECT_DOUBLE_EQ(d.localization, 0.0);
  EXPECT_DOUBLE_EQ(d.missed, 0.0);
  EXPECT_DOUBLE_EQ(d.false_targets, 0.0);
  // Each truth track changes partner once: gamma^p per change.
  EXPECT_DOUBLE_EQ(d.switches, 2.0);

  const auto brute = oracle::trajectory_metric_brute(to_tracks(truth, 10), to_tracks({a, b}, 10), 10, 2.0,
                                                     10.0, 1.0);
  EXPECT_DOUBLE_EQ(d.total_pow(), brute);
}

TEST(TrajectoryMetric, SingleEstimateHandover) {
  // One estimate follows truth A, then truth B: one change of partner.
  const TrajectorySet truth{line(1, 6, 0, 0), line(1, 6, 0, 5)};
  Trajectory e = line(1, 6, 0, 0);
  for (int s = 3; s < 6; ++s) e.states.col(s) = truth[1].states.col(s);
  const auto d = trajectory_metric(truth, {e}, whole_state(), 6);
  EXPECT_DOUBLE_EQ(d.switches, 1.0);
  EXPECT_DOUBLE_EQ(d.localization, 0.0);
  EXPECT_DOUBLE_EQ(d.missed, 6 * 50.0);
}

TEST(TrajectoryMetric, MatchesBruteForce) {
  std::mt19937_64 rng(42);
  const double gammas[] = {0.0, 1.0, 3.0, 1e3};
  for (int t = 0; t < 120; ++t) {
    const int T = 3 + t % 3;
    const bool gaps = t % 2 == 1;
    TrajectorySet x, y;
    for (int i = 0; i < 1 + t % 3; ++i) x.push_back(random_track(T, false, rng));
    for (int i = 0; i < 1 + (t / 3) % 3; ++i) y.push_back(random_track(T, gaps, rng));
    const double p = t % 5 == 0 ? 1.0 : 2.0;
    const double gamma = gammas[t % 4];
    MetricConfig cfg = whole_state(p, 10.0, gamma);
    const double ref = oracle::trajectory_metric_brute(to_tracks(x, T), to_tracks(y, T), T, p, 10.0, gamma);
    const auto d = trajectory_metric(x, y, cfg, T);
    EXPECT_LT(testutil::rel_err(d.total_pow(), ref, 1e-300), 1e-9) << "case " << t;
    expect_decomposition(d, p);
    cfg.switch_free_shortcut = false;
    EXPECT_LT(testutil::rel_err(trajectory_metric(x, y, cfg, T).total_pow(), ref, 1e-300), 1e-9) << "case " << t;
  }
}

TEST(TrajectoryMetric, ZeroSwitchPenaltyEqualsSummedGospa) {
  std::mt19937_64 rng(43);
  for (int t = 0; t < 50; ++t) {
    const int T = 6;
    TrajectorySet x, y;
    for (int i = 0; i < 2; ++i) x.push_back(random_track(T, false, rng));
    for (int i = 0; i < 2 + t % 2; ++i) y.push_back(random_track(T, true, rng));
    const MetricConfig cfg = whole_state(2.0, 10.0, 0.0);
    const auto d = trajectory_metric(x, y, cfg, T);
    const auto g = gospa_over_time(x, y, cfg, T);
    EXPECT_LT(testutil::rel_err(d.total_pow(), g.total_pow(), 1e-300), 1e-12);
  }
}

TEST(TrajectoryMetric, HugeSwitchPenaltyForcesConstantAssignment) {
  const TrajectorySet truth{line(1, 10, 0, 0), line(1, 10, 0, 5)};
  Trajectory a = line(1, 10, 0, 0), b = line(1, 10, 0, 5);
  a.states.rightCols(5).swap(b.states.rightCols(5));
  const auto d = trajectory_metric(truth, {a, b}, whole_state(2.0, 10.0, 1e6), 10);
  EXPECT_EQ(d.switches, 0.0);
  // Five steps at distance 5 for both pairs.
  EXPECT_DOUBLE_EQ(d.localization, 2 * 5 * 25.0);
}

TEST(TrajectoryMetric, PositionRowsSelectCompared) {
  Trajectory t;
  t.append(1, Eigen::Vector4d(0, 100, 0, 100));
  Trajectory e;
  e.append(1, Eigen::Vector4d(3, -50, 4, 7));
  const auto d = trajectory_metric({t}, {e}, MetricConfig{}, 1);
  EXPECT_DOUBLE_EQ(d.localization, 25.0);
}

TEST(TrajectoryMetric, IntractableAssignmentSpaceThrows) {
  std::mt19937_64 rng(44);
  TrajectorySet x, y;
  for (int i = 0; i < 4; ++i) x.push_back(random_track(5, false, rng));
  for (int i = 0; i < 4; ++i) y.push_back(random_track(5, false, rng));
  MetricConfig cfg = whole_state();
  cfg.max_dp_states = 10;
  cfg.switch_free_shortcut = false;
  EXPECT_THROW(trajectory_metric(x, y, cfg, 5), MetricIntractable);
}

TEST(OverTime, SumsPerStepCosts) {
  const TrajectorySet truth{line(1, 4, 0, 0)};
  const TrajectorySet est{line(2, 3, 1, 3)};
  const MetricConfig cfg = whole_state();
  const auto g = gospa_over_time(truth, est, cfg, 4);
  EXPECT_DOUBLE_EQ(g.missed, 50.0);
  EXPECT_DOUBLE_EQ(g.localization, 3 * 9.0);
  EXPECT_DOUBLE_EQ(ospa_pow_over_time(truth, est, cfg, 4), 100.0 + 3 * 9.0);
}

TEST(Rms, Examples) {
  EXPECT_DOUBLE_EQ(rms_over_runs({4.0}, 1), 2.0);
  EXPECT_DOUBLE_EQ(rms_over_time(std::vector<double>(7, std::sqrt(M_E))), std::sqrt(M_E));
  EXPECT_DOUBLE_EQ(rms_over_runs({1.0, 3.0}, 2), 1.0);
  EXPECT_THROW(rms_over_runs({}, 1), ConfigError);
}
