#include "trajphd/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace trajphd {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::size_t draw_index(const std::vector<double>& weights, Rng& rng) {
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return dist(rng);
}

int draw_count(const CountDistribution& count, Rng& rng) {
  if (count.is_poisson()) {
    if (count.rate() == 0.0) return 0;
    std::poisson_distribution<int> dist(count.rate());
    return dist(rng);
  }
  const auto& p = count.pmf()->probs();
  std::discrete_distribution<int> dist(p.data(), p.data() + p.size());
  return dist(rng);
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t run, Stream stream) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ run);
  s = splitmix64(s ^ static_cast<std::uint64_t>(stream));
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
  return Rng(seq);
}

std::string rng_description() {
  return "std::mt19937_64 seeded by std::seed_seq over the two 32-bit halves of "
         "splitmix64(splitmix64(splitmix64(seed) ^ run) ^ stream), streams truth=1, "
         "measurements=2, sampler=3";
}

Eigen::VectorXd sample_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd white(mean.size());
  for (Eigen::Index i = 0; i < white.size(); ++i) white(i) = normal(rng);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return mean + es.eigenvectors() * root.asDiagonal() * white;
}

void ScenarioConfig::validate() const {
  if (n_steps < 1) throw ConfigError("scenario needs at least one step");
  models.validate();
  birth.validate(models.state_dim());
  clutter.validate();
  if (clutter.region.lower.size() != models.meas_dim()) {
    throw ConfigError("clutter region dimension must match the measurement dimension");
  }
  for (const auto& t : script) {
    if (t.birth < 1 || t.death > n_steps || t.birth > t.death) {
      throw ConfigError("scripted track lifetime outside [1, n_steps]");
    }
    if (t.initial_state && t.initial_state->size() != models.state_dim()) {
      throw ConfigError("scripted initial state has wrong dimension");
    }
    if (t.initial_cov && (t.initial_cov->rows() != models.state_dim() ||
                          t.initial_cov->cols() != models.state_dim() ||
                          !is_symmetric_psd(*t.initial_cov))) {
      throw ConfigError("scripted initial covariance must be symmetric PSD of state dimension");
    }
    if (!t.initial_state &&
        (t.birth_component < 0 ||
         t.birth_component >= static_cast<int>(birth.components.size()))) {
      throw ConfigError("scripted track refers to a missing birth component");
    }
  }
}

LinearModelsd constant_velocity_2d(double tau, double q, double sigma2, double p_s, double p_d) {
  Eigen::Matrix2d f;
  f << 1.0, tau, 0.0, 1.0;
  Eigen::Matrix2d qb;
  qb << tau * tau * tau / 3.0, tau * tau / 2.0, tau * tau / 2.0, tau;
  LinearModelsd m;
  m.F = Eigen::MatrixXd::Zero(4, 4);
  m.F.topLeftCorner(2, 2) = f;
  m.F.bottomRightCorner(2, 2) = f;
  m.Q = Eigen::MatrixXd::Zero(4, 4);
  m.Q.topLeftCorner(2, 2) = q * qb;
  m.Q.bottomRightCorner(2, 2) = q * qb;
  m.H = Eigen::MatrixXd::Zero(2, 4);
  m.H(0, 0) = 1.0;
  m.H(1, 2) = 1.0;
  m.R = sigma2 * Eigen::MatrixXd::Identity(2, 2);
  m.p_s = p_s;
  m.p_d = p_d;
  return m;
}

ScenarioConfig four_target_scenario() {
  ScenarioConfig cfg;
  cfg.n_steps = 100;
  cfg.models = constant_velocity_2d(0.5, 3.24, 4.0, 0.99, 0.9);

  const Eigen::Vector4d birth_var(225.0, 100.0, 225.0, 100.0);
  const Eigen::MatrixXd birth_cov = birth_var.asDiagonal();
  for (const auto& m : {Eigen::Vector4d(85.0, 0.0, 140.0, 0.0), Eigen::Vector4d(-5.0, 0.0, 220.0, 0.0),
                        Eigen::Vector4d(7.0, 0.0, 50.0, 0.0)}) {
    cfg.birth.components.push_back(BirthComponent{0.1, m, birth_cov});
  }

  cfg.clutter.rate = 50.0;
  cfg.clutter.region.lower = Eigen::Vector2d(0.0, 0.0);
  cfg.clutter.region.upper = Eigen::Vector2d(2000.0, 2000.0);

  // The two targets born at step 1 start close together: positions at the
  // first birth mean offset by 5 along x, velocities drawn from that
  // component's velocity variance.
  const Eigen::MatrixXd velocity_cov = Eigen::Vector4d(0.0, 100.0, 0.0, 100.0).asDiagonal();
  cfg.truth_mode = TruthMode::Scripted;
  cfg.script = {
      ScriptedTrack{1, 79, Eigen::VectorXd(Eigen::Vector4d(80.0, 0.0, 140.0, 0.0)), velocity_cov, 0},
      ScriptedTrack{1, 79, Eigen::VectorXd(Eigen::Vector4d(90.0, 0.0, 140.0, 0.0)), velocity_cov, 0},
      ScriptedTrack{5, 69, std::nullopt, std::nullopt, 1},
      ScriptedTrack{10, 94, std::nullopt, std::nullopt, 2},
  };
  cfg.seed = 1;
  return cfg;
}

TrajectorySet generate_truth(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  const auto& F = config.models.F;
  const auto& Q = config.models.Q;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(config.models.state_dim());
  TrajectorySet truth;

  auto propagate = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return F * x + sample_gaussian(zero, Q, rng);
  };

  if (config.truth_mode == TruthMode::Scripted) {
    for (const auto& t : config.script) {
      const BirthComponent* comp =
          t.initial_state ? nullptr : &config.birth.components[t.birth_component];
      const Eigen::VectorXd& mean = comp ? comp->mean : *t.initial_state;
      Eigen::VectorXd x = mean;
      if (t.initial_cov) {
        x = sample_gaussian(mean, *t.initial_cov, rng);
      } else if (comp) {
        x = sample_gaussian(mean, comp->cov, rng);
      }
      Trajectory traj;
      traj.birth_time = t.birth;
      traj.states.resize(x.size(), t.death - t.birth + 1);
      for (int s = 0; s < traj.duration(); ++s) {
        if (s > 0) x = propagate(x);
        traj.states.col(s) = x;
      }
      truth.push_back(std::move(traj));
    }
    return truth;
  }

  // Sampled: survival coin flips and Poisson births at every step.
  std::vector<std::size_t> alive;
  std::bernoulli_distribution survive(config.models.p_s);
  std::vector<double> birth_weights;
  for (const auto& b : config.birth.components) birth_weights.push_back(b.weight);
  const double birth_rate = config.birth.total_weight();

  for (const auto& x0 : config.initial_targets) {
    truth.push_back(Trajectory{1, x0, {}});
    alive.push_back(truth.size() - 1);
  }
  for (int k = 1; k <= config.n_steps; ++k) {
    if (k > 1) {
      std::vector<std::size_t> still;
      for (std::size_t idx : alive) {
        if (!survive(rng)) continue;
        Trajectory& tr = truth[idx];
        tr.append(k, propagate(tr.states.col(tr.duration() - 1)));
        still.push_back(idx);
      }
      alive = std::move(still);
    }
    const int n_birth =
        birth_rate > 0 ? std::poisson_distribution<int>(birth_rate)(rng) : 0;
    for (int b = 0; b < n_birth; ++b) {
      const auto& comp = config.birth.components[draw_index(birth_weights, rng)];
      truth.push_back(Trajectory{k, sample_gaussian(comp.mean, comp.cov, rng), {}});
      alive.push_back(truth.size() - 1);
    }
  }
  return truth;
}

TrajectorySet generate_truth(const ScenarioConfig& config) {
  Rng rng = make_rng(config.seed, 0, Stream::Truth);
  return generate_truth(config, rng);
}

Measurements generate_measurements(const TrajectorySet& truth, const ScenarioConfig& config, int k,
                                   Rng& rng) {
  const auto& models = config.models;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(models.meas_dim());
  std::bernoulli_distribution detect(models.p_d);
  Measurements z;
  for (const auto& t : truth) {
    if (!t.exists_at(k)) continue;
    if (!detect(rng)) continue;
    z.push_back(models.H * t.state_at(k) + sample_gaussian(zero, models.R, rng));
  }

  const int n_clutter = draw_count(config.clutter.count(), rng);
  const auto& region = config.clutter.region;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 0; c < n_clutter; ++c) {
    Eigen::VectorXd p(region.lower.size());
    for (Eigen::Index d = 0; d < p.size(); ++d) {
      p(d) = region.lower(d) + unit(rng) * (region.upper(d) - region.lower(d));
    }
    z.push_back(std::move(p));
  }
  std::shuffle(z.begin(), z.end(), rng);
  return z;
}

TrajectorySet alive_at(const TrajectorySet& truth, int k) {
  TrajectorySet out;
  for (const auto& t : truth) {
    if (t.exists_at(k)) out.push_back(t.truncated_to(k));
  }
  return out;
}

TrajectorySet sample_iid_cluster(const CardinalityPmf& cardinality, const GmTrajectoryPhdd& phd,
                                 Rng& rng) {
  const double mass = expected_count(phd);
  if (std::abs(mass - cardinality.mean()) > 1e-6) {
    throw ConfigError("PHD mass does not match the cardinality mean");
  }
  TrajectorySet out;
  const auto& p = cardinality.probs();
  const int n = std::discrete_distribution<int>(p.data(), p.data() + p.size())(rng);
  if (n == 0) return out;
  if (!(mass > 0)) throw ConfigError("nonzero cardinality with an empty single-trajectory density");

  // P(t, i): mass of each (birth time, duration) class.
  std::map<std::pair<int, int>, std::vector<std::size_t>> classes;
  for (std::size_t j = 0; j < phd.components.size(); ++j) {
    const auto& c = phd.components[j];
    classes[{c.birth_time(), c.duration()}].push_back(j);
  }
  std::vector<std::pair<int, int>> keys;
  std::vector<double> class_mass;
  for (const auto& [key, members] : classes) {
    double w = 0.0;
    for (std::size_t j : members) w += phd.components[j].weight();
    keys.push_back(key);
    class_mass.push_back(w);
  }

  for (int draw = 0; draw < n; ++draw) {
    const auto& members = classes[keys[draw_index(class_mass, rng)]];
    std::vector<double> w;
    for (std::size_t j : members) w.push_back(phd.components[j].weight());
    const auto& c = phd.components[members[draw_index(w, rng)]];
    const Eigen::VectorXd x = sample_gaussian(c.mean(), c.cov(), rng);
    out.push_back(Trajectory{
        c.birth_time(),
        Eigen::Map<const Eigen::MatrixXd>(x.data(), c.state_dim(), c.duration()),
        {}});
  }
  return out;
}

}  // namespace trajphd
