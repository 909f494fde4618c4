#include "trajphd/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mixture_update.hpp"

namespace trajphd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const double* begin, const double* end, double extra = kNegInf) {
  double hi = extra;
  for (const double* p = begin; p != end; ++p) hi = std::max(hi, *p);
  if (hi == kNegInf) return kNegInf;
  double s = std::exp(extra - hi);
  for (const double* p = begin; p != end; ++p) s += std::exp(*p - hi);
  return hi + std::log(s);
}

double safe_log(double x) { return x > 0 ? std::log(x) : kNegInf; }

// log q_j(z) for every (component, measurement) pair, J x |Z|, together
// with the per-component innovation terms.
struct LikelihoodTable {
  std::vector<ComponentInnovation<double>> innovations;
  Eigen::MatrixXd log_q;
};

LikelihoodTable likelihood_table(const std::vector<TrajectoryComponentd>& prior,
                                 const Measurements& z, const LinearModelsd& models,
                                 const UpdateOptions& options) {
  LikelihoodTable t;
  t.innovations.reserve(prior.size());
  t.log_q.resize(static_cast<Eigen::Index>(prior.size()), static_cast<Eigen::Index>(z.size()));
  for (std::size_t j = 0; j < prior.size(); ++j) {
    t.innovations.emplace_back(prior[j], models);
    const auto& inn = t.innovations.back();
    for (std::size_t m = 0; m < z.size(); ++m) {
      double lq = inn.log_likelihood(z[m]);
      if (options.gate) {
        const Eigen::MatrixXd S = inn.innovation_cov();
        const Eigen::VectorXd nu = z[m] - inn.predicted_measurement();
        if (nu.dot(S.llt().solve(nu)) > *options.gate) lq = kNegInf;
      }
      t.log_q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m)) = lq;
    }
  }
  return t;
}

}  // namespace

double BirthModel::total_weight() const {
  double s = 0.0;
  for (const auto& c : components) s += c.weight;
  return s;
}

CardinalityPmf BirthModel::cardinality_pmf(int n_max) const {
  return cardinality ? *cardinality : CardinalityPmf::poisson(total_weight(), n_max);
}

void BirthModel::validate(Eigen::Index state_dim) const {
  for (const auto& c : components) {
    if (!(c.weight >= 0)) throw ConfigError("birth weights must be nonnegative");
    if (c.mean.size() != state_dim || c.cov.rows() != state_dim || c.cov.cols() != state_dim) {
      throw ConfigError("birth component has wrong dimension");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
    if (llt.info() != Eigen::Success || !c.cov.isApprox(c.cov.transpose())) {
      throw ConfigError("birth covariance must be symmetric positive definite");
    }
  }
}

void ReductionConfig::validate() const {
  if (!(prune_threshold >= 0) || !(absorb_threshold >= 0) || max_components < 1 || lscan < 1) {
    throw ConfigError("invalid reduction config");
  }
}

void ClutterModel::validate() const {
  if (!(rate >= 0)) throw ConfigError("clutter rate must be nonnegative");
  if (region.lower.size() == 0 || region.lower.size() != region.upper.size() ||
      !(region.volume() > 0) || ((region.upper - region.lower).array() <= 0).any()) {
    throw ConfigError("clutter region must have positive volume");
  }
}

namespace detail {

std::vector<TrajectoryComponentd> predict_survivors(const std::vector<TrajectoryComponentd>& in,
                                                    const LinearModelsd& models, int lscan) {
  std::vector<TrajectoryComponentd> out;
  out.reserve(in.size());
  for (const auto& c : in) out.push_back(lscan_truncate(predict_component(c, models), lscan));
  return out;
}

void append_births(std::vector<TrajectoryComponentd>& out, const BirthModel& birth, int k) {
  for (const auto& b : birth.components) {
    out.emplace_back(b.weight, k, b.mean, b.cov, b.mean.size());
  }
}

MixtureUpdate phd_update(const std::vector<TrajectoryComponentd>& prior, const Measurements& z,
                         const LinearModelsd& models, const ClutterModel& clutter,
                         const UpdateOptions& options) {
  const std::size_t J = prior.size();
  MixtureUpdate out;
  out.components.reserve(J * (1 + z.size()));
  out.parents.reserve(J * (1 + z.size()));
  for (std::size_t j = 0; j < J; ++j) {
    auto c = prior[j];
    c.set_weight((1.0 - models.p_d) * c.weight());
    out.components.push_back(std::move(c));
    out.parents.push_back(j);
  }
  if (z.empty() || J == 0) return out;

  const LikelihoodTable table = likelihood_table(prior, z, models, options);
  const double log_pd = safe_log(models.p_d);
  const double log_clutter = safe_log(clutter.rate * clutter.spatial_density());
  std::vector<double> a(J);
  for (std::size_t m = 0; m < z.size(); ++m) {
    for (std::size_t j = 0; j < J; ++j) {
      a[j] = log_pd + safe_log(prior[j].weight()) +
             table.log_q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m));
    }
    const double denom = log_sum_exp(a.data(), a.data() + J, log_clutter);
    for (std::size_t j = 0; j < J; ++j) {
      const double w = denom == kNegInf || a[j] == kNegInf ? 0.0 : std::exp(a[j] - denom);
      out.components.push_back(table.innovations[j].posterior(z[m], w));
      out.parents.push_back(j);
    }
  }
  return out;
}

MixtureUpdate cphd_update(const std::vector<TrajectoryComponentd>& prior,
                          const CardinalityPmf& cardinality, const Measurements& z,
                          const LinearModelsd& models, const ClutterModel& clutter,
                          const UpdateOptions& options) {
  const std::size_t J = prior.size();
  const std::size_t nz = z.size();
  const int n_max = cardinality.n_max();
  const CountDistribution clutter_count = clutter.count();
  const double density = clutter.spatial_density();
  const double p_d = models.p_d;

  double total_weight = 0.0;
  for (const auto& c : prior) total_weight += c.weight();
  if (!(total_weight > 0)) throw DegenerateMixture("predicted mixture weights sum to zero");

  const LikelihoodTable table = likelihood_table(prior, z, models, options);

  // Lambda(w, Z): p_D / c(z) * w^T q(z).
  Eigen::VectorXd lambda(static_cast<Eigen::Index>(nz));
  std::vector<double> a(J);
  for (std::size_t m = 0; m < nz; ++m) {
    for (std::size_t j = 0; j < J; ++j) {
      a[j] = safe_log(prior[j].weight()) +
             table.log_q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m));
    }
    const double lse = log_sum_exp(a.data(), a.data() + J);
    lambda(static_cast<Eigen::Index>(m)) = lse == kNegInf ? 0.0 : p_d / density * std::exp(lse);
  }

  const EsfTable e_all = esf(lambda);
  const Eigen::VectorXd log_psi0 = log_psi_factor(0, total_weight, e_all, clutter_count, p_d, n_max);
  const Eigen::VectorXd log_psi1 = log_psi_factor(1, total_weight, e_all, clutter_count, p_d, n_max);
  const double log_norm = log_inner(log_psi0, cardinality);
  if (log_norm == kNegInf || !std::isfinite(log_norm)) {
    throw ImpossibleMeasurement("cardinality update normalizer is zero");
  }

  MixtureUpdate out;
  out.cardinality = update_cardinality_log(cardinality, log_psi0);
  out.components.reserve(J * (1 + nz));
  out.parents.reserve(J * (1 + nz));

  const double log_miss_scale = log_inner(log_psi1, cardinality) - log_norm;
  for (std::size_t j = 0; j < J; ++j) {
    auto c = prior[j];
    c.set_weight(log_miss_scale == kNegInf ? 0.0
                                           : (1.0 - p_d) * c.weight() * std::exp(log_miss_scale));
    out.components.push_back(std::move(c));
    out.parents.push_back(j);
  }

  const double log_pd = safe_log(p_d);
  const double log_density = std::log(density);
  Eigen::VectorXd without(nz == 0 ? 0 : static_cast<Eigen::Index>(nz - 1));
  for (std::size_t m = 0; m < nz; ++m) {
    for (std::size_t r = 0, w = 0; r < nz; ++r) {
      if (r != m) without(static_cast<Eigen::Index>(w++)) = lambda(static_cast<Eigen::Index>(r));
    }
    const EsfTable e_minus = esf(without);
    const Eigen::VectorXd log_psi1_minus =
        log_psi_factor(1, total_weight, e_minus, clutter_count, p_d, n_max);
    const double log_scale = log_inner(log_psi1_minus, cardinality) - log_norm;
    for (std::size_t j = 0; j < J; ++j) {
      const double lw = log_pd + safe_log(prior[j].weight()) +
                        table.log_q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m)) +
                        log_scale - log_density;
      const double w = std::isnan(lw) || lw == kNegInf ? 0.0 : std::exp(lw);
      out.components.push_back(table.innovations[j].posterior(z[m], w));
      out.parents.push_back(j);
    }
  }
  return out;
}

}  // namespace detail

TphdState tphd_predict(const TphdState& state, const LinearModelsd& models, const BirthModel& birth,
                       int lscan) {
  TphdState out;
  out.phd.time = state.phd.time + 1;
  out.phd.components = detail::predict_survivors(state.phd.components, models, lscan);
  detail::append_births(out.phd.components, birth, out.phd.time);
  return out;
}

TphdState tphd_update(const TphdState& state, const Measurements& z, const LinearModelsd& models,
                      const ClutterModel& clutter, const UpdateOptions& options) {
  TphdState out;
  out.phd.time = state.phd.time;
  out.phd.components = detail::phd_update(state.phd.components, z, models, clutter, options).components;
  return out;
}

TcphdState tcphd_predict(const TcphdState& state, const LinearModelsd& models,
                         const BirthModel& birth, int lscan) {
  TcphdState out;
  out.phd.time = state.phd.time + 1;
  out.phd.components = detail::predict_survivors(state.phd.components, models, lscan);
  detail::append_births(out.phd.components, birth, out.phd.time);
  const int n_max = state.cardinality.n_max();
  out.cardinality = predict_cardinality(state.cardinality, models.p_s, birth.cardinality_pmf(n_max),
                                        n_max);
  return out;
}

TcphdState tcphd_update(const TcphdState& state, const Measurements& z,
                        const LinearModelsd& models, const ClutterModel& clutter,
                        const UpdateOptions& options) {
  auto upd = detail::cphd_update(state.phd.components, state.cardinality, z, models, clutter, options);
  TcphdState out;
  out.phd.time = state.phd.time;
  out.phd.components = std::move(upd.components);
  out.cardinality = std::move(*upd.cardinality);
  return out;
}

std::vector<TrajectoryComponentd> reduce_components(const std::vector<TrajectoryComponentd>& in,
                                                    const ReductionConfig& config,
                                                    std::vector<std::size_t>* origin) {
  config.validate();
  std::vector<std::size_t> remaining;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i].weight() > config.prune_threshold) remaining.push_back(i);
  }

  std::vector<TrajectoryComponentd> out;
  std::vector<std::size_t> src;
  while (!remaining.empty()) {
    // Highest weight; ties go to the lowest index.
    std::size_t best = remaining.front();
    for (std::size_t i : remaining) {
      if (in[i].weight() > in[best].weight()) best = i;
    }
    const Eigen::VectorXd m_best = in[best].current_mean();
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(in[best].current_cov());

    double weight = 0.0;
    std::vector<std::size_t> keep;
    for (std::size_t i : remaining) {
      const Eigen::VectorXd d = in[i].current_mean() - m_best;
      if (i == best || d.dot(ldlt.solve(d)) <= config.absorb_threshold) {
        weight += in[i].weight();
      } else {
        keep.push_back(i);
      }
    }
    auto merged = in[best];
    merged.set_weight(weight);
    out.push_back(std::move(merged));
    src.push_back(best);
    remaining = std::move(keep);
  }

  if (out.size() > static_cast<std::size_t>(config.max_components)) {
    const auto top = top_components(out, static_cast<std::size_t>(config.max_components));
    std::vector<TrajectoryComponentd> capped;
    std::vector<std::size_t> capped_src;
    for (std::size_t i : top) {
      capped.push_back(out[i]);
      capped_src.push_back(src[i]);
    }
    out = std::move(capped);
    src = std::move(capped_src);
  }
  if (origin) *origin = std::move(src);
  return out;
}

TphdState reduce(const TphdState& state, const ReductionConfig& config) {
  TphdState out;
  out.phd.time = state.phd.time;
  out.phd.components = reduce_components(state.phd.components, config);
  return out;
}

TcphdState reduce(const TcphdState& state, const ReductionConfig& config) {
  TcphdState out;
  out.phd.time = state.phd.time;
  out.phd.components = reduce_components(state.phd.components, config);
  out.cardinality = state.cardinality;
  return out;
}

std::vector<std::size_t> top_components(const std::vector<TrajectoryComponentd>& components,
                                        std::size_t count) {
  std::vector<std::size_t> idx(components.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return components[a].weight() > components[b].weight();
  });
  idx.resize(std::min(count, idx.size()));
  return idx;
}

int estimate_count_tphd(const TphdState& state) {
  const double total = expected_count(state.phd);
  const long n = std::lround(total);
  return static_cast<int>(std::min<long>(n, static_cast<long>(state.phd.components.size())));
}

int estimate_count_tcphd(const TcphdState& state) {
  return std::min(state.cardinality.argmax(), static_cast<int>(state.phd.components.size()));
}

namespace {

TrajectorySet to_trajectories(const std::vector<TrajectoryComponentd>& components, int n_hat) {
  TrajectorySet out;
  for (std::size_t i : top_components(components, static_cast<std::size_t>(std::max(n_hat, 0)))) {
    out.push_back(Trajectory{components[i].birth_time(), components[i].states(), {}});
  }
  return out;
}

}  // namespace

TrajectorySet estimate_tphd(const TphdState& state) {
  return to_trajectories(state.phd.components, estimate_count_tphd(state));
}

TrajectorySet estimate_tcphd(const TcphdState& state) {
  return to_trajectories(state.phd.components, estimate_count_tcphd(state));
}

const char* to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::Tphd: return "tphd";
    case FilterKind::Tcphd: return "tcphd";
    case FilterKind::TaggedPhd: return "tagged-phd";
    case FilterKind::TaggedCphd: return "tagged-cphd";
  }
  return "unknown";
}

FilterKind filter_kind_from_string(const std::string& name) {
  if (name == "tphd") return FilterKind::Tphd;
  if (name == "tcphd") return FilterKind::Tcphd;
  if (name == "tagged-phd") return FilterKind::TaggedPhd;
  if (name == "tagged-cphd") return FilterKind::TaggedCphd;
  throw ConfigError("unknown filter kind '" + name + "'");
}

FilterRunner::FilterRunner(FilterKind kind, LinearModelsd models, BirthModel birth,
                           ClutterModel clutter, ReductionConfig config, int n_max)
    : kind_(kind),
      models_(std::move(models)),
      birth_(std::move(birth)),
      clutter_(std::move(clutter)),
      config_(config) {
  models_.validate();
  birth_.validate(models_.state_dim());
  clutter_.validate();
  config_.validate();
  tcphd_.cardinality = CardinalityPmf::delta(0, n_max);
  if (kind_ == FilterKind::TaggedCphd) tagged_ = TaggedState::cphd_variant(n_max);
}

FilterStep FilterRunner::step(const Measurements& z) {
  FilterStep out;
  switch (kind_) {
    case FilterKind::Tphd: {
      auto predicted = tphd_predict(tphd_, models_, birth_, config_.lscan);
      tphd_ = reduce(tphd_update(predicted, z, models_, clutter_), config_);
      out.n_hat = estimate_count_tphd(tphd_);
      out.estimates = estimate_tphd(tphd_);
      break;
    }
    case FilterKind::Tcphd: {
      auto predicted = tcphd_predict(tcphd_, models_, birth_, config_.lscan);
      tcphd_ = reduce(tcphd_update(predicted, z, models_, clutter_), config_);
      out.n_hat = estimate_count_tcphd(tcphd_);
      out.estimates = estimate_tcphd(tcphd_);
      break;
    }
    case FilterKind::TaggedPhd:
    case FilterKind::TaggedCphd: {
      auto result = kind_ == FilterKind::TaggedPhd
                        ? tagged_phd_step(tagged_, z, models_, birth_, clutter_, config_)
                        : tagged_cphd_step(tagged_, z, models_, birth_, clutter_, config_);
      tagged_ = std::move(result.state);
      out.n_hat = result.n_hat;
      out.estimates = std::move(result.estimates);
      break;
    }
  }
  return out;
}

int FilterRunner::time() const { return phd().time; }

const GmTrajectoryPhdd& FilterRunner::phd() const {
  switch (kind_) {
    case FilterKind::Tphd: return tphd_.phd;
    case FilterKind::Tcphd: return tcphd_.phd;
    default: return tagged_.phd;
  }
}

std::optional<CardinalityPmf> FilterRunner::cardinality() const {
  switch (kind_) {
    case FilterKind::Tcphd: return tcphd_.cardinality;
    case FilterKind::TaggedCphd: return tagged_.cardinality;
    default: return std::nullopt;
  }
}

}  // namespace trajphd
