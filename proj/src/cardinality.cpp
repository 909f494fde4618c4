#include "trajphd/cardinality.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace trajphd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& terms) {
  double hi = kNegInf;
  for (double t : terms) hi = std::max(hi, t);
  if (hi == kNegInf) return kNegInf;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - hi);
  return hi + std::log(s);
}

/// Elementwise std::exp; Eigen's vectorized exp clamps -inf to a denormal.
Eigen::VectorXd exp_of(const Eigen::VectorXd& x) {
  return x.unaryExpr([](double v) { return std::exp(v); });
}

}  // namespace

CardinalityPmf::CardinalityPmf(Eigen::VectorXd probs, double lost_mass)
    : probs_(std::move(probs)), lost_mass_(lost_mass) {
  if (probs_.size() == 0) throw ConfigError("cardinality PMF must be nonempty");
  if (!probs_.allFinite() || (probs_.array() < 0).any()) {
    throw ConfigError("cardinality PMF entries must be finite and nonnegative");
  }
  const double total = probs_.sum();
  if (!(total > 0)) throw ConfigError("cardinality PMF has zero mass");
  probs_ /= total;
}

CardinalityPmf CardinalityPmf::delta(int n, int n_max) {
  if (n < 0 || n > n_max) throw ConfigError("delta cardinality outside support");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n_max + 1);
  p(n) = 1.0;
  return CardinalityPmf(std::move(p));
}

CardinalityPmf CardinalityPmf::poisson(double rate, int n_max) {
  if (!(rate >= 0) || n_max < 0) throw ConfigError("invalid Poisson cardinality");
  Eigen::VectorXd p(n_max + 1);
  for (int n = 0; n <= n_max; ++n) {
    p(n) = rate == 0.0 ? (n == 0 ? 1.0 : 0.0)
                       : std::exp(-rate + n * std::log(rate) - std::lgamma(n + 1.0));
  }
  const double lost = std::max(0.0, 1.0 - p.sum());
  return CardinalityPmf(std::move(p), lost);
}

double CardinalityPmf::log_prob(int n) const {
  const double p = (*this)(n);
  return p > 0 ? std::log(p) : kNegInf;
}

double CardinalityPmf::mean() const {
  double m = 0.0;
  for (int n = 0; n <= n_max(); ++n) m += n * probs_(n);
  return m;
}

int CardinalityPmf::argmax() const {
  Eigen::Index best = 0;
  probs_.maxCoeff(&best);  // first maximal index
  return static_cast<int>(best);
}

CountDistribution CountDistribution::poisson(double rate) {
  if (!(rate >= 0)) throw ConfigError("clutter rate must be nonnegative");
  CountDistribution d;
  d.rate_ = rate;
  return d;
}

CountDistribution CountDistribution::from_pmf(CardinalityPmf pmf) {
  CountDistribution d;
  d.rate_ = pmf.mean();
  d.pmf_ = std::move(pmf);
  return d;
}

double CountDistribution::log_prob(int n) const {
  if (n < 0) return kNegInf;
  if (pmf_) return pmf_->log_prob(n);
  if (rate_ == 0.0) return n == 0 ? 0.0 : kNegInf;
  return -rate_ + n * std::log(rate_) - std::lgamma(n + 1.0);
}

double CountDistribution::mean() const { return rate_; }

CardinalityPmf predict_cardinality(const CardinalityPmf& prior, double p_s,
                                   const CardinalityPmf& birth, int n_max) {
  if (!(p_s >= 0 && p_s <= 1)) throw ConfigError("p_s must lie in [0, 1]");
  const int np = prior.n_max();

  // Binomial thinning: survivors(j) = sum_n C(n, j) rho(n) (1-p)^(n-j) p^j.
  std::vector<double> binom(static_cast<std::size_t>(np + 1), 0.0);
  Eigen::VectorXd survivors = Eigen::VectorXd::Zero(np + 1);
  for (int n = 0; n <= np; ++n) {
    // Pascal row n in place.
    for (int j = n; j >= 1; --j) binom[j] = j == n ? 1.0 : binom[j] + binom[j - 1];
    binom[0] = 1.0;
    const double rho = prior(n);
    if (rho == 0.0) continue;
    for (int j = 0; j <= n; ++j) {
      survivors(j) += binom[j] * rho * std::pow(1.0 - p_s, n - j) * std::pow(p_s, j);
    }
  }

  const int nb = birth.n_max();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_max + 1);
  double total = 0.0;
  for (int j = 0; j <= np; ++j) {
    if (survivors(j) == 0.0) continue;
    for (int b = 0; b <= nb; ++b) {
      const double v = survivors(j) * birth(b);
      total += v;
      if (j + b <= n_max) out(j + b) += v;
    }
  }
  const double kept = out.sum();
  return CardinalityPmf(std::move(out), std::max(0.0, total - kept));
}

Eigen::VectorXd log_psi_factor(int u, double total_weight, const EsfTable& esf_of_lambda,
                               const CountDistribution& clutter, double p_d, int n_max) {
  if (u != 0 && u != 1) throw ConfigError("psi order must be 0 or 1");
  if (!(total_weight > 0)) throw DegenerateMixture("mixture weights sum to zero");
  const int nz = static_cast<int>(esf_of_lambda.size()) - 1;
  const double log_w = std::log(total_weight);
  const double log_miss = std::log1p(-p_d);

  std::vector<double> log_e(static_cast<std::size_t>(nz + 1));
  std::vector<double> clutter_term(static_cast<std::size_t>(nz + 1));
  for (int j = 0; j <= nz; ++j) {
    log_e[j] = esf_of_lambda(j) > 0 ? std::log(esf_of_lambda(j)) : kNegInf;
    // (|Z|-j)! rho_c(|Z|-j)
    clutter_term[j] = std::lgamma(nz - j + 1.0) + clutter.log_prob(nz - j);
  }

  Eigen::VectorXd out(n_max + 1);
  std::vector<double> terms;
  for (int n = 0; n <= n_max; ++n) {
    terms.clear();
    const int upper = std::min(nz, n - u);
    for (int j = 0; j <= upper; ++j) {
      if (log_e[j] == kNegInf || clutter_term[j] == kNegInf) continue;
      const int rest = n - j - u;
      const double miss = rest == 0 ? 0.0 : (p_d >= 1.0 ? kNegInf : rest * log_miss);
      if (miss == kNegInf) continue;
      terms.push_back(clutter_term[j] + miss - (j + u) * log_w + std::lgamma(n + 1.0) -
                      std::lgamma(rest + 1.0) + log_e[j]);
    }
    out(n) = log_sum_exp(terms);
  }
  return out;
}

Eigen::VectorXd detection_ratios(const Eigen::VectorXd& weights, const Eigen::MatrixXd& likelihoods,
                                 const Eigen::VectorXd& clutter_density, double p_d) {
  if (likelihoods.rows() != weights.size() || likelihoods.cols() != clutter_density.size()) {
    throw ConfigError("likelihood matrix does not match weights and measurements");
  }
  Eigen::VectorXd lambda = likelihoods.transpose() * weights;
  return p_d * lambda.cwiseQuotient(clutter_density);
}

Eigen::VectorXd psi_factor(int u, const Eigen::VectorXd& weights,
                           const Eigen::MatrixXd& likelihoods,
                           const Eigen::VectorXd& clutter_density, const CountDistribution& clutter,
                           double p_d, int n_max) {
  if ((weights.array() < 0).any()) throw DegenerateMixture("negative mixture weight");
  const double total = weights.sum();
  if (!(total > 0)) throw DegenerateMixture("mixture weights sum to zero");
  const EsfTable e = esf(detection_ratios(weights, likelihoods, clutter_density, p_d));
  return exp_of(log_psi_factor(u, total, e, clutter, p_d, n_max));
}

double log_inner(const Eigen::VectorXd& log_a, const CardinalityPmf& rho) {
  std::vector<double> terms;
  const int n = std::min(static_cast<int>(log_a.size()) - 1, rho.n_max());
  for (int i = 0; i <= n; ++i) {
    if (rho(i) > 0 && log_a(i) != kNegInf) terms.push_back(log_a(i) + std::log(rho(i)));
  }
  return log_sum_exp(terms);
}

CardinalityPmf update_cardinality_log(const CardinalityPmf& prior, const Eigen::VectorXd& log_psi0) {
  const int n_max = prior.n_max();
  Eigen::VectorXd log_post = Eigen::VectorXd::Constant(n_max + 1, kNegInf);
  double hi = kNegInf;
  for (int n = 0; n <= std::min<int>(n_max, static_cast<int>(log_psi0.size()) - 1); ++n) {
    if (prior(n) > 0 && log_psi0(n) != kNegInf) {
      log_post(n) = log_psi0(n) + std::log(prior(n));
      hi = std::max(hi, log_post(n));
    }
  }
  if (hi == kNegInf || !std::isfinite(hi)) {
    throw ImpossibleMeasurement("cardinality update normalizer is zero");
  }
  Eigen::VectorXd post = exp_of((log_post.array() - hi).matrix());
  return CardinalityPmf(std::move(post));
}

CardinalityPmf update_cardinality(const CardinalityPmf& prior, const Eigen::VectorXd& psi0) {
  if ((psi0.array() < 0).any() || !psi0.allFinite()) {
    throw ImpossibleMeasurement("psi factor must be finite and nonnegative");
  }
  return update_cardinality_log(prior, psi0.unaryExpr([](double v) { return std::log(v); }));
}

}  // namespace trajphd
