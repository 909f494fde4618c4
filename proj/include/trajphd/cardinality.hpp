#pragma once

// Cardinality distributions, elementary symmetric functions and the
// cardinality factors of the (trajectory) CPHD update.

#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>

#include "trajphd/errors.hpp"

namespace trajphd {

inline constexpr int kDefaultMaxCardinality = 100;

/// Probability mass function over the number of objects, supported on
/// {0, ..., n_max}. Always normalized; mass cut off by truncation is kept
/// in `lost_mass()` for diagnostics.
class CardinalityPmf {
 public:
  CardinalityPmf() : probs_(Eigen::VectorXd::Ones(1)) {}
  /// Normalizes `probs`; throws ConfigError on negative, non-finite or
  /// all-zero input.
  explicit CardinalityPmf(Eigen::VectorXd probs, double lost_mass = 0.0);

  static CardinalityPmf delta(int n, int n_max = kDefaultMaxCardinality);
  /// Poisson(rate) truncated to {0, ..., n_max} and renormalized.
  static CardinalityPmf poisson(double rate, int n_max = kDefaultMaxCardinality);

  int n_max() const { return static_cast<int>(probs_.size()) - 1; }
  const Eigen::VectorXd& probs() const { return probs_; }
  double operator()(int n) const { return n >= 0 && n <= n_max() ? probs_(n) : 0.0; }
  double log_prob(int n) const;
  double mean() const;
  /// Mode; ties resolve to the smallest n.
  int argmax() const;
  double lost_mass() const { return lost_mass_; }

 private:
  Eigen::VectorXd probs_;
  double lost_mass_ = 0.0;
};

/// Distribution of the clutter count: closed-form Poisson or an explicit
/// PMF (zero beyond its support).
class CountDistribution {
 public:
  static CountDistribution poisson(double rate);
  static CountDistribution from_pmf(CardinalityPmf pmf);

  double log_prob(int n) const;
  double prob(int n) const { return std::exp(log_prob(n)); }
  double mean() const;
  bool is_poisson() const { return !pmf_.has_value(); }
  double rate() const { return rate_; }
  const std::optional<CardinalityPmf>& pmf() const { return pmf_; }

 private:
  double rate_ = 0.0;
  std::optional<CardinalityPmf> pmf_;
};

/// Elementary symmetric functions e_0, ..., e_n of the input multiset,
/// computed by the one-pass recurrence. e_0 = 1 even for empty input.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> esf(
    const Eigen::MatrixBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = values.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n + 1);
  e(0) = Scalar(1);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Scalar v = values(k);
    for (Eigen::Index j = k + 1; j >= 1; --j) e(j) += v * e(j - 1);
  }
  return e;
}

using EsfTable = Eigen::VectorXd;

/// Cardinality prediction with constant survival: binomial thinning of
/// `prior` by p_S convolved with `birth`, truncated to n_max.
CardinalityPmf predict_cardinality(const CardinalityPmf& prior, double p_s,
                                   const CardinalityPmf& birth,
                                   int n_max = kDefaultMaxCardinality);

/// log Psi^u(n), n = 0..n_max, for the GM (T)CPHD update, given the ESF
/// table of Lambda(w, Z) (its length fixes |Z|) and the total predicted
/// weight <1, w>. Entries that are exactly zero come back as -inf.
Eigen::VectorXd log_psi_factor(int u, double total_weight, const EsfTable& esf_of_lambda,
                               const CountDistribution& clutter, double p_d, int n_max);

/// Psi^u[w, Z](n) from the mixture weights, the per-(component,
/// measurement) likelihoods q_j(z) (J x |Z|) and the clutter spatial
/// density evaluated at each measurement.
Eigen::VectorXd psi_factor(int u, const Eigen::VectorXd& weights,
                           const Eigen::MatrixXd& likelihoods,
                           const Eigen::VectorXd& clutter_density, const CountDistribution& clutter,
                           double p_d, int n_max = kDefaultMaxCardinality);

/// Lambda(w, Z) = { p_D / c(z) * w^T q(z) }.
Eigen::VectorXd detection_ratios(const Eigen::VectorXd& weights, const Eigen::MatrixXd& likelihoods,
                                 const Eigen::VectorXd& clutter_density, double p_d);

/// Posterior cardinality proportional to psi0(n) * prior(n).
CardinalityPmf update_cardinality(const CardinalityPmf& prior, const Eigen::VectorXd& psi0);
CardinalityPmf update_cardinality_log(const CardinalityPmf& prior, const Eigen::VectorXd& log_psi0);

/// log <a, rho> with a given in log domain.
double log_inner(const Eigen::VectorXd& log_a, const CardinalityPmf& rho);

}  // namespace trajphd
