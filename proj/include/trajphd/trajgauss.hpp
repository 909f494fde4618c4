#pragma once

// Gaussian densities over single trajectories.
//
// A trajectory component is a weighted Gaussian over the stacked state
// sequence x^{t}, ..., x^{t+i-1} of a trajectory born at time t with
// duration i. Means are stored oldest-first and covariance blocks follow
// the same order, so prediction only ever appends.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trajphd/errors.hpp"

namespace trajphd {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Linear-Gaussian single-target models with constant survival and
/// detection probabilities.
template <typename Scalar>
struct LinearModels {
  Matrix<Scalar> F;
  Matrix<Scalar> Q;
  Matrix<Scalar> H;
  Matrix<Scalar> R;
  Scalar p_s = Scalar(1);
  Scalar p_d = Scalar(1);

  Eigen::Index state_dim() const { return F.rows(); }
  Eigen::Index meas_dim() const { return H.rows(); }

  void validate() const {
    const auto nx = F.rows();
    const auto nz = H.rows();
    if (nx == 0 || F.cols() != nx || Q.rows() != nx || Q.cols() != nx || H.cols() != nx ||
        R.rows() != nz || R.cols() != nz) {
      throw ConfigError("linear models have inconsistent dimensions");
    }
    if (!(p_s >= 0 && p_s <= 1) || !(p_d >= 0 && p_d <= 1)) {
      throw ConfigError("p_s and p_d must lie in [0, 1]");
    }
    if (!Q.isApprox(Q.transpose()) || !R.isApprox(R.transpose())) {
      throw ConfigError("Q and R must be symmetric");
    }
  }
};

/// One weighted Gaussian over a trajectory (birth time, stacked mean,
/// stacked covariance). The covariance is held behind a shared immutable
/// pointer: the detection-updated copies of a component all share one
/// posterior covariance.
template <typename Scalar>
class TrajectoryComponent {
 public:
  using VectorType = Vector<Scalar>;
  using MatrixType = Matrix<Scalar>;

  TrajectoryComponent() = default;

  TrajectoryComponent(Scalar weight, int birth_time, VectorType mean, MatrixType cov,
                      Eigen::Index state_dim)
      : TrajectoryComponent(weight, birth_time, std::move(mean),
                            std::make_shared<const MatrixType>(std::move(cov)), state_dim) {}

  TrajectoryComponent(Scalar weight, int birth_time, VectorType mean,
                      std::shared_ptr<const MatrixType> cov, Eigen::Index state_dim)
      : weight_(weight),
        birth_time_(birth_time),
        state_dim_(state_dim),
        mean_(std::move(mean)),
        cov_(std::move(cov)) {
    if (state_dim_ <= 0 || mean_.size() == 0 || mean_.size() % state_dim_ != 0) {
      throw InvalidComponent("mean length " + std::to_string(mean_.size()) +
                             " is not a positive multiple of the state dimension " +
                             std::to_string(state_dim_));
    }
    if (!cov_ || cov_->rows() != mean_.size() || cov_->cols() != mean_.size()) {
      throw InvalidComponent("covariance size does not match the stacked mean");
    }
    if (!(weight_ >= 0) || !std::isfinite(weight_)) {
      throw InvalidComponent("component weight must be finite and nonnegative");
    }
    if (birth_time_ < 1) {
      throw InvalidComponent("birth time must be at least 1");
    }
  }

  Scalar weight() const { return weight_; }
  void set_weight(Scalar w) { weight_ = w; }

  int birth_time() const { return birth_time_; }
  Eigen::Index state_dim() const { return state_dim_; }
  int duration() const { return static_cast<int>(mean_.size() / state_dim_); }
  /// Time step of the last stacked state.
  int end_time() const { return birth_time_ + duration() - 1; }

  const VectorType& mean() const { return mean_; }
  const MatrixType& cov() const { return *cov_; }
  const std::shared_ptr<const MatrixType>& shared_cov() const { return cov_; }

  /// Marginal of the most recent state.
  auto current_mean() const { return mean_.tail(state_dim_); }
  auto current_cov() const { return cov_->bottomRightCorner(state_dim_, state_dim_); }

  /// Mean reshaped as an n_x by duration matrix, one column per time step.
  MatrixType states() const {
    return Eigen::Map<const MatrixType>(mean_.data(), state_dim_, duration());
  }

 private:
  Scalar weight_ = Scalar(0);
  int birth_time_ = 1;
  Eigen::Index state_dim_ = 1;
  VectorType mean_;
  std::shared_ptr<const MatrixType> cov_;
};

/// Gaussian-mixture PHD over alive trajectories at time `time`.
template <typename Scalar>
struct GmTrajectoryPhd {
  std::vector<TrajectoryComponent<Scalar>> components;
  int time = 0;
};

/// Symmetry and positive-semidefiniteness check for stacked covariances:
/// relative asymmetry at most `tol` and no eigenvalue below -tol * trace.
template <typename Scalar>
bool is_symmetric_psd(const Matrix<Scalar>& P, Scalar tol = Scalar(1e-9)) {
  if (P.rows() != P.cols()) return false;
  const Scalar scale = std::max(P.cwiseAbs().maxCoeff(), std::numeric_limits<Scalar>::min());
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
  const Matrix<Scalar> sym = Scalar(0.5) * (P + P.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(sym, Eigen::EigenvaluesOnly);
  const Scalar trace = std::max(sym.trace(), Scalar(0));
  return es.eigenvalues().minCoeff() >= -tol * std::max(trace, scale);
}

/// Full invariant check of a component (dimensions are enforced on
/// construction; this adds the covariance conditions).
template <typename Scalar>
bool is_valid(const TrajectoryComponent<Scalar>& c) {
  return c.weight() >= 0 && is_symmetric_psd<Scalar>(c.cov());
}

namespace detail {

template <typename Scalar>
void check_compatible(const TrajectoryComponent<Scalar>& c, const LinearModels<Scalar>& models) {
  if (c.state_dim() != models.state_dim()) {
    throw InvalidComponent("component state dimension " + std::to_string(c.state_dim()) +
                           " does not match model dimension " +
                           std::to_string(models.state_dim()));
  }
}

}  // namespace detail

/// Appends the predicted next state to a trajectory component. Past states
/// are kept, not integrated out; the weight is multiplied by p_S.
template <typename Scalar>
TrajectoryComponent<Scalar> predict_component(const TrajectoryComponent<Scalar>& c,
                                              const LinearModels<Scalar>& models) {
  detail::check_compatible(c, models);
  const Eigen::Index nx = c.state_dim();
  const Eigen::Index n = c.mean().size();
  const auto& P = c.cov();
  const auto& F = models.F;

  Vector<Scalar> mean(n + nx);
  mean.head(n) = c.mean();
  mean.tail(nx) = F * c.current_mean();

  // Cross term P * Fdot^T only touches the last n_x columns of P.
  const Matrix<Scalar> cross = P.rightCols(nx) * F.transpose();
  auto cov = std::make_shared<Matrix<Scalar>>(n + nx, n + nx);
  cov->topLeftCorner(n, n) = P;
  cov->topRightCorner(n, nx) = cross;
  cov->bottomLeftCorner(nx, n) = cross.transpose();
  Matrix<Scalar> last = F * cross.bottomRows(nx) + models.Q;
  cov->bottomRightCorner(nx, nx) = Scalar(0.5) * (last + last.transpose());

  return TrajectoryComponent<Scalar>(models.p_s * c.weight(), c.birth_time(), std::move(mean),
                                     std::shared_ptr<const Matrix<Scalar>>(std::move(cov)), nx);
}

/// Measurement-independent part of the Kalman update of one component.
/// Holds the predicted measurement, the Cholesky factor of the innovation
/// covariance, the gain, and the (shared) posterior covariance, so that
/// the same component can be updated against many measurements cheaply.
template <typename Scalar>
class ComponentInnovation {
 public:
  ComponentInnovation(const TrajectoryComponent<Scalar>& c, const LinearModels<Scalar>& models)
      : prior_mean_(c.mean()), birth_time_(c.birth_time()), state_dim_(c.state_dim()) {
    detail::check_compatible(c, models);
    const Eigen::Index nx = c.state_dim();
    const Eigen::Index n = c.mean().size();
    const auto& P = c.cov();
    const auto& H = models.H;

    z_pred_ = H * c.current_mean();
    // P * Hdot^T; rows outside the correlated window are exactly zero.
    Matrix<Scalar> PHt = P.rightCols(nx) * H.transpose();
    Matrix<Scalar> S = H * PHt.bottomRows(nx) + models.R;
    S = Scalar(0.5) * (S + S.transpose());
    llt_.compute(S);
    if (llt_.info() != Eigen::Success || !(llt_.rcond() >= Scalar(1e-12))) {
      throw SingularInnovation("innovation covariance is singular or ill-conditioned");
    }
    const auto& L = llt_.matrixL();
    log_norm_ = -Scalar(0.5) * static_cast<Scalar>(S.rows()) * std::log(2 * std::numbers::pi_v<Scalar>);
    for (Eigen::Index r = 0; r < S.rows(); ++r) log_norm_ -= std::log(L(r, r));

    first_row_ = 0;
    while (first_row_ < n && PHt.row(first_row_).isZero(0)) ++first_row_;
    const Eigen::Index m = n - first_row_;
    gain_ = llt_.solve(PHt.bottomRows(m).transpose()).transpose();  // rows [first_row_, n)

    auto post = std::make_shared<Matrix<Scalar>>(P);
    auto block = post->bottomRightCorner(m, m);
    block.noalias() -= gain_ * PHt.bottomRows(m).transpose();
    Matrix<Scalar> sym = Scalar(0.5) * (block + block.transpose());
    block = sym;
    posterior_cov_ = std::move(post);
  }

  const Vector<Scalar>& predicted_measurement() const { return z_pred_; }
  Matrix<Scalar> innovation_cov() const { return llt_.reconstructedMatrix(); }

  /// log N(z; z_pred, S).
  Scalar log_likelihood(const Vector<Scalar>& z) const {
    if (z.size() != z_pred_.size()) {
      throw InvalidComponent("measurement dimension mismatch");
    }
    const Vector<Scalar> white = llt_.matrixL().solve(z - z_pred_);
    return log_norm_ - Scalar(0.5) * white.squaredNorm();
  }

  Scalar likelihood(const Vector<Scalar>& z) const { return std::exp(log_likelihood(z)); }

  /// Posterior component for measurement z, carrying the given weight.
  TrajectoryComponent<Scalar> posterior(const Vector<Scalar>& z, Scalar weight) const {
    Vector<Scalar> mean = prior_mean_;
    mean.tail(gain_.rows()) += gain_ * (z - z_pred_);
    return TrajectoryComponent<Scalar>(weight, birth_time_, std::move(mean), posterior_cov_,
                                       state_dim_);
  }

 private:
  Vector<Scalar> prior_mean_;
  int birth_time_;
  Eigen::Index state_dim_;
  Vector<Scalar> z_pred_;
  Eigen::LLT<Matrix<Scalar>> llt_;
  Scalar log_norm_ = 0;
  Eigen::Index first_row_ = 0;
  Matrix<Scalar> gain_;
  std::shared_ptr<const Matrix<Scalar>> posterior_cov_;
};

template <typename Scalar>
struct ComponentUpdate {
  TrajectoryComponent<Scalar> component;
  Scalar likelihood;
};

/// Kalman update of the whole trajectory with a measurement of its last
/// state. The returned weight is the prior weight; mixture-level weighting
/// is the filter's job.
template <typename Scalar>
ComponentUpdate<Scalar> update_component(const TrajectoryComponent<Scalar>& c,
                                         const Vector<Scalar>& z,
                                         const LinearModels<Scalar>& models) {
  if (z.size() != models.meas_dim()) {
    throw InvalidComponent("measurement dimension mismatch");
  }
  const ComponentInnovation<Scalar> innovation(c, models);
  return {innovation.posterior(z, c.weight()), innovation.likelihood(z)};
}

/// L-scan approximation: keeps the joint covariance of the last L states and
/// only the marginal blocks of older states.
template <typename Scalar>
TrajectoryComponent<Scalar> lscan_truncate(const TrajectoryComponent<Scalar>& c, int L) {
  if (L < 1) throw ConfigError("L-scan window must be at least 1");
  const int i = c.duration();
  if (i <= L) return c;
  const Eigen::Index nx = c.state_dim();
  const Eigen::Index n = c.mean().size();
  const Eigen::Index window = static_cast<Eigen::Index>(L) * nx;
  const auto& P = c.cov();

  auto cov = std::make_shared<Matrix<Scalar>>(Matrix<Scalar>::Zero(n, n));
  for (Eigen::Index s = 0; s < i - L; ++s) {
    cov->block(s * nx, s * nx, nx, nx) = P.block(s * nx, s * nx, nx, nx);
  }
  cov->bottomRightCorner(window, window) = P.bottomRightCorner(window, window);
  return TrajectoryComponent<Scalar>(c.weight(), c.birth_time(), c.mean(),
                                     std::shared_ptr<const Matrix<Scalar>>(std::move(cov)), nx);
}

/// Expected number of trajectories: the integral of the PHD.
template <typename Scalar>
Scalar expected_count(const GmTrajectoryPhd<Scalar>& phd) {
  return std::accumulate(phd.components.begin(), phd.components.end(), Scalar(0),
                         [](Scalar s, const auto& c) { return s + c.weight(); });
}

/// Expected number of trajectories whose (birth time, duration) satisfies
/// the predicate.
template <typename Scalar>
Scalar expected_count_in(const GmTrajectoryPhd<Scalar>& phd,
                         const std::function<bool(int birth_time, int duration)>& predicate) {
  Scalar sum = 0;
  for (const auto& c : phd.components) {
    if (predicate(c.birth_time(), c.duration())) sum += c.weight();
  }
  return sum;
}

using LinearModelsd = LinearModels<double>;
using TrajectoryComponentd = TrajectoryComponent<double>;
using GmTrajectoryPhdd = GmTrajectoryPhd<double>;

}  // namespace trajphd
