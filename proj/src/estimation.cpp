#include "fieldrate/estimation.hpp"

#include "fieldrate/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace fieldrate {

TestChannel::TestChannel(const CovariancePack& cov, double noise_variance) : cov_(&cov), p_(noise_variance) {
  if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
    throw std::invalid_argument("test-channel noise variance must be finite and nonnegative");
}

void TestChannel::require_invertible() const {
  if (p_ == 0.0 && cov_->eigvals().minCoeff() <= 0.0)
    throw ConditioningError("Sigma + pI is singular: p = 0 with a zero (clamped) eigenvalue");
}

Eigen::VectorXd TestChannel::mode_gains() const {
  require_invertible();
  const Eigen::VectorXd& lambda = cov_->eigvals();
  return lambda.array() / (lambda.array() + p_);
}

Eigen::MatrixXd TestChannel::gain_matrix() const {
  const Eigen::MatrixXd& v = cov_->eigvecs();
  return v * mode_gains().asDiagonal() * v.transpose();
}

Eigen::VectorXd mmse_estimate(const TestChannel& ch, const Eigen::VectorXd& u) {
  const auto n = static_cast<Eigen::Index>(ch.cov().size());
  if (u.size() != n) throw std::invalid_argument("observation length does not match the sensor count");
  const Eigen::MatrixXd& v = ch.cov().eigvecs();
  const Eigen::VectorXd coeffs = v.transpose() * u;
  return v * ch.mode_gains().cwiseProduct(coeffs);
}

MmseResult mmse_error(const TestChannel& ch) {
  const CovariancePack& cov = ch.cov();
  const double p = ch.noise_variance();
  const Eigen::VectorXd& lambda = cov.eigvals();
  // Error covariance V diag(lambda p / (lambda + p)) V^T; at p = 0 it vanishes.
  Eigen::VectorXd mode_err(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    mode_err[i] = p == 0.0 ? 0.0 : lambda[i] * p / (lambda[i] + p);

  const Eigen::MatrixXd& v = cov.eigvecs();
  MmseResult out;
  out.per_sample_mse.resize(cov.size());
  double total = 0.0;
  for (Eigen::Index k = 0; k < v.rows(); ++k) {
    const double e = v.row(k).array().square().matrix().dot(mode_err);
    out.per_sample_mse[static_cast<std::size_t>(k)] = e;
    total += e;
  }
  out.avg_mse = total / static_cast<double>(cov.size());
  return out;
}

double mmse_avg_error(const CovariancePack& cov, double p) {
  if (!(p >= 0.0)) throw std::invalid_argument("noise variance must be nonnegative");
  if (p == 0.0) return 0.0;
  if (std::isinf(p)) return cov.eigvals().mean();
  const Eigen::VectorXd& lambda = cov.eigvals();
  return (lambda.array() * p / (lambda.array() + p)).mean();
}

double averaging_estimator_mse_bound(const CorrelationModel& model, std::size_t n_sensors, double theta,
                                     double p) {
  const double window = static_cast<double>(n_sensors) * theta;
  if (!(window > 2.0)) throw std::invalid_argument("averaging bound is vacuous unless N*theta > 2");
  if (!(theta > 0.0) || theta > model.theta_mono())
    throw std::invalid_argument("theta must lie in (0, theta_mono]");
  if (!(p >= 0.0)) throw std::invalid_argument("noise variance must be nonnegative");
  const double r = model(theta);
  if (!(r > 0.0)) throw std::invalid_argument("averaging bound needs rho(theta) > 0");
  return 1.0 - r * r / (1.0 + p / window) * (1.0 - 2.0 / window);
}

}  // namespace fieldrate
