#pragma once

#include "fieldrate/field.hpp"

#include <Eigen/Dense>

#include <vector>

namespace fieldrate {

/// U = X + Z with Z ~ N(0, p I) independent of the sensor samples X.
class TestChannel {
 public:
  TestChannel(const CovariancePack& cov, double noise_variance);

  const CovariancePack& cov() const { return *cov_; }
  double noise_variance() const { return p_; }

  /// Per-eigenmode shrinkage lambda / (lambda + p) of the MMSE gain.
  Eigen::VectorXd mode_gains() const;

  /// G = Sigma (Sigma + p I)^{-1}, formed from the cached eigendecomposition.
  Eigen::MatrixXd gain_matrix() const;

 private:
  void require_invertible() const;

  const CovariancePack* cov_;
  double p_;
};

struct MmseResult {
  std::vector<double> per_sample_mse;
  double avg_mse = 0.0;
};

/// Linear MMSE estimate Sigma (Sigma + p I)^{-1} u.
Eigen::VectorXd mmse_estimate(const TestChannel& ch, const Eigen::VectorXd& u);

/// Diagonal of Sigma - Sigma (Sigma + p I)^{-1} Sigma.
MmseResult mmse_error(const TestChannel& ch);

/// Only the mean of the per-sample errors; cheaper than mmse_error for searches over p.
double mmse_avg_error(const CovariancePack& cov, double p);

/// MSE bound of the scaled-average estimator that averages N*theta noisy
/// neighbours, at the bracket-optimal scale rho(theta) / (N theta + p):
///   1 - rho^2(theta) / (1 + p / (N theta)) * (1 - 2 / (N theta)).
/// Requires N theta > 2, theta <= theta_mono and rho(theta) > 0.
double averaging_estimator_mse_bound(const CorrelationModel& model, std::size_t n_sensors,
                                     double theta, double p);

}  // namespace fieldrate
