#pragma once

#include "fieldrate/field.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fieldrate {

// All rates are in nats per snapshot.

/// Sensor-sample distortion D'(N) that guarantees integrated MSE <= d_net
/// through the upper sandwich bound. Throws InfeasibleError (carrying the
/// smallest feasible N from a scan) when 1 - rho^2(1/2N) >= d_net.
double target_distortion_dsc(double d_net, std::size_t n_sensors, const CorrelationModel& model);

/// D''(N): the sensor-sample distortion any scheme meeting d_net must reach,
/// from the lower sandwich bound. Needs rho(1/2N) > 0, 1/(2N) <= theta_mono
/// and rho^2(1/2N) >= 1/2.
double reverse_distortion_bound(double d_net, std::size_t n_sensors, const CorrelationModel& model);

/// Sandwich on the integrated MSE given the average sensor-sample MSE j_prime,
/// for nearest-sample interpolation with N sensors.
struct MseSandwich {
  double low = 0.0;
  double high = 0.0;
};
MseSandwich integrated_mse_bounds(const CorrelationModel& model, std::size_t n_sensors, double j_prime);

/// Largest p with mmse_avg_error(cov, p) <= D, to relative tolerance rel_tol.
double find_pmax(const CovariancePack& cov, double D, double rel_tol = 1e-6);

/// I(X; X + Z) = 1/2 sum ln(1 + lambda_i / p).
double dsc_sum_rate(const CovariancePack& cov, double p);

struct WaterfillSolution {
  double theta_level = 0.0;
  std::vector<double> per_mode_rate;
  double total_rate_nats = 0.0;
  double distortion_achieved = 0.0;
};

/// Gaussian vector rate-distortion function under an average per-component
/// MSE constraint D, by reverse water-filling on the eigenvalues.
WaterfillSolution centralized_rate(const CovariancePack& cov, double D);

/// Largest theta <= theta_mono with rho(theta) > 0 and 1 - rho^2(theta)/(1 + theta) <= D.
double find_theta(const CorrelationModel& model, double D);

/// 1 / (2 theta^2): the N-independent cap on the distributed sum rate when p >= theta^2 N.
double prop1_sum_rate_bound(double theta);

/// (d_net + eps) / (2 theta^2).
double rate_loss_bound(double d_net, double eps, double theta);

struct RateReport {
  std::size_t n_sensors = 0;
  double d_net = 0.0;
  double d_prime = 0.0;
  double d_double_prime = 0.0;
  double p_max = 0.0;
  double dsc_sum_rate_nats = 0.0;
  double centralized_rate_nats = 0.0;
  double rate_loss_bound_nats = 0.0;
  /// dsc_sum_rate at p = theta^2 N minus the centralized rate.
  double loss_gap_nats = 0.0;
  double theta = 0.0;
  bool feasible = false;
  std::string note;
};

struct RateCurveOptions {
  /// eps = eps_fraction * d_net in the rate-loss pipeline.
  double eps_fraction = 0.05;
  double rel_tol = 1e-6;
  double clamp_floor = CovariancePack::kDefaultClampFloor;
};

/// One report per N, in input order; infeasible N are flagged with a note.
std::vector<RateReport> rate_curve(const CorrelationModel& model, double d_net,
                                   std::span<const std::size_t> n_list, const RateCurveOptions& opts = {});

}  // namespace fieldrate
