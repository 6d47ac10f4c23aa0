#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fieldrate {

enum class CorrelationKind { sinc, exp_markov, custom_table };

std::string to_string(CorrelationKind kind);

/**
 * Autocorrelation function rho(tau) of a unit-variance stationary field.
 *
 * - sinc:        rho(tau) = sin(pi a tau) / (pi a tau), params = [] or [a]
 * - exp_markov:  rho(tau) = exp(-c |tau|),              params = [] or [c]
 * - custom_table: piecewise-linear through (tau_i, rho_i), params flattened
 *   as [tau_0, rho_0, tau_1, rho_1, ...] with tau_0 = 0, rho_0 = 1 and
 *   strictly increasing tau covering [0, 1].
 *
 * theta_mono is the radius of the neighbourhood of 0 on which rho is
 * non-increasing, capped at 1.
 */
class CorrelationModel {
 public:
  CorrelationModel(CorrelationKind kind, std::vector<double> params);

  double operator()(double tau) const;

  CorrelationKind kind() const { return kind_; }
  std::span<const double> params() const { return params_; }
  double theta_mono() const { return theta_mono_; }

 private:
  double find_theta_mono() const;

  CorrelationKind kind_;
  std::vector<double> params_;
  std::vector<double> table_tau_;
  std::vector<double> table_rho_;
  double theta_mono_ = 1.0;
};

CorrelationModel make_correlation(CorrelationKind kind, std::vector<double> params = {});

/// Reads a two-column (tau, rho) CSV. A non-numeric first line is treated as a header.
CorrelationModel load_correlation_table(const std::filesystem::path& path);

struct SensorGrid {
  std::vector<double> positions;
  std::size_t size() const { return positions.size(); }
};

/// Sensor k (1-based) sits at (2k-1)/(2N).
SensorGrid sensor_positions(std::size_t n_sensors);

/// Sensor-sample covariance with a cached, clamped symmetric eigendecomposition.
class CovariancePack {
 public:
  static constexpr double kDefaultClampFloor = 1e-10;

  /// Wraps an arbitrary symmetric matrix (used for hypothetical packs such as Sigma = I).
  static CovariancePack from_matrix(Eigen::MatrixXd sigma, double clamp_floor = kDefaultClampFloor);

  const Eigen::MatrixXd& sigma() const { return sigma_; }
  /// Clamped eigenvalues, descending.
  const Eigen::VectorXd& eigvals() const { return eigvals_; }
  /// Columns are orthonormal eigenvectors matching eigvals().
  const Eigen::MatrixXd& eigvecs() const { return eigvecs_; }
  double clamp_floor() const { return clamp_floor_; }
  /// Number of eigenvalues raised to the clamp floor.
  std::size_t clamp_count() const { return clamp_count_; }
  /// Max-abs entry of Sigma - V diag(raw lambda) V^T, before clamping.
  double reconstruction_error() const { return reconstruction_error_; }
  std::size_t size() const { return static_cast<std::size_t>(sigma_.rows()); }

 private:
  CovariancePack() = default;

  Eigen::MatrixXd sigma_;
  Eigen::VectorXd eigvals_;
  Eigen::MatrixXd eigvecs_;
  double clamp_floor_ = kDefaultClampFloor;
  std::size_t clamp_count_ = 0;
  double reconstruction_error_ = 0.0;
};

CovariancePack covariance_matrix(const CorrelationModel& model, const SensorGrid& grid,
                                 double clamp_floor = CovariancePack::kDefaultClampFloor);

struct FieldSnapshots {
  Eigen::MatrixXd data;  // m x N, row i is the field at the sensors at time i
  std::uint64_t seed = 0;
  std::size_t m() const { return static_cast<std::size_t>(data.rows()); }
};

/// Rows are i.i.d. N(0, Sigma_clamped); entry (i, k) depends only on (seed, i, k).
FieldSnapshots sample_snapshots(const CovariancePack& cov, std::size_t m, std::uint64_t seed);

/// m i.i.d. rows of N(0, Sigma_clamped) drawn from the given counter stream.
Eigen::MatrixXd sample_gaussian_rows(const CovariancePack& cov, std::size_t m, std::uint64_t seed,
                                     std::uint64_t stream);

/// Index (0-based) of the sensor whose cell [k/N, (k+1)/N) contains s; s = 1 maps to N-1.
std::size_t nearest_sample_index(double s, std::size_t n_sensors);

/// Location n(s) of the sample closest to s.
double nearest_sample_location(double s, std::size_t n_sensors);

/// X~(s) = rho(s - n(s)) X~(n(s)).
double interpolate(const CorrelationModel& model, std::span<const double> recon_at_sensors,
                   const SensorGrid& grid, double s);

}  // namespace fieldrate
