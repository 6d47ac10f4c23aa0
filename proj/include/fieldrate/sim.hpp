#pragma once

#include "fieldrate/field.hpp"
#include "fieldrate/quantizer.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fieldrate {

enum class Scheme { dsc_test_channel, p2p_lloyd };
enum class Verdict { within, violated_low, violated_high };

/// hybrid: the interpolation error E_S^2 (and, for the test channel, the
/// E_S E_Q cross term) enter through their exact expectations, only the
/// sensor-located error is simulated. naive: the field is drawn jointly on
/// the quadrature nodes and the squared error integrated directly (N <= 16).
enum class Quadrature { hybrid, naive };

std::string to_string(Scheme s);
std::string to_string(Verdict v);
std::string to_string(Quadrature q);

inline constexpr double kStatisticalMargin = 3.0;  // standard errors
inline constexpr std::size_t kNaiveMaxSensors = 16;

struct SimulationReport {
  Scheme scheme = Scheme::dsc_test_channel;
  Quadrature quadrature = Quadrature::hybrid;
  std::string model;
  std::size_t n_sensors = 0;
  double noise_variance = 0.0;  // test channel only
  std::size_t k = 0;            // point-to-point only
  std::size_t levels = 0;       // 0 = identity surrogate
  double design_distortion = 0.0;

  double j_mse = 0.0;
  double j_prime_mse = 0.0;
  std::vector<double> per_sensor_mse;
  std::size_t n_snapshots = 0;
  std::size_t grid_points_per_gap = 0;
  std::uint64_t seed = 0;
  double bound_low = 0.0;
  double bound_high = 0.0;
  Verdict verdict = Verdict::within;
  double stderr_jmse = 0.0;
  /// From per-snapshot means of the coded sensors' squared errors.
  double stderr_j_prime = 0.0;
  /// Integrated 2 E[E_S E_Q]; zero by independence for point-to-point.
  double cross_term = 0.0;
  /// False when N is too small for the sandwich bounds' hypotheses.
  bool bounds_applicable = true;
};

struct DscSimConfig {
  std::size_t n_sensors = 64;
  double noise_variance = 1.0;
  std::size_t m = 20000;
  std::size_t grid_g = 4;
  std::uint64_t seed = 1;
  Quadrature quadrature = Quadrature::hybrid;
  double clamp_floor = CovariancePack::kDefaultClampFloor;
};

struct P2pSimConfig {
  std::size_t n_sensors = 48;
  std::size_t k = 24;
  std::size_t m_prime = 2000;
  std::size_t grid_g = 4;
  std::uint64_t seed = 1;
  Quadrature quadrature = Quadrature::hybrid;
  double clamp_floor = CovariancePack::kDefaultClampFloor;
};

/// Test-channel surrogate of the distributed scheme at finite m: U = X + Z,
/// linear MMSE at the sensors, nearest-sample interpolation in between.
SimulationReport simulate_dsc(const CorrelationModel& model, const DscSimConfig& cfg);

/// TDMA point-to-point scheme with a scalar quantizer per active sample;
/// std::nullopt quantizes by the identity (L -> infinity).
SimulationReport simulate_p2p(const CorrelationModel& model, const P2pSimConfig& cfg,
                              const std::optional<ScalarQuantizer>& quantizer);

/// Midpoint rule with grid_g nodes per inter-sensor gap: N * grid_g nodes of weight 1/(N grid_g).
std::vector<double> quadrature_nodes(std::size_t n_sensors, std::size_t grid_g);

struct IntegratedMse {
  double mean = 0.0;
  double stderr_mean = 0.0;
  std::vector<double> per_snapshot;
};

/// Sensor (0-based) whose reconstruction serves location s at snapshot i.
using SourceFn = std::function<std::size_t(std::size_t snapshot, double s)>;
/// E[E_S(s) E_Q(s)] for the scheme being integrated.
using CrossTermFn = std::function<double(double s)>;

/// Hybrid estimate of the averaged integrated MSE: per node,
/// (1 - rho^2(s - r)) + 2 cross(s) + rho^2(s - r) (X(r) - X~(r))^2 with r = source(i, s).
IntegratedMse integrated_mse(const CorrelationModel& model, const SensorGrid& grid, const FieldSnapshots& truth,
                             const Eigen::MatrixXd& recon_at_sensors, std::size_t grid_g, const SourceFn& source,
                             const CrossTermFn& cross = {});

/// Direct estimate from the field sampled on the quadrature nodes (m x N*grid_g).
IntegratedMse integrated_mse_naive(const CorrelationModel& model, const SensorGrid& grid,
                                   const Eigen::MatrixXd& field_at_nodes, const Eigen::MatrixXd& recon_at_sensors,
                                   std::size_t grid_g, const SourceFn& source);

nlohmann::json to_json(const SimulationReport& r);

/// Appends one row, writing the header first when the file is new or empty.
void append_csv_log(const std::filesystem::path& path, const SimulationReport& r);

}  // namespace fieldrate
