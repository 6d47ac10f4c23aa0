#pragma once

#include "fieldrate/field.hpp"

#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

namespace fieldrate {

/// Scalar quantizer for the unit Gaussian. Cell i is [boundaries[i-1], boundaries[i]).
struct ScalarQuantizer {
  std::size_t levels = 1;
  std::vector<double> boundaries;  // L - 1, ascending
  std::vector<double> points;      // L, ascending
  double distortion = 1.0;         // E (X - Q(X))^2 for X ~ N(0, 1)

  double rate_bits() const;
};

/// Max-Lloyd design by fixed-point iteration with closed-form Gaussian cell moments.
/// Throws ConvergenceError when the step size has not fallen below tol after max_iter.
ScalarQuantizer lloyd_max(std::size_t levels, double tol = 1e-13, std::size_t max_iter = 2'000'000);

/// MSE of an arbitrary codebook on N(0, 1), from closed-form cell integrals.
double gaussian_quantizer_distortion(const std::vector<double>& boundaries, const std::vector<double>& points);

/// Max deviation from the nearest-neighbour (midpoint) and centroid conditions.
double lloyd_residual(const ScalarQuantizer& q);

struct Quantized {
  std::size_t index = 0;
  double reproduction = 0.0;
};

/// Ties on a boundary go to the upper cell.
Quantized quantize(const ScalarQuantizer& q, double x);

/// delta = log2(L) - 1/2 log2(1 / distortion(L)), in bits.
double scalar_delta(std::size_t levels);

/// Smallest L whose Max-Lloyd distortion does not exceed target.
ScalarQuantizer smallest_quantizer_for(double target_distortion, std::size_t max_levels = 4096);

nlohmann::json to_json(const ScalarQuantizer& q);
ScalarQuantizer quantizer_from_json(const nlohmann::json& j);

/// D_K = d_net - (1 - rho^2(1/K)): distortion left for the coded samples.
double p2p_sample_distortion(const CorrelationModel& model, double d_net, std::size_t k);

/// Sum rate -(K/2) ln D_K of the point-to-point scheme, nats per time step.
double p2p_rate_for_K(const CorrelationModel& model, double d_net, std::size_t k);

struct KScanEntry {
  std::size_t k = 0;
  double rate_nats = 0.0;
  bool capped = false;
};

struct KOptimum {
  std::size_t k_star = 0;
  double rate_nats = 0.0;
  std::size_t k_min_feasible = 0;
  std::size_t k_max = 0;
  std::vector<KScanEntry> scan;
};

/// Smallest K with 1 - rho^2(1/K) < d_net; throws InfeasibleError past limit.
std::size_t min_feasible_K(const CorrelationModel& model, double d_net, std::size_t limit = 100000);

/// Exhaustive scan of p2p_rate_for_K over [K_min_feasible, k_max]; ties go to
/// the smaller K. Rates above rate_cap are clamped and flagged. k_max = 0
/// means 10 * K_min_feasible.
KOptimum optimize_K(const CorrelationModel& model, double d_net, std::size_t k_max = 0, double rate_cap = 1e6);

struct TdmaSchedule {
  std::size_t n_sensors = 0;
  std::size_t k = 0;
  std::size_t m_prime = 0;
  /// active[sensor] = ascending 1-based time steps; sensors are 0-based here.
  std::map<std::size_t, std::vector<std::size_t>> active;

  std::size_t frame() const { return n_sensors / k; }
  std::size_t steps() const { return m_prime * frame(); }
  /// 0-based index of the sensor active in sub-interval l at 1-based time t.
  std::size_t active_sensor(std::size_t l, std::size_t t) const;
};

TdmaSchedule tdma_schedule(std::size_t n_sensors, std::size_t k, std::size_t m_prime);

}  // namespace fieldrate
