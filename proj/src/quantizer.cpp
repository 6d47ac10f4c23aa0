#include "fieldrate/quantizer.hpp"

#include "fieldrate/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace fieldrate {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double pdf(double x) {
  if (std::isinf(x)) return 0.0;
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Upper-tail probability Q(x) = P(X > x).
double tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// P(a <= X < b), computed on the side of 0 that avoids cancellation.
double cell_prob(double a, double b) {
  if (a >= 0.0) return tail(a) - tail(b);
  if (b <= 0.0) return tail(-b) - tail(-a);
  return 1.0 - tail(b) - tail(-a);
}

struct CellMoments {
  double p;   // int phi
  double m1;  // int x phi
  double m2;  // int x^2 phi
};

CellMoments cell_moments(double a, double b) {
  const double p = cell_prob(a, b);
  const double pa = pdf(a);
  const double pb = pdf(b);
  const double apa = std::isinf(a) ? 0.0 : a * pa;
  const double bpb = std::isinf(b) ? 0.0 : b * pb;
  return {p, pa - pb, p + apa - bpb};
}

double cell_lo(const std::vector<double>& b, std::size_t i) { return i == 0 ? -kInf : b[i - 1]; }
double cell_hi(const std::vector<double>& b, std::size_t i) { return i == b.size() ? kInf : b[i]; }

double normal_quantile(double u) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (1.0 - tail(mid) < u) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> midpoints(const std::vector<double>& points) {
  std::vector<double> b(points.size() - 1);
  for (std::size_t i = 0; i + 1 < points.size(); ++i) b[i] = 0.5 * (points[i] + points[i + 1]);
  return b;
}

}  // namespace

double ScalarQuantizer::rate_bits() const { return std::log2(static_cast<double>(levels)); }

double gaussian_quantizer_distortion(const std::vector<double>& boundaries, const std::vector<double>& points) {
  if (points.empty() || boundaries.size() + 1 != points.size())
    throw std::invalid_argument("codebook needs L points and L - 1 boundaries");
  double d = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const CellMoments c = cell_moments(cell_lo(boundaries, i), cell_hi(boundaries, i));
    const double y = points[i];
    d += c.m2 - 2.0 * y * c.m1 + y * y * c.p;
  }
  return d;
}

ScalarQuantizer lloyd_max(std::size_t levels, double tol, std::size_t max_iter) {
  if (levels == 0) throw std::invalid_argument("quantizer needs at least one level");
  ScalarQuantizer q;
  q.levels = levels;
  if (levels == 1) {
    q.points = {0.0};
    q.distortion = 1.0;
    return q;
  }

  // Start from the high-resolution optimum: points spread like N(0, 3).
  q.points.resize(levels);
  for (std::size_t i = 0; i < levels; ++i)
    q.points[i] = std::sqrt(3.0) * normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(levels));

  double step = kInf;
  std::size_t iter = 0;
  for (; iter < max_iter && step >= tol; ++iter) {
    q.boundaries = midpoints(q.points);
    step = 0.0;
    for (std::size_t i = 0; i < levels; ++i) {
      const CellMoments c = cell_moments(cell_lo(q.boundaries, i), cell_hi(q.boundaries, i));
      const double centroid = c.m1 / c.p;
      step = std::max(step, std::abs(centroid - q.points[i]));
      q.points[i] = centroid;
    }
  }
  if (step >= tol) throw ConvergenceError("Lloyd-Max iteration did not converge", step);

  // Symmetrize: the N(0, 1) optimum is odd-symmetric.
  for (std::size_t i = 0; i < levels / 2; ++i) {
    const double v = 0.5 * (q.points[levels - 1 - i] - q.points[i]);
    q.points[i] = -v;
    q.points[levels - 1 - i] = v;
  }
  if (levels % 2 == 1) q.points[levels / 2] = 0.0;
  q.boundaries = midpoints(q.points);
  q.distortion = gaussian_quantizer_distortion(q.boundaries, q.points);
  return q;
}

double lloyd_residual(const ScalarQuantizer& q) {
  if (q.points.size() != q.levels || q.boundaries.size() + 1 != q.levels)
    throw std::invalid_argument("malformed quantizer");
  double r = 0.0;
  for (std::size_t i = 0; i + 1 < q.levels; ++i)
    r = std::max(r, std::abs(q.boundaries[i] - 0.5 * (q.points[i] + q.points[i + 1])));
  for (std::size_t i = 0; i < q.levels; ++i) {
    const CellMoments c = cell_moments(cell_lo(q.boundaries, i), cell_hi(q.boundaries, i));
    r = std::max(r, std::abs(q.points[i] - c.m1 / c.p));
  }
  return r;
}

Quantized quantize(const ScalarQuantizer& q, double x) {
  const auto it = std::upper_bound(q.boundaries.begin(), q.boundaries.end(), x);
  const auto index = static_cast<std::size_t>(it - q.boundaries.begin());
  return {index, q.points[index]};
}

double scalar_delta(std::size_t levels) {
  if (levels < 2) throw std::invalid_argument("delta needs at least two levels");
  const ScalarQuantizer q = lloyd_max(levels);
  return std::log2(static_cast<double>(levels)) - 0.5 * std::log2(1.0 / q.distortion);
}

ScalarQuantizer smallest_quantizer_for(double target_distortion, std::size_t max_levels) {
  if (!(target_distortion > 0.0)) throw std::invalid_argument("target distortion must be positive");
  if (target_distortion >= 1.0) return lloyd_max(1);
  // Distortion is strictly decreasing in L: bracket by doubling, then bisect.
  std::size_t lo = 1;
  std::size_t hi = 2;
  ScalarQuantizer best = lloyd_max(hi);
  while (best.distortion > target_distortion) {
    lo = hi;
    hi *= 2;
    if (hi > max_levels) throw InfeasibleError("no quantizer with at most max_levels meets the target");
    best = lloyd_max(hi);
  }
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    ScalarQuantizer q = lloyd_max(mid);
    if (q.distortion <= target_distortion) {
      hi = mid;
      best = std::move(q);
    } else {
      lo = mid;
    }
  }
  return best;
}

nlohmann::json to_json(const ScalarQuantizer& q) {
  return {{"levels", q.levels}, {"boundaries", q.boundaries}, {"points", q.points}, {"distortion", q.distortion}};
}

ScalarQuantizer quantizer_from_json(const nlohmann::json& j) {
  ScalarQuantizer q;
  q.levels = j.at("levels").get<std::size_t>();
  q.boundaries = j.at("boundaries").get<std::vector<double>>();
  q.points = j.at("points").get<std::vector<double>>();
  q.distortion = j.at("distortion").get<double>();
  if (q.levels == 0 || q.points.size() != q.levels || q.boundaries.size() + 1 != q.levels)
    throw std::invalid_argument("quantizer JSON has inconsistent sizes");
  if (!std::is_sorted(q.points.begin(), q.points.end()) || !std::is_sorted(q.boundaries.begin(), q.boundaries.end()))
    throw std::invalid_argument("quantizer JSON must list points and boundaries in ascending order");
  return q;
}

double p2p_sample_distortion(const CorrelationModel& model, double d_net, std::size_t k) {
  if (k == 0) throw std::invalid_argument("K must be positive");
  const double r = model(1.0 / static_cast<double>(k));
  return d_net - (1.0 - r * r);
}

double p2p_rate_for_K(const CorrelationModel& model, double d_net, std::size_t k) {
  const double dk = p2p_sample_distortion(model, d_net, k);
  if (!(dk > 0.0))
    throw InfeasibleError("K = " + std::to_string(k) + " is infeasible: interpolation error exceeds d_net");
  if (dk > 1.0) throw std::invalid_argument("sample distortion D_K exceeds the unit variance");
  return -0.5 * static_cast<double>(k) * std::log(dk);
}

std::size_t min_feasible_K(const CorrelationModel& model, double d_net, std::size_t limit) {
  for (std::size_t k = 1; k <= limit; ++k)
    if (p2p_sample_distortion(model, d_net, k) > 0.0) return k;
  throw InfeasibleError("no feasible K up to " + std::to_string(limit));
}

KOptimum optimize_K(const CorrelationModel& model, double d_net, std::size_t k_max, double rate_cap) {
  if (!(d_net > 0.0 && d_net < 1.0)) throw std::invalid_argument("d_net must lie in (0, 1)");
  KOptimum out;
  out.k_min_feasible = min_feasible_K(model, d_net);
  out.k_max = k_max == 0 ? 10 * out.k_min_feasible : k_max;
  if (out.k_max < out.k_min_feasible)
    throw InfeasibleError("no feasible K in [1, " + std::to_string(out.k_max) + "]", out.k_min_feasible);

  double best = kInf;
  for (std::size_t k = out.k_min_feasible; k <= out.k_max; ++k) {
    KScanEntry e{k, rate_cap, true};
    const double dk = p2p_sample_distortion(model, d_net, k);
    if (dk > 0.0) {
      const double rate = -0.5 * static_cast<double>(k) * std::log(dk);
      if (rate <= rate_cap) e = {k, rate, false};
    }
    if (!e.capped && e.rate_nats < best) {
      best = e.rate_nats;
      out.k_star = k;
      out.rate_nats = e.rate_nats;
    }
    out.scan.push_back(e);
  }
  if (out.k_star == 0) throw InfeasibleError("every K in range exceeds the rate cap");
  return out;
}

std::size_t TdmaSchedule::active_sensor(std::size_t l, std::size_t t) const {
  if (l >= k || t == 0 || t > steps()) throw std::out_of_range("schedule slot out of range");
  const std::size_t j = (t - 1) % frame();
  return frame() * l + j;
}

TdmaSchedule tdma_schedule(std::size_t n_sensors, std::size_t k, std::size_t m_prime) {
  if (k == 0 || n_sensors == 0 || n_sensors % k != 0) throw std::invalid_argument("K must divide N");
  if (m_prime == 0) throw std::invalid_argument("m' must be positive");
  TdmaSchedule s{n_sensors, k, m_prime, {}};
  const std::size_t frame = n_sensors / k;
  for (std::size_t l = 0; l < k; ++l) {
    for (std::size_t j = 1; j <= frame; ++j) {
      std::vector<std::size_t> times(m_prime);
      for (std::size_t r = 0; r < m_prime; ++r) times[r] = j + r * frame;
      s.active[frame * l + (j - 1)] = std::move(times);
    }
  }
  return s;
}

}  // namespace fieldrate
