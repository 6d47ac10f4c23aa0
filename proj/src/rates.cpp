#include "fieldrate/rates.hpp"

#include "fieldrate/errors.hpp"
#include "fieldrate/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace fieldrate {

namespace {

constexpr std::size_t kFeasibilityScanLimit = 1'000'000;

double half_gap_rho(const CorrelationModel& model, std::size_t n_sensors) {
  if (n_sensors == 0) throw std::invalid_argument("need at least one sensor");
  return model(1.0 / (2.0 * static_cast<double>(n_sensors)));
}

bool dsc_target_feasible(double d_net, std::size_t n, const CorrelationModel& model) {
  const double r = half_gap_rho(model, n);
  return 1.0 - r * r < d_net;
}

std::optional<std::size_t> scan_smallest(auto&& feasible) {
  for (std::size_t n = 1; n <= kFeasibilityScanLimit; ++n)
    if (feasible(n)) return n;
  return std::nullopt;
}

}  // namespace

double target_distortion_dsc(double d_net, std::size_t n_sensors, const CorrelationModel& model) {
  if (!(d_net > 0.0)) throw std::invalid_argument("d_net must be positive");
  const double r = half_gap_rho(model, n_sensors);
  const double interp = 1.0 - r * r;
  if (!(interp < d_net)) {
    auto smallest = scan_smallest([&](std::size_t n) { return dsc_target_feasible(d_net, n, model); });
    throw InfeasibleError("N = " + std::to_string(n_sensors) + " is too small: interpolation error " +
                              std::to_string(interp) + " already exceeds d_net",
                          smallest);
  }
  const double root = std::sqrt(d_net - interp * interp) - std::sqrt(r * r * interp);
  return root * root;
}

double reverse_distortion_bound(double d_net, std::size_t n_sensors, const CorrelationModel& model) {
  if (!(d_net > 0.0)) throw std::invalid_argument("d_net must be positive");
  const double half_gap = 1.0 / (2.0 * static_cast<double>(n_sensors));
  const double r = half_gap_rho(model, n_sensors);
  auto ok = [&](std::size_t n) {
    const double rr = half_gap_rho(model, n);
    return rr > 0.0 && 1.0 / (2.0 * static_cast<double>(n)) <= model.theta_mono() && rr * rr >= 0.5;
  };
  if (!ok(n_sensors)) {
    throw InfeasibleError("lower sandwich bound needs rho(1/2N) > 0, 1/(2N) <= theta_mono and rho^2 >= 1/2 (N = " +
                              std::to_string(n_sensors) + ", 1/(2N) = " + std::to_string(half_gap) + ")",
                          scan_smallest(ok));
  }
  const double a = 1.0 - r * r;
  return (2.0 * a + 2.0 * std::sqrt(a * (a + d_net)) + d_net) / (r * r);
}

MseSandwich integrated_mse_bounds(const CorrelationModel& model, std::size_t n_sensors, double j_prime) {
  if (!(j_prime >= 0.0)) throw std::invalid_argument("sensor-sample MSE must be nonnegative");
  const double r = half_gap_rho(model, n_sensors);
  const double a = 1.0 - r * r;
  const double cross = 2.0 * std::sqrt(r * r * a * j_prime);
  return {r * r * j_prime - cross, a + j_prime + cross};
}

double find_pmax(const CovariancePack& cov, double D, double rel_tol) {
  if (!(rel_tol > 0.0 && rel_tol <= 1e-3)) throw std::invalid_argument("rel_tol must lie in (0, 1e-3]");
  if (D >= 1.0 || D >= cov.eigvals().mean())
    throw UnboundedError("p_max is unbounded: the target distortion is met for every p");
  if (!(D > cov.clamp_floor())) throw std::invalid_argument("target distortion at or below the clamp floor");

  double lo = 0.0;
  double hi = 1.0;
  while (mmse_avg_error(cov, hi) <= D) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw UnboundedError("p_max bracket overflowed");
  }
  for (int it = 0; it < 400 && hi > lo * (1.0 + rel_tol); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mmse_avg_error(cov, mid) <= D) lo = mid;
    else hi = mid;
    if (!(mmse_avg_error(cov, lo) <= D && mmse_avg_error(cov, hi) > D))
      throw std::logic_error("p_max bracket lost: MMSE not monotone in p");
  }
  if (hi > lo * (1.0 + rel_tol)) throw std::logic_error("p_max bisection did not converge");
  return lo;
}

double dsc_sum_rate(const CovariancePack& cov, double p) {
  if (!(p > 0.0)) throw std::invalid_argument("test-channel noise variance must be positive");
  double total = 0.0;
  for (Eigen::Index i = 0; i < cov.eigvals().size(); ++i) total += std::log1p(cov.eigvals()[i] / p);
  return 0.5 * total;
}

WaterfillSolution centralized_rate(const CovariancePack& cov, double D) {
  if (!(D > 0.0)) throw std::invalid_argument("distortion must be positive");
  const Eigen::VectorXd& lambda = cov.eigvals();
  const auto n = static_cast<std::size_t>(lambda.size());
  WaterfillSolution out;
  out.per_mode_rate.assign(n, 0.0);

  // Rounding in the eigenvalues must not turn D = trace / N into a tiny positive rate.
  if (D >= lambda.mean() * (1.0 - 1e-12)) {
    out.theta_level = lambda.maxCoeff();
    out.distortion_achieved = lambda.mean();
    return out;
  }

  // sum_i min(lambda_i, theta) is piecewise linear in theta; walk the
  // ascending eigenvalues to find the segment holding N*D and solve it exactly.
  std::vector<double> asc(lambda.data(), lambda.data() + n);
  std::sort(asc.begin(), asc.end());
  const double budget = D * static_cast<double>(n);
  double below = 0.0;
  std::size_t k = 0;
  for (; k < n; ++k) {
    const double level = below + asc[k] * static_cast<double>(n - k);
    if (level >= budget) break;
    below += asc[k];
  }
  out.theta_level = (budget - below) / static_cast<double>(n - k);

  double total = 0.0;
  double distortion = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double l = lambda[static_cast<Eigen::Index>(i)];
    out.per_mode_rate[i] = l > out.theta_level ? 0.5 * std::log(l / out.theta_level) : 0.0;
    total += out.per_mode_rate[i];
    distortion += std::min(l, out.theta_level);
  }
  out.total_rate_nats = total;
  out.distortion_achieved = distortion / static_cast<double>(n);
  return out;
}

double find_theta(const CorrelationModel& model, double D) {
  if (!(D > 0.0 && D < 1.0)) throw std::invalid_argument("D must lie in (0, 1)");
  const double cap = model.theta_mono();
  auto ok = [&](double theta) {
    const double r = model(theta);
    return r > 0.0 && 1.0 - r * r / (1.0 + theta) <= D;
  };
  if (ok(cap)) return cap;

  constexpr int kGrid = 10000;
  const double h = cap / kGrid;
  double lo = 0.0;
  double hi = h;
  for (int i = kGrid - 1; i >= 1; --i) {
    if (ok(i * h)) {
      lo = i * h;
      hi = (i + 1) * h;
      break;
    }
  }
  if (lo == 0.0) {
    // Below the first grid point; the condition holds as theta -> 0.
    while (!ok(hi * 0.5) && hi > 1e-300) hi *= 0.5;
    lo = hi * 0.5;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ok(mid)) lo = mid;
    else hi = mid;
  }
  return lo;
}

double prop1_sum_rate_bound(double theta) {
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
  return 1.0 / (2.0 * theta * theta);
}

double rate_loss_bound(double d_net, double eps, double theta) {
  if (!(d_net > 0.0) || !(eps > 0.0) || !(theta > 0.0))
    throw std::invalid_argument("rate-loss bound needs d_net, eps and theta positive");
  return (d_net + eps) / (2.0 * theta * theta);
}

std::vector<RateReport> rate_curve(const CorrelationModel& model, double d_net, std::span<const std::size_t> n_list,
                                   const RateCurveOptions& opts) {
  if (n_list.empty()) throw std::invalid_argument("empty N list");
  if (!(d_net > 0.0 && d_net < 1.0)) throw std::invalid_argument("d_net must lie in (0, 1)");
  const double eps = opts.eps_fraction * d_net;
  const double theta = find_theta(model, d_net - eps);
  const double loss_bound = rate_loss_bound(d_net, eps, theta);

  std::vector<RateReport> out;
  out.reserve(n_list.size());
  for (std::size_t n : n_list) {
    RateReport r;
    r.n_sensors = n;
    r.d_net = d_net;
    r.theta = theta;
    r.rate_loss_bound_nats = loss_bound;
    try {
      r.d_prime = target_distortion_dsc(d_net, n, model);
      r.d_double_prime = reverse_distortion_bound(d_net, n, model);
      const CovariancePack cov = covariance_matrix(model, sensor_positions(n), opts.clamp_floor);
      r.p_max = find_pmax(cov, r.d_prime, opts.rel_tol);
      r.dsc_sum_rate_nats = dsc_sum_rate(cov, r.p_max);
      r.centralized_rate_nats = centralized_rate(cov, r.d_double_prime).total_rate_nats;
      r.loss_gap_nats = dsc_sum_rate(cov, theta * theta * static_cast<double>(n)) - r.centralized_rate_nats;
      r.feasible = true;
    } catch (const InfeasibleError& e) {
      r.feasible = false;
      r.note = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace fieldrate
