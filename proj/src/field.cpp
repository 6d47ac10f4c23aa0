#include "fieldrate/field.hpp"

#include "fieldrate/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace fieldrate {

namespace {

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double single_scale(const std::vector<double>& params, const char* what) {
  if (params.empty()) return 1.0;
  if (params.size() != 1 || !(params[0] > 0.0) || !std::isfinite(params[0]))
    throw std::invalid_argument(std::string(what) + " takes at most one positive scale parameter");
  return params[0];
}

}  // namespace

std::string to_string(CorrelationKind kind) {
  switch (kind) {
    case CorrelationKind::sinc: return "sinc";
    case CorrelationKind::exp_markov: return "exp-markov";
    case CorrelationKind::custom_table: return "custom-table";
  }
  return "unknown";
}

CorrelationModel::CorrelationModel(CorrelationKind kind, std::vector<double> params)
    : kind_(kind), params_(std::move(params)) {
  switch (kind_) {
    case CorrelationKind::sinc:
      single_scale(params_, "sinc");
      break;
    case CorrelationKind::exp_markov:
      single_scale(params_, "exp-markov");
      break;
    case CorrelationKind::custom_table: {
      if (params_.size() < 4 || params_.size() % 2 != 0)
        throw std::invalid_argument("custom table needs at least two (tau, rho) pairs");
      for (std::size_t i = 0; i < params_.size(); i += 2) {
        table_tau_.push_back(params_[i]);
        table_rho_.push_back(params_[i + 1]);
      }
      if (table_tau_.front() != 0.0) throw std::invalid_argument("custom table must start at tau = 0");
      if (table_rho_.front() != 1.0) throw std::invalid_argument("custom table must have rho(0) = 1");
      for (std::size_t i = 0; i < table_tau_.size(); ++i) {
        if (!std::isfinite(table_tau_[i]) || !std::isfinite(table_rho_[i]))
          throw std::invalid_argument("custom table has non-finite entries");
        if (std::abs(table_rho_[i]) > 1.0) throw std::invalid_argument("custom table has |rho| > 1");
        if (i > 0 && !(table_tau_[i] > table_tau_[i - 1]))
          throw std::invalid_argument("custom table tau must be strictly increasing");
      }
      if (table_tau_.back() < 1.0) throw std::invalid_argument("custom table must cover tau in [0, 1]");
      break;
    }
    default:
      throw std::invalid_argument("unknown correlation kind");
  }
  theta_mono_ = find_theta_mono();
}

double CorrelationModel::operator()(double tau) const {
  const double t = std::abs(tau);
  switch (kind_) {
    case CorrelationKind::sinc:
      return sinc(single_scale(params_, "sinc") * t);
    case CorrelationKind::exp_markov:
      return std::exp(-single_scale(params_, "exp-markov") * t);
    case CorrelationKind::custom_table: {
      if (t > table_tau_.back()) throw std::out_of_range("tau beyond the custom correlation table");
      const auto it = std::upper_bound(table_tau_.begin(), table_tau_.end(), t);
      if (it == table_tau_.end()) return table_rho_.back();
      const std::size_t hi = static_cast<std::size_t>(it - table_tau_.begin());
      const std::size_t lo = hi - 1;
      const double w = (t - table_tau_[lo]) / (table_tau_[hi] - table_tau_[lo]);
      return table_rho_[lo] + w * (table_rho_[hi] - table_rho_[lo]);
    }
  }
  return 0.0;
}

double CorrelationModel::find_theta_mono() const {
  switch (kind_) {
    case CorrelationKind::exp_markov:
      return 1.0;
    case CorrelationKind::custom_table: {
      for (std::size_t i = 0; i + 1 < table_tau_.size(); ++i) {
        if (table_tau_[i] >= 1.0) return 1.0;
        if (table_rho_[i + 1] > table_rho_[i]) return table_tau_[i];
      }
      return 1.0;
    }
    case CorrelationKind::sinc: {
      // First point on (0, 1] where rho stops decreasing; grid scan, then
      // bisection on the sign of the forward difference.
      constexpr int kGrid = 10000;
      const double h = 1.0 / kGrid;
      double prev = (*this)(0.0);
      for (int i = 1; i <= kGrid; ++i) {
        const double cur = (*this)(i * h);
        if (cur > prev) {
          double lo = (i - 2) * h;
          double hi = i * h;
          for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double d = 1e-9;
            if ((*this)(mid + d) < (*this)(mid)) lo = mid;
            else hi = mid;
          }
          return std::max(lo, h);
        }
        prev = cur;
      }
      return 1.0;
    }
  }
  return 1.0;
}

CorrelationModel make_correlation(CorrelationKind kind, std::vector<double> params) {
  return CorrelationModel(kind, std::move(params));
}

CorrelationModel load_correlation_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open correlation table: " + path.string());
  std::vector<double> params;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double tau = 0.0, rho = 0.0;
    if (!(ls >> tau >> rho)) {
      if (first) {
        first = false;
        continue;
      }
      throw std::invalid_argument("malformed correlation table row: " + line);
    }
    first = false;
    params.push_back(tau);
    params.push_back(rho);
  }
  return CorrelationModel(CorrelationKind::custom_table, std::move(params));
}

SensorGrid sensor_positions(std::size_t n_sensors) {
  if (n_sensors == 0) throw std::invalid_argument("need at least one sensor");
  SensorGrid grid;
  grid.positions.resize(n_sensors);
  const double denom = 2.0 * static_cast<double>(n_sensors);
  for (std::size_t k = 0; k < n_sensors; ++k)
    grid.positions[k] = static_cast<double>(2 * k + 1) / denom;
  return grid;
}

CovariancePack CovariancePack::from_matrix(Eigen::MatrixXd sigma, double clamp_floor) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0)
    throw std::invalid_argument("covariance must be a non-empty square matrix");
  if (!(clamp_floor >= 0.0 && clamp_floor <= 1e-6))
    throw std::invalid_argument("clamp floor must lie in [0, 1e-6]");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 0.0)
    throw std::invalid_argument("covariance must be exactly symmetric");

  CovariancePack pack;
  pack.sigma_ = std::move(sigma);
  pack.clamp_floor_ = clamp_floor;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(pack.sigma_);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const Eigen::VectorXd raw = solver.eigenvalues().reverse();
  pack.eigvecs_ = solver.eigenvectors().rowwise().reverse();
  pack.reconstruction_error_ =
      (pack.sigma_ - pack.eigvecs_ * raw.asDiagonal() * pack.eigvecs_.transpose()).cwiseAbs().maxCoeff();

  pack.eigvals_ = raw;
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    if (raw[i] < clamp_floor) {
      pack.eigvals_[i] = clamp_floor;
      ++pack.clamp_count_;
    }
  }
  return pack;
}

CovariancePack covariance_matrix(const CorrelationModel& model, const SensorGrid& grid, double clamp_floor) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  if (n == 0) throw std::invalid_argument("empty sensor grid");
  // Regular spacing makes Sigma Toeplitz: evaluate rho once per lag.
  std::vector<double> lag(static_cast<std::size_t>(n));
  for (Eigen::Index d = 0; d < n; ++d) {
    lag[static_cast<std::size_t>(d)] = d == 0 ? 1.0 : model(grid.positions[d] - grid.positions[0]);
    if (!std::isfinite(lag[static_cast<std::size_t>(d)]))
      throw std::runtime_error("correlation model returned a non-finite value");
  }
  Eigen::MatrixXd sigma(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) sigma(i, j) = lag[static_cast<std::size_t>(std::abs(i - j))];
  return CovariancePack::from_matrix(std::move(sigma), clamp_floor);
}

Eigen::MatrixXd sample_gaussian_rows(const CovariancePack& cov, std::size_t m, std::uint64_t seed,
                                     std::uint64_t stream) {
  if (m == 0) throw std::invalid_argument("need at least one snapshot");
  const auto n = static_cast<Eigen::Index>(cov.size());
  const CounterNormal normal(seed, stream);
  Eigen::MatrixXd white(static_cast<Eigen::Index>(m), n);
  for (Eigen::Index i = 0; i < white.rows(); ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      white(i, k) = normal(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k));
  const Eigen::MatrixXd factor = cov.eigvecs() * cov.eigvals().cwiseSqrt().asDiagonal();
  return white * factor.transpose();
}

FieldSnapshots sample_snapshots(const CovariancePack& cov, std::size_t m, std::uint64_t seed) {
  FieldSnapshots out;
  out.seed = seed;
  out.data = sample_gaussian_rows(cov, m, seed, CounterNormal::kField);
  return out;
}

std::size_t nearest_sample_index(double s, std::size_t n_sensors) {
  if (n_sensors == 0) throw std::invalid_argument("need at least one sensor");
  if (!(s >= 0.0 && s <= 1.0)) throw std::out_of_range("location must lie in [0, 1]");
  const auto k = static_cast<std::size_t>(std::floor(s * static_cast<double>(n_sensors)));
  return std::min(k, n_sensors - 1);
}

double nearest_sample_location(double s, std::size_t n_sensors) {
  const std::size_t k = nearest_sample_index(s, n_sensors);
  return static_cast<double>(2 * k + 1) / (2.0 * static_cast<double>(n_sensors));
}

double interpolate(const CorrelationModel& model, std::span<const double> recon_at_sensors,
                   const SensorGrid& grid, double s) {
  if (recon_at_sensors.size() != grid.size())
    throw std::invalid_argument("reconstruction length does not match the sensor count");
  const std::size_t k = nearest_sample_index(s, grid.size());
  return model(s - grid.positions[k]) * recon_at_sensors[k];
}

}  // namespace fieldrate
