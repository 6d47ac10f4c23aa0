#include "fieldrate/sim.hpp"

#include "fieldrate/estimation.hpp"
#include "fieldrate/rates.hpp"
#include "fieldrate/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace fieldrate {

namespace {

Verdict judge(double j, double se, double low, double high) {
  const double margin = kStatisticalMargin * se;
  if (j < low - margin) return Verdict::violated_low;
  if (j > high + margin) return Verdict::violated_high;
  return Verdict::within;
}

IntegratedMse summarize(std::vector<double> per_snapshot) {
  IntegratedMse out;
  const auto m = static_cast<double>(per_snapshot.size());
  double sum = 0.0;
  for (double v : per_snapshot) sum += v;
  out.mean = sum / m;
  if (per_snapshot.size() > 1) {
    double ss = 0.0;
    for (double v : per_snapshot) ss += (v - out.mean) * (v - out.mean);
    out.stderr_mean = std::sqrt(ss / (m - 1.0) / m);
  }
  out.per_snapshot = std::move(per_snapshot);
  return out;
}

// rho(s_node - s_k) for every node and sensor.
Eigen::MatrixXd node_sensor_rho(const CorrelationModel& model, const std::vector<double>& nodes,
                                const SensorGrid& grid) {
  Eigen::MatrixXd r(static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(grid.size()));
  for (Eigen::Index a = 0; a < r.rows(); ++a)
    for (Eigen::Index k = 0; k < r.cols(); ++k)
      r(a, k) = model(nodes[static_cast<std::size_t>(a)] - grid.positions[static_cast<std::size_t>(k)]);
  return r;
}

// Jointly sampled field on [sensors, nodes].
Eigen::MatrixXd sample_joint(const CorrelationModel& model, const SensorGrid& grid, const std::vector<double>& nodes,
                             std::size_t m, std::uint64_t seed, double clamp_floor) {
  if (grid.size() > kNaiveMaxSensors)
    throw std::invalid_argument("naive quadrature is limited to N <= " + std::to_string(kNaiveMaxSensors));
  std::vector<double> pts = grid.positions;
  pts.insert(pts.end(), nodes.begin(), nodes.end());
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd sigma(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sigma(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = model(pts[static_cast<std::size_t>(i)] - pts[static_cast<std::size_t>(j)]);
      sigma(i, j) = v;
      sigma(j, i) = v;
    }
  }
  const CovariancePack joint = CovariancePack::from_matrix(std::move(sigma), clamp_floor);
  return sample_gaussian_rows(joint, m, seed, CounterNormal::kJointField);
}

bool sandwich_applicable(const CorrelationModel& model, std::size_t n) {
  const double half = 1.0 / (2.0 * static_cast<double>(n));
  const double r = model(half);
  return r > 0.0 && half <= model.theta_mono() && r * r >= 0.5;
}

std::string model_label(const CorrelationModel& model) {
  std::ostringstream os;
  os << to_string(model.kind());
  if (!model.params().empty() && model.kind() != CorrelationKind::custom_table) {
    os << '(';
    for (std::size_t i = 0; i < model.params().size(); ++i) os << (i ? "," : "") << model.params()[i];
    os << ')';
  }
  return os.str();
}

}  // namespace

std::string to_string(Scheme s) { return s == Scheme::dsc_test_channel ? "dsc-test-channel" : "p2p-lloyd"; }

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::within: return "within";
    case Verdict::violated_low: return "violated-low";
    case Verdict::violated_high: return "violated-high";
  }
  return "unknown";
}

std::string to_string(Quadrature q) { return q == Quadrature::hybrid ? "hybrid" : "naive"; }

std::vector<double> quadrature_nodes(std::size_t n_sensors, std::size_t grid_g) {
  if (n_sensors == 0) throw std::invalid_argument("need at least one sensor");
  if (grid_g < 2) throw std::invalid_argument("need at least two quadrature points per gap");
  const std::size_t total = n_sensors * grid_g;
  std::vector<double> nodes(total);
  for (std::size_t a = 0; a < total; ++a) nodes[a] = (static_cast<double>(a) + 0.5) / static_cast<double>(total);
  return nodes;
}

IntegratedMse integrated_mse(const CorrelationModel& model, const SensorGrid& grid, const FieldSnapshots& truth,
                             const Eigen::MatrixXd& recon_at_sensors, std::size_t grid_g, const SourceFn& source,
                             const CrossTermFn& cross) {
  if (truth.data.rows() != recon_at_sensors.rows() || truth.data.cols() != recon_at_sensors.cols() ||
      static_cast<std::size_t>(truth.data.cols()) != grid.size())
    throw std::invalid_argument("truth and reconstruction shapes disagree with the sensor grid");
  const std::vector<double> nodes = quadrature_nodes(grid.size(), grid_g);
  const Eigen::MatrixXd rho = node_sensor_rho(model, nodes, grid);
  const double w = 1.0 / static_cast<double>(nodes.size());

  std::vector<double> cross_at(nodes.size(), 0.0);
  if (cross)
    for (std::size_t a = 0; a < nodes.size(); ++a) cross_at[a] = cross(nodes[a]);

  const std::size_t m = truth.m();
  std::vector<double> per_snapshot(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    double acc = 0.0;
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      const auto r = static_cast<Eigen::Index>(source(i, nodes[a]));
      const double rr = rho(static_cast<Eigen::Index>(a), r);
      const double e = truth.data(row, r) - recon_at_sensors(row, r);
      acc += (1.0 - rr * rr) + 2.0 * cross_at[a] + rr * rr * e * e;
    }
    per_snapshot[i] = acc * w;
  }
  return summarize(std::move(per_snapshot));
}

IntegratedMse integrated_mse_naive(const CorrelationModel& model, const SensorGrid& grid,
                                   const Eigen::MatrixXd& field_at_nodes, const Eigen::MatrixXd& recon_at_sensors,
                                   std::size_t grid_g, const SourceFn& source) {
  const std::vector<double> nodes = quadrature_nodes(grid.size(), grid_g);
  if (static_cast<std::size_t>(field_at_nodes.cols()) != nodes.size() ||
      field_at_nodes.rows() != recon_at_sensors.rows() ||
      static_cast<std::size_t>(recon_at_sensors.cols()) != grid.size())
    throw std::invalid_argument("node field and reconstruction shapes disagree");
  const Eigen::MatrixXd rho = node_sensor_rho(model, nodes, grid);
  const double w = 1.0 / static_cast<double>(nodes.size());

  const auto m = static_cast<std::size_t>(field_at_nodes.rows());
  std::vector<double> per_snapshot(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    double acc = 0.0;
    for (std::size_t a = 0; a < nodes.size(); ++a) {
      const auto r = static_cast<Eigen::Index>(source(i, nodes[a]));
      const double e = field_at_nodes(row, static_cast<Eigen::Index>(a)) -
                       rho(static_cast<Eigen::Index>(a), r) * recon_at_sensors(row, r);
      acc += e * e;
    }
    per_snapshot[i] = acc * w;
  }
  return summarize(std::move(per_snapshot));
}

SimulationReport simulate_dsc(const CorrelationModel& model, const DscSimConfig& cfg) {
  if (!(cfg.noise_variance > 0.0)) throw std::invalid_argument("test-channel noise variance must be positive");
  if (cfg.m == 0) throw std::invalid_argument("need at least one snapshot");
  if (cfg.grid_g < 2) throw std::invalid_argument("need at least two quadrature points per gap");

  const SensorGrid grid = sensor_positions(cfg.n_sensors);
  const CovariancePack cov = covariance_matrix(model, grid, cfg.clamp_floor);
  const TestChannel channel(cov, cfg.noise_variance);
  const Eigen::MatrixXd gain = channel.gain_matrix();
  const auto n = static_cast<Eigen::Index>(cfg.n_sensors);
  const std::vector<double> nodes = quadrature_nodes(cfg.n_sensors, cfg.grid_g);

  FieldSnapshots truth;
  truth.seed = cfg.seed;
  Eigen::MatrixXd field_at_nodes;
  if (cfg.quadrature == Quadrature::naive) {
    const Eigen::MatrixXd joint = sample_joint(model, grid, nodes, cfg.m, cfg.seed, cfg.clamp_floor);
    truth.data = joint.leftCols(n);
    field_at_nodes = joint.rightCols(static_cast<Eigen::Index>(nodes.size()));
  } else {
    truth = sample_snapshots(cov, cfg.m, cfg.seed);
  }

  const CounterNormal noise(cfg.seed, CounterNormal::kChannelNoise);
  const double sd = std::sqrt(cfg.noise_variance);
  Eigen::MatrixXd observed = truth.data;
  for (Eigen::Index i = 0; i < observed.rows(); ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      observed(i, k) += sd * noise(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k));
  const Eigen::MatrixXd recon = observed * gain.transpose();

  SimulationReport rep;
  rep.scheme = Scheme::dsc_test_channel;
  rep.quadrature = cfg.quadrature;
  rep.model = model_label(model);
  rep.n_sensors = cfg.n_sensors;
  rep.noise_variance = cfg.noise_variance;
  rep.n_snapshots = cfg.m;
  rep.grid_points_per_gap = cfg.grid_g;
  rep.seed = cfg.seed;
  rep.design_distortion = mmse_error(channel).avg_mse;

  const Eigen::ArrayXXd sq = (truth.data - recon).array().square();
  rep.per_sensor_mse.resize(cfg.n_sensors);
  for (Eigen::Index k = 0; k < n; ++k) rep.per_sensor_mse[static_cast<std::size_t>(k)] = sq.col(k).mean();
  const Eigen::VectorXd row_means = sq.rowwise().mean().matrix();
  const IntegratedMse j_prime = summarize(std::vector<double>(row_means.data(), row_means.data() + row_means.size()));
  rep.j_prime_mse = j_prime.mean;
  rep.stderr_j_prime = j_prime.stderr_mean;

  // E[E_S(s) E_Q(s)] with r the nearest sensor, g_r the r-th row of the gain:
  //   rho(s - s_r) [rho(s - s_r) (G Sigma)_rr - g_r . c(s)],  c(s)_k = rho(s - s_k).
  const Eigen::MatrixXd gain_sigma = gain * cov.sigma();
  auto cross = [&](double s) {
    const std::size_t r = nearest_sample_index(s, cfg.n_sensors);
    const double rr = model(s - grid.positions[r]);
    double gc = 0.0;
    for (Eigen::Index k = 0; k < n; ++k)
      gc += gain(static_cast<Eigen::Index>(r), k) * model(s - grid.positions[static_cast<std::size_t>(k)]);
    return rr * (rr * gain_sigma(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) - gc);
  };
  double cross_total = 0.0;
  for (double s : nodes) cross_total += 2.0 * cross(s);
  rep.cross_term = cross_total / static_cast<double>(nodes.size());

  const SourceFn source = [&](std::size_t, double s) { return nearest_sample_index(s, cfg.n_sensors); };
  const IntegratedMse j = cfg.quadrature == Quadrature::naive
                              ? integrated_mse_naive(model, grid, field_at_nodes, recon, cfg.grid_g, source)
                              : integrated_mse(model, grid, truth, recon, cfg.grid_g, source, cross);
  rep.j_mse = j.mean;
  rep.stderr_jmse = j.stderr_mean;

  const MseSandwich bounds = integrated_mse_bounds(model, cfg.n_sensors, rep.j_prime_mse);
  rep.bound_low = bounds.low;
  rep.bound_high = bounds.high;
  rep.bounds_applicable = sandwich_applicable(model, cfg.n_sensors);
  rep.verdict = judge(rep.j_mse, rep.stderr_jmse, rep.bound_low, rep.bound_high);
  return rep;
}

SimulationReport simulate_p2p(const CorrelationModel& model, const P2pSimConfig& cfg,
                              const std::optional<ScalarQuantizer>& quantizer) {
  const TdmaSchedule sched = tdma_schedule(cfg.n_sensors, cfg.k, cfg.m_prime);
  if (cfg.grid_g < 2) throw std::invalid_argument("need at least two quadrature points per gap");
  if (quantizer && (quantizer->points.size() != quantizer->levels ||
                    quantizer->boundaries.size() + 1 != quantizer->levels))
    throw std::invalid_argument("malformed quantizer");

  const SensorGrid grid = sensor_positions(cfg.n_sensors);
  const std::vector<double> nodes = quadrature_nodes(cfg.n_sensors, cfg.grid_g);
  const std::size_t steps = sched.steps();
  const auto n = static_cast<Eigen::Index>(cfg.n_sensors);

  FieldSnapshots truth;
  truth.seed = cfg.seed;
  Eigen::MatrixXd field_at_nodes;
  if (cfg.quadrature == Quadrature::naive) {
    const Eigen::MatrixXd joint = sample_joint(model, grid, nodes, steps, cfg.seed, cfg.clamp_floor);
    truth.data = joint.leftCols(n);
    field_at_nodes = joint.rightCols(static_cast<Eigen::Index>(nodes.size()));
  } else {
    truth = sample_snapshots(covariance_matrix(model, grid, cfg.clamp_floor), steps, cfg.seed);
  }

  // Only active samples are coded; the rest of recon is never read.
  Eigen::MatrixXd recon = Eigen::MatrixXd::Zero(truth.data.rows(), n);
  std::vector<double> err_sum(cfg.n_sensors, 0.0);
  std::vector<double> step_err(steps, 0.0);
  for (std::size_t t = 1; t <= steps; ++t) {
    const auto row = static_cast<Eigen::Index>(t - 1);
    for (std::size_t l = 0; l < cfg.k; ++l) {
      const std::size_t s = sched.active_sensor(l, t);
      const double x = truth.data(row, static_cast<Eigen::Index>(s));
      const double xq = quantizer ? quantize(*quantizer, x).reproduction : x;
      recon(row, static_cast<Eigen::Index>(s)) = xq;
      err_sum[s] += (x - xq) * (x - xq);
      step_err[t - 1] += (x - xq) * (x - xq) / static_cast<double>(cfg.k);
    }
  }

  SimulationReport rep;
  rep.scheme = Scheme::p2p_lloyd;
  rep.quadrature = cfg.quadrature;
  rep.model = model_label(model);
  rep.n_sensors = cfg.n_sensors;
  rep.k = cfg.k;
  rep.levels = quantizer ? quantizer->levels : 0;
  rep.design_distortion = quantizer ? quantizer->distortion : 0.0;
  rep.n_snapshots = steps;
  rep.grid_points_per_gap = cfg.grid_g;
  rep.seed = cfg.seed;
  rep.per_sensor_mse.resize(cfg.n_sensors);
  for (std::size_t s = 0; s < cfg.n_sensors; ++s) rep.per_sensor_mse[s] = err_sum[s] / static_cast<double>(cfg.m_prime);
  const IntegratedMse j_prime = summarize(std::move(step_err));
  rep.j_prime_mse = j_prime.mean;
  rep.stderr_j_prime = j_prime.stderr_mean;

  const SourceFn source = [&](std::size_t i, double s) {
    const auto l = static_cast<std::size_t>(
        std::clamp(std::ceil(s * static_cast<double>(cfg.k)) - 1.0, 0.0, static_cast<double>(cfg.k - 1)));
    return sched.active_sensor(l, i + 1);
  };
  const IntegratedMse j = cfg.quadrature == Quadrature::naive
                              ? integrated_mse_naive(model, grid, field_at_nodes, recon, cfg.grid_g, source)
                              : integrated_mse(model, grid, truth, recon, cfg.grid_g, source);
  rep.j_mse = j.mean;
  rep.stderr_jmse = j.stderr_mean;

  const double r = model(1.0 / static_cast<double>(cfg.k));
  rep.bound_low = 0.0;
  rep.bound_high = (1.0 - r * r) + rep.j_prime_mse;
  rep.bounds_applicable = 1.0 / static_cast<double>(cfg.k) <= model.theta_mono();
  rep.verdict = judge(rep.j_mse, rep.stderr_jmse, rep.bound_low, rep.bound_high);
  return rep;
}

nlohmann::json to_json(const SimulationReport& r) {
  nlohmann::json j;
  j["scheme"] = to_string(r.scheme);
  j["quadrature"] = to_string(r.quadrature);
  j["model"] = r.model;
  j["n_sensors"] = r.n_sensors;
  if (r.scheme == Scheme::dsc_test_channel) {
    j["noise_variance"] = r.noise_variance;
    j["note"] = "test-channel surrogate at finite m";
  } else {
    j["k"] = r.k;
    j["levels"] = r.levels;
  }
  j["design_distortion"] = r.design_distortion;
  j["j_mse"] = r.j_mse;
  j["j_prime_mse"] = r.j_prime_mse;
  j["per_sensor_mse"] = r.per_sensor_mse;
  j["n_snapshots"] = r.n_snapshots;
  j["grid_points_per_gap"] = r.grid_points_per_gap;
  j["seed"] = r.seed;
  j["bound_low"] = r.bound_low;
  j["bound_high"] = r.bound_high;
  j["bounds_applicable"] = r.bounds_applicable;
  j["cross_term"] = r.cross_term;
  j["stderr_jmse"] = r.stderr_jmse;
  j["stderr_j_prime"] = r.stderr_j_prime;
  j["verdict"] = to_string(r.verdict);
  return j;
}

void append_csv_log(const std::filesystem::path& path, const SimulationReport& r) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open CSV log: " + path.string());
  if (fresh)
    out << "scheme,quadrature,model,n_sensors,noise_variance,k,levels,n_snapshots,grid_points_per_gap,seed,"
           "j_mse,j_prime_mse,stderr_jmse,bound_low,bound_high,verdict\n";
  out << std::setprecision(10) << to_string(r.scheme) << ',' << to_string(r.quadrature) << ',' << r.model << ','
      << r.n_sensors << ',' << r.noise_variance << ',' << r.k << ',' << r.levels << ',' << r.n_snapshots << ','
      << r.grid_points_per_gap << ',' << r.seed << ',' << r.j_mse << ',' << r.j_prime_mse << ',' << r.stderr_jmse
      << ',' << r.bound_low << ',' << r.bound_high << ',' << to_string(r.verdict) << '\n';
}

}  // namespace fieldrate
