#include "fieldrate/estimation.hpp"
#include "fieldrate/rates.hpp"
#include "fieldrate/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

using namespace fieldrate;

namespace {

const CorrelationModel kSinc = make_correlation(CorrelationKind::sinc);
const CorrelationModel kExp = make_correlation(CorrelationKind::exp_markov);

// Integral of 1 - rho^2(s - n(s)) over [0, 1] by composite Simpson on each
// half-cell, where the integrand is smooth.
double interpolation_only_error(const CorrelationModel& m, std::size_t n) {
  const double h = 0.5 / static_cast<double>(n);
  const int steps = 2000;
  double half_cell = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double t = h * i / steps;
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    half_cell += w * (1.0 - m(t) * m(t));
  }
  half_cell *= h / steps / 3.0;
  return 2.0 * static_cast<double>(n) * half_cell;
}

double within_margin(double a, double b, double se) { return std::abs(a - b) <= kStatisticalMargin * se; }

}  // namespace

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

TEST(Quadrature, Nodes) {
  const auto nodes = quadrature_nodes(2, 2);
  EXPECT_EQ(nodes, (std::vector<double>{0.125, 0.375, 0.625, 0.875}));
  EXPECT_THROW(quadrature_nodes(2, 1), std::invalid_argument);
  EXPECT_THROW(quadrature_nodes(0, 4), std::invalid_argument);
}

TEST(IntegratedMse, PerfectReconstructionSingleSensor) {
  const SensorGrid g = sensor_positions(1);
  FieldSnapshots truth;
  truth.data = Eigen::MatrixXd::Constant(3, 1, 0.7);
  const auto src = [](std::size_t, double s) { return nearest_sample_index(s, 1); };
  const IntegratedMse j = integrated_mse(kExp, g, truth, truth.data, 2000, src);
  EXPECT_NEAR(j.mean, std::exp(-1.0), 1e-6);
  EXPECT_EQ(j.stderr_mean, 0.0);
}

TEST(IntegratedMse, ZeroFieldNaive) {
  const SensorGrid g = sensor_positions(4);
  const Eigen::MatrixXd zero_nodes = Eigen::MatrixXd::Zero(5, 16);
  const Eigen::MatrixXd zero_recon = Eigen::MatrixXd::Zero(5, 4);
  const auto src = [](std::size_t, double s) { return nearest_sample_index(s, 4); };
  EXPECT_EQ(integrated_mse_naive(kExp, g, zero_nodes, zero_recon, 4, src).mean, 0.0);
}

TEST(IntegratedMse, GridRefinementConverges) {
  for (const CorrelationModel* m : {&kSinc, &kExp}) {
    DscSimConfig cfg;
    cfg.n_sensors = 16;
    cfg.noise_variance = 0.05;
    cfg.m = 2000;
    cfg.grid_g = 4;
    const double coarse = simulate_dsc(*m, cfg).j_mse;
    cfg.grid_g = 8;
    const double fine = simulate_dsc(*m, cfg).j_mse;
    EXPECT_LT(std::abs(fine - coarse) / fine, 0.005);
  }
}

TEST(IntegratedMse, ShapeMismatch) {
  const SensorGrid g = sensor_positions(3);
  FieldSnapshots truth;
  truth.data = Eigen::MatrixXd::Zero(2, 3);
  const auto src = [](std::size_t, double s) { return nearest_sample_index(s, 3); };
  EXPECT_THROW(integrated_mse(kExp, g, truth, Eigen::MatrixXd::Zero(2, 2), 4, src), std::invalid_argument);
  EXPECT_THROW(integrated_mse_naive(kExp, g, Eigen::MatrixXd::Zero(2, 5), truth.data, 4, src), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Distributed scheme (test channel)
// ---------------------------------------------------------------------------

TEST(SimulateDsc, NoiselessLimit) {
  DscSimConfig cfg;
  cfg.n_sensors = 16;
  cfg.noise_variance = 1e-8;
  cfg.m = 2000;
  cfg.grid_g = 64;
  const SimulationReport r = simulate_dsc(kExp, cfg);
  EXPECT_LT(r.j_prime_mse, 1e-6);
  EXPECT_NEAR(r.j_mse, interpolation_only_error(kExp, 16), 1e-5);
  EXPECT_NEAR(r.cross_term, 0.0, 1e-6);
}

TEST(SimulateDsc, DesignedRunMeetsTarget) {
  const std::size_t n = 64;
  const double d_prime = target_distortion_dsc(0.1, n, kExp);
  const CovariancePack c = covariance_matrix(kExp, sensor_positions(n));
  DscSimConfig cfg;
  cfg.n_sensors = n;
  cfg.noise_variance = find_pmax(c, d_prime);
  const SimulationReport r = simulate_dsc(kExp, cfg);
  EXPECT_TRUE(within_margin(r.j_prime_mse, mmse_avg_error(c, cfg.noise_variance), r.stderr_j_prime))
      << r.j_prime_mse << " vs " << mmse_avg_error(c, cfg.noise_variance);
  EXPECT_LE(r.j_mse, 0.1 + kStatisticalMargin * r.stderr_jmse);
  EXPECT_EQ(r.verdict, Verdict::within);
  EXPECT_TRUE(r.bounds_applicable);
  EXPECT_EQ(r.n_snapshots, 20000u);
  EXPECT_EQ(r.per_sensor_mse.size(), n);
}

TEST(SimulateDsc, RandomConfigurationsWithinSandwich) {
  std::mt19937_64 gen(31);
  std::uniform_int_distribution<std::size_t> pick_n(2, 64);
  std::uniform_real_distribution<double> pick_logp(-3.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const CorrelationModel& m = trial % 2 ? kSinc : kExp;
    DscSimConfig cfg;
    cfg.n_sensors = pick_n(gen);
    cfg.noise_variance = std::pow(10.0, pick_logp(gen));
    cfg.m = 4000;
    cfg.seed = 100 + trial;
    const SimulationReport r = simulate_dsc(m, cfg);
    EXPECT_EQ(r.verdict, Verdict::within) << to_string(m.kind()) << " N=" << cfg.n_sensors
                                          << " p=" << cfg.noise_variance << " J=" << r.j_mse << " ["
                                          << r.bound_low << ", " << r.bound_high << "]";
    EXPECT_GE(r.j_mse, 0.0);
  }
}

TEST(SimulateDsc, HybridMatchesNaive) {
  for (const CorrelationModel* m : {&kSinc, &kExp}) {
    DscSimConfig cfg;
    cfg.n_sensors = 8;
    cfg.noise_variance = 0.5;
    cfg.m = 20000;
    const SimulationReport hybrid = simulate_dsc(*m, cfg);
    cfg.quadrature = Quadrature::naive;
    const SimulationReport naive = simulate_dsc(*m, cfg);
    const double se = std::hypot(hybrid.stderr_jmse, naive.stderr_jmse);
    EXPECT_TRUE(within_margin(hybrid.j_mse, naive.j_mse, se)) << hybrid.j_mse << " vs " << naive.j_mse;
  }
}

TEST(SimulateDsc, CrossTermIsNotNegligible) {
  // The independent-error formula (hybrid estimate without the E_S E_Q term)
  // is detectably off against the jointly sampled field.
  DscSimConfig cfg;
  cfg.n_sensors = 4;
  cfg.noise_variance = 1.0;
  cfg.m = 20000;
  const SimulationReport hybrid = simulate_dsc(kExp, cfg);
  cfg.quadrature = Quadrature::naive;
  const SimulationReport naive = simulate_dsc(kExp, cfg);
  const double additive = hybrid.j_mse - hybrid.cross_term;
  const double se = std::hypot(hybrid.stderr_jmse, naive.stderr_jmse);
  EXPECT_FALSE(within_margin(naive.j_mse, additive, se)) << "cross term " << hybrid.cross_term;
  EXPECT_TRUE(within_margin(naive.j_mse, hybrid.j_mse, se));
}

TEST(SimulateDsc, Deterministic) {
  DscSimConfig cfg;
  cfg.n_sensors = 12;
  cfg.m = 500;
  cfg.noise_variance = 0.2;
  EXPECT_EQ(to_json(simulate_dsc(kSinc, cfg)).dump(), to_json(simulate_dsc(kSinc, cfg)).dump());
  cfg.quadrature = Quadrature::naive;
  EXPECT_EQ(to_json(simulate_dsc(kSinc, cfg)).dump(), to_json(simulate_dsc(kSinc, cfg)).dump());
  DscSimConfig other = cfg;
  other.seed = 2;
  EXPECT_NE(simulate_dsc(kSinc, cfg).j_mse, simulate_dsc(kSinc, other).j_mse);
}

TEST(SimulateDsc, ErrorPaths) {
  DscSimConfig cfg;
  cfg.n_sensors = 8;
  cfg.noise_variance = 0.0;
  EXPECT_THROW(simulate_dsc(kExp, cfg), std::invalid_argument);
  cfg.noise_variance = 1.0;
  cfg.m = 0;
  EXPECT_THROW(simulate_dsc(kExp, cfg), std::invalid_argument);
  cfg.m = 10;
  cfg.grid_g = 1;
  EXPECT_THROW(simulate_dsc(kExp, cfg), std::invalid_argument);
  cfg.grid_g = 4;
  cfg.n_sensors = 17;
  cfg.quadrature = Quadrature::naive;
  EXPECT_THROW(simulate_dsc(kExp, cfg), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Point-to-point scheme
// ---------------------------------------------------------------------------

TEST(SimulateP2p, IdentityQuantizerLeavesInterpolationError) {
  P2pSimConfig cfg;
  cfg.n_sensors = 48;
  cfg.k = 24;
  const SimulationReport r = simulate_p2p(kExp, cfg, std::nullopt);
  EXPECT_EQ(r.j_prime_mse, 0.0);
  EXPECT_EQ(r.levels, 0u);
  const double interp = 1.0 - std::pow(kExp(1.0 / 24.0), 2);
  EXPECT_LE(r.j_mse, interp + kStatisticalMargin * r.stderr_jmse);
  EXPECT_EQ(r.verdict, Verdict::within);
}

TEST(SimulateP2p, DesignedRunMeetsTarget) {
  P2pSimConfig cfg;
  cfg.n_sensors = 48;
  cfg.k = 24;
  const ScalarQuantizer q = smallest_quantizer_for(p2p_sample_distortion(kExp, 0.1, 24));
  const SimulationReport r = simulate_p2p(kExp, cfg, q);
  EXPECT_LE(r.j_mse, 0.1 + kStatisticalMargin * r.stderr_jmse);
  EXPECT_EQ(r.verdict, Verdict::within);
  EXPECT_TRUE(within_margin(r.j_prime_mse, q.distortion, r.stderr_j_prime))
      << r.j_prime_mse << " vs " << q.distortion << " se " << r.stderr_j_prime;
  EXPECT_EQ(r.n_snapshots, 2000u * 2u);
}

TEST(SimulateP2p, RandomConfigurationsWithinBound) {
  std::mt19937_64 gen(8);
  const std::size_t ks[] = {4, 6, 8, 12, 16, 24};
  std::uniform_int_distribution<int> pick_k(0, 5);
  std::uniform_int_distribution<std::size_t> pick_frame(1, 3);
  std::uniform_int_distribution<std::size_t> pick_l(2, 16);
  for (int trial = 0; trial < 10; ++trial) {
    const CorrelationModel& m = trial % 2 ? kSinc : kExp;
    P2pSimConfig cfg;
    cfg.k = ks[pick_k(gen)];
    cfg.n_sensors = cfg.k * pick_frame(gen);
    cfg.m_prime = 1000;
    cfg.seed = 500 + trial;
    const SimulationReport r = simulate_p2p(m, cfg, lloyd_max(pick_l(gen)));
    EXPECT_EQ(r.verdict, Verdict::within) << "N=" << cfg.n_sensors << " K=" << cfg.k << " L=" << r.levels;
  }
}

TEST(SimulateP2p, AdditiveDecompositionHolds) {
  P2pSimConfig cfg;
  cfg.n_sensors = 16;
  cfg.k = 8;
  cfg.m_prime = 5000;
  const ScalarQuantizer q = lloyd_max(4);
  const SimulationReport hybrid = simulate_p2p(kExp, cfg, q);
  cfg.quadrature = Quadrature::naive;
  const SimulationReport naive = simulate_p2p(kExp, cfg, q);
  EXPECT_EQ(hybrid.cross_term, 0.0);
  const double se = std::hypot(hybrid.stderr_jmse, naive.stderr_jmse);
  EXPECT_TRUE(within_margin(hybrid.j_mse, naive.j_mse, se)) << hybrid.j_mse << " vs " << naive.j_mse;
}

TEST(SimulateP2p, ErrorPaths) {
  P2pSimConfig cfg;
  cfg.n_sensors = 10;
  cfg.k = 3;
  EXPECT_THROW(simulate_p2p(kExp, cfg, std::nullopt), std::invalid_argument);
  cfg.k = 5;
  ScalarQuantizer bad = lloyd_max(4);
  bad.points.pop_back();
  EXPECT_THROW(simulate_p2p(kExp, cfg, bad), std::invalid_argument);
}

TEST(SimulateP2p, Deterministic) {
  P2pSimConfig cfg;
  cfg.n_sensors = 12;
  cfg.k = 6;
  cfg.m_prime = 300;
  const ScalarQuantizer q = lloyd_max(8);
  EXPECT_EQ(to_json(simulate_p2p(kSinc, cfg, q)).dump(), to_json(simulate_p2p(kSinc, cfg, q)).dump());
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

TEST(Report, JsonFields) {
  P2pSimConfig cfg;
  cfg.n_sensors = 8;
  cfg.k = 4;
  cfg.m_prime = 50;
  const nlohmann::json j = to_json(simulate_p2p(kExp, cfg, lloyd_max(4)));
  for (const char* key : {"scheme", "j_mse", "j_prime_mse", "per_sensor_mse", "n_snapshots", "grid_points_per_gap",
                          "seed", "bound_low", "bound_high", "verdict", "stderr_jmse"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["scheme"], "p2p-lloyd");
  EXPECT_EQ(j["bound_low"], 0.0);
}

TEST(Report, CsvLogAppends) {
  const auto path = std::filesystem::temp_directory_path() / "fieldrate_sim_log_test.csv";
  std::filesystem::remove(path);
  DscSimConfig cfg;
  cfg.n_sensors = 4;
  cfg.m = 20;
  const SimulationReport r = simulate_dsc(kExp, cfg);
  append_csv_log(path, r);
  append_csv_log(path, r);
  std::ifstream f(path);
  std::string line;
  int lines = 0, headers = 0;
  while (std::getline(f, line)) {
    ++lines;
    if (line.rfind("scheme,", 0) == 0) ++headers;
  }
  EXPECT_EQ(lines, 3);
  EXPECT_EQ(headers, 1);
  std::filesystem::remove(path);
}
