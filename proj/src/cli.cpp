#include "fieldrate/cli.hpp"

#include "fieldrate/errors.hpp"
#include "fieldrate/field.hpp"
#include "fieldrate/quantizer.hpp"
#include "fieldrate/rates.hpp"
#include "fieldrate/sim.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace fieldrate::cli {

namespace {

using nlohmann::json;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Options {
  std::string model = "sinc";
  double d_net = 0.1;
  std::vector<std::size_t> n;
  std::string n_range;
  std::size_t k = 0;
  std::size_t k_max = 0;
  std::optional<double> p;
  std::size_t m = 20000;
  std::size_t m_prime = 2000;
  std::size_t grid_g = 4;
  std::uint64_t seed = 1;
  std::string units = "nats";
  std::string out;
  std::string format;
  std::string scheme = "dsc";
  std::size_t levels = 0;
  std::string quantizer_path;
  std::string log_path;
  bool naive = false;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

CorrelationModel parse_model(const std::string& spec) {
  if (spec == "sinc") return make_correlation(CorrelationKind::sinc);
  if (spec == "exp" || spec == "exp-markov") return make_correlation(CorrelationKind::exp_markov);
  const std::string prefix = "table:";
  if (spec.rfind(prefix, 0) == 0) {
    try {
      return load_correlation_table(spec.substr(prefix.size()));
    } catch (const std::exception& e) {
      throw UsageError(std::string("bad correlation table: ") + e.what());
    }
  }
  throw UsageError("unknown model '" + spec + "' (expected sinc, exp or table:<path>)");
}

// "a:b:s" adds s from a to b inclusive; "a:b:xf" multiplies by f.
std::vector<std::size_t> parse_range(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string tok; std::getline(ss, tok, ':');) parts.push_back(tok);
  if (parts.size() != 3) throw UsageError("--n-range expects start:stop:step or start:stop:xfactor");
  try {
    const std::size_t a = std::stoul(parts[0]);
    const std::size_t b = std::stoul(parts[1]);
    const bool geometric = !parts[2].empty() && parts[2][0] == 'x';
    const std::size_t s = std::stoul(geometric ? parts[2].substr(1) : parts[2]);
    if (a == 0 || b < a || s == 0 || (geometric && s < 2)) throw UsageError("--n-range has an empty or invalid span");
    std::vector<std::size_t> out;
    for (std::size_t v = a; v <= b; v = geometric ? v * s : v + s) out.push_back(v);
    return out;
  } catch (const std::logic_error&) {
    throw UsageError("--n-range has non-numeric fields: " + text);
  }
}

std::vector<std::size_t> resolve_n_list(const Options& o) {
  std::vector<std::size_t> list = o.n;
  if (!o.n_range.empty()) {
    const auto r = parse_range(o.n_range);
    list.insert(list.end(), r.begin(), r.end());
  }
  if (list.empty()) throw UsageError("no sensor counts given (use --n or --n-range)");
  for (std::size_t v : list)
    if (v == 0) throw UsageError("every N must be at least 1");
  return list;
}

double unit_scale(const Options& o) { return o.units == "bits" ? 1.0 / std::numbers::ln2 : 1.0; }

json base_config(const std::string& command, const Options& o) {
  return {{"command", command}, {"model", o.model}, {"dnet", o.d_net}, {"units", o.units}};
}

void emit(const Options& o, std::ostream& out, const std::string& text) {
  if (o.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write output file: " + o.out);
  f << text;
}

std::string csv_with_config(const json& config, const std::string& body) {
  return "# config: " + config.dump() + "\n" + body;
}

int cmd_pmax_curve(const Options& o, std::ostream& out) {
  const CorrelationModel model = parse_model(o.model);
  const auto n_list = resolve_n_list(o);
  json config = base_config("pmax-curve", o);
  config["n"] = n_list;

  json rows = json::array();
  std::ostringstream csv;
  csv << "n,d_prime,p_max,p_max_over_n,feasible\n";
  for (std::size_t n : n_list) {
    double d_prime = 0.0, p_max = 0.0;
    bool feasible = true;
    try {
      d_prime = target_distortion_dsc(o.d_net, n, model);
      p_max = find_pmax(covariance_matrix(model, sensor_positions(n)), d_prime);
    } catch (const InfeasibleError&) {
      feasible = false;
    }
    const double ratio = p_max / static_cast<double>(n);
    csv << n << ',' << (feasible ? num(d_prime) : "") << ',' << (feasible ? num(p_max) : "") << ','
        << (feasible ? num(ratio) : "") << ',' << (feasible ? 1 : 0) << '\n';
    json row{{"n", n}, {"feasible", feasible}};
    if (feasible) {
      row["d_prime"] = d_prime;
      row["p_max"] = p_max;
      row["p_max_over_n"] = ratio;
    }
    rows.push_back(row);
  }
  if (o.format == "json")
    emit(o, out, json{{"config", config}, {"rows", rows}}.dump(2) + "\n");
  else
    emit(o, out, csv_with_config(config, csv.str()));
  return kOk;
}

int cmd_rates(const Options& o, std::ostream& out) {
  const CorrelationModel model = parse_model(o.model);
  const auto n_list = resolve_n_list(o);
  json config = base_config("rates", o);
  config["n"] = n_list;
  const double scale = unit_scale(o);
  const auto reports = rate_curve(model, o.d_net, n_list);

  const std::string u = o.units;
  std::ostringstream csv;
  csv << "n,d_prime,d_double_prime,p_max,dsc_rate_" << u << ",centralized_rate_" << u << ",loss_bound_" << u
      << ",loss_gap_" << u << ",theta,feasible,note\n";
  json rows = json::array();
  for (const RateReport& r : reports) {
    if (r.feasible) {
      csv << r.n_sensors << ',' << num(r.d_prime) << ',' << num(r.d_double_prime) << ',' << num(r.p_max) << ','
          << num(r.dsc_sum_rate_nats * scale) << ',' << num(r.centralized_rate_nats * scale) << ','
          << num(r.rate_loss_bound_nats * scale) << ',' << num(r.loss_gap_nats * scale) << ',' << num(r.theta)
          << ",1," << r.note << '\n';
    } else {
      csv << r.n_sensors << ",,,,,,,,,0," << r.note << '\n';
    }
    json row{{"n", r.n_sensors}, {"feasible", r.feasible}, {"note", r.note}};
    if (r.feasible) {
      row["d_prime"] = r.d_prime;
      row["d_double_prime"] = r.d_double_prime;
      row["p_max"] = r.p_max;
      row["dsc_rate"] = r.dsc_sum_rate_nats * scale;
      row["centralized_rate"] = r.centralized_rate_nats * scale;
      row["loss_bound"] = r.rate_loss_bound_nats * scale;
      row["loss_gap"] = r.loss_gap_nats * scale;
      row["theta"] = r.theta;
    }
    rows.push_back(row);
  }
  if (o.format == "json")
    emit(o, out, json{{"config", config}, {"rows", rows}}.dump(2) + "\n");
  else
    emit(o, out, csv_with_config(config, csv.str()));
  return kOk;
}

int cmd_p2p(const Options& o, std::ostream& out) {
  const CorrelationModel model = parse_model(o.model);
  json config = base_config("p2p", o);
  config["k_max"] = o.k_max;
  const KOptimum opt = optimize_K(model, o.d_net, o.k_max);
  config["k_max"] = opt.k_max;
  const double scale = unit_scale(o);

  const double d_k = p2p_sample_distortion(model, o.d_net, opt.k_star);
  const ScalarQuantizer q = smallest_quantizer_for(d_k);

  if (o.format == "csv") {
    std::ostringstream csv;
    csv << "k,rate_" << o.units << ",capped\n";
    for (const KScanEntry& e : opt.scan) csv << e.k << ',' << num(e.rate_nats * scale) << ',' << (e.capped ? 1 : 0) << '\n';
    emit(o, out, csv_with_config(config, csv.str()));
    return kOk;
  }

  json j{{"config", config},
         {"k_star", opt.k_star},
         {"k_min_feasible", opt.k_min_feasible},
         {"sum_rate", opt.rate_nats * scale},
         {"sample_distortion", d_k},
         {"quantizer",
          {{"levels", q.levels}, {"distortion", q.distortion}, {"delta_bits", q.levels >= 2 ? scalar_delta(q.levels) : 0.0}}}};
  if (!o.n.empty()) {
    json per = json::array();
    for (std::size_t n : o.n)
      per.push_back({{"n", n}, {"per_sensor_rate", opt.rate_nats * scale / static_cast<double>(n)}});
    j["per_sensor"] = per;
  }
  emit(o, out, j.dump(2) + "\n");
  return kOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const CorrelationModel model = parse_model(o.model);
  if (o.n.size() > 1 || !o.n_range.empty()) throw UsageError("simulate takes a single --n");
  json config = base_config("simulate", o);
  config["scheme"] = o.scheme;
  config["seed"] = o.seed;
  config["grid_g"] = o.grid_g;
  config["quadrature"] = o.naive ? "naive" : "hybrid";
  const Quadrature quad = o.naive ? Quadrature::naive : Quadrature::hybrid;

  SimulationReport rep;
  if (o.scheme == "dsc") {
    DscSimConfig cfg;
    cfg.n_sensors = o.n.empty() ? 64 : o.n.front();
    cfg.m = o.m;
    cfg.grid_g = o.grid_g;
    cfg.seed = o.seed;
    cfg.quadrature = quad;
    if (o.p) {
      cfg.noise_variance = *o.p;
    } else {
      const double d_prime = target_distortion_dsc(o.d_net, cfg.n_sensors, model);
      cfg.noise_variance = find_pmax(covariance_matrix(model, sensor_positions(cfg.n_sensors)), d_prime);
    }
    config["n"] = cfg.n_sensors;
    config["m"] = cfg.m;
    config["p"] = cfg.noise_variance;
    rep = simulate_dsc(model, cfg);
  } else if (o.scheme == "p2p") {
    P2pSimConfig cfg;
    cfg.n_sensors = o.n.empty() ? 48 : o.n.front();
    cfg.m_prime = o.m_prime;
    cfg.grid_g = o.grid_g;
    cfg.seed = o.seed;
    cfg.quadrature = quad;
    cfg.k = o.k;
    if (cfg.k == 0) {
      cfg.k = optimize_K(model, o.d_net, o.k_max).k_star;
      if (cfg.n_sensors % cfg.k != 0)
        throw UsageError("optimal K = " + std::to_string(cfg.k) + " does not divide N; pass --k");
    }
    if (cfg.n_sensors % cfg.k != 0) throw UsageError("K must divide N");
    std::optional<ScalarQuantizer> q;
    if (!o.quantizer_path.empty()) {
      std::ifstream f(o.quantizer_path);
      if (!f) throw UsageError("cannot read quantizer file: " + o.quantizer_path);
      try {
        q = quantizer_from_json(json::parse(f));
      } catch (const json::exception& e) {
        throw UsageError(std::string("bad quantizer file: ") + e.what());
      }
    } else if (o.levels > 0) {
      q = lloyd_max(o.levels);
    } else {
      const double d_k = p2p_sample_distortion(model, o.d_net, cfg.k);
      if (!(d_k > 0.0)) throw InfeasibleError("K = " + std::to_string(cfg.k) + " leaves no distortion budget");
      q = smallest_quantizer_for(d_k);
    }
    config["n"] = cfg.n_sensors;
    config["k"] = cfg.k;
    config["m_prime"] = cfg.m_prime;
    config["levels"] = q->levels;
    rep = simulate_p2p(model, cfg, q);
  } else {
    throw UsageError("--scheme must be dsc or p2p");
  }

  json j{{"config", config}, {"report", to_json(rep)}};
  if (o.format == "csv") {
    std::ostringstream csv;
    csv << "j_mse,j_prime_mse,stderr_jmse,bound_low,bound_high,verdict\n"
        << num(rep.j_mse) << ',' << num(rep.j_prime_mse) << ',' << num(rep.stderr_jmse) << ',' << num(rep.bound_low)
        << ',' << num(rep.bound_high) << ',' << to_string(rep.verdict) << '\n';
    emit(o, out, csv_with_config(config, csv.str()));
  } else {
    emit(o, out, j.dump(2) + "\n");
  }
  if (!o.log_path.empty()) append_csv_log(o.log_path, rep);
  return rep.verdict == Verdict::within ? kOk : kBoundViolation;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Rate and distortion calculator for dense sensor sampling of a Gaussian field"};
  app.require_subcommand(1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--model", o.model, "sinc, exp or table:<path>");
    sub->add_option("--dnet", o.d_net, "integrated MSE target")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--out", o.out, "output file (default stdout)");
  };

  auto* pmax = app.add_subcommand("pmax-curve", "largest test-channel noise per N");
  auto* rates = app.add_subcommand("rates", "distributed and centralized rates per N");
  auto* p2p = app.add_subcommand("p2p", "optimal point-to-point scheme");
  auto* sim = app.add_subcommand("simulate", "Monte Carlo check of the error bounds");
  for (auto* sub : {pmax, rates, p2p, sim}) common(sub);
  for (auto* sub : {pmax, rates}) {
    sub->add_option("--n", o.n, "sensor counts")->delimiter(',');
    sub->add_option("--n-range", o.n_range, "start:stop:step or start:stop:xfactor");
    sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  }
  rates->add_option("--units", o.units)->check(CLI::IsMember({"nats", "bits"}));
  p2p->add_option("--units", o.units)->check(CLI::IsMember({"nats", "bits"}));
  p2p->add_option("--k-max", o.k_max, "upper end of the K scan (default 10 K_min)");
  p2p->add_option("--n", o.n, "sensor counts for the per-sensor rate")->delimiter(',');
  p2p->add_option("--format", o.format, "json (summary) or csv (K scan)")->check(CLI::IsMember({"csv", "json"}));

  sim->add_option("--scheme", o.scheme)->check(CLI::IsMember({"dsc", "p2p"}));
  sim->add_option("--n", o.n, "sensor count");
  sim->add_option("--p", o.p, "test-channel noise variance (default p_max at D'(N))")->check(CLI::PositiveNumber);
  sim->add_option("--m", o.m, "snapshots (dsc)")->check(CLI::PositiveNumber);
  sim->add_option("--k", o.k, "sub-intervals (p2p, default K*)");
  sim->add_option("--k-max", o.k_max, "upper end of the K scan");
  sim->add_option("--m-prime", o.m_prime, "frames (p2p)")->check(CLI::PositiveNumber);
  sim->add_option("--levels", o.levels, "quantizer levels (p2p, default smallest meeting D_K)");
  sim->add_option("--quantizer", o.quantizer_path, "codebook JSON (p2p)");
  sim->add_option("--grid-g", o.grid_g, "quadrature nodes per sensor gap")->check(CLI::Range(2, 1 << 20));
  sim->add_option("--seed", o.seed);
  sim->add_flag("--naive", o.naive, "sample the field on the quadrature nodes (N <= 16)");
  sim->add_option("--log", o.log_path, "append a CSV summary row");
  sim->add_option("--format", o.format, "json or csv")->check(CLI::IsMember({"csv", "json"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (o.d_net <= 0.0 || o.d_net >= 1.0) throw UsageError("--dnet must lie in (0, 1)");
    if (pmax->parsed()) return cmd_pmax_curve(o, out);
    if (rates->parsed()) return cmd_rates(o, out);
    if (p2p->parsed()) return cmd_p2p(o, out);
    return cmd_simulate(o, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what();
    if (e.smallest_feasible()) err << " (smallest feasible: " << *e.smallest_feasible() << ')';
    err << '\n';
    return kInfeasible;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace fieldrate::cli
