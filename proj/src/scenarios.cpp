#include "pinnflow/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pinnflow/errors.hpp"
#include "pinnflow/hash.hpp"
#include "pinnflow/io.hpp"

namespace pinnflow {

using nlohmann::json;

void ScenarioConfig::validate() const {
  if (length_days <= 0 || steps_per_day != 24) throw ValueError("scenario needs positive days and 24 steps/day");
  if (!(kwp_range.first >= 0.0 && kwp_range.first <= kwp_range.second)) throw ValueError("kwp range");
  if (!(penetration_range.first >= 0.0 && penetration_range.first <= penetration_range.second &&
        penetration_range.second <= 1.0)) {
    throw ValueError("penetration range must be ordered within [0, 1]");
  }
}

ScenarioConfig scenario_preset(const std::string& profile, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.name = profile;
  if (profile == "ts1") {
    cfg.length_days = 7;
  } else if (profile == "ts2") {
    cfg.length_days = 30;
  } else if (profile == "ts3") {
    cfg.length_days = 365;
  } else if (profile == "c1") {
    cfg.length_days = 30;
  } else if (profile == "c2") {
    cfg.length_days = 30;
    cfg.kwp_range = {5.0, 12.0};
  } else {
    throw Error("unknown profile '" + profile + "' (expected ts1|ts2|ts3|c1|c2|custom)", ExitCode::Usage);
  }
  cfg.seed = sub_seed(seed, "profile:" + profile);
  return cfg;
}

namespace {

double raw_shape(int hour) {
  const double h = hour + 0.5;
  auto bump = [h](double centre, double width) { return std::exp(-0.5 * std::pow((h - centre) / width, 2)); };
  return 0.35 + 0.9 * bump(7.5, 1.2) + 1.6 * bump(19.0, 1.8);
}

}  // namespace

double household_shape(int hour) {
  static const double mean = [] {
    double s = 0.0;
    for (int h = 0; h < 24; ++h) s += raw_shape(h);
    return s / 24.0;
  }();
  return raw_shape(hour % 24) / mean;
}

double irradiance_shape(int hour) {
  const int h = hour % 24;
  if (h < 7 || h > 19) return 0.0;
  return std::max(0.0, std::sin(std::numbers::pi * (h - 7) / 12.0));
}

Eigen::MatrixXd generate_profiles(const Network& network, const ScenarioConfig& cfg) {
  cfg.validate();
  const int n = network.load_bus_count();
  const int days = cfg.length_days;
  const int steps = cfg.steps_per_day;

  std::mt19937_64 household_rng(sub_seed(cfg.seed, "households"));
  std::mt19937_64 pv_rng(sub_seed(cfg.seed, "pv"));
  std::mt19937_64 noise_rng(sub_seed(cfg.seed, "noise"));

  std::uniform_real_distribution<double> scale_dist(0.3, 1.5);
  std::vector<double> scale(n);
  for (auto& s : scale) s = scale_dist(household_rng);

  constexpr double sigma = 0.2;
  std::lognormal_distribution<double> noise(-0.5 * sigma * sigma, sigma);
  std::uniform_real_distribution<double> pen_dist(cfg.penetration_range.first, cfg.penetration_range.second);
  std::uniform_real_distribution<double> kwp_dist(cfg.kwp_range.first, cfg.kwp_range.second);

  const double kw_to_pu = 1000.0 / network.per_unit().s_base;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(days) * steps, n);
  std::vector<int> order(n);
  std::vector<double> kwp(n);
  for (int d = 0; d < days; ++d) {
    const double penetration = pen_dist(pv_rng);
    const int with_pv = std::min(n, static_cast<int>(std::ceil(penetration * n - 1e-12)));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), pv_rng);
    std::fill(kwp.begin(), kwp.end(), 0.0);
    for (int k = 0; k < with_pv; ++k) kwp[order[k]] = kwp_dist(pv_rng);

    for (int h = 0; h < steps; ++h) {
      const Eigen::Index row = static_cast<Eigen::Index>(d) * steps + h;
      for (int i = 0; i < n; ++i) {
        const double consumption = scale[i] * household_shape(h) * noise(noise_rng);
        out(row, i) = (kwp[i] * irradiance_shape(h) - consumption) * kw_to_pu;
      }
    }
  }
  return out;
}

VoltageState Dataset::state(Eigen::Index t) const {
  const int n = load_buses();
  VoltageState s = VoltageState::flat(n + 1);
  s.v.tail(n) = y.row(t).head(n).transpose();
  s.theta.tail(n) = y.row(t).tail(n).transpose();
  return s;
}

InjectionVector Dataset::injection(Eigen::Index t) const {
  return InjectionVector::active(x.row(t).transpose());
}

Dataset build_dataset(const Network& network, const Eigen::MatrixXd& profiles, const ScenarioConfig& cfg,
                      const SolverOptions& opts) {
  const int n = network.load_bus_count();
  if (profiles.cols() != n) throw DimensionMismatch("profile columns do not match load buses");
  Dataset d;
  d.x = profiles;
  d.y.resize(profiles.rows(), 2 * n);
  d.config = cfg;
  d.network_checksum = network.checksum();
  for (Eigen::Index t = 0; t < profiles.rows(); ++t) {
    VoltageState s;
    try {
      s = solve_power_flow(network, InjectionVector::active(profiles.row(t).transpose()), opts);
    } catch (const Error& e) {
      throw SolverFailure(static_cast<std::size_t>(t), e.what());
    }
    d.y.row(t).head(n) = s.v.tail(n).transpose();
    d.y.row(t).tail(n) = s.theta.tail(n).transpose();
  }
  return d;
}

DatasetStats dataset_stats(const Dataset& d) {
  const int n = d.load_buses();
  if (d.rows() == 0 || n == 0) throw PreconditionError("dataset is empty");
  const auto v = d.y.leftCols(n).array();
  DatasetStats s;
  s.total_count = static_cast<std::size_t>(v.size());
  s.mean = v.mean();
  s.stddev = std::sqrt((v - s.mean).square().mean());
  s.min = v.minCoeff();
  s.max = v.maxCoeff();
  s.count_over_1_05 = static_cast<std::size_t>((v > 1.05).count());
  s.count_over_1_08 = static_cast<std::size_t>((v > 1.08).count());
  return s;
}

double dataset_max_mismatch(const Network& network, const Dataset& d) {
  double worst = 0.0;
  for (Eigen::Index t = 0; t < d.rows(); ++t) {
    worst = std::max(worst, nodal_mismatch(network, d.state(t), d.injection(t)).max_abs());
  }
  return worst;
}

double peak_voltage(const Network& network, double peak_kw, const SolverOptions& opts) {
  const double pu = network.per_unit().power_to_pu(peak_kw * 1000.0);
  const auto inj = InjectionVector::active(Eigen::VectorXd::Constant(network.load_bus_count(), pu));
  return solve_power_flow(network, inj, opts).v.maxCoeff();
}

namespace {

Network scaled(const Network& base, double factor) {
  std::vector<Line> lines = base.lines();
  for (auto& l : lines) {
    l.resistance *= factor;
    l.reactance *= factor;
  }
  return Network(base.per_unit(), base.buses(), std::move(lines));
}

// Peak voltage for an impedance scale; infeasible operating points count as
// "too high".
double probe(const Network& base, double factor, double peak_kw, const SolverOptions& opts) {
  try {
    return peak_voltage(scaled(base, factor), peak_kw, opts);
  } catch (const NonConvergence&) {
    return std::numeric_limits<double>::infinity();
  } catch (const SingularJacobian&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

Network calibrate_lines(const Network& network_template, double target_vmax, double peak_kw,
                        const SolverOptions& opts) {
  if (!(target_vmax > 1.0)) throw PreconditionError("target voltage must exceed 1 p.u.");
  if (!(peak_kw > 0.0)) throw PreconditionError("peak injection must be positive");

  double lo = 0.0;
  double hi = 1.0;
  int steps = 0;
  while (probe(network_template, hi, peak_kw, opts) < target_vmax) {
    lo = hi;
    hi *= 2.0;
    if (++steps >= 60) throw CalibrationFailure("no impedance scale reaches the target voltage");
  }
  // Peak voltage is monotone in the impedance scale; bisect well below
  // the 1e-4 p.u. acceptance band.
  for (int iter = 0; iter < 200 && hi - lo > 1e-15 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double v = probe(network_template, mid, peak_kw, opts);
    if (v < target_vmax) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (std::abs(v - target_vmax) < 1e-12) {
      lo = hi = mid;
      break;
    }
  }
  Network result = scaled(network_template, 0.5 * (lo + hi));
  const double reached = peak_voltage(result, peak_kw, opts);
  if (std::abs(reached - target_vmax) > 1e-4) {
    throw CalibrationFailure("bisection ended at " + std::to_string(reached) + " p.u.");
  }
  return result;
}

void write_dataset(const Dataset& d, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const int n = d.load_buses();
  std::ostringstream csv;
  for (int i = 1; i <= n; ++i) csv << (i > 1 ? "," : "") << "P_" << i;
  for (int i = 1; i <= n; ++i) csv << ",V_" << i;
  for (int i = 1; i <= n; ++i) csv << ",theta_" << i;
  csv << "\n";
  for (Eigen::Index t = 0; t < d.rows(); ++t) {
    for (int i = 0; i < n; ++i) csv << (i > 0 ? "," : "") << format_double(d.x(t, i));
    for (int i = 0; i < 2 * n; ++i) csv << "," << format_double(d.y(t, i));
    csv << "\n";
  }
  write_text_file(dir + "/dataset.csv", csv.str());

  json meta;
  meta["format"] = "pinnflow-dataset-1";
  meta["profile"] = d.config.name;
  meta["length_days"] = d.config.length_days;
  meta["steps_per_day"] = d.config.steps_per_day;
  meta["kwp_range"] = {d.config.kwp_range.first, d.config.kwp_range.second};
  meta["penetration_range"] = {d.config.penetration_range.first, d.config.penetration_range.second};
  meta["stream_seed"] = d.config.seed;
  meta["network_checksum"] = checksum_hex(d.network_checksum);
  meta["rows"] = d.rows();
  meta["load_buses"] = n;
  write_text_file(dir + "/meta.json", meta.dump(2) + "\n");
}

Dataset read_dataset(const std::string& dir) {
  json meta;
  try {
    meta = json::parse(read_text_file(dir + "/meta.json"));
  } catch (const json::exception& e) {
    throw ParseError(dir + "/meta.json: " + e.what());
  }
  Dataset d;
  try {
    d.config.name = meta.at("profile").get<std::string>();
    d.config.length_days = meta.at("length_days").get<int>();
    d.config.steps_per_day = meta.at("steps_per_day").get<int>();
    d.config.kwp_range = {meta.at("kwp_range")[0].get<double>(), meta.at("kwp_range")[1].get<double>()};
    d.config.penetration_range = {meta.at("penetration_range")[0].get<double>(),
                                  meta.at("penetration_range")[1].get<double>()};
    d.config.seed = meta.at("stream_seed").get<std::uint64_t>();
    d.network_checksum = parse_checksum_hex(meta.at("network_checksum").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(dir + "/meta.json: " + e.what());
  }
  const int n = meta.at("load_buses").get<int>();
  const auto table = read_csv_table(dir + "/dataset.csv");
  if (static_cast<int>(table.header.size()) != 3 * n) throw ParseError("dataset.csv column count");
  for (int i = 0; i < n; ++i) {
    if (table.header[i] != "P_" + std::to_string(i + 1) || table.header[n + i] != "V_" + std::to_string(i + 1) ||
        table.header[2 * n + i] != "theta_" + std::to_string(i + 1)) {
      throw ParseError("dataset.csv header does not match P_i, V_i, theta_i layout");
    }
  }
  d.x = table.values.leftCols(n);
  d.y = table.values.rightCols(2 * n);
  if (d.rows() != meta.at("rows").get<Eigen::Index>()) throw ParseError("dataset row count differs from meta");
  return d;
}

}  // namespace pinnflow
