#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "pinnflow/acpf.hpp"
#include "pinnflow/grid.hpp"

namespace pinnflow {

struct ScenarioConfig {
  std::string name = "custom";
  int length_days = 7;
  int steps_per_day = 24;
  std::pair<double, double> kwp_range{1.0, 7.5};
  std::pair<double, double> penetration_range{0.66, 1.0};
  std::uint64_t seed = 0;

  void validate() const;
};

/// Named scenario presets: ts1 (7 d), ts2 (30 d), ts3 (365 d) and c1 (30 d)
/// share the [1, 7.5] kWp range; c2 (30 d) uses [5, 12] kWp. All use a
/// [66, 100] % penetration range. The stream seed is derived from the
/// master seed and the preset name.
ScenarioConfig scenario_preset(const std::string& profile, std::uint64_t seed);

/// Mean-one two-peak household consumption shape at hour h in [0, 24).
double household_shape(int hour);
/// Clear-sky half sine between 07:00 and 19:00 peaking at 13:00.
double irradiance_shape(int hour);

/// T x N matrix of net active power per load bus in p.u. (injection > 0).
Eigen::MatrixXd generate_profiles(const Network& network, const ScenarioConfig& cfg);

struct Dataset {
  Eigen::MatrixXd x;  // T x N active power, p.u.
  Eigen::MatrixXd y;  // T x 2N, [V_1..V_N | theta_1..theta_N]
  ScenarioConfig config;
  std::uint64_t network_checksum = 0;

  Eigen::Index rows() const { return x.rows(); }
  int load_buses() const { return static_cast<int>(x.cols()); }
  /// Full per-bus state for row t, slack included.
  VoltageState state(Eigen::Index t) const;
  InjectionVector injection(Eigen::Index t) const;
};

Dataset build_dataset(const Network& network, const Eigen::MatrixXd& profiles, const ScenarioConfig& cfg,
                      const SolverOptions& opts = {});

struct DatasetStats {
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t count_over_1_05 = 0;
  std::size_t count_over_1_08 = 0;
  std::size_t total_count = 0;
};

DatasetStats dataset_stats(const Dataset& d);

/// Largest nodal mismatch over all rows when each (x, y) row is re-checked
/// against the network.
double dataset_max_mismatch(const Network& network, const Dataset& d);

/// Scales every line impedance of the template by a common factor (R/X
/// ratios fixed) until injecting peak_kw at every load bus gives a maximum
/// voltage of target_vmax.
Network calibrate_lines(const Network& network_template, double target_vmax, double peak_kw,
                        const SolverOptions& opts = {});

/// Max bus voltage when every load bus injects peak_kw.
double peak_voltage(const Network& network, double peak_kw, const SolverOptions& opts = {});

void write_dataset(const Dataset& d, const std::string& dir);
Dataset read_dataset(const std::string& dir);

}  // namespace pinnflow
