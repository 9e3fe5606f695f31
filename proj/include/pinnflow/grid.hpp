#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pinnflow {

enum class BusKind { Slack, Load };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::Load;
};

/// Series branch between two buses. Ohmic values are kept next to the
/// per-unit admittance y = 1/(R + jX) * z_base = G + jB.
struct Line {
  int from = 0;
  int to = 0;
  double resistance = 0.0;  // ohm
  double reactance = 0.0;   // ohm
  double conductance_pu = 0.0;
  double susceptance_pu = 0.0;
};

struct PerUnitSystem {
  double v_base = 230.0;    // V, line-to-neutral
  double s_base = 20000.0;  // VA
  double z_base = 230.0 * 230.0 / 20000.0;

  static PerUnitSystem from_bases(double v_base, double s_base);

  double power_to_pu(double watts) const { return watts / s_base; }
  double power_from_pu(double pu) const { return pu * s_base; }
  double impedance_to_pu(double ohm) const { return ohm / z_base; }
  double impedance_from_pu(double pu) const { return pu * z_base; }
  double voltage_to_pu(double volt) const { return volt / v_base; }
  double voltage_from_pu(double pu) const { return pu * v_base; }
};

/// Series admittance (G, B) in per unit for an R + jX branch in ohm.
void series_admittance_pu(double r_ohm, double x_ohm, double z_base, double& g_pu, double& b_pu);

/// Immutable feeder description. For radial networks the tree rooted at
/// the slack bus is precomputed: parent[i], parent_line[i] and a
/// breadth-first order starting at bus 0.
class Network {
 public:
  enum class Check { Radial, IdsOnly };

  Network(PerUnitSystem per_unit, std::vector<Bus> buses, std::vector<Line> lines,
          Check check = Check::Radial);

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  const PerUnitSystem& per_unit() const { return per_unit_; }
  const std::vector<std::vector<int>>& adjacency() const { return adjacency_; }
  const std::vector<int>& neighbors(int bus) const { return adjacency_.at(bus); }

  int bus_count() const { return static_cast<int>(buses_.size()); }
  int load_bus_count() const { return bus_count() - 1; }

  bool radial() const { return radial_; }
  // Tree accessors; valid only when radial().
  int parent(int bus) const { return parent_.at(bus); }
  int parent_line(int bus) const { return parent_line_.at(bus); }
  const std::vector<int>& children(int bus) const { return children_.at(bus); }
  const std::vector<int>& bfs_order() const { return order_; }

  /// Index into lines() for the branch joining a and b, or -1.
  int line_between(int a, int b) const;

  std::uint64_t checksum() const;

 private:
  PerUnitSystem per_unit_;
  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<std::vector<int>> line_index_;
  bool radial_ = false;
  std::vector<int> parent_;
  std::vector<int> parent_line_;
  std::vector<std::vector<int>> children_;
  std::vector<int> order_;
};

/// Parses the JSON feeder config (`v_base_volt`, `s_base_va`, `buses`,
/// `lines`). Unknown fields are rejected.
Network load_network(std::string_view config_text);
Network load_network_file(const std::string& path);

/// Inverse of load_network; output parses back to an identical network.
std::string network_to_config(const Network& network);

/// Connected, |lines| = |buses| - 1 and acyclic, each checked on its own.
bool validate_radial(const Network& network);

/// `load_buses` buses on a single branch behind the slack, each line R + jX.
Network chain_network(int load_buses, double r_ohm, double x_ohm,
                      PerUnitSystem per_unit = PerUnitSystem{});

/// Calibrated default feeder shipped with the tool.
Network default_network();

}  // namespace pinnflow
