#include "pinnflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pinnflow/errors.hpp"
#include "pinnflow/hash.hpp"

namespace pinnflow {

using nlohmann::json;

PerUnitSystem PerUnitSystem::from_bases(double v_base, double s_base) {
  if (!(v_base > 0.0) || !(s_base > 0.0)) {
    throw ValueError("v_base and s_base must be positive");
  }
  return PerUnitSystem{v_base, s_base, v_base * v_base / s_base};
}

void series_admittance_pu(double r_ohm, double x_ohm, double z_base, double& g_pu, double& b_pu) {
  const double mag2 = r_ohm * r_ohm + x_ohm * x_ohm;
  g_pu = r_ohm / mag2 * z_base;
  b_pu = -x_ohm / mag2 * z_base;
}

Network::Network(PerUnitSystem per_unit, std::vector<Bus> buses, std::vector<Line> lines,
                 Check check)
    : per_unit_(per_unit), buses_(std::move(buses)), lines_(std::move(lines)) {
  if (!(per_unit_.v_base > 0.0) || !(per_unit_.s_base > 0.0) || !(per_unit_.z_base > 0.0)) {
    throw ValueError("per-unit bases must be positive");
  }
  const double z_expected = per_unit_.v_base * per_unit_.v_base / per_unit_.s_base;
  if (std::abs(per_unit_.z_base - z_expected) > 1e-12 * z_expected) {
    throw ValueError("z_base inconsistent with v_base and s_base");
  }
  if (buses_.empty()) throw TopologyError("network has no buses");

  std::sort(buses_.begin(), buses_.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    if (buses_[i].id != static_cast<int>(i)) {
      throw TopologyError("bus ids must be unique and contiguous from 0");
    }
  }
  const auto slack_count = std::count_if(buses_.begin(), buses_.end(),
                                         [](const Bus& b) { return b.kind == BusKind::Slack; });
  if (slack_count != 1 || buses_[0].kind != BusKind::Slack) {
    throw TopologyError("exactly one slack bus is required and it must have id 0");
  }

  const int n = bus_count();
  adjacency_.assign(n, {});
  line_index_.assign(n, {});
  std::set<std::pair<int, int>> seen;
  for (std::size_t k = 0; k < lines_.size(); ++k) {
    auto& line = lines_[k];
    if (line.from < 0 || line.from >= n || line.to < 0 || line.to >= n) {
      throw TopologyError("line references unknown bus");
    }
    if (line.from == line.to) throw TopologyError("self-loop line at bus " + std::to_string(line.from));
    if (!seen.insert(std::minmax(line.from, line.to)).second) {
      throw TopologyError("duplicate line between buses " + std::to_string(line.from) + " and " +
                          std::to_string(line.to));
    }
    if (!(line.resistance > 0.0)) throw ValueError("line resistance must be positive");
    if (!std::isfinite(line.reactance)) throw ValueError("line reactance must be finite");
    series_admittance_pu(line.resistance, line.reactance, per_unit_.z_base, line.conductance_pu,
                         line.susceptance_pu);
    adjacency_[line.from].push_back(line.to);
    adjacency_[line.to].push_back(line.from);
    line_index_[line.from].push_back(static_cast<int>(k));
    line_index_[line.to].push_back(static_cast<int>(k));
  }
  for (int i = 0; i < n; ++i) {
    std::vector<int> idx(adjacency_[i].size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return adjacency_[i][a] < adjacency_[i][b]; });
    std::vector<int> adj, li;
    for (int j : idx) {
      adj.push_back(adjacency_[i][j]);
      li.push_back(line_index_[i][j]);
    }
    adjacency_[i] = std::move(adj);
    line_index_[i] = std::move(li);
  }

  radial_ = validate_radial(*this);
  if (check == Check::Radial && !radial_) {
    throw TopologyError("network must be connected and radial");
  }
  if (radial_) {
    parent_.assign(n, -1);
    parent_line_.assign(n, -1);
    children_.assign(n, {});
    std::queue<int> frontier;
    frontier.push(0);
    std::vector<bool> visited(n, false);
    visited[0] = true;
    while (!frontier.empty()) {
      const int u = frontier.front();
      frontier.pop();
      order_.push_back(u);
      for (std::size_t k = 0; k < adjacency_[u].size(); ++k) {
        const int v = adjacency_[u][k];
        if (visited[v]) continue;
        visited[v] = true;
        parent_[v] = u;
        parent_line_[v] = line_index_[u][k];
        children_[u].push_back(v);
        frontier.push(v);
      }
    }
  }
}

int Network::line_between(int a, int b) const {
  const auto& adj = adjacency_.at(a);
  for (std::size_t k = 0; k < adj.size(); ++k) {
    if (adj[k] == b) return line_index_[a][k];
  }
  return -1;
}

std::uint64_t Network::checksum() const { return fnv1a(network_to_config(*this)); }

bool validate_radial(const Network& network) {
  const int n = network.bus_count();
  const auto& lines = network.lines();

  const bool count_ok = static_cast<int>(lines.size()) == n - 1;

  // Connectivity by traversal of the adjacency lists.
  std::vector<bool> visited(n, false);
  std::vector<int> stack{0};
  visited[0] = true;
  int reached = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : network.adjacency()[u]) {
      if (!visited[v]) {
        visited[v] = true;
        ++reached;
        stack.push_back(v);
      }
    }
  }
  const bool connected = reached == n;

  // Acyclicity by union-find over the line list.
  std::vector<int> root(n);
  std::iota(root.begin(), root.end(), 0);
  auto find = [&](int x) {
    while (root[x] != x) x = root[x] = root[root[x]];
    return x;
  };
  bool acyclic = true;
  for (const auto& line : lines) {
    const int a = find(line.from);
    const int b = find(line.to);
    if (a == b) {
      acyclic = false;
      break;
    }
    root[a] = b;
  }
  return count_ok && connected && acyclic;
}

namespace {

template <class T>
T required(const json& obj, const char* key) {
  if (!obj.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("field '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const char* where) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ParseError("unknown field '" + item.key() + "' in " + where);
  }
}

}  // namespace

Network load_network(std::string_view config_text) {
  json doc;
  try {
    doc = json::parse(config_text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what());
  }
  if (!doc.is_object()) throw ParseError("config root must be an object");
  reject_unknown(doc, {"v_base_volt", "s_base_va", "buses", "lines"}, "network config");

  const auto per_unit =
      PerUnitSystem::from_bases(required<double>(doc, "v_base_volt"), required<double>(doc, "s_base_va"));

  std::vector<Bus> buses;
  const auto bus_list = required<json>(doc, "buses");
  if (!bus_list.is_array()) throw ParseError("'buses' must be an array");
  for (const auto& b : bus_list) {
    if (!b.is_object()) throw ParseError("bus entry must be an object");
    reject_unknown(b, {"id", "kind"}, "bus");
    const auto kind = required<std::string>(b, "kind");
    BusKind k;
    if (kind == "slack") {
      k = BusKind::Slack;
    } else if (kind == "load") {
      k = BusKind::Load;
    } else {
      throw ParseError("bus kind must be 'slack' or 'load', got '" + kind + "'");
    }
    buses.push_back(Bus{required<int>(b, "id"), k});
  }

  std::vector<Line> lines;
  const auto line_list = required<json>(doc, "lines");
  if (!line_list.is_array()) throw ParseError("'lines' must be an array");
  for (const auto& l : line_list) {
    if (!l.is_object()) throw ParseError("line entry must be an object");
    reject_unknown(l, {"from", "to", "r_ohm", "x_ohm"}, "line");
    Line line;
    line.from = required<int>(l, "from");
    line.to = required<int>(l, "to");
    line.resistance = required<double>(l, "r_ohm");
    line.reactance = required<double>(l, "x_ohm");
    lines.push_back(line);
  }
  return Network(per_unit, std::move(buses), std::move(lines));
}

Network load_network_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open network config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_network(buffer.str());
}

std::string network_to_config(const Network& network) {
  json doc;
  doc["v_base_volt"] = network.per_unit().v_base;
  doc["s_base_va"] = network.per_unit().s_base;
  doc["buses"] = json::array();
  for (const auto& b : network.buses()) {
    doc["buses"].push_back({{"id", b.id}, {"kind", b.kind == BusKind::Slack ? "slack" : "load"}});
  }
  doc["lines"] = json::array();
  for (const auto& l : network.lines()) {
    doc["lines"].push_back({{"from", l.from}, {"to", l.to}, {"r_ohm", l.resistance}, {"x_ohm", l.reactance}});
  }
  return doc.dump(2) + "\n";
}

Network chain_network(int load_buses, double r_ohm, double x_ohm, PerUnitSystem per_unit) {
  std::vector<Bus> buses{{0, BusKind::Slack}};
  std::vector<Line> lines;
  for (int i = 1; i <= load_buses; ++i) {
    buses.push_back({i, BusKind::Load});
    Line line;
    line.from = i - 1;
    line.to = i;
    line.resistance = r_ohm;
    line.reactance = x_ohm;
    lines.push_back(line);
  }
  return Network(per_unit, std::move(buses), std::move(lines));
}

}  // namespace pinnflow

namespace pinnflow {

// Output of calibrate_lines(chain_network(3, 0.2, 0.1), 1.08, 7.5): R/X = 2
// with every line scaled so that 7.5 kW injected at each load bus lifts the
// feeder end to 1.08 p.u.
Network default_network() { return chain_network(3, 0.10123956331226509, 0.050619781656132547); }

}  // namespace pinnflow
