#pragma once

#include <complex>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinnflow/acpf.hpp"
#include "pinnflow/grid.hpp"

namespace testing {

using cplx = std::complex<double>;

// Phasors of a state, written out independently of the library.
inline std::vector<cplx> phasors(const pinnflow::VoltageState& s) {
  std::vector<cplx> u;
  for (int i = 0; i < s.size(); ++i) u.push_back(std::polar(s.v(i), s.theta(i)));
  return u;
}

inline cplx line_admittance(const pinnflow::Line& l, double z_base) {
  return z_base / cplx(l.resistance, l.reactance);
}

// Complex power injected at every bus, S_i = V_i conj(sum_j y_ij (V_i - V_j)).
inline std::vector<cplx> bus_injections(const pinnflow::Network& net, const pinnflow::VoltageState& s) {
  const auto u = phasors(s);
  std::vector<cplx> out(u.size(), 0.0);
  for (const auto& l : net.lines()) {
    const cplx y = line_admittance(l, net.per_unit().z_base);
    out[l.from] += u[l.from] * std::conj(y * (u[l.from] - u[l.to]));
    out[l.to] += u[l.to] * std::conj(y * (u[l.to] - u[l.from]));
  }
  return out;
}

// Random load-bus injections in p.u. between a heavy evening load and a
// strong PV surplus.
inline Eigen::VectorXd random_p(std::mt19937_64& rng, int n, double lo = -0.6, double hi = 0.5) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd p(n);
  for (int i = 0; i < n; ++i) p(i) = u(rng);
  return p;
}

inline pinnflow::VoltageState random_state(std::mt19937_64& rng, int n_bus) {
  std::uniform_real_distribution<double> vm(0.9, 1.1), va(-0.1, 0.1);
  pinnflow::VoltageState s = pinnflow::VoltageState::flat(n_bus);
  for (int i = 1; i < n_bus; ++i) {
    s.v(i) = vm(rng);
    s.theta(i) = va(rng);
  }
  return s;
}

// A six-bus tree with a branch point, for tests that need more than a chain.
inline pinnflow::Network branched_network() {
  using namespace pinnflow;
  std::vector<Bus> buses{{0, BusKind::Slack}};
  for (int i = 1; i <= 5; ++i) buses.push_back({i, BusKind::Load});
  auto line = [](int a, int b, double r, double x) {
    Line l;
    l.from = a;
    l.to = b;
    l.resistance = r;
    l.reactance = x;
    return l;
  };
  std::vector<Line> lines{line(0, 1, 0.08, 0.04), line(1, 2, 0.12, 0.05), line(2, 3, 0.1, 0.06),
                          line(1, 4, 0.15, 0.05), line(4, 5, 0.09, 0.03)};
  return Network(PerUnitSystem{}, buses, lines);
}

inline std::string tmp_dir(const std::string& name) { return std::string(PINNFLOW_TEST_TMP) + "/" + name; }

}  // namespace testing
