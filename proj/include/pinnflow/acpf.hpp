#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "pinnflow/grid.hpp"

namespace pinnflow {

/// Per-bus voltage magnitude (p.u.) and angle (rad), slack included at 0.
struct VoltageState {
  Eigen::VectorXd v;
  Eigen::VectorXd theta;

  static VoltageState flat(int bus_count) {
    return {Eigen::VectorXd::Ones(bus_count), Eigen::VectorXd::Zero(bus_count)};
  }
  int size() const { return static_cast<int>(v.size()); }
};

/// Net injections in p.u.; loads are negative. The slack entry is ignored
/// on input.
struct InjectionVector {
  Eigen::VectorXd p;
  Eigen::VectorXd q;

  static InjectionVector active(const Eigen::VectorXd& p_load_buses);
  int size() const { return static_cast<int>(p.size()); }
};

struct LineFlow {
  double p_ij = 0.0;
  double q_ij = 0.0;
  double p_ji = 0.0;
  double q_ji = 0.0;
  double p_loss = 0.0;
};

enum class SolverMethod { NewtonRaphson, Sweep };

struct SolverOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
  SolverMethod method = SolverMethod::NewtonRaphson;
};

SolverMethod parse_solver_method(const std::string& name);

// Polar line-flow expressions, written once for any scalar type that
// provides +, -, *, cos and sin (double, or an autodiff variable).
//
//   P_ij = G (V_i V_j cos(th_i - th_j) - V_i^2) + B V_i V_j sin(th_i - th_j)
//   Q_ij = -B (V_i V_j cos(th_i - th_j) - V_i^2) + G V_i V_j sin(th_i - th_j)
//
// With this sign, P_ij is the power delivered to bus i over the line; the
// power bus i sends into the line is -P_ij.
template <class T>
T line_flow_p(const T& vi, const T& ti, const T& vj, const T& tj, double g, double b) {
  using std::cos;
  using std::sin;
  const T vv = vi * vj;
  const T dt = ti - tj;
  return g * (vv * cos(dt) - vi * vi) + b * (vv * sin(dt));
}

template <class T>
T line_flow_q(const T& vi, const T& ti, const T& vj, const T& tj, double g, double b) {
  using std::cos;
  using std::sin;
  const T vv = vi * vj;
  const T dt = ti - tj;
  return (-b) * (vv * cos(dt) - vi * vi) + g * (vv * sin(dt));
}

/// G (V_i^2 + V_j^2 - 2 V_i V_j cos(th_i - th_j)), i.e. G |V_i - V_j|^2.
template <class T>
T joule_loss(const T& vi, const T& ti, const T& vj, const T& tj, double g) {
  using std::cos;
  return g * (vi * vi + vj * vj - 2.0 * (vi * vj) * cos(ti - tj));
}

LineFlow line_flow(const VoltageState& state, const Line& line);
double joule_loss(const VoltageState& state, const Line& line);

/// Bus admittance matrix (no shunts): off-diagonal -y_ij, diagonal sum of y.
Eigen::MatrixXcd admittance_matrix(const Network& network);

VoltageState solve_newton_raphson(const Network& network, const InjectionVector& inj,
                                  const SolverOptions& opts = {});
VoltageState solve_backward_forward(const Network& network, const InjectionVector& inj,
                                    const SolverOptions& opts = {});
/// Dispatches on opts.method.
VoltageState solve_power_flow(const Network& network, const InjectionVector& inj,
                              const SolverOptions& opts = {});

struct NodalMismatch {
  Eigen::VectorXd dp;  // slack entry is 0
  Eigen::VectorXd dq;
  double max_abs() const;
};

/// P_i - P_calc_i from the bus-admittance form, likewise for Q.
NodalMismatch nodal_mismatch(const Network& network, const VoltageState& state,
                             const InjectionVector& inj);

/// Net active power the slack bus injects into the feeder.
double slack_injection(const Network& network, const VoltageState& state);
double total_joule_loss(const Network& network, const VoltageState& state);

}  // namespace pinnflow
