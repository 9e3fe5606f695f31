#include "pinnflow/acpf.hpp"

#include <algorithm>
#include <complex>

#include "pinnflow/errors.hpp"

namespace pinnflow {

using cplx = std::complex<double>;

InjectionVector InjectionVector::active(const Eigen::VectorXd& p_load_buses) {
  const auto n = p_load_buses.size() + 1;
  InjectionVector inj{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  inj.p.tail(n - 1) = p_load_buses;
  return inj;
}

SolverMethod parse_solver_method(const std::string& name) {
  if (name == "nr") return SolverMethod::NewtonRaphson;
  if (name == "sweep") return SolverMethod::Sweep;
  throw Error("unknown power-flow method '" + name + "' (expected nr|sweep)", ExitCode::Usage);
}

LineFlow line_flow(const VoltageState& state, const Line& line) {
  const double vi = state.v(line.from), ti = state.theta(line.from);
  const double vj = state.v(line.to), tj = state.theta(line.to);
  const double g = line.conductance_pu, b = line.susceptance_pu;
  LineFlow f;
  f.p_ij = line_flow_p(vi, ti, vj, tj, g, b);
  f.q_ij = line_flow_q(vi, ti, vj, tj, g, b);
  f.p_ji = line_flow_p(vj, tj, vi, ti, g, b);
  f.q_ji = line_flow_q(vj, tj, vi, ti, g, b);
  f.p_loss = joule_loss(vi, ti, vj, tj, g);
  return f;
}

double joule_loss(const VoltageState& state, const Line& line) {
  return joule_loss(state.v(line.from), state.theta(line.from), state.v(line.to),
                    state.theta(line.to), line.conductance_pu);
}

Eigen::MatrixXcd admittance_matrix(const Network& network) {
  const int n = network.bus_count();
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (const auto& line : network.lines()) {
    const cplx yl(line.conductance_pu, line.susceptance_pu);
    y(line.from, line.from) += yl;
    y(line.to, line.to) += yl;
    y(line.from, line.to) -= yl;
    y(line.to, line.from) -= yl;
  }
  return y;
}

namespace {

void check_dimensions(const Network& network, const InjectionVector& inj) {
  if (inj.p.size() != network.bus_count() || inj.q.size() != network.bus_count()) {
    throw DimensionMismatch("injection vector has " + std::to_string(inj.p.size()) +
                            " entries, network has " + std::to_string(network.bus_count()) + " buses");
  }
}

Eigen::VectorXcd phasors(const VoltageState& s) {
  Eigen::VectorXcd out(s.size());
  for (int i = 0; i < s.size(); ++i) out(i) = std::polar(s.v(i), s.theta(i));
  return out;
}

VoltageState from_phasors(const Eigen::VectorXcd& u) {
  VoltageState s{Eigen::VectorXd(u.size()), Eigen::VectorXd(u.size())};
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    s.v(i) = std::abs(u(i));
    s.theta(i) = std::arg(u(i));
  }
  s.v(0) = 1.0;
  s.theta(0) = 0.0;
  return s;
}

}  // namespace

VoltageState solve_newton_raphson(const Network& network, const InjectionVector& inj,
                                  const SolverOptions& opts) {
  check_dimensions(network, inj);
  const int n = network.bus_count();
  const int m = n - 1;
  const Eigen::MatrixXcd ybus = admittance_matrix(network);
  VoltageState state = VoltageState::flat(n);
  if (m == 0) return state;

  double mismatch = 0.0;
  for (int iter = 0; iter <= opts.max_iterations; ++iter) {
    const Eigen::VectorXcd u = phasors(state);
    const Eigen::VectorXcd current = ybus * u;
    const Eigen::VectorXcd s_calc = u.cwiseProduct(current.conjugate());

    Eigen::VectorXd f(2 * m);
    for (int i = 1; i < n; ++i) {
      f(i - 1) = inj.p(i) - s_calc(i).real();
      f(m + i - 1) = inj.q(i) - s_calc(i).imag();
    }
    mismatch = f.cwiseAbs().maxCoeff();
    if (mismatch <= opts.tolerance) return state;
    if (iter == opts.max_iterations) break;

    // dS/dtheta = j diag(u) conj(diag(I) - Y diag(u))
    // dS/dV     = diag(u) conj(Y diag(u/|u|)) + conj(diag(I)) diag(u/|u|)
    Eigen::MatrixXd jac(2 * m, 2 * m);
    for (int i = 1; i < n; ++i) {
      for (int k = 1; k < n; ++k) {
        const cplx unit_k = u(k) / std::abs(u(k));
        cplx ds_dth = -u(i) * std::conj(ybus(i, k) * u(k));
        cplx ds_dv = u(i) * std::conj(ybus(i, k) * unit_k);
        if (i == k) {
          ds_dth += u(i) * std::conj(current(i));
          ds_dv += std::conj(current(i)) * unit_k;
        }
        ds_dth *= cplx(0.0, 1.0);
        jac(i - 1, k - 1) = ds_dth.real();
        jac(i - 1, m + k - 1) = ds_dv.real();
        jac(m + i - 1, k - 1) = ds_dth.imag();
        jac(m + i - 1, m + k - 1) = ds_dv.imag();
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) throw SingularJacobian(iter);
    const Eigen::VectorXd dx = lu.solve(f);
    for (int i = 1; i < n; ++i) {
      state.theta(i) += dx(i - 1);
      state.v(i) += dx(m + i - 1);
    }
    if (!state.v.allFinite() || !state.theta.allFinite() || (state.v.array() <= 0.0).any()) {
      throw NonConvergence(iter + 1, mismatch);
    }
  }
  throw NonConvergence(opts.max_iterations, mismatch);
}

VoltageState solve_backward_forward(const Network& network, const InjectionVector& inj,
                                    const SolverOptions& opts) {
  if (!network.radial()) throw PreconditionError("backward/forward sweep requires a radial network");
  check_dimensions(network, inj);
  const int n = network.bus_count();
  const auto& order = network.bfs_order();

  std::vector<cplx> impedance(network.lines().size());
  for (std::size_t k = 0; k < impedance.size(); ++k) {
    const auto& line = network.lines()[k];
    impedance[k] = 1.0 / cplx(line.conductance_pu, line.susceptance_pu);
  }

  Eigen::VectorXcd u = Eigen::VectorXcd::Constant(n, cplx(1.0, 0.0));
  Eigen::VectorXcd branch(n);
  double delta = 0.0;
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    // Backward: current drawn by each bus plus everything below it.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int i = *it;
      if (i == 0) continue;
      const cplx consumed(-inj.p(i), -inj.q(i));
      cplx total = std::conj(consumed / u(i));
      for (int c : network.children(i)) total += branch(c);
      branch(i) = total;
    }
    // Forward: voltage drop along each branch from the slack outward.
    delta = 0.0;
    for (int i : order) {
      if (i == 0) continue;
      const cplx updated = u(network.parent(i)) - impedance[network.parent_line(i)] * branch(i);
      delta = std::max(delta, std::abs(updated - u(i)));
      u(i) = updated;
    }
    if (!u.allFinite()) throw NonConvergence(iter + 1, delta);
    if (delta <= opts.tolerance) return from_phasors(u);
  }
  throw NonConvergence(opts.max_iterations, delta);
}

VoltageState solve_power_flow(const Network& network, const InjectionVector& inj,
                              const SolverOptions& opts) {
  return opts.method == SolverMethod::Sweep ? solve_backward_forward(network, inj, opts)
                                            : solve_newton_raphson(network, inj, opts);
}

double NodalMismatch::max_abs() const {
  return std::max(dp.cwiseAbs().maxCoeff(), dq.cwiseAbs().maxCoeff());
}

NodalMismatch nodal_mismatch(const Network& network, const VoltageState& state,
                             const InjectionVector& inj) {
  check_dimensions(network, inj);
  if (state.size() != network.bus_count()) throw DimensionMismatch("state size does not match network");
  const Eigen::MatrixXcd ybus = admittance_matrix(network);
  const Eigen::VectorXcd u = phasors(state);
  const Eigen::VectorXcd s_calc = u.cwiseProduct((ybus * u).conjugate());
  NodalMismatch out{Eigen::VectorXd::Zero(state.size()), Eigen::VectorXd::Zero(state.size())};
  for (int i = 1; i < state.size(); ++i) {
    out.dp(i) = inj.p(i) - s_calc(i).real();
    out.dq(i) = inj.q(i) - s_calc(i).imag();
  }
  return out;
}

double slack_injection(const Network& network, const VoltageState& state) {
  double total = 0.0;
  for (int j : network.neighbors(0)) {
    const auto& line = network.lines()[network.line_between(0, j)];
    total -= line_flow_p(state.v(0), state.theta(0), state.v(j), state.theta(j), line.conductance_pu,
                         line.susceptance_pu);
  }
  return total;
}

double total_joule_loss(const Network& network, const VoltageState& state) {
  double total = 0.0;
  for (const auto& line : network.lines()) total += joule_loss(state, line);
  return total;
}

}  // namespace pinnflow
