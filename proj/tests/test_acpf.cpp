#include <doctest.h>

#include <random>

#include "pinnflow/acpf.hpp"
#include "pinnflow/errors.hpp"
#include "support.hpp"

using namespace pinnflow;
using testing::cplx;

TEST_SUITE("acpf") {
  TEST_CASE("line flow against complex phasors") {
    std::mt19937_64 rng(11);
    const Network net = testing::branched_network();
    for (int trial = 0; trial < 200; ++trial) {
      const VoltageState s = testing::random_state(rng, net.bus_count());
      const auto u = testing::phasors(s);
      for (const auto& l : net.lines()) {
        const cplx y = testing::line_admittance(l, net.per_unit().z_base);
        const cplx send_ij = u[l.from] * std::conj(y * (u[l.from] - u[l.to]));
        const cplx send_ji = u[l.to] * std::conj(y * (u[l.to] - u[l.from]));
        const LineFlow f = line_flow(s, l);
        // The polar expression is the power arriving at i: minus the sending flow.
        CHECK(f.p_ij == doctest::Approx(-send_ij.real()).epsilon(1e-12));
        CHECK(f.q_ij == doctest::Approx(-send_ij.imag()).epsilon(1e-12));
        CHECK(f.p_ji == doctest::Approx(-send_ji.real()).epsilon(1e-12));
        const double loss = y.real() * std::norm(u[l.from] - u[l.to]);
        CHECK(joule_loss(s, l) == doctest::Approx(loss).epsilon(1e-12));
        CHECK(f.p_loss == doctest::Approx(loss).epsilon(1e-12));
        CHECK(std::abs(f.p_ij + f.p_ji + joule_loss(s, l)) < 1e-14);
      }
    }
  }

  TEST_CASE("flat state carries no flow") {
    const Network net = default_network();
    const VoltageState s = VoltageState::flat(net.bus_count());
    for (const auto& l : net.lines()) {
      const LineFlow f = line_flow(s, l);
      CHECK(f.p_ij == 0.0);
      CHECK(f.q_ij == 0.0);
      CHECK(joule_loss(s, l) == 0.0);
    }
  }

  TEST_CASE("admittance matrix rows sum to zero") {
    const Network net = testing::branched_network();
    const Eigen::MatrixXcd y = admittance_matrix(net);
    CHECK(y.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
    CHECK((y - y.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("newton-raphson satisfies the complex power balance") {
    std::mt19937_64 rng(5);
    for (const Network& net : {default_network(), testing::branched_network()}) {
      for (int trial = 0; trial < 50; ++trial) {
        InjectionVector inj = InjectionVector::active(testing::random_p(rng, net.load_bus_count()));
        inj.q.tail(net.load_bus_count()) = testing::random_p(rng, net.load_bus_count(), -0.1, 0.1);
        const VoltageState s = solve_newton_raphson(net, inj);
        CHECK(s.v(0) == 1.0);
        CHECK(s.theta(0) == 0.0);
        const auto sbus = testing::bus_injections(net, s);
        for (int i = 1; i < net.bus_count(); ++i) {
          CHECK(std::abs(sbus[i].real() - inj.p(i)) < 1e-9);
          CHECK(std::abs(sbus[i].imag() - inj.q(i)) < 1e-9);
        }
        CHECK(nodal_mismatch(net, s, inj).max_abs() < 1e-10);
      }
    }
  }

  TEST_CASE("sweep and newton-raphson agree") {
    std::mt19937_64 rng(6);
    const Network net = testing::branched_network();
    for (int trial = 0; trial < 100; ++trial) {
      const InjectionVector inj = InjectionVector::active(testing::random_p(rng, net.load_bus_count()));
      const VoltageState a = solve_newton_raphson(net, inj);
      const VoltageState b = solve_backward_forward(net, inj);
      CHECK((a.v - b.v).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((a.theta - b.theta).cwiseAbs().maxCoeff() < 1e-8);
    }
  }

  TEST_CASE("zero injection gives the flat profile") {
    const Network net = default_network();
    const InjectionVector inj = InjectionVector::active(Eigen::VectorXd::Zero(3));
    for (auto m : {SolverMethod::NewtonRaphson, SolverMethod::Sweep}) {
      SolverOptions o;
      o.method = m;
      const VoltageState s = solve_power_flow(net, inj, o);
      CHECK((s.v.array() - 1.0).abs().maxCoeff() < 1e-12);
      CHECK(s.theta.cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  TEST_CASE("slack power covers loads and losses") {
    std::mt19937_64 rng(8);
    const Network net = testing::branched_network();
    for (int trial = 0; trial < 50; ++trial) {
      const InjectionVector inj = InjectionVector::active(testing::random_p(rng, net.load_bus_count()));
      const VoltageState s = solve_power_flow(net, inj);
      const double balance = slack_injection(net, s) + inj.p.tail(net.load_bus_count()).sum() - total_joule_loss(net, s);
      CHECK(std::abs(balance) < 1e-9);
      CHECK(slack_injection(net, s) == doctest::Approx(testing::bus_injections(net, s)[0].real()).epsilon(1e-10));
    }
  }

  TEST_CASE("solver errors") {
    const Network net = default_network();
    SolverOptions o;
    o.max_iterations = 1;
    const InjectionVector inj = InjectionVector::active(Eigen::VectorXd::Constant(3, 0.3));
    CHECK_THROWS_AS(solve_newton_raphson(net, inj, o), NonConvergence);
    try {
      solve_newton_raphson(net, inj, o);
    } catch (const NonConvergence& e) {
      CHECK(e.iterations() == 1);
      CHECK(e.code() == ExitCode::Numeric);
    }
    // Far beyond the feeder's loadability.
    const InjectionVector heavy = InjectionVector::active(Eigen::VectorXd::Constant(3, -60.0));
    CHECK_THROWS_AS(solve_newton_raphson(net, heavy), Error);

    CHECK_THROWS_AS(solve_power_flow(net, InjectionVector::active(Eigen::VectorXd::Zero(2))), DimensionMismatch);

    std::vector<Bus> b{{0, BusKind::Slack}, {1, BusKind::Load}, {2, BusKind::Load}};
    std::vector<Line> loop(3);
    loop[0].from = 0, loop[0].to = 1, loop[0].resistance = 0.1;
    loop[1].from = 1, loop[1].to = 2, loop[1].resistance = 0.1;
    loop[2].from = 2, loop[2].to = 0, loop[2].resistance = 0.1;
    const Network meshed(PerUnitSystem{}, b, loop, Network::Check::IdsOnly);
    const InjectionVector small = InjectionVector::active(Eigen::VectorXd::Constant(2, 0.1));
    CHECK_THROWS_AS(solve_backward_forward(meshed, small), PreconditionError);
    CHECK(nodal_mismatch(meshed, solve_newton_raphson(meshed, small), small).max_abs() < 1e-10);
  }

  TEST_CASE("parse_solver_method") {
    CHECK(parse_solver_method("nr") == SolverMethod::NewtonRaphson);
    CHECK(parse_solver_method("sweep") == SolverMethod::Sweep);
    CHECK_THROWS_AS(parse_solver_method("gauss"), Error);
  }
}
