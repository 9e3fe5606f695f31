#include <doctest.h>

#include <random>

#include "pinnflow/errors.hpp"
#include "pinnflow/gnn.hpp"
#include "support.hpp"

using namespace pinnflow;

namespace {

Dataset make_dataset(const Network& net, const std::string& profile, std::uint64_t seed) {
  const ScenarioConfig cfg = scenario_preset(profile, seed);
  return build_dataset(net, generate_profiles(net, cfg), cfg);
}

// Loss of a batch as a function of the flattened parameter vector.
ad::Var pipeline(ad::Tape& tape, const ad::Var& flat, const GnnModel& shape, const Network& net,
                 const Eigen::MatrixXd& x, const Eigen::MatrixXd& pin, LossKind kind) {
  std::vector<ad::Var> params;
  Eigen::Index offset = 0;
  for (const auto& p : shape.params) {
    params.push_back(ad::slice(flat, offset, p.rows(), p.cols()));
    offset += p.size();
  }
  const GnnOutput out = gnn_forward_tape(tape, params, shape.layer_count, net, x);
  return loss_on_tape({kind, {}}, net, tape, out.v, out.theta, &pin, nullptr);
}

}  // namespace

TEST_SUITE("gnn") {
  TEST_CASE("initialisation contract") {
    const GnnModel m = GnnModel::init(3, 16, 42);
    CHECK(m.params.size() == 11u);
    CHECK(m.parameter_count() == static_cast<std::size_t>(m.flatten().size()));
    const Network net = default_network();
    std::mt19937_64 rng(1);
    for (int k = 0; k < 50; ++k) {
      const VoltageState s = gnn_forward(m, testing::random_p(rng, 3, -1.0, 1.0), net);
      CHECK(s.v(0) == 1.0);
      CHECK(s.theta(0) == 0.0);
      CHECK((s.v.array() - 1.0).abs().maxCoeff() <= 0.05);
      CHECK(s.theta.cwiseAbs().maxCoeff() <= 0.05);
    }
    CHECK(GnnModel::init(3, 16, 42).checksum() == m.checksum());
    CHECK(GnnModel::init(3, 16, 43).checksum() != m.checksum());
  }

  TEST_CASE("forward is deterministic and batch-consistent") {
    const Network net = testing::branched_network();
    const GnnModel m = GnnModel::init(2, 8, 42);
    std::mt19937_64 rng(2);
    Eigen::MatrixXd x(7, 5);
    for (int b = 0; b < 7; ++b) x.row(b) = testing::random_p(rng, 5).transpose();
    const Eigen::MatrixXd y = gnn_predict(m, x, net);
    CHECK(y == gnn_predict(m, x, net));
    for (int b = 0; b < 7; ++b) {
      const VoltageState s = gnn_forward(m, x.row(b).transpose(), net);
      CHECK((s.v.tail(5) - y.row(b).head(5).transpose()).cwiseAbs().maxCoeff() < 1e-15);
      CHECK((s.theta.tail(5) - y.row(b).tail(5).transpose()).cwiseAbs().maxCoeff() < 1e-15);
    }
    CHECK_THROWS_AS(gnn_forward(m, Eigen::VectorXd::Zero(4), net), DimensionMismatch);
  }

  TEST_CASE("message passing is equivariant under relabelling") {
    // Buses 3 and 5 are both leaves two hops from the head; swapping their
    // labels (and inputs) must swap the outputs.
    const Network net = testing::branched_network();
    const std::vector<int> sigma{0, 1, 4, 5, 2, 3};
    std::vector<Bus> buses{{0, BusKind::Slack}};
    for (int i = 1; i < 6; ++i) buses.push_back({i, BusKind::Load});
    std::vector<Line> lines;
    for (auto l : net.lines()) {
      l.from = sigma[l.from];
      l.to = sigma[l.to];
      lines.push_back(l);
    }
    const Network perm(net.per_unit(), buses, lines);
    const GnnModel m = GnnModel::init(3, 8, 5);
    std::mt19937_64 rng(3);
    const Eigen::VectorXd p = testing::random_p(rng, 5);
    Eigen::VectorXd pp(5);
    for (int i = 1; i < 6; ++i) pp(sigma[i] - 1) = p(i - 1);
    const VoltageState a = gnn_forward(m, p, net);
    const VoltageState b = gnn_forward(m, pp, perm);
    for (int i = 0; i < 6; ++i) {
      CHECK(b.v(sigma[i]) == doctest::Approx(a.v(i)).epsilon(1e-14));
      CHECK(b.theta(sigma[i]) == doctest::Approx(a.theta(i)).epsilon(1e-14));
    }
  }

  TEST_CASE("full pipeline gradient matches central differences") {
    const Network net = default_network();
    const GnnModel shape = GnnModel::init(3, 4, 9);
    std::mt19937_64 rng(4);
    Eigen::MatrixXd x(6, 3), pin(6, 4);
    for (int b = 0; b < 6; ++b) {
      x.row(b) = testing::random_p(rng, 3).transpose();
      pin.row(b) << 0.0, x.row(b);
    }
    std::normal_distribution<double> jitter(0.0, 0.3);
    for (auto kind : {LossKind::PhysicsBenchmark, LossKind::PhysicsProposed}) {
      for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd point = shape.flatten();
        for (Eigen::Index k = 0; k < point.size(); ++k) point(k) += jitter(rng);
        const double err = ad::finite_difference_check(
            [&](ad::Tape& t, const ad::Var& flat) { return pipeline(t, flat, shape, net, x, pin, kind); }, point,
            1e-5);
        CHECK(err <= 1e-5);
      }
    }
  }

  TEST_CASE("composite and quadratic oracles") {
    const auto composite = [](ad::Tape&, const ad::Var& z) {
      const ad::Var x = ad::rows(z, {0}), y = ad::rows(z, {1});
      return ad::sum(ad::sin(x) * y + x * x);
    };
    std::mt19937_64 rng(5);
    for (int k = 0; k < 10; ++k) CHECK(ad::finite_difference_check(composite, testing::random_p(rng, 2), 1e-5) <= 1e-8);
    const auto quad = [](ad::Tape&, const ad::Var& z) { return ad::sum(z * z); };
    CHECK(ad::finite_difference_check(quad, Eigen::Vector3d(0.3, -1.2, 2.0), 1e-3) <= 1e-10);
  }

  TEST_CASE("training smoke, determinism and loss reduction") {
    const Network net = default_network();
    const Dataset ts1 = make_dataset(net, "ts1", 1);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.seed = 3;
    const GnnModel init = GnnModel::init(3, 16, 11);
    const auto [one, h1] = train(init, ts1, net, cfg);
    CHECK(one.checksum() != init.checksum());
    CHECK(h1.epoch_loss.size() == 1u);

    cfg.epochs = 5;
    const auto a = train(init, ts1, net, cfg);
    const auto b = train(init, ts1, net, cfg);
    CHECK(a.second.epoch_loss == b.second.epoch_loss);
    CHECK(a.second.checksum == b.second.checksum);
    CHECK(gnn_to_json(a.first) == gnn_to_json(b.first));

    const Dataset ts2 = make_dataset(net, "ts2", 1);
    cfg.epochs = 100;
    const auto [m, h] = train(init, ts2, net, cfg);
    CHECK(h.epoch_loss.back() < 0.1 * h.epoch_loss.front());
    const auto avg = moving_average(h.epoch_loss, 10);
    CHECK(avg.back() < avg.front());
    CHECK(dataset_loss(m, ts2, net, cfg.loss) < dataset_loss(init, ts2, net, cfg.loss));
  }

  TEST_CASE("training errors") {
    const Network net = default_network();
    Dataset d = make_dataset(net, "ts1", 2);
    TrainConfig cfg;
    cfg.epochs = 2;
    d.x(5, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(train(GnnModel::init(3, 16, 1), d, net, cfg), DivergenceError);
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValueError);
    Dataset empty = d;
    empty.x.resize(0, 3);
    empty.y.resize(0, 6);
    CHECK_THROWS_AS(train(GnnModel::init(3, 16, 1), empty, net, TrainConfig{}), EmptyDataset);
  }

  TEST_CASE("checkpoint round-trip is exact") {
    const GnnModel m = GnnModel::init(3, 16, 77);
    const GnnModel back = gnn_from_json(gnn_to_json(m));
    CHECK(back.checksum() == m.checksum());
    CHECK(back.flatten() == m.flatten());
    CHECK_THROWS_AS(gnn_from_json("{\"format\": \"other\"}"), ParseError);
    CHECK_THROWS_AS(gnn_from_json("not json"), ParseError);
  }

  TEST_CASE("moving average") {
    const auto avg = moving_average({1, 2, 3, 4}, 2);
    CHECK(avg == std::vector<double>{1.5, 2.5, 3.5});
  }
}
