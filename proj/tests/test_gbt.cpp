#include <doctest.h>

#include <random>

#include "pinnflow/errors.hpp"
#include "pinnflow/eval.hpp"
#include "pinnflow/gbt.hpp"
#include "support.hpp"

using namespace pinnflow;

namespace {

Dataset make_dataset(const Network& net, const std::string& profile, std::uint64_t seed) {
  const ScenarioConfig cfg = scenario_preset(profile, seed);
  return build_dataset(net, generate_profiles(net, cfg), cfg);
}

// Largest value any input can reach: base plus the largest leaf of every tree.
double reachable_max(const GbtModel& m, int d) {
  double s = m.base(d);
  for (const auto& t : m.ensembles[d]) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& n : t.nodes)
      if (n.feature < 0) best = std::max(best, n.value);
    s += m.learning_rate * best;
  }
  return s;
}

}  // namespace

TEST_SUITE("gbt") {
  TEST_CASE("constant target is reproduced exactly") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(40, 3);
    Eigen::MatrixXd y = Eigen::MatrixXd::Constant(40, 2, 0.1);
    const GbtModel m = fit_gbt(x, y, {});
    for (const auto& e : m.ensembles)
      for (const auto& t : e) CHECK(t.nodes.size() == 1u);
    const Eigen::MatrixXd p = gbt_predict(m, Eigen::MatrixXd::Random(10, 3));
    CHECK((p.array() == 0.1).all());
  }

  TEST_CASE("zero trees predict the column means") {
    Eigen::MatrixXd x(4, 1), y(4, 2);
    x << 0, 1, 2, 3;
    y << 1, 5, 2, 6, 3, 7, 4, 8;
    GbtConfig cfg;
    cfg.tree_count = 0;
    const GbtModel m = fit_gbt(x, y, cfg);
    const Eigen::MatrixXd p = gbt_predict(m, x);
    CHECK((p.col(0).array() == 2.5).all());
    CHECK((p.col(1).array() == 6.5).all());
  }

  TEST_CASE("single stump on a step function") {
    Eigen::MatrixXd x(6, 1), y(6, 1);
    x << 0, 1, 2, 3, 4, 5;
    y << 0, 0, 0, 1, 1, 1;
    GbtConfig cfg;
    cfg.tree_count = 1;
    cfg.max_depth = 1;
    cfg.learning_rate = 1.0;
    const GbtModel m = fit_gbt(x, y, cfg);
    const auto& root = m.ensembles[0][0].nodes[0];
    CHECK(root.feature == 0);
    CHECK(root.threshold == 2.5);
    CHECK((gbt_predict(m, x) - y).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("training error is non-increasing in tree count") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> noise(0.0, 0.1);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(200, 2);
    Eigen::MatrixXd y(200, 1);
    for (int i = 0; i < 200; ++i) y(i, 0) = std::sin(3 * x(i, 0)) + x(i, 1) * x(i, 1) + noise(rng);
    const GbtModel m = fit_gbt(x, y, {});
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= m.tree_count(); k += 10) {
      const double mse = (gbt_predict(m.truncated(k), x) - y).squaredNorm();
      CHECK(mse <= prev + 1e-12);
      prev = mse;
    }
    for (const auto& t : m.ensembles[0]) CHECK(t.depth() <= 4);
  }

  TEST_CASE("fit-time bookkeeping matches prediction") {
    // Running the boosting recursion by hand over the stored trees gives the
    // same in-sample predictions.
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(50, 2);
    Eigen::MatrixXd y = (x.col(0).array() * 2 - x.col(1).array()).matrix();
    GbtConfig cfg;
    cfg.tree_count = 20;
    const GbtModel m = fit_gbt(x, y, cfg);
    Eigen::VectorXd f = Eigen::VectorXd::Constant(50, y.mean());
    for (const auto& t : m.ensembles[0])
      for (int i = 0; i < 50; ++i) f(i) += 0.1 * t.predict(x.row(i));
    CHECK((gbt_predict(m, x).col(0) - f).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("feeder data: accuracy, determinism, no extrapolation") {
    const Network net = default_network();
    const Dataset ts2 = make_dataset(net, "ts2", 3);
    const Dataset c2 = make_dataset(net, "c2", 3);
    const GbtModel m = fit_gbt(ts2, {});
    CHECK(gbt_to_json(m) == gbt_to_json(fit_gbt(ts2, {})));

    const EvalRow in = evaluate_predictions(gbt_predict(m, ts2.x), ts2);
    CHECK(in.rmse_volt < 0.5);

    const Eigen::MatrixXd p = gbt_predict(m, c2.x);
    for (int d = 0; d < m.output_dim(); ++d) CHECK(p.col(d).maxCoeff() <= reachable_max(m, d) + 1e-12);
    CHECK(ts2.y.leftCols(3).maxCoeff() < 1.08);
    CHECK(ova(p.leftCols(3), c2.y.leftCols(3)).hits == 0);

    const VoltageState s = predict_gbt(m, Eigen::VectorXd(c2.x.row(0).transpose()));
    CHECK(s.v(0) == 1.0);
    CHECK(s.theta(0) == 0.0);
    CHECK(s.v(3) == p(0, 2));
  }

  TEST_CASE("errors and checkpoint round-trip") {
    CHECK_THROWS_AS(fit_gbt(Eigen::MatrixXd(0, 3), Eigen::MatrixXd(0, 6), {}), EmptyDataset);
    CHECK_THROWS_AS(fit_gbt(Eigen::MatrixXd::Ones(3, 3), Eigen::MatrixXd::Ones(4, 6), {}), DimensionMismatch);
    GbtConfig bad;
    bad.max_depth = 0;
    CHECK_THROWS_AS(fit_gbt(Eigen::MatrixXd::Ones(3, 3), Eigen::MatrixXd::Ones(3, 6), bad), ValueError);

    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(60, 3);
    const Eigen::MatrixXd y = Eigen::MatrixXd::Random(60, 6);
    GbtConfig cfg;
    cfg.tree_count = 15;
    const GbtModel m = fit_gbt(x, y, cfg);
    CHECK_THROWS_AS(gbt_predict(m, Eigen::MatrixXd::Ones(2, 4)), DimensionMismatch);
    const std::string text = gbt_to_json(m);
    const GbtModel back = gbt_from_json(text);
    CHECK(gbt_to_json(back) == text);
    const Eigen::MatrixXd probe = Eigen::MatrixXd::Random(30, 3);
    CHECK(gbt_predict(back, probe) == gbt_predict(m, probe));
    CHECK_THROWS_AS(gbt_from_json("{}"), ParseError);
  }
}
