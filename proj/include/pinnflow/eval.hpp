#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinnflow/gbt.hpp"
#include "pinnflow/gnn.hpp"
#include "pinnflow/grid.hpp"
#include "pinnflow/scenarios.hpp"

namespace pinnflow {

struct EvalConfig {
  double v_max = 1.08;
  double v_base = 230.0;
  // Restrict overvoltage metrics to one load bus (id >= 1). Inputs are
  // T x N voltage matrices whose column k holds bus k + 1.
  std::optional<int> per_bus;

  void validate() const;
};

using VoltageMatrix = Eigen::Ref<const Eigen::MatrixXd>;

/// Root mean square error over every entry, in volts.
double rmse(const VoltageMatrix& pred, const VoltageMatrix& target, const EvalConfig& cfg = {});
/// Pearson correlation over every entry.
double pcc(const VoltageMatrix& pred, const VoltageMatrix& target);

struct OvaResult {
  std::optional<double> ratio;  // empty when there is no true overvoltage
  std::size_t hits = 0;
  std::size_t total = 0;

  /// "50.85 (30/59)" in percent, or "nan (0/0)".
  std::string render() const;
};

/// Share of true overvoltages (target >= v_max) that are also predicted.
OvaResult ova(const VoltageMatrix& pred, const VoltageMatrix& target, const EvalConfig& cfg = {});
/// Predicted-but-absent overvoltages divided by the number of all pairs.
double fpr(const VoltageMatrix& pred, const VoltageMatrix& target, const EvalConfig& cfg = {});

struct EvalRow {
  std::string training_set;
  std::string test_case;
  std::string model;
  double rmse_volt = 0.0;
  double pcc = 0.0;  // NaN when undefined
  OvaResult ova;
  OvaResult ova_end_bus;
  double fpr = 0.0;
  double theta_rmse = 0.0;  // rad, diagnostic
};

/// Metrics of a T x 2N prediction against a dataset's targets.
EvalRow evaluate_predictions(const Eigen::MatrixXd& pred, const Dataset& test, const EvalConfig& cfg = {});

struct EvalReport {
  std::vector<EvalRow> rows;
  int end_bus = 0;

  std::string to_text() const;
  std::string to_csv() const;
};

/// Hourly true and predicted feeder-end voltage for one day of a test set.
std::string trace_csv(const Dataset& test, int day, const std::vector<std::string>& names,
                      const std::vector<Eigen::MatrixXd>& predictions);
std::string trace_svg(const Dataset& test, int day, const std::vector<std::string>& names,
                      const std::vector<Eigen::MatrixXd>& predictions, double v_max = 1.08);

struct BenchmarkConfig {
  std::uint64_t seed = 0;
  std::vector<std::string> training_sets{"ts1", "ts2", "ts3"};
  std::vector<std::string> test_cases{"c1", "c2"};
  GbtConfig gbt;
  TrainConfig gnn;  // loss is overridden per model
  int layer_count = 3;
  int hidden_dim = 16;
  EvalConfig eval;
};

/// Trains XGB, GNNb and GNNp on every training set and evaluates each on
/// every test case.
EvalReport run_benchmark(const Network& network, const BenchmarkConfig& cfg);

}  // namespace pinnflow
