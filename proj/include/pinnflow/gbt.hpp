#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinnflow/acpf.hpp"
#include "pinnflow/scenarios.hpp"

namespace pinnflow {

struct GbtConfig {
  int tree_count = 200;
  int max_depth = 4;
  double learning_rate = 0.1;
  int min_samples_leaf = 1;
  std::uint64_t seed = 0;  // recorded only; fitting has no random step

  void validate() const;
};

/// Binary regression tree; samples with x[feature] <= threshold go left.
struct RegressionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  template <typename Row>
  double predict(const Row& x) const {
    int k = 0;
    while (nodes[k].feature >= 0) k = x(nodes[k].feature) <= nodes[k].threshold ? nodes[k].left : nodes[k].right;
    return nodes[k].value;
  }
  int depth() const;
};

/// Independent squared-error boosted ensembles, one per output column of
/// Dataset::y (V_1..V_N, theta_1..theta_N).
struct GbtModel {
  int input_dim = 0;
  int max_depth = 0;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  Eigen::VectorXd base;
  std::vector<std::vector<RegressionTree>> ensembles;

  int output_dim() const { return static_cast<int>(base.size()); }
  int tree_count() const { return ensembles.empty() ? 0 : static_cast<int>(ensembles.front().size()); }
  /// Model restricted to its first m trees per output.
  GbtModel truncated(int m) const;
};

GbtModel fit_gbt(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const GbtConfig& cfg);
GbtModel fit_gbt(const Dataset& dataset, const GbtConfig& cfg);

/// B x N inputs -> B x 2N outputs laid out like Dataset::y.
Eigen::MatrixXd gbt_predict(const GbtModel& model, const Eigen::MatrixXd& inputs);
/// Single snapshot; the slack bus is set to 1 at angle 0.
VoltageState predict_gbt(const GbtModel& model, const Eigen::VectorXd& p_input);

std::string gbt_to_json(const GbtModel& model);
GbtModel gbt_from_json(const std::string& text);

}  // namespace pinnflow
