#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pinnflow/acpf.hpp"
#include "pinnflow/autodiff.hpp"
#include "pinnflow/grid.hpp"
#include "pinnflow/physloss.hpp"
#include "pinnflow/scenarios.hpp"

namespace pinnflow {

/// Message-passing network over the feeder graph. Node inputs are
/// (P_i, slack indicator); each layer computes
///   H' = tanh(H W_self + (A H) W_msg + b)
/// with A the adjacency, and an affine readout maps the final hidden state
/// to (V - 1, theta) per bus. The slack output is fixed to 1 and 0.
struct GnnModel {
  static constexpr int kInputDim = 2;

  int layer_count = 3;
  int hidden_dim = 16;
  std::uint64_t seed = 0;
  // Per layer: W_self, W_msg, bias; then readout weight and bias.
  std::vector<Eigen::MatrixXd> params;

  static GnnModel init(int layer_count, int hidden_dim, std::uint64_t seed);

  std::size_t parameter_count() const;
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);
  std::uint64_t checksum() const;
};

/// Per-bus output columns of a batched forward pass (slack included).
struct GnnOutput {
  std::vector<ad::Var> v;
  std::vector<ad::Var> theta;
};

/// Records a batched forward pass on the tape. `inputs` is B x N (load-bus
/// P in p.u.); `params` are tape variables in GnnModel::params order.
GnnOutput gnn_forward_tape(ad::Tape& tape, const std::vector<ad::Var>& params, int layer_count,
                           const Network& network, const Eigen::MatrixXd& inputs);

VoltageState gnn_forward(const GnnModel& model, const Eigen::VectorXd& p_input, const Network& network);

/// Batched inference; returns B x 2N predictions laid out like Dataset::y.
Eigen::MatrixXd gnn_predict(const GnnModel& model, const Eigen::MatrixXd& inputs, const Network& network);

struct TrainConfig {
  int epochs = 500;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::pair<double, double> adam_betas{0.9, 0.999};
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  LossSpec loss{LossKind::PhysicsProposed, {}};

  void validate() const;
};

struct TrainHistory {
  std::vector<double> epoch_loss;
  double wall_seconds = 0.0;
  std::uint64_t checksum = 0;
};

std::pair<GnnModel, TrainHistory> train(GnnModel model, const Dataset& dataset, const Network& network,
                                        const TrainConfig& cfg);

/// Loss of the model over a whole dataset under the given objective.
double dataset_loss(const GnnModel& model, const Dataset& dataset, const Network& network, const LossSpec& spec);

/// Trailing moving average of a loss curve.
std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window);

std::string gnn_to_json(const GnnModel& model);
GnnModel gnn_from_json(const std::string& text);

}  // namespace pinnflow
