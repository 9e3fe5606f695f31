#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinnflow/acpf.hpp"
#include "pinnflow/autodiff.hpp"
#include "pinnflow/errors.hpp"
#include "pinnflow/grid.hpp"

namespace pinnflow {

enum class LossKind { Mse, PhysicsBenchmark, PhysicsProposed };

struct LossSpec {
  LossKind kind = LossKind::PhysicsProposed;
  std::map<std::string, double> params;  // reserved, always empty
};

LossKind parse_loss_kind(const std::string& name);
std::string loss_kind_name(LossKind kind);

/// Per non-slack bus active-power imbalance, ordered by bus id 1..N.
struct ImbalanceVector {
  Eigen::VectorXd dp;
};

/// The bus adjacent to the slack. Throws TopologyError unless there is
/// exactly one.
int feeder_head(const Network& network);

inline double total(double x) { return x; }
inline ad::Var total(const ad::Var& x) { return ad::sum(x); }

// The imbalance assemblies below take per-bus magnitudes, angles and net
// injections (index 0 = slack) and return one entry per load bus.

/// dp_i = P_i - sum_j P_ij with every P_ij from the polar line-flow
/// expression taken as written, including the flow on the slack line.
template <class T>
std::vector<T> imbalance_benchmark(const Network& network, const std::vector<T>& v,
                                   const std::vector<T>& theta, const std::vector<T>& p) {
  std::vector<T> dp;
  dp.reserve(network.load_bus_count());
  for (int i = 1; i < network.bus_count(); ++i) {
    T acc = p[i];
    for (int j : network.neighbors(i)) {
      const auto& line = network.lines()[network.line_between(i, j)];
      acc = acc - line_flow_p(v[i], theta[i], v[j], theta[j], line.conductance_pu, line.susceptance_pu);
    }
    dp.push_back(acc);
  }
  return dp;
}

/// Loss-aware imbalance on a radial feeder. Flows are sending-end powers
/// S_ij = -P_ij. Each bus balances its injection against the flow it sends
/// to its parent and the flows it sends to its children, the latter
/// recovered from the child end as S_ij = -(S_ji - loss_ij). At the feeder
/// head the nodal balance is replaced by the feeder-wide one:
///   dp_head = sum_k P_k - sum_{lines below head} loss - S_head,slack.
template <class T>
std::vector<T> imbalance_proposed(const Network& network, const std::vector<T>& v,
                                  const std::vector<T>& theta, const std::vector<T>& p) {
  if (!network.radial()) throw TopologyError("loss-aware imbalance requires a radial feeder");
  const int head = feeder_head(network);
  const auto& lines = network.lines();

  auto sending = [&](int i, int j) {
    const auto& line = lines[network.line_between(i, j)];
    return -line_flow_p(v[i], theta[i], v[j], theta[j], line.conductance_pu, line.susceptance_pu);
  };
  auto loss = [&](int i, int j) {
    const auto& line = lines[network.line_between(i, j)];
    return joule_loss(v[i], theta[i], v[j], theta[j], line.conductance_pu);
  };

  std::vector<T> dp;
  dp.reserve(network.load_bus_count());
  for (int i = 1; i < network.bus_count(); ++i) {
    if (i == head) {
      T acc = p[1];
      for (int k = 2; k < network.bus_count(); ++k) acc = acc + p[k];
      for (const auto& line : lines) {
        if (line.from == 0 || line.to == 0) continue;
        acc = acc - loss(line.from, line.to);
      }
      dp.push_back(acc - sending(head, 0));
      continue;
    }
    T acc = p[i] - sending(i, network.parent(i));
    for (int c : network.children(i)) acc = acc + (sending(c, i) - loss(i, c));
    dp.push_back(acc);
  }
  return dp;
}

/// Mean of squared imbalance over load buses and batch entries. With
/// T = ad::Var each argument is a B x 1 column over the batch.
template <class T>
T physics_loss(LossKind kind, const Network& network, const std::vector<T>& v,
               const std::vector<T>& theta, const std::vector<T>& p, Eigen::Index batch) {
  const auto dp = kind == LossKind::PhysicsBenchmark ? imbalance_benchmark(network, v, theta, p)
                                                     : imbalance_proposed(network, v, theta, p);
  T acc = total(dp[0] * dp[0]);
  for (std::size_t i = 1; i < dp.size(); ++i) acc = acc + total(dp[i] * dp[i]);
  return acc * (1.0 / static_cast<double>(dp.size() * batch));
}

ImbalanceVector imbalance_benchmark(const Network& network, const VoltageState& state,
                                    const InjectionVector& inj);
ImbalanceVector imbalance_proposed(const Network& network, const VoltageState& state,
                                   const InjectionVector& inj);

using StateBatch = std::vector<VoltageState>;
using InjectionBatch = std::vector<InjectionVector>;

double loss_value(const LossSpec& spec, const Network& network, const StateBatch& predicted,
                  const std::optional<StateBatch>& targets, const std::optional<InjectionBatch>& inj);

/// Gradient of loss_value w.r.t. every predicted (V, theta) entry.
StateBatch loss_gradient(const LossSpec& spec, const Network& network, const StateBatch& predicted,
                         const std::optional<StateBatch>& targets,
                         const std::optional<InjectionBatch>& inj);

/// Batched loss on a tape: v/theta are per-bus B x 1 columns; injections
/// are a B x (N+1) matrix and targets (for MSE) B x 2(N+1) as [V | theta].
ad::Var loss_on_tape(const LossSpec& spec, const Network& network, ad::Tape& tape,
                     const std::vector<ad::Var>& v, const std::vector<ad::Var>& theta,
                     const Eigen::MatrixXd* injections, const Eigen::MatrixXd* targets);

}  // namespace pinnflow
