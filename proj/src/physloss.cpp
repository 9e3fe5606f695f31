#include "pinnflow/physloss.hpp"

namespace pinnflow {

LossKind parse_loss_kind(const std::string& name) {
  if (name == "mse") return LossKind::Mse;
  if (name == "phys-benchmark") return LossKind::PhysicsBenchmark;
  if (name == "phys-proposed") return LossKind::PhysicsProposed;
  throw Error("unknown loss '" + name + "' (expected mse|phys-benchmark|phys-proposed)", ExitCode::Usage);
}

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Mse:
      return "mse";
    case LossKind::PhysicsBenchmark:
      return "phys-benchmark";
    case LossKind::PhysicsProposed:
      return "phys-proposed";
  }
  return "?";
}

int feeder_head(const Network& network) {
  const auto& adj = network.neighbors(0);
  if (adj.size() != 1) {
    throw TopologyError("expected exactly one bus adjacent to the slack, found " + std::to_string(adj.size()));
  }
  return adj[0];
}

namespace {

void check_state(const Network& network, const VoltageState& state, const InjectionVector& inj) {
  if (state.size() != network.bus_count() || inj.size() != network.bus_count()) {
    throw DimensionMismatch("state/injection size does not match network");
  }
}

template <class F>
ImbalanceVector evaluate(const Network& network, const VoltageState& state, const InjectionVector& inj, F f) {
  check_state(network, state, inj);
  const std::vector<double> v(state.v.data(), state.v.data() + state.size());
  const std::vector<double> th(state.theta.data(), state.theta.data() + state.size());
  const std::vector<double> p(inj.p.data(), inj.p.data() + inj.size());
  const auto dp = f(network, v, th, p);
  return {Eigen::Map<const Eigen::VectorXd>(dp.data(), static_cast<Eigen::Index>(dp.size()))};
}

void check_batch(const LossSpec& spec, const StateBatch& predicted, const std::optional<StateBatch>& targets,
                 const std::optional<InjectionBatch>& inj) {
  if (predicted.empty()) throw PreconditionError("loss batch is empty");
  if (spec.kind == LossKind::Mse) {
    if (!targets) throw MissingTargets();
    if (targets->size() != predicted.size()) throw DimensionMismatch("targets batch size");
  } else {
    if (!inj) throw MissingInjections();
    if (inj->size() != predicted.size()) throw DimensionMismatch("injection batch size");
  }
}

}  // namespace

ImbalanceVector imbalance_benchmark(const Network& network, const VoltageState& state,
                                    const InjectionVector& inj) {
  return evaluate(network, state, inj, [](const auto&... a) { return imbalance_benchmark<double>(a...); });
}

ImbalanceVector imbalance_proposed(const Network& network, const VoltageState& state,
                                   const InjectionVector& inj) {
  return evaluate(network, state, inj, [](const auto&... a) { return imbalance_proposed<double>(a...); });
}

double loss_value(const LossSpec& spec, const Network& network, const StateBatch& predicted,
                  const std::optional<StateBatch>& targets, const std::optional<InjectionBatch>& inj) {
  check_batch(spec, predicted, targets, inj);
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < predicted.size(); ++b) {
    const auto& s = predicted[b];
    if (spec.kind == LossKind::Mse) {
      const auto& t = (*targets)[b];
      if (t.size() != s.size()) throw DimensionMismatch("target state size");
      acc += (s.v - t.v).squaredNorm() + (s.theta - t.theta).squaredNorm();
      count += 2 * static_cast<std::size_t>(s.size());
    } else {
      const auto dp = spec.kind == LossKind::PhysicsBenchmark ? imbalance_benchmark(network, s, (*inj)[b])
                                                              : imbalance_proposed(network, s, (*inj)[b]);
      acc += dp.dp.squaredNorm();
      count += static_cast<std::size_t>(dp.dp.size());
    }
  }
  return acc / static_cast<double>(count);
}

ad::Var loss_on_tape(const LossSpec& spec, const Network& network, ad::Tape& tape,
                     const std::vector<ad::Var>& v, const std::vector<ad::Var>& theta,
                     const Eigen::MatrixXd* injections, const Eigen::MatrixXd* targets) {
  const int n = network.bus_count();
  if (static_cast<int>(v.size()) != n || static_cast<int>(theta.size()) != n) {
    throw DimensionMismatch("per-bus columns do not match network");
  }
  const Eigen::Index batch = v[0].rows();
  if (spec.kind == LossKind::Mse) {
    if (targets == nullptr) throw MissingTargets();
    if (targets->rows() != batch || targets->cols() != 2 * n) throw DimensionMismatch("target matrix shape");
    ad::Var acc;
    for (int i = 0; i < n; ++i) {
      const ad::Var dv = v[i] - tape.constant(targets->col(i));
      const ad::Var dt = theta[i] - tape.constant(targets->col(n + i));
      const ad::Var term = ad::sum(dv * dv) + ad::sum(dt * dt);
      acc = i == 0 ? term : acc + term;
    }
    return acc * (1.0 / static_cast<double>(2 * n * batch));
  }
  if (injections == nullptr) throw MissingInjections();
  if (injections->rows() != batch || injections->cols() != n) throw DimensionMismatch("injection matrix shape");
  std::vector<ad::Var> p;
  p.reserve(n);
  for (int i = 0; i < n; ++i) p.push_back(tape.constant(injections->col(i)));
  return physics_loss(spec.kind, network, v, theta, p, batch);
}

StateBatch loss_gradient(const LossSpec& spec, const Network& network, const StateBatch& predicted,
                         const std::optional<StateBatch>& targets, const std::optional<InjectionBatch>& inj) {
  check_batch(spec, predicted, targets, inj);
  const int n = network.bus_count();
  const auto batch = static_cast<Eigen::Index>(predicted.size());
  Eigen::MatrixXd vm(batch, n), tm(batch, n);
  for (Eigen::Index b = 0; b < batch; ++b) {
    if (predicted[b].size() != n) throw DimensionMismatch("predicted state size");
    vm.row(b) = predicted[b].v.transpose();
    tm.row(b) = predicted[b].theta.transpose();
  }
  Eigen::MatrixXd inj_m, tgt_m;
  if (spec.kind == LossKind::Mse) {
    tgt_m.resize(batch, 2 * n);
    for (Eigen::Index b = 0; b < batch; ++b) {
      tgt_m.row(b).head(n) = (*targets)[b].v.transpose();
      tgt_m.row(b).tail(n) = (*targets)[b].theta.transpose();
    }
  } else {
    inj_m.resize(batch, n);
    for (Eigen::Index b = 0; b < batch; ++b) inj_m.row(b) = (*inj)[b].p.transpose();
  }

  ad::Tape tape;
  std::vector<ad::Var> v, th;
  for (int i = 0; i < n; ++i) {
    v.push_back(tape.variable(vm.col(i)));
    th.push_back(tape.variable(tm.col(i)));
  }
  const ad::Var out = loss_on_tape(spec, network, tape, v, th, spec.kind == LossKind::Mse ? nullptr : &inj_m,
                                   spec.kind == LossKind::Mse ? &tgt_m : nullptr);
  tape.backward(out);

  StateBatch grads(static_cast<std::size_t>(batch),
                   VoltageState{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)});
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd gv = tape.grad(v[i]);
    const Eigen::MatrixXd gt = tape.grad(th[i]);
    for (Eigen::Index b = 0; b < batch; ++b) {
      grads[b].v(i) = gv(b, 0);
      grads[b].theta(i) = gt(b, 0);
    }
  }
  return grads;
}

}  // namespace pinnflow
