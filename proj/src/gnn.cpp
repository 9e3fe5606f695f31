#include "pinnflow/gnn.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "pinnflow/errors.hpp"
#include "pinnflow/hash.hpp"

namespace pinnflow {

using nlohmann::json;

GnnModel GnnModel::init(int layer_count, int hidden_dim, std::uint64_t seed) {
  if (layer_count <= 0 || hidden_dim <= 0) throw ValueError("GNN needs positive layer count and hidden size");
  GnnModel m;
  m.layer_count = layer_count;
  m.hidden_dim = hidden_dim;
  m.seed = seed;
  std::mt19937_64 rng(sub_seed(seed, "gnn-init"));
  auto gaussian = [&](int rows, int cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Eigen::MatrixXd w(rows, cols);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) w(r, c) = dist(rng);
    return w;
  };
  int in = kInputDim;
  for (int k = 0; k < layer_count; ++k) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    m.params.push_back(gaussian(in, hidden_dim, scale));
    m.params.push_back(gaussian(in, hidden_dim, scale));
    m.params.push_back(Eigen::MatrixXd::Zero(1, hidden_dim));
    in = hidden_dim;
  }
  // Near-zero readout: the untrained model sits at the flat start.
  m.params.push_back(gaussian(hidden_dim, 2, 1e-3));
  m.params.push_back(Eigen::MatrixXd::Zero(1, 2));
  return m;
}

std::size_t GnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.size());
  return n;
}

Eigen::VectorXd GnnModel::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index off = 0;
  for (const auto& p : params) {
    flat.segment(off, p.size()) = Eigen::Map<const Eigen::VectorXd>(p.data(), p.size());
    off += p.size();
  }
  return flat;
}

void GnnModel::unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count())) throw DimensionMismatch("parameter vector size");
  Eigen::Index off = 0;
  for (auto& p : params) {
    Eigen::Map<Eigen::VectorXd>(p.data(), p.size()) = flat.segment(off, p.size());
    off += p.size();
  }
}

std::uint64_t GnnModel::checksum() const {
  std::uint64_t h = fnv1a("gnn");
  for (const auto& p : params) {
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(p.data()), sizeof(double) * p.size()), h);
  }
  return h;
}

namespace {

ad::SparseMatrix batched_adjacency(const Network& network, Eigen::Index batch) {
  const int nb = network.bus_count();
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int i = 0; i < nb; ++i) {
      for (int j : network.neighbors(i)) trip.emplace_back(b * nb + i, b * nb + j, 1.0);
    }
  }
  ad::SparseMatrix a(batch * nb, batch * nb);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

}  // namespace

GnnOutput gnn_forward_tape(ad::Tape& tape, const std::vector<ad::Var>& params, int layer_count,
                           const Network& network, const Eigen::MatrixXd& inputs) {
  const int nb = network.bus_count();
  const int n = network.load_bus_count();
  if (inputs.cols() != n) {
    throw DimensionMismatch("GNN input has " + std::to_string(inputs.cols()) + " columns, network has " +
                            std::to_string(n) + " load buses");
  }
  if (params.size() != static_cast<std::size_t>(3 * layer_count + 2)) throw DimensionMismatch("GNN parameter list");
  const Eigen::Index batch = inputs.rows();

  Eigen::MatrixXd features = Eigen::MatrixXd::Zero(batch * nb, GnnModel::kInputDim);
  for (Eigen::Index b = 0; b < batch; ++b) {
    features(b * nb, 1) = 1.0;
    for (int i = 1; i < nb; ++i) features(b * nb + i, 0) = inputs(b, i - 1);
  }
  const int adjacency = tape.add_sparse(batched_adjacency(network, batch));

  ad::Var h = tape.constant(std::move(features));
  for (int k = 0; k < layer_count; ++k) {
    const auto& w_self = params[3 * k];
    const auto& w_msg = params[3 * k + 1];
    const auto& bias = params[3 * k + 2];
    h = ad::tanh(ad::add_row(ad::matmul(h, w_self) + ad::matmul(ad::sparse_matmul(adjacency, h), w_msg), bias));
  }
  const ad::Var out = ad::add_row(ad::matmul(h, params[3 * layer_count]), params[3 * layer_count + 1]);
  const ad::Var dv = ad::column(out, 0);
  const ad::Var th = ad::column(out, 1);

  GnnOutput result;
  result.v.push_back(tape.constant(Eigen::MatrixXd::Ones(batch, 1)));
  result.theta.push_back(tape.constant(Eigen::MatrixXd::Zero(batch, 1)));
  for (int i = 1; i < nb; ++i) {
    std::vector<int> idx(static_cast<std::size_t>(batch));
    for (Eigen::Index b = 0; b < batch; ++b) idx[b] = static_cast<int>(b * nb + i);
    result.v.push_back(1.0 + ad::rows(dv, idx));
    result.theta.push_back(ad::rows(th, std::move(idx)));
  }
  return result;
}

Eigen::MatrixXd gnn_predict(const GnnModel& model, const Eigen::MatrixXd& inputs, const Network& network) {
  const int n = network.load_bus_count();
  Eigen::MatrixXd out(inputs.rows(), 2 * n);
  constexpr Eigen::Index chunk = 512;
  for (Eigen::Index start = 0; start < inputs.rows(); start += chunk) {
    const Eigen::Index len = std::min(chunk, inputs.rows() - start);
    ad::Tape tape;
    std::vector<ad::Var> params;
    for (const auto& p : model.params) params.push_back(tape.constant(p));
    const auto fwd = gnn_forward_tape(tape, params, model.layer_count, network, inputs.middleRows(start, len));
    for (int i = 0; i < n; ++i) {
      out.block(start, i, len, 1) = fwd.v[i + 1].value();
      out.block(start, n + i, len, 1) = fwd.theta[i + 1].value();
    }
  }
  return out;
}

VoltageState gnn_forward(const GnnModel& model, const Eigen::VectorXd& p_input, const Network& network) {
  const Eigen::MatrixXd row = gnn_predict(model, p_input.transpose(), network);
  const int n = network.load_bus_count();
  VoltageState s = VoltageState::flat(n + 1);
  s.v.tail(n) = row.row(0).head(n).transpose();
  s.theta.tail(n) = row.row(0).tail(n).transpose();
  return s;
}

void TrainConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0 || !(learning_rate > 0.0)) {
    throw ValueError("epochs, batch size and learning rate must be positive");
  }
  if (!(adam_betas.first > 0.0 && adam_betas.first < 1.0 && adam_betas.second > 0.0 && adam_betas.second < 1.0)) {
    throw ValueError("Adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ValueError("Adam epsilon must be positive");
}

namespace {

Eigen::MatrixXd full_targets(const Dataset& d, const std::vector<int>& rows) {
  const int n = d.load_buses();
  Eigen::MatrixXd t(static_cast<Eigen::Index>(rows.size()), 2 * (n + 1));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    t(r, 0) = 1.0;
    t.row(r).segment(1, n) = d.y.row(rows[r]).head(n);
    t(r, n + 1) = 0.0;
    t.row(r).segment(n + 2, n) = d.y.row(rows[r]).tail(n);
  }
  return t;
}

Eigen::MatrixXd full_injections(const Dataset& d, const std::vector<int>& rows) {
  const int n = d.load_buses();
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), n + 1);
  for (std::size_t r = 0; r < rows.size(); ++r) p.row(r).tail(n) = d.x.row(rows[r]);
  return p;
}

// One recorded batch: returns the loss variable; params are tape leaves.
ad::Var batch_loss(ad::Tape& tape, const std::vector<ad::Var>& params, int layer_count, const Network& network,
                   const Dataset& d, const std::vector<int>& rows, const LossSpec& spec) {
  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(rows.size()), d.load_buses());
  for (std::size_t r = 0; r < rows.size(); ++r) inputs.row(r) = d.x.row(rows[r]);
  const auto out = gnn_forward_tape(tape, params, layer_count, network, inputs);
  if (spec.kind == LossKind::Mse) {
    const Eigen::MatrixXd targets = full_targets(d, rows);
    return loss_on_tape(spec, network, tape, out.v, out.theta, nullptr, &targets);
  }
  const Eigen::MatrixXd inj = full_injections(d, rows);
  return loss_on_tape(spec, network, tape, out.v, out.theta, &inj, nullptr);
}

}  // namespace

double dataset_loss(const GnnModel& model, const Dataset& dataset, const Network& network, const LossSpec& spec) {
  std::vector<int> all(static_cast<std::size_t>(dataset.rows()));
  std::iota(all.begin(), all.end(), 0);
  ad::Tape tape;
  std::vector<ad::Var> params;
  for (const auto& p : model.params) params.push_back(tape.constant(p));
  return batch_loss(tape, params, model.layer_count, network, dataset, all, spec).scalar();
}

std::pair<GnnModel, TrainHistory> train(GnnModel model, const Dataset& dataset, const Network& network,
                                        const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.rows() == 0) throw EmptyDataset("training dataset has no rows");
  if (dataset.load_buses() != network.load_bus_count()) throw DimensionMismatch("dataset does not match network");

  const auto started = std::chrono::steady_clock::now();
  std::mt19937_64 rng(sub_seed(cfg.seed, "shuffle"));
  std::vector<int> order(static_cast<std::size_t>(dataset.rows()));
  std::iota(order.begin(), order.end(), 0);

  std::vector<Eigen::MatrixXd> m1, m2;
  for (const auto& p : model.params) {
    m1.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    m2.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
  }
  const double b1 = cfg.adam_betas.first;
  const double b2 = cfg.adam_betas.second;
  long step = 0;

  TrainHistory history;
  history.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
  ad::Tape tape;
  std::vector<int> rows;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      rows.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));

      tape.clear();
      std::vector<ad::Var> params;
      params.reserve(model.params.size());
      for (const auto& p : model.params) params.push_back(tape.variable(p));
      const ad::Var loss = batch_loss(tape, params, model.layer_count, network, dataset, rows, cfg.loss);
      const double value = loss.scalar();
      if (!std::isfinite(value)) throw DivergenceError(epoch);
      weighted += value * static_cast<double>(rows.size());
      tape.backward(loss);

      ++step;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      for (std::size_t k = 0; k < model.params.size(); ++k) {
        const Eigen::MatrixXd g = tape.grad(params[k]);
        m1[k] = b1 * m1[k] + (1.0 - b1) * g;
        m2[k] = b2 * m2[k] + (1.0 - b2) * g.cwiseProduct(g);
        model.params[k].array() -= cfg.learning_rate * (m1[k].array() / c1) /
                                   ((m2[k].array() / c2).sqrt() + cfg.adam_eps);
      }
    }
    const double epoch_loss = weighted / static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) throw DivergenceError(epoch);
    history.epoch_loss.push_back(epoch_loss);
  }
  history.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  history.checksum = model.checksum();
  return {std::move(model), std::move(history)};
}

std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window) {
  std::vector<double> out;
  if (window == 0) return out;
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    acc += xs[i];
    if (i >= window) acc -= xs[i - window];
    if (i + 1 >= window) out.push_back(acc / static_cast<double>(window));
  }
  return out;
}

std::string gnn_to_json(const GnnModel& model) {
  json doc;
  doc["format"] = "pinnflow-gnn-1";
  doc["layer_count"] = model.layer_count;
  doc["hidden_dim"] = model.hidden_dim;
  doc["input_dim"] = GnnModel::kInputDim;
  doc["seed"] = model.seed;
  doc["params"] = json::array();
  for (const auto& p : model.params) {
    json entry;
    entry["rows"] = p.rows();
    entry["cols"] = p.cols();
    entry["data"] = std::vector<double>(p.data(), p.data() + p.size());
    doc["params"].push_back(std::move(entry));
  }
  return doc.dump();
}

GnnModel gnn_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != "pinnflow-gnn-1") throw ParseError("unsupported GNN checkpoint format");
    GnnModel m;
    m.layer_count = doc.at("layer_count").get<int>();
    m.hidden_dim = doc.at("hidden_dim").get<int>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& entry : doc.at("params")) {
      const auto data = entry.at("data").get<std::vector<double>>();
      Eigen::MatrixXd p(entry.at("rows").get<Eigen::Index>(), entry.at("cols").get<Eigen::Index>());
      if (static_cast<Eigen::Index>(data.size()) != p.size()) throw ParseError("GNN parameter block size");
      std::copy(data.begin(), data.end(), p.data());
      m.params.push_back(std::move(p));
    }
    if (m.params.size() != static_cast<std::size_t>(3 * m.layer_count + 2)) throw ParseError("GNN parameter count");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("GNN checkpoint: ") + e.what());
  }
}

}  // namespace pinnflow
