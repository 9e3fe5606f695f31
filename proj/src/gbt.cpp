#include "pinnflow/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "pinnflow/errors.hpp"

namespace pinnflow {

using nlohmann::json;

void GbtConfig::validate() const {
  if (tree_count < 0) throw ValueError("tree_count must be >= 0");
  if (max_depth < 1) throw ValueError("max_depth must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValueError("learning_rate must be > 0");
  if (min_samples_leaf < 1) throw ValueError("min_samples_leaf must be >= 1");
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].feature < 0) continue;
    d[nodes[k].left] = d[nodes[k].right] = d[k] + 1;
    best = std::max(best, d[k] + 1);
  }
  return best;
}

GbtModel GbtModel::truncated(int m) const {
  GbtModel out = *this;
  for (auto& e : out.ensembles) e.resize(std::min<std::size_t>(e.size(), static_cast<std::size_t>(std::max(m, 0))));
  return out;
}

namespace {

struct Builder {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& r;
  const std::vector<std::vector<int>>& sorted;  // per feature, row indices by ascending x
  int max_depth;
  int min_leaf;
  std::vector<char> member;
  RegressionTree tree;

  double mean_of(const std::vector<int>& rows) const {
    double s = 0.0;
    for (int i : rows) s += r(i);
    return s / static_cast<double>(rows.size());
  }

  int grow(const std::vector<int>& rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[id].value = mean_of(rows);
    const auto n = static_cast<Eigen::Index>(rows.size());
    if (depth >= max_depth || n < 2 * min_leaf) return id;

    double total = 0.0;
    for (int i : rows) total += r(i);
    const double parent = total * total / static_cast<double>(n);

    int best_f = -1;
    double best_gain = 0.0, best_thr = 0.0;
    for (int i : rows) member[i] = 1;
    for (int f = 0; f < x.cols(); ++f) {
      double left = 0.0;
      Eigen::Index nl = 0;
      int prev = -1;
      for (int i : sorted[f]) {
        if (!member[i]) continue;
        if (prev >= 0 && x(i, f) > x(prev, f) && nl >= min_leaf && n - nl >= min_leaf) {
          const double right = total - left;
          const double gain = left * left / nl + right * right / (n - nl) - parent;
          if (gain > best_gain) {
            best_gain = gain;
            best_f = f;
            const double a = x(prev, f), b = x(i, f);
            best_thr = a + 0.5 * (b - a);
            if (!(best_thr < b)) best_thr = a;
          }
        }
        left += r(i);
        ++nl;
        prev = i;
      }
    }
    for (int i : rows) member[i] = 0;
    if (best_f < 0) return id;

    std::vector<int> lo, hi;
    for (int i : rows) (x(i, best_f) <= best_thr ? lo : hi).push_back(i);
    tree.nodes[id].feature = best_f;
    tree.nodes[id].threshold = best_thr;
    const int l = grow(lo, depth + 1);
    const int h = grow(hi, depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = h;
    return id;
  }
};

}  // namespace

GbtModel fit_gbt(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const GbtConfig& cfg) {
  cfg.validate();
  if (x.rows() == 0 || x.cols() == 0) throw EmptyDataset("no training rows");
  if (y.rows() != x.rows()) throw DimensionMismatch("inputs and targets differ in row count");

  GbtModel model;
  model.input_dim = static_cast<int>(x.cols());
  model.max_depth = cfg.max_depth;
  model.learning_rate = cfg.learning_rate;
  model.seed = cfg.seed;
  model.base.resize(y.cols());
  for (Eigen::Index d = 0; d < y.cols(); ++d) {
    const auto col = y.col(d);
    // A constant column must reproduce its value exactly.
    model.base(d) = col.minCoeff() == col.maxCoeff() ? col(0) : col.mean();
  }

  std::vector<std::vector<int>> sorted(x.cols(), std::vector<int>(x.rows()));
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    std::iota(sorted[f].begin(), sorted[f].end(), 0);
    std::stable_sort(sorted[f].begin(), sorted[f].end(), [&](int a, int b) { return x(a, f) < x(b, f); });
  }
  std::vector<int> all(x.rows());
  std::iota(all.begin(), all.end(), 0);

  model.ensembles.resize(y.cols());
  for (Eigen::Index d = 0; d < y.cols(); ++d) {
    Eigen::VectorXd fitted = Eigen::VectorXd::Constant(x.rows(), model.base(d));
    Eigen::VectorXd residual(x.rows());
    for (int m = 0; m < cfg.tree_count; ++m) {
      residual = y.col(d) - fitted;
      Builder b{x, residual, sorted, cfg.max_depth, cfg.min_samples_leaf, std::vector<char>(x.rows(), 0), {}};
      b.grow(all, 0);
      for (Eigen::Index i = 0; i < x.rows(); ++i) fitted(i) += cfg.learning_rate * b.tree.predict(x.row(i));
      model.ensembles[d].push_back(std::move(b.tree));
    }
  }
  return model;
}

GbtModel fit_gbt(const Dataset& dataset, const GbtConfig& cfg) { return fit_gbt(dataset.x, dataset.y, cfg); }

Eigen::MatrixXd gbt_predict(const GbtModel& model, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != model.input_dim)
    throw DimensionMismatch("GBT expects " + std::to_string(model.input_dim) + " inputs, got " +
                            std::to_string(inputs.cols()));
  Eigen::MatrixXd out(inputs.rows(), model.output_dim());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    for (int d = 0; d < model.output_dim(); ++d) {
      double s = model.base(d);
      for (const auto& t : model.ensembles[d]) s += model.learning_rate * t.predict(inputs.row(i));
      out(i, d) = s;
    }
  }
  return out;
}

VoltageState predict_gbt(const GbtModel& model, const Eigen::VectorXd& p_input) {
  const Eigen::MatrixXd row = gbt_predict(model, Eigen::MatrixXd(p_input.transpose()));
  const Eigen::Index n = p_input.size();
  VoltageState s = VoltageState::flat(static_cast<int>(n + 1));
  s.v.tail(n) = row.leftCols(n).transpose();
  s.theta.tail(n) = row.rightCols(n).transpose();
  return s;
}

std::string gbt_to_json(const GbtModel& model) {
  json doc;
  doc["format"] = "pinnflow-gbt-1";
  doc["input_dim"] = model.input_dim;
  doc["max_depth"] = model.max_depth;
  doc["learning_rate"] = model.learning_rate;
  doc["seed"] = model.seed;
  doc["base"] = std::vector<double>(model.base.data(), model.base.data() + model.base.size());
  doc["ensembles"] = json::array();
  for (const auto& e : model.ensembles) {
    json trees = json::array();
    for (const auto& t : e) {
      json nodes = json::array();
      for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
      trees.push_back(std::move(nodes));
    }
    doc["ensembles"].push_back(std::move(trees));
  }
  return doc.dump();
}

GbtModel gbt_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != "pinnflow-gbt-1") throw ParseError("unsupported GBT checkpoint format");
    GbtModel m;
    m.input_dim = doc.at("input_dim").get<int>();
    m.max_depth = doc.at("max_depth").get<int>();
    m.learning_rate = doc.at("learning_rate").get<double>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    const auto base = doc.at("base").get<std::vector<double>>();
    m.base = Eigen::Map<const Eigen::VectorXd>(base.data(), static_cast<Eigen::Index>(base.size()));
    for (const auto& trees : doc.at("ensembles")) {
      std::vector<RegressionTree> e;
      for (const auto& nodes : trees) {
        RegressionTree t;
        for (const auto& n : nodes) {
          RegressionTree::Node node{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                                    n.at(4).get<double>()};
          if (node.feature >= m.input_dim) throw ParseError("GBT split feature out of range");
          t.nodes.push_back(node);
        }
        const int count = static_cast<int>(t.nodes.size());
        if (count == 0) throw ParseError("empty GBT tree");
        for (const auto& node : t.nodes)
          if (node.feature >= 0 && (node.left <= 0 || node.left >= count || node.right <= 0 || node.right >= count))
            throw ParseError("GBT child index out of range");
        e.push_back(std::move(t));
      }
      m.ensembles.push_back(std::move(e));
    }
    if (m.ensembles.size() != base.size()) throw ParseError("GBT ensemble count");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("GBT checkpoint: ") + e.what());
  }
}

}  // namespace pinnflow
