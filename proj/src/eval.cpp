#include "pinnflow/eval.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <limits>
#include <sstream>

#include "pinnflow/errors.hpp"
#include "pinnflow/hash.hpp"
#include "pinnflow/io.hpp"

namespace pinnflow {

void EvalConfig::validate() const {
  if (!(v_max > 1.0)) throw ValueError("v_max must exceed 1 p.u.");
  if (!(v_base > 0.0)) throw ValueError("v_base must be positive");
  if (per_bus && *per_bus < 1) throw ValueError("per_bus must name a load bus (id >= 1)");
}

namespace {

void check_pair(const VoltageMatrix& pred, const VoltageMatrix& target) {
  if (pred.size() != target.size()) throw LengthMismatch(pred.size(), target.size());
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw DimensionMismatch("prediction and target shapes differ");
}

// Columns selected by the per-bus filter.
std::pair<Eigen::Index, Eigen::Index> column_span(const VoltageMatrix& m, const EvalConfig& cfg) {
  if (!cfg.per_bus) return {0, m.cols()};
  const Eigen::Index c = *cfg.per_bus - 1;
  if (c >= m.cols()) throw ValueError("per_bus " + std::to_string(*cfg.per_bus) + " out of range");
  return {c, 1};
}

std::string percent(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * x);
  return buf;
}

}  // namespace

double rmse(const VoltageMatrix& pred, const VoltageMatrix& target, const EvalConfig& cfg) {
  cfg.validate();
  check_pair(pred, target);
  const auto [c0, nc] = column_span(pred, cfg);
  if (pred.rows() == 0 || nc == 0) throw EmptyDataset("rmse of an empty sequence");
  const auto diff = (pred.middleCols(c0, nc) - target.middleCols(c0, nc)).array();
  return cfg.v_base * std::sqrt(diff.square().mean());
}

double pcc(const VoltageMatrix& pred, const VoltageMatrix& target) {
  check_pair(pred, target);
  if (pred.size() < 2) throw EmptyDataset("pcc needs at least two pairs");
  const Eigen::ArrayXd a = pred.reshaped().array() - pred.mean();
  const Eigen::ArrayXd b = target.reshaped().array() - target.mean();
  const double saa = a.square().sum(), sbb = b.square().sum();
  if (saa == 0.0 || sbb == 0.0) throw ZeroVariance();
  return (a * b).sum() / std::sqrt(saa * sbb);
}

std::string OvaResult::render() const {
  const std::string counts = "(" + std::to_string(hits) + "/" + std::to_string(total) + ")";
  return (ratio ? percent(*ratio) : std::string("nan")) + " " + counts;
}

OvaResult ova(const VoltageMatrix& pred, const VoltageMatrix& target, const EvalConfig& cfg) {
  cfg.validate();
  check_pair(pred, target);
  const auto [c0, nc] = column_span(pred, cfg);
  OvaResult r;
  for (Eigen::Index j = c0; j < c0 + nc; ++j)
    for (Eigen::Index i = 0; i < pred.rows(); ++i)
      if (target(i, j) >= cfg.v_max) {
        ++r.total;
        if (pred(i, j) >= cfg.v_max) ++r.hits;
      }
  if (r.total > 0) r.ratio = static_cast<double>(r.hits) / static_cast<double>(r.total);
  return r;
}

double fpr(const VoltageMatrix& pred, const VoltageMatrix& target, const EvalConfig& cfg) {
  cfg.validate();
  check_pair(pred, target);
  const auto [c0, nc] = column_span(pred, cfg);
  if (pred.rows() == 0 || nc == 0) throw EmptyDataset("fpr of an empty sequence");
  const auto p = pred.middleCols(c0, nc).array();
  const auto t = target.middleCols(c0, nc).array();
  const auto alarms = ((t < cfg.v_max) && (p >= cfg.v_max)).count();
  return static_cast<double>(alarms) / static_cast<double>(p.size());
}

EvalRow evaluate_predictions(const Eigen::MatrixXd& pred, const Dataset& test, const EvalConfig& cfg) {
  const Eigen::Index n = test.load_buses();
  if (pred.rows() != test.rows() || pred.cols() != 2 * n)
    throw DimensionMismatch("predictions do not match the test dataset layout");
  const auto pv = pred.leftCols(n);
  const auto tv = test.y.leftCols(n);
  EvalRow row;
  row.test_case = test.config.name;
  row.rmse_volt = rmse(pv, tv, cfg);
  try {
    row.pcc = pcc(pv, tv);
  } catch (const ZeroVariance&) {
    row.pcc = std::numeric_limits<double>::quiet_NaN();
  }
  row.ova = ova(pv, tv, cfg);
  EvalConfig end = cfg;
  end.per_bus = static_cast<int>(n);
  row.ova_end_bus = ova(pv, tv, end);
  row.fpr = fpr(pv, tv, cfg);
  row.theta_rmse = std::sqrt((pred.rightCols(n) - test.y.rightCols(n)).array().square().mean());
  return row;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  char buf[256];
  const std::string end = "OVA bus " + std::to_string(end_bus) + " [%]";
  std::snprintf(buf, sizeof buf, "%-6s %-5s %-5s %9s %8s %-18s %-18s %8s\n", "train", "case", "model", "RMSE [V]",
                "PCC [%]", "OVA [%]", end.c_str(), "FPR [%]");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-6s %-5s %-5s %9.2f %8s %-18s %-18s %8s\n", r.training_set.c_str(),
                  r.test_case.c_str(), r.model.c_str(), r.rmse_volt,
                  std::isnan(r.pcc) ? "nan" : percent(r.pcc).c_str(), r.ova.render().c_str(),
                  r.ova_end_bus.render().c_str(), percent(r.fpr).c_str());
    out << buf;
  }
  return out.str();
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "training_set,test_case,model,rmse_volt,pcc,ova,ova_hits,ova_total,ova_end_bus,ova_end_bus_hits,"
         "ova_end_bus_total,fpr,theta_rmse_rad\n";
  auto opt = [](const std::optional<double>& x) { return x ? format_double(*x) : std::string("nan"); };
  for (const auto& r : rows) {
    out << r.training_set << ',' << r.test_case << ',' << r.model << ',' << format_double(r.rmse_volt) << ','
        << (std::isnan(r.pcc) ? std::string("nan") : format_double(r.pcc)) << ',' << opt(r.ova.ratio) << ','
        << r.ova.hits << ',' << r.ova.total << ',' << opt(r.ova_end_bus.ratio) << ',' << r.ova_end_bus.hits << ','
        << r.ova_end_bus.total << ',' << format_double(r.fpr) << ',' << format_double(r.theta_rmse) << '\n';
  }
  return out.str();
}

namespace {

Eigen::Index day_start(const Dataset& test, int day) {
  const int per_day = test.config.steps_per_day;
  if (day < 0 || static_cast<Eigen::Index>(day + 1) * per_day > test.rows())
    throw ValueError("day " + std::to_string(day) + " outside the test set");
  return static_cast<Eigen::Index>(day) * per_day;
}

void check_traces(const Dataset& test, const std::vector<std::string>& names,
                  const std::vector<Eigen::MatrixXd>& predictions) {
  if (names.size() != predictions.size()) throw LengthMismatch(names.size(), predictions.size());
  for (const auto& p : predictions)
    if (p.rows() != test.rows() || p.cols() != test.y.cols())
      throw DimensionMismatch("trace predictions do not match the test dataset layout");
}

}  // namespace

std::string trace_csv(const Dataset& test, int day, const std::vector<std::string>& names,
                      const std::vector<Eigen::MatrixXd>& predictions) {
  check_traces(test, names, predictions);
  const Eigen::Index t0 = day_start(test, day);
  const int n = test.load_buses();
  std::ostringstream out;
  out << "step";
  for (int b = 1; b <= n; ++b) {
    out << ",true_V" << b;
    for (const auto& name : names) out << ',' << name << "_V" << b;
  }
  out << '\n';
  for (int h = 0; h < test.config.steps_per_day; ++h) {
    out << h;
    for (int b = 0; b < n; ++b) {
      out << ',' << format_double(test.y(t0 + h, b));
      for (const auto& p : predictions) out << ',' << format_double(p(t0 + h, b));
    }
    out << '\n';
  }
  return out.str();
}

std::string trace_svg(const Dataset& test, int day, const std::vector<std::string>& names,
                      const std::vector<Eigen::MatrixXd>& predictions, double v_max) {
  check_traces(test, names, predictions);
  const Eigen::Index t0 = day_start(test, day);
  const int steps = test.config.steps_per_day;
  const int col = test.load_buses() - 1;  // feeder end

  std::vector<Eigen::VectorXd> series{test.y.col(col).segment(t0, steps)};
  for (const auto& p : predictions) series.push_back(p.col(col).segment(t0, steps));
  double lo = v_max, hi = v_max;
  for (const auto& s : series) {
    lo = std::min(lo, s.minCoeff());
    hi = std::max(hi, s.maxCoeff());
  }
  const double pad = 0.05 * (hi - lo) + 1e-6;
  lo -= pad;
  hi += pad;

  const double w = 640, h = 360, m = 40;
  auto px = [&](int k) { return m + (w - 2 * m) * k / std::max(steps - 1, 1); };
  auto py = [&](double v) { return h - m - (h - 2 * m) * (v - lo) / (hi - lo); };
  static const char* colors[] = {"#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd"};

  std::ostringstream out;
  char buf[128];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\">\n";
  std::snprintf(buf, sizeof buf, "<line x1=\"%g\" y1=\"%.3f\" x2=\"%g\" y2=\"%.3f\" stroke=\"#888\" stroke-dasharray=\"4\"/>\n",
                m, py(v_max), w - m, py(v_max));
  out << buf;
  for (std::size_t s = 0; s < series.size(); ++s) {
    out << "<polyline fill=\"none\" stroke=\"" << colors[s % 5] << "\" points=\"";
    for (int k = 0; k < steps; ++k) {
      std::snprintf(buf, sizeof buf, "%s%.3f,%.3f", k ? " " : "", px(k), py(series[s](k)));
      out << buf;
    }
    out << "\"/>\n";
    const std::string label = s == 0 ? "true" : names[s - 1];
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" fill=\"%s\" font-size=\"12\">", m + 90.0 * s, m - 15.0,
                  colors[s % 5]);
    out << buf << label << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

EvalReport run_benchmark(const Network& network, const BenchmarkConfig& cfg) {
  cfg.eval.validate();
  EvalReport report;
  report.end_bus = network.bus_count() - 1;

  auto make = [&](const std::string& profile) {
    const ScenarioConfig sc = scenario_preset(profile, cfg.seed);
    return build_dataset(network, generate_profiles(network, sc), sc);
  };
  std::vector<Dataset> tests;
  for (const auto& c : cfg.test_cases) tests.push_back(make(c));

  for (const auto& set : cfg.training_sets) {
    const Dataset train_set = make(set);
    for (const std::string model : {"XGB", "GNNb", "GNNp"}) {
      std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> predict;
      try {
        if (model == "XGB") {
          GbtConfig g = cfg.gbt;
          g.seed = sub_seed(cfg.seed, "gbt:" + set);
          auto fitted = std::make_shared<GbtModel>(fit_gbt(train_set, g));
          predict = [fitted](const Eigen::MatrixXd& x) { return gbt_predict(*fitted, x); };
        } else {
          TrainConfig t = cfg.gnn;
          t.seed = sub_seed(cfg.seed, "gnn:" + model + ":" + set);
          t.loss.kind = model == "GNNb" ? LossKind::PhysicsBenchmark : LossKind::PhysicsProposed;
          auto init = GnnModel::init(cfg.layer_count, cfg.hidden_dim, t.seed);
          auto fitted = std::make_shared<GnnModel>(train(std::move(init), train_set, network, t).first);
          predict = [fitted, &network](const Eigen::MatrixXd& x) { return gnn_predict(*fitted, x, network); };
        }
        for (const auto& test : tests) {
          EvalRow row = evaluate_predictions(predict(test.x), test, cfg.eval);
          row.training_set = set;
          row.model = model;
          report.rows.push_back(std::move(row));
        }
      } catch (const Error& e) {
        throw Error(model + " on " + set + ": " + e.what(), e.code());
      }
    }
  }
  return report;
}

}  // namespace pinnflow
