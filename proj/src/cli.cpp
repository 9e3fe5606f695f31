#include "pinnflow/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pinnflow/acpf.hpp"
#include "pinnflow/errors.hpp"
#include "pinnflow/eval.hpp"
#include "pinnflow/gbt.hpp"
#include "pinnflow/gnn.hpp"
#include "pinnflow/grid.hpp"
#include "pinnflow/hash.hpp"
#include "pinnflow/io.hpp"
#include "pinnflow/scenarios.hpp"

namespace pinnflow {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string network_path;
  std::string out_dir;
  std::uint64_t seed = 0;
};

Network resolve_network(const Common& c) {
  return c.network_path.empty() ? default_network() : load_network_file(c.network_path);
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

// No wall-clock fields: reruns must reproduce the manifest byte for byte.
void write_manifest(const std::string& dir, const std::string& command, const std::string& effective_config,
                    const Network& network, const std::map<std::string, std::uint64_t>& seeds,
                    const std::vector<std::string>& outputs) {
  json m;
  m["format"] = "pinnflow-manifest-1";
  m["command"] = command;
  m["version"] = kVersion;
  m["config_checksum"] = checksum_hex(fnv1a(effective_config));
  m["config"] = effective_config;
  m["network_checksum"] = checksum_hex(network.checksum());
  m["seeds"] = json::object();
  for (const auto& [k, v] : seeds) m["seeds"][k] = v;
  m["outputs"] = outputs;
  write_text_file(join(dir, "manifest.json"), m.dump(2) + "\n");
}

std::string model_label(const std::string& model, LossKind loss) {
  if (model == "gbt") return "XGB";
  switch (loss) {
    case LossKind::Mse: return "GNNmse";
    case LossKind::PhysicsBenchmark: return "GNNb";
    case LossKind::PhysicsProposed: return "GNNp";
  }
  return "GNN";
}

struct Checkpoint {
  std::string model;
  std::string label;
  std::string training_set;
  std::uint64_t network_checksum = 0;
  std::unique_ptr<GnnModel> gnn;
  std::unique_ptr<GbtModel> gbt;

  Eigen::MatrixXd predict(const Eigen::MatrixXd& x, const Network& network) const {
    return gnn ? gnn_predict(*gnn, x, network) : gbt_predict(*gbt, x);
  }
};

Checkpoint read_checkpoint(const std::string& path) {
  const std::string text = read_text_file(path);
  Checkpoint c;
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != "pinnflow-checkpoint-1") throw ParseError(path + ": not a checkpoint");
    c.model = doc.at("model").get<std::string>();
    c.label = doc.at("label").get<std::string>();
    c.training_set = doc.at("training_set").get<std::string>();
    c.network_checksum = parse_checksum_hex(doc.at("network_checksum").get<std::string>());
    const std::string params = doc.at("params").dump();
    if (c.model == "gnn")
      c.gnn = std::make_unique<GnnModel>(gnn_from_json(params));
    else if (c.model == "gbt")
      c.gbt = std::make_unique<GbtModel>(gbt_from_json(params));
    else
      throw ParseError(path + ": unknown model '" + c.model + "'");
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return c;
}

Eigen::VectorXd read_powers(const std::string& path, const Network& network, Eigen::VectorXd& q_out) {
  const CsvTable t = read_csv_table(path);
  auto column = [&](const std::string& name) -> int {
    for (std::size_t k = 0; k < t.header.size(); ++k)
      if (t.header[k] == name) return static_cast<int>(k);
    return -1;
  };
  const int cb = column("bus"), cp = column("p_kw"), cq = column("q_kvar");
  if (cb < 0 || cp < 0) throw ParseError(path + ": expected columns bus,p_kw[,q_kvar]");
  const int n = network.load_bus_count();
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  q_out = Eigen::VectorXd::Zero(n);
  std::vector<char> seen(n, 0);
  const double s_base = network.per_unit().s_base;
  for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
    const double b = t.values(r, cb);
    if (b != std::floor(b) || b < 1 || b > n) throw ValueError(path + ": bus id out of range (load buses are 1.." + std::to_string(n) + ")");
    const int k = static_cast<int>(b) - 1;
    if (seen[k]) throw ValueError(path + ": bus " + std::to_string(k + 1) + " listed twice");
    seen[k] = 1;
    p(k) = t.values(r, cp) * 1000.0 / s_base;
    if (cq >= 0) q_out(k) = t.values(r, cq) * 1000.0 / s_base;
  }
  for (int k = 0; k < n; ++k)
    if (!seen[k]) throw ValueError(path + ": bus " + std::to_string(k + 1) + " missing");
  return p;
}

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"pinnflow: AC power flow, physics-informed GNN training and benchmarking for LV feeders"};
  app.set_config("--config", "", "TOML/INI file with default flag values (flags take precedence)");
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  Common common;
  app.add_option("--network", common.network_path, "Feeder JSON (default: built-in calibrated 3-bus feeder)")
      ->check(CLI::ExistingFile);

  auto add_common = [&](CLI::App* sub, bool out_required) {
    sub->add_option("--seed", common.seed, "Master seed; every random stream derives from it");
    auto* o = sub->add_option("--out", common.out_dir, "Output directory");
    if (out_required) o->required();
  };

  // gen-data
  std::string profile = "ts1";
  int days = 0;
  std::vector<double> kwp_range, pen_range;
  std::string pf_method = "nr";
  double pf_tol = 1e-10;
  int pf_max_iter = 50;
  auto* gen = app.add_subcommand("gen-data", "Generate a scenario dataset (powers + solved states)");
  gen->add_option("--profile", profile, "Scenario preset")
      ->check(CLI::IsMember({"ts1", "ts2", "ts3", "c1", "c2", "custom"}));
  gen->add_option("--days", days, "Override the preset length in days")->check(CLI::PositiveNumber);
  gen->add_option("--kwp-range", kwp_range, "Override PV size range in kWp (min max)")->expected(2);
  gen->add_option("--penetration-range", pen_range, "Override PV penetration range (min max, fractions)")
      ->expected(2);
  add_common(gen, true);

  auto add_pf = [&](CLI::App* sub) {
    sub->add_option("--pf-method", pf_method, "Power-flow solver")->check(CLI::IsMember({"nr", "sweep"}));
    sub->add_option("--pf-tol", pf_tol, "Max nodal mismatch in p.u.")->check(CLI::PositiveNumber);
    sub->add_option("--pf-max-iter", pf_max_iter, "Iteration cap")->check(CLI::PositiveNumber);
  };
  add_pf(gen);

  // train
  std::string model = "gnn", loss_name, data_dir;
  TrainConfig tcfg;
  GbtConfig gcfg;
  int layers = 3, hidden = 16;
  auto* trn = app.add_subcommand("train", "Train a GNN or boosted-tree model on a dataset");
  trn->add_option("--model", model, "Model family")->check(CLI::IsMember({"gnn", "gbt"}));
  trn->add_option("--loss", loss_name, "Objective (gnn default phys-proposed, gbt only mse)")
      ->check(CLI::IsMember({"mse", "phys-benchmark", "phys-proposed"}));
  trn->add_option("--data", data_dir, "Dataset directory from gen-data")->required()->check(CLI::ExistingDirectory);
  trn->add_option("--epochs", tcfg.epochs, "GNN epochs");
  trn->add_option("--batch-size", tcfg.batch_size, "GNN mini-batch size");
  trn->add_option("--lr", tcfg.learning_rate, "GNN Adam learning rate");
  trn->add_option("--layers", layers, "GNN message-passing layers");
  trn->add_option("--hidden", hidden, "GNN hidden width");
  trn->add_option("--trees", gcfg.tree_count, "GBT trees per output");
  trn->add_option("--depth", gcfg.max_depth, "GBT max depth");
  trn->add_option("--gbt-lr", gcfg.learning_rate, "GBT shrinkage");
  add_common(trn, true);

  // evaluate
  std::vector<std::string> checkpoints, tests;
  int day = 0;
  bool trace = false, svg = false;
  EvalConfig ecfg;
  auto* evl = app.add_subcommand("evaluate", "Score checkpoints on test datasets");
  evl->add_option("--checkpoint", checkpoints, "Checkpoint file (repeatable)")->required();
  evl->add_option("--test", tests, "Test dataset directory (repeatable)")->required();
  evl->add_option("--v-max", ecfg.v_max, "Overvoltage threshold in p.u.");
  evl->add_option("--day", day, "Day index (0-based) for --trace/--svg");
  evl->add_flag("--trace", trace, "Write hourly true/predicted voltages for --day");
  evl->add_flag("--svg", svg, "Write an SVG chart of the feeder-end voltage for --day");
  add_common(evl, true);

  // solve
  std::string powers_path;
  auto* slv = app.add_subcommand("solve", "Solve one power flow from a powers file");
  slv->add_option("--powers", powers_path, "CSV with columns bus,p_kw[,q_kvar]; injection positive")
      ->required()
      ->check(CLI::ExistingFile);
  add_pf(slv);
  add_common(slv, false);

  // calibrate
  std::string template_path;
  double target_vmax = 1.08, peak_kw = 7.5;
  auto* cal = app.add_subcommand("calibrate", "Scale line impedances so peak PV gives a target max voltage");
  cal->add_option("--template", template_path, "Feeder JSON to scale (default: 3-bus chain, 0.2+j0.1 ohm lines)")
      ->check(CLI::ExistingFile);
  cal->add_option("--target-vmax", target_vmax, "Target max voltage in p.u.");
  cal->add_option("--peak-kw", peak_kw, "PV injection per load bus in kW");
  add_common(cal, true);

  // benchmark
  BenchmarkConfig bcfg;
  auto* bench = app.add_subcommand("benchmark", "Train XGB, GNNb and GNNp on ts1-ts3 and score on c1, c2");
  bench->add_option("--epochs", bcfg.gnn.epochs, "GNN epochs");
  add_common(bench, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::Usage);
  }

  try {
    const Network network = resolve_network(common);
    const std::string config =
        "network=\"" + common.network_path + "\"\n" + app.get_subcommands().front()->config_to_str(true, false);
    SolverOptions opts;
    opts.method = parse_solver_method(pf_method);
    opts.tolerance = pf_tol;
    opts.max_iterations = pf_max_iter;

    if (gen->parsed()) {
      ScenarioConfig sc = scenario_preset(profile, common.seed);
      if (days > 0) sc.length_days = days;
      if (!kwp_range.empty()) sc.kwp_range = {kwp_range[0], kwp_range[1]};
      if (!pen_range.empty()) sc.penetration_range = {pen_range[0], pen_range[1]};
      sc.validate();
      write_manifest(common.out_dir, "gen-data", config, network, {{"master", common.seed}, {"profile", sc.seed}},
                     {"dataset.csv", "meta.json"});
      const Dataset d = build_dataset(network, generate_profiles(network, sc), sc, opts);
      write_dataset(d, common.out_dir);
      const DatasetStats s = dataset_stats(d);
      out << "profile " << sc.name << ": " << d.rows() << " rows, V in [" << fixed(s.min, 4) << ", " << fixed(s.max, 4)
          << "] p.u., " << s.count_over_1_08 << " values >= 1.08 p.u.\n";
      return 0;
    }

    if (trn->parsed()) {
      LossKind loss = loss_name.empty() ? (model == "gnn" ? LossKind::PhysicsProposed : LossKind::Mse)
                                        : parse_loss_kind(loss_name);
      if (model == "gbt" && loss != LossKind::Mse)
        throw UsageError("--model gbt is supervised only; use --loss mse");
      const Dataset d = read_dataset(data_dir);
      if (d.network_checksum != network.checksum())
        throw Error("dataset " + data_dir + " was generated on a different network (checksum " +
                    checksum_hex(d.network_checksum) + ", expected " + checksum_hex(network.checksum()) + ")");
      json ck;
      ck["format"] = "pinnflow-checkpoint-1";
      ck["model"] = model;
      ck["loss"] = loss_kind_name(loss);
      ck["label"] = model_label(model, loss);
      ck["training_set"] = d.config.name;
      ck["network_checksum"] = checksum_hex(network.checksum());
      std::map<std::string, std::uint64_t> seeds{{"master", common.seed}};
      std::string history = "epoch,loss\n";
      if (model == "gnn") {
        tcfg.seed = sub_seed(common.seed, "train");
        tcfg.loss.kind = loss;
        seeds["init"] = sub_seed(common.seed, "init");
        seeds["train"] = tcfg.seed;
        write_manifest(common.out_dir, "train", config, network, seeds, {"checkpoint.json", "history.csv"});
        auto [m, h] = train(GnnModel::init(layers, hidden, seeds["init"]), d, network, tcfg);
        for (std::size_t e = 0; e < h.epoch_loss.size(); ++e)
          history += std::to_string(e + 1) + "," + format_double(h.epoch_loss[e]) + "\n";
        ck["params"] = json::parse(gnn_to_json(m));
        err << "trained in " << fixed(h.wall_seconds, 1) << " s, final loss " << h.epoch_loss.back() << "\n";
      } else {
        gcfg.seed = sub_seed(common.seed, "gbt");
        seeds["gbt"] = gcfg.seed;
        write_manifest(common.out_dir, "train", config, network, seeds, {"checkpoint.json", "history.csv"});
        const GbtModel m = fit_gbt(d, gcfg);
        const Eigen::MatrixXd pred = gbt_predict(m, d.x);
        history = "trees,train_mse\n" + std::to_string(m.tree_count()) + "," +
                  format_double((pred - d.y).array().square().mean()) + "\n";
        ck["params"] = json::parse(gbt_to_json(m));
      }
      ck["manifest"] = "manifest.json";
      write_text_file(join(common.out_dir, "checkpoint.json"), ck.dump() + "\n");
      write_text_file(join(common.out_dir, "history.csv"), history);
      out << "wrote " << join(common.out_dir, "checkpoint.json") << "\n";
      return 0;
    }

    if (evl->parsed()) {
      ecfg.validate();
      std::vector<Checkpoint> models;
      for (const auto& p : checkpoints) {
        models.push_back(read_checkpoint(p));
        if (models.back().network_checksum != network.checksum())
          throw Error("checkpoint " + p + " was trained on a different network");
      }
      std::vector<Dataset> sets;
      for (const auto& t : tests) {
        sets.push_back(read_dataset(t));
        if (sets.back().network_checksum != network.checksum())
          throw Error("test dataset " + t + " was generated on a different network");
      }
      std::vector<std::string> outputs{"report.txt", "report.csv"};
      for (const auto& s : sets) {
        const std::string stem = "trace_" + s.config.name + "_day" + std::to_string(day);
        if (trace) outputs.push_back(stem + ".csv");
        if (svg) outputs.push_back(stem + ".svg");
      }
      write_manifest(common.out_dir, "evaluate", config, network, {{"master", common.seed}}, outputs);

      EvalReport report;
      report.end_bus = network.load_bus_count();
      for (const auto& m : models)
        for (const auto& s : sets) {
          EvalRow row = evaluate_predictions(m.predict(s.x, network), s, ecfg);
          row.training_set = m.training_set;
          row.model = m.label;
          report.rows.push_back(std::move(row));
        }
      write_text_file(join(common.out_dir, "report.txt"), report.to_text());
      write_text_file(join(common.out_dir, "report.csv"), report.to_csv());
      for (const auto& s : sets) {
        if (!trace && !svg) break;
        std::vector<std::string> names;
        std::vector<Eigen::MatrixXd> preds;
        for (const auto& m : models) {
          names.push_back(m.label + "_" + m.training_set);
          preds.push_back(m.predict(s.x, network));
        }
        const std::string stem = join(common.out_dir, "trace_" + s.config.name + "_day" + std::to_string(day));
        if (trace) write_text_file(stem + ".csv", trace_csv(s, day, names, preds));
        if (svg) write_text_file(stem + ".svg", trace_svg(s, day, names, preds, ecfg.v_max));
      }
      out << report.to_text();
      return 0;
    }

    if (slv->parsed()) {
      Eigen::VectorXd q;
      const Eigen::VectorXd p = read_powers(powers_path, network, q);
      InjectionVector inj = InjectionVector::active(p);
      inj.q.tail(q.size()) = q;
      const VoltageState s = solve_power_flow(network, inj, opts);
      const double losses = total_joule_loss(network, s);
      std::ostringstream table;
      table << "bus,v_pu,theta_rad,v_volt\n";
      for (int i = 0; i < network.bus_count(); ++i)
        table << i << ',' << format_double(s.v(i)) << ',' << format_double(s.theta(i)) << ','
              << format_double(network.per_unit().voltage_from_pu(s.v(i))) << '\n';
      out << "bus      V [p.u.]     theta [rad]      V [V]\n";
      for (int i = 0; i < network.bus_count(); ++i)
        out << std::setw(3) << i << "  " << fixed(s.v(i), 10) << "  " << fixed(s.theta(i), 10) << "  "
            << fixed(network.per_unit().voltage_from_pu(s.v(i)), 4) << "\n";
      out << "slack P [p.u.] " << fixed(slack_injection(network, s), 10) << "\n";
      out << "line losses [p.u.] " << fixed(losses, 10) << " (" << fixed(network.per_unit().power_from_pu(losses), 3)
          << " W)\n";
      if (!common.out_dir.empty()) {
        write_manifest(common.out_dir, "solve", config, network, {}, {"solution.csv", "balance.csv"});
        write_text_file(join(common.out_dir, "solution.csv"), table.str());
        write_text_file(join(common.out_dir, "balance.csv"), "slack_p_pu,losses_pu\n" +
                                                                 format_double(slack_injection(network, s)) + "," +
                                                                 format_double(losses) + "\n");
      }
      return 0;
    }

    if (cal->parsed()) {
      const Network tmpl = template_path.empty() ? chain_network(3, 0.2, 0.1) : load_network_file(template_path);
      write_manifest(common.out_dir, "calibrate", config, tmpl, {}, {"network.json"});
      const Network calibrated = calibrate_lines(tmpl, target_vmax, peak_kw, opts);
      write_text_file(join(common.out_dir, "network.json"), network_to_config(calibrated));
      out << "peak voltage " << fixed(peak_voltage(calibrated, peak_kw, opts), 10) << " p.u.\n";
      for (const auto& l : calibrated.lines())
        out << "line " << l.from << "-" << l.to << ": R " << format_double(l.resistance) << " ohm, X "
            << format_double(l.reactance) << " ohm\n";
      return 0;
    }

    if (bench->parsed()) {
      bcfg.seed = common.seed;
      write_manifest(common.out_dir, "benchmark", config, network, {{"master", common.seed}},
                     {"report.txt", "report.csv"});
      const EvalReport report = run_benchmark(network, bcfg);
      write_text_file(join(common.out_dir, "report.txt"), report.to_text());
      write_text_file(join(common.out_dir, "report.csv"), report.to_csv());
      out << report.to_text();
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Data);
  }
  return static_cast<int>(ExitCode::Usage);
}

}  // namespace pinnflow
