#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "pinnflow/cli.hpp"
#include "pinnflow/io.hpp"
#include "pinnflow/grid.hpp"
#include "support.hpp"

using namespace pinnflow;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pinnflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string root() {
  static const std::string dir = [] {
    const std::string d = testing::tmp_dir("cli");
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

std::size_t lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help and usage errors") {
    CHECK(cli({"--help"}).code == 0);
    CHECK(cli({}).code == 2);
    CHECK(cli({"gen-data", "--profile", "ts7", "--out", root() + "/x"}).code == 2);
    CHECK(cli({"gen-data", "--profile", "ts1"}).code == 2);  // --out missing
    CHECK(cli({"train", "--data", root() + "/missing", "--out", root() + "/x"}).code == 2);
  }

  TEST_CASE("gen-data is reproducible") {
    const std::string a = root() + "/ts1a";
    const std::vector<std::string> args{"gen-data", "--profile", "ts1", "--seed", "1", "--out", a};
    const std::vector<std::string> files{"/dataset.csv", "/meta.json", "/manifest.json"};
    REQUIRE(cli(args).code == 0);
    std::vector<std::string> first;
    for (const auto& f : files) first.push_back(read_text_file(a + f));
    CHECK(lines(first[0]) == 169u);
    REQUIRE(cli(args).code == 0);
    for (std::size_t k = 0; k < files.size(); ++k) CHECK(read_text_file(a + files[k]) == first[k]);
    REQUIRE(cli({"gen-data", "--profile", "ts1", "--seed", "2", "--out", a}).code == 0);
    CHECK(read_text_file(a + "/dataset.csv") != first[0]);
  }

  TEST_CASE("train, evaluate and the checksum guard") {
    const std::string ts = root() + "/train_ts1", c2 = root() + "/train_c2";
    REQUIRE(cli({"gen-data", "--profile", "ts1", "--seed", "3", "--out", ts}).code == 0);
    REQUIRE(cli({"gen-data", "--profile", "c2", "--seed", "3", "--out", c2}).code == 0);

    CHECK(cli({"train", "--model", "gbt", "--loss", "phys-proposed", "--data", ts, "--out", root() + "/bad"}).code ==
          2);

    const std::string g1 = root() + "/gnn1", g2 = root() + "/gnn2", x = root() + "/gbt";
    for (const auto& out : {g1, g2})
      REQUIRE(cli({"train", "--model", "gnn", "--loss", "phys-proposed", "--data", ts, "--seed", "7", "--epochs", "3",
                   "--out", out})
                  .code == 0);
    // Only the manifest records the output path.
    CHECK(read_text_file(g1 + "/checkpoint.json") == read_text_file(g2 + "/checkpoint.json"));
    CHECK(read_text_file(g1 + "/history.csv") == read_text_file(g2 + "/history.csv"));
    CHECK(lines(read_text_file(g1 + "/history.csv")) == 4u);
    REQUIRE(cli({"train", "--model", "gbt", "--data", ts, "--trees", "20", "--out", x}).code == 0);

    const std::string ev = root() + "/eval";
    const Run r = cli({"evaluate", "--checkpoint", x + "/checkpoint.json", "--checkpoint", g1 + "/checkpoint.json",
                       "--test", ts, "--test", c2, "--trace", "--svg", "--day", "1", "--out", ev});
    REQUIRE(r.code == 0);
    CHECK(lines(read_text_file(ev + "/report.csv")) == 5u);
    CHECK(r.out.find("XGB") != std::string::npos);
    CHECK(r.out.find("GNNp") != std::string::npos);
    const std::string trace = read_text_file(ev + "/trace_c2_day1.csv");
    CHECK(trace.substr(0, trace.find('\n')) ==
          "step,true_V1,XGB_ts1_V1,GNNp_ts1_V1,true_V2,XGB_ts1_V2,GNNp_ts1_V2,true_V3,XGB_ts1_V3,GNNp_ts1_V3");
    CHECK(std::filesystem::exists(ev + "/trace_c2_day1.svg"));

    // A different feeder must not silently score these artefacts.
    const std::string other = root() + "/other.json";
    write_text_file(other, network_to_config(chain_network(3, 0.3, 0.1)));
    const Run mism =
        cli({"--network", other, "evaluate", "--checkpoint", x + "/checkpoint.json", "--test", c2, "--out", ev});
    CHECK(mism.code == 3);
    CHECK(mism.err.find("different network") != std::string::npos);

    // The shipped config is the built-in feeder.
    const std::string shipped = root() + "/default.json";
    write_text_file(shipped, network_to_config(default_network()));
    CHECK(cli({"--network", shipped, "evaluate", "--checkpoint", x + "/checkpoint.json", "--test", c2, "--out",
               root() + "/eval2"})
              .code == 0);
  }

  TEST_CASE("solve") {
    const std::string zero = root() + "/zero.csv", peak = root() + "/peak.csv";
    write_text_file(zero, "bus,p_kw\n1,0\n2,0\n3,0\n");
    write_text_file(peak, "bus,p_kw\n3,7.5\n1,7.5\n2,7.5\n");
    const Run z = cli({"solve", "--powers", zero});
    REQUIRE(z.code == 0);
    CHECK(z.out.find("3  1.0000000000  0.0000000000") != std::string::npos);

    REQUIRE(cli({"solve", "--powers", peak, "--out", root() + "/nr"}).code == 0);
    REQUIRE(cli({"solve", "--powers", peak, "--pf-method", "sweep", "--out", root() + "/sw"}).code == 0);
    const CsvTable nr = read_csv_table(root() + "/nr/solution.csv");
    const CsvTable sw = read_csv_table(root() + "/sw/solution.csv");
    CHECK((nr.values - sw.values).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(nr.values.col(1).maxCoeff() - 1.08) <= 1e-4);

    write_text_file(root() + "/dup.csv", "bus,p_kw\n1,0\n1,0\n3,0\n");
    CHECK(cli({"solve", "--powers", root() + "/dup.csv"}).code == 3);
    write_text_file(root() + "/huge.csv", "bus,p_kw\n1,-1200000\n2,0\n3,0\n");
    CHECK(cli({"solve", "--powers", root() + "/huge.csv"}).code == 4);
  }

  TEST_CASE("calibrate writes a loadable network") {
    const std::string out = root() + "/cal";
    const Run r = cli({"calibrate", "--out", out});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("peak voltage 1.08") != std::string::npos);
    CHECK(load_network_file(out + "/network.json").checksum() == default_network().checksum());
  }
}
