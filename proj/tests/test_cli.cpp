#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "srsched/cli.hpp"

using namespace srsched;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("srsched_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> rows(const std::string& csv) {
  std::vector<std::vector<std::string>> out;
  std::stringstream ss(csv);
  std::string line;
  while (std::getline(ss, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    out.push_back(cells);
  }
  return out;
}

double summary_value(const std::string& csv, const std::string& chain, const std::string& metric) {
  for (const auto& r : rows(csv))
    if (r.size() == 3 && r[0] == chain && r[1] == metric) return std::stod(r[2]);
  FAIL("missing " << chain << " " << metric);
  return 0;
}

}  // namespace

TEST_CASE("solve prints the facetrack trigger period") {
  auto dir = scratch("solve");
  auto r = cli({"solve", "--spec", "facetrack", "--out", (dir / "s.json").string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("trigger_period_ms=86\n") != std::string::npos);
  auto doc = nlohmann::json::parse(slurp(dir / "s.json"));
  CHECK(doc.at("objective").get<double>() == doctest::Approx(172));

  r = cli({"solve", "--spec", "facetrack", "--cores", "2", "--out", (dir / "s.csv").string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("trigger_period_ms=60\n") != std::string::npos);
  CHECK(slurp(dir / "s.csv").rfind("subchain,placement,cores,fraction,budget_ms,period_ms\n", 0) == 0);
}

TEST_CASE("solve reports relaxation warnings") {
  auto dir = scratch("warn");
  auto r = cli({"solve", "--spec", "nav2d", "--out", (dir / "n.json").string()});
  CHECK(r.code == kExitOk);
  CHECK(r.err.find("'GP' from 1000 ms to 500 ms") != std::string::npos);
}

TEST_CASE("exit codes") {
  auto dir = scratch("codes");
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"solve"}).code == kExitUsage);
  CHECK(cli({"simulate", "--spec", "facetrack", "--duration", "-1"}).code == kExitUsage);
  CHECK(cli({"sweep", "--spec", "facetrack", "--axis", "speed=1,2"}).code == kExitUsage);
  CHECK(cli({"compare", "--spec", "facetrack", "--baselines", "adaptive,fastest"}).code == kExitUsage);
  CHECK(cli({"simulate", "--spec", "facetrack", "--static", "--adaptive"}).code == kExitUsage);

  std::ofstream(dir / "bad.json") << "{\"nodes\": [";
  auto r = cli({"solve", "--spec", (dir / "bad.json").string()});
  CHECK(r.code == kExitInvalid);
  CHECK(r.err.find("byte") != std::string::npos);
  CHECK(cli({"solve", "--spec", "no_such_preset"}).code == kExitInvalid);
  CHECK(cli({"solve", "--spec", "facetrack", "--set", "warp=3"}).code == kExitInvalid);

  auto doc = nlohmann::json::parse(render_spec(preset("facetrack")));
  doc["edges"].push_back({"planner", "camera"});
  std::ofstream(dir / "cyclic.json") << doc.dump();
  r = cli({"validate", "--spec", (dir / "cyclic.json").string()});
  CHECK(r.code == kExitInvalid);
  CHECK(r.out.find("cycle detected") != std::string::npos);
  CHECK(cli({"simulate", "--spec", (dir / "cyclic.json").string()}).code == kExitInvalid);

  doc = nlohmann::json::parse(render_spec(preset("facetrack")));
  doc["objective"]["chain_latency_bounds"] = {{{"chain", "track"}, {"upper_ms", 5}}};
  std::ofstream(dir / "tight.json") << doc.dump();
  r = cli({"solve", "--spec", (dir / "tight.json").string(), "--out", (dir / "t.json").string()});
  CHECK(r.code == kExitInfeasible);
  CHECK(cli({"validate", "--spec", "nav2d_yolo"}).code == kExitOk);
}

TEST_CASE("simulate writes reproducible csv files") {
  auto a = scratch("sim_a"), b = scratch("sim_b");
  std::vector<std::string> base = {"simulate", "--spec", "facetrack", "--static", "--duration", "30", "--seed", "5"};
  auto args = base;
  args.insert(args.end(), {"--out", a.string()});
  auto r = cli(args);
  REQUIRE(r.code == kExitOk);
  args = base;
  args.insert(args.end(), {"--out", b.string()});
  REQUIRE(cli(args).code == kExitOk);
  for (const char* f : {"trace.csv", "metrics.csv", "summary.csv"}) {
    CAPTURE(f);
    CHECK(!slurp(a / f).empty());
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(slurp(a / "trace.csv").rfind("time_us,event,entity,detail\n", 0) == 0);
  CHECK(summary_value(slurp(a / "summary.csv"), "track", "mean_rt_ms") == doctest::Approx(172).epsilon(0.02));
}

TEST_CASE("adaptive simulate resolves on its cadence") {
  auto dir = scratch("cadence");
  REQUIRE(cli({"simulate", "--spec", "nav2d_yolo", "--adaptive", "--duration", "45", "--out", dir.string()}).code ==
          kExitOk);
  std::set<long> s1, s2;
  for (const auto& r : rows(slurp(dir / "trace.csv"))) {
    if (r.size() < 2) continue;
    if (r[1] == "resolve_stage1") s1.insert(std::stol(r[0]) / 1000);
    if (r[1] == "resolve_stage2") s2.insert(std::stol(r[0]) / 1000);
  }
  CHECK(s1 == std::set<long>{2000, 22000, 42000});
  CHECK(s2 == std::set<long>{2000, 7000, 12000, 17000, 22000, 27000, 32000, 37000, 42000});
}

TEST_CASE("output directory from the environment") {
  auto dir = scratch("env");
  setenv("SRSCHED_OUT_DIR", dir.string().c_str(), 1);
  auto r = cli({"simulate", "--spec", "facetrack", "--static", "--duration", "5"});
  unsetenv("SRSCHED_OUT_DIR");
  CHECK(r.code == kExitOk);
  CHECK(fs::exists(dir / "summary.csv"));
}

TEST_CASE("sweep shape and degenerate axis") {
  auto dir = scratch("sweep");
  auto r = cli({"sweep", "--spec", "nav2d", "--static", "--duration", "6", "--axis", "cores=2,3", "--out",
                (dir / "c.csv").string()});
  REQUIRE(r.code == kExitOk);
  auto table = rows(slurp(dir / "c.csv"));
  CHECK(table.front() == std::vector<std::string>{"cores", "chain", "metric", "value"});
  CHECK(table.size() - 1 == 2 * preset("nav2d").chains.size() * summary_metrics().size());

  REQUIRE(cli({"sweep", "--spec", "facetrack", "--static", "--duration", "10", "--seed", "3", "--axis",
               "source_period_ms=70", "--out", (dir / "one.csv").string()})
              .code == kExitOk);
  REQUIRE(cli({"simulate", "--spec", "facetrack", "--static", "--duration", "10", "--seed", "3", "--set",
               "source_period_ms=70", "--out", (dir / "sim").string()})
              .code == kExitOk);
  std::string block;
  for (const auto& row : rows(slurp(dir / "one.csv"))) {
    if (row[0] != "70") continue;
    block += row[1] + "," + row[2] + "," + row[3] + "\n";
  }
  CHECK("chain,metric,value\n" + block == slurp(dir / "sim" / "summary.csv"));
}

TEST_CASE("sweep point seeds are seed xor index") {
  DagSpec s = preset("nav2d");
  SimConfig c;
  c.adaptive = false;
  c.duration_s = 5;
  c.seed = 6;
  std::string csv = sweep_csv(s, {"cores", {2, 2}}, c);
  c.seed = 7;
  auto second = summary_csv(s, measure(run_simulation(s, c), s));
  std::string block;
  bool skip = true;
  int seen = 0;
  for (const auto& row : rows(csv)) {
    if (skip) {
      skip = false;
      continue;
    }
    if (seen++ < static_cast<int>(s.chains.size() * summary_metrics().size())) continue;
    block += row[1] + "," + row[2] + "," + row[3] + "\n";
  }
  CHECK("chain,metric,value\n" + block == second);
}

TEST_CASE("compare writes a table with winners") {
  auto dir = scratch("compare");
  auto r = cli({"compare", "--spec", "nav2d_yolo", "--duration", "60", "--baselines", "adaptive,static_20s", "--out",
                (dir / "t.csv").string()});
  REQUIRE(r.code == kExitOk);
  auto table = rows(slurp(dir / "t.csv"));
  REQUIRE(table.size() == 4);
  CHECK(table[0].front() == "config");
  CHECK(table[0].back() == "violation_s");
  CHECK(table[3].front() == "winner");
  CHECK(std::stod(table[1].back()) <= std::stod(table[2].back()));
}

TEST_CASE("adaptive ties equal share on facetrack over a long run") {
  auto dir = scratch("tie");
  REQUIRE(cli({"compare", "--spec", "facetrack", "--duration", "300", "--baselines", "equal_share,adaptive", "--out",
               (dir / "t.csv").string()})
              .code == kExitOk);
  auto table = rows(slurp(dir / "t.csv"));
  CHECK(std::stod(table[2][1]) == doctest::Approx(std::stod(table[1][1])).epsilon(0.01));
}

TEST_CASE("preset export round-trips") {
  auto dir = scratch("preset");
  for (const auto& name : preset_names()) {
    auto path = dir / (name + ".json");
    REQUIRE(cli({"preset", name, "--out", path.string()}).code == kExitOk);
    CHECK(load_spec(path.string()) == preset(name));
  }
  auto r = cli({"preset", "--list"});
  CHECK(r.out.find("nav2d_yolo\n") != std::string::npos);
}
