#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "srsched/simulator.hpp"

using namespace srsched;

namespace {

NodeSpec compute(const std::string& id, ComputeModel m) {
  NodeSpec n;
  n.id = id;
  n.compute_model = std::move(m);
  return n;
}

// Independent single-node subchains, each its own chain, on one core.
DagSpec singles(const std::vector<std::pair<std::string, ComputeModel>>& nodes) {
  DagSpec s;
  for (const auto& [id, m] : nodes) {
    s.nodes.push_back(compute(id, m));
    s.subchains.push_back({"S" + id, {id}});
    s.chains.push_back({"c" + id, {"S" + id}});
    s.objective.subchain_weights["S" + id] = 1.0;
    s.objective.priority.push_back("S" + id);
  }
  s.constants.slack_fraction = 0.0;
  s.constants.switch_overhead_ms = 0.0;
  return s;
}

// Both subchains shared on core 0 with the given reciprocals.
GlobalSchedule shared_pair(const DagSpec& s, int r1, int r2) {
  Allocation alloc;
  alloc.a = {{1}, {1}};
  GlobalSchedule g = equal_share_schedule(s, alloc, {});
  REQUIRE(g.shared.size() == 1);
  for (auto& e : g.shared[0].entries) {
    int r = e.subchain == s.subchains[0].id ? r1 : r2;
    e.reciprocal = r;
    e.fraction = 1.0 / r;
    e.budget_ms = e.cost_ms / r;
  }
  refresh_metrics(s, g);
  return g;
}

std::vector<std::int64_t> times_of(const SimEventTrace& t, EventKind kind, const std::string& entity) {
  std::vector<std::int64_t> out;
  for (const auto& e : t.events)
    if (e.kind == kind && e.entity == entity) out.push_back(e.t_us);
  return out;
}

SimConfig deterministic(double duration) {
  SimConfig c;
  c.adaptive = false;
  c.deterministic_costs = true;
  c.duration_s = duration;
  return c;
}

}  // namespace

TEST_CASE("facetrack deterministic response time") {
  DagSpec s = preset("facetrack");
  SimConfig c = deterministic(10);
  auto m = measure(run_simulation(s, c), s);
  CHECK(summarize(m.chains.at("track").response_ms).mean == doctest::Approx(172).epsilon(0.02));
  s.cores = 2;
  m = measure(run_simulation(s, c), s);
  CHECK(summarize(m.chains.at("track").response_ms).mean == doctest::Approx(146).epsilon(0.02));
}

TEST_CASE("shared pair follows its cyclic executive") {
  DagSpec s = singles({{"A", ComputeModel::constant_ms(10)}, {"B", ComputeModel::constant_ms(30)}});
  SimConfig c = deterministic(2);
  c.warmup_s = 0;
  c.static_schedule = shared_pair(s, 1, 2);
  CHECK(c.static_schedule->shared[0].cycle_ms == doctest::Approx(25));
  auto t = run_simulation(s, c);

  // A owns [0, 10) of every 25 ms cycle; B needs two of its 15 ms windows.
  auto a = times_of(t, EventKind::output, "SA");
  auto b = times_of(t, EventKind::output, "SB");
  REQUIRE(a.size() > 10);
  REQUIRE(b.size() > 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(a[i] == 10000 + 25000 * static_cast<std::int64_t>(i));
  for (std::size_t i = 0; i < 10; ++i) CHECK(b[i] == 50000 + 50000 * static_cast<std::int64_t>(i));

  auto m = measure(t, s);
  for (double g : m.subchain_period_ms.at("SA")) CHECK(g == doctest::Approx(25));
  for (double g : m.subchain_period_ms.at("SB")) CHECK(g == doctest::Approx(50));
}

TEST_CASE("overhead and slack stretch the cycle") {
  DagSpec s = singles({{"A", ComputeModel::constant_ms(10)}, {"B", ComputeModel::constant_ms(30)}});
  s.constants.slack_fraction = 0.1;
  s.constants.switch_overhead_ms = 0.5;
  SimConfig c = deterministic(3);
  c.static_schedule = shared_pair(s, 1, 2);
  // 25 ms of budgets, 2.5 ms slack, two 0.5 ms switches.
  CHECK(c.static_schedule->shared[0].cycle_ms == doctest::Approx(28.5));
  auto m = measure(run_simulation(s, c), s);
  for (double g : m.subchain_period_ms.at("SA")) CHECK(g == doctest::Approx(28.5).epsilon(1e-3));
  for (double g : m.subchain_period_ms.at("SB")) CHECK(g == doctest::Approx(57).epsilon(1e-3));
}

TEST_CASE("overdue stealer takes the next lower-priority slot") {
  ComputeModel h;
  h.kind = ComputeModel::Kind::spike;
  h.spike_cost_ms = 50;
  h.spike_times_s = {0.995, 1.995};
  h.parts.push_back(ComputeModel::constant_ms(10));
  DagSpec s = singles({{"H", h}, {"L", ComputeModel::constant_ms(10)}});
  SimConfig c;
  c.adaptive = false;
  c.duration_s = 3;
  c.static_schedule = shared_pair(s, 1, 1);

  // Cycle is 20 ms, H in [0, 10), L in [10, 20). The 50 ms job starting at
  // 1000 ms follows an output at 990 ms. At L's slot at 1010 the gap is
  // exactly one period, so no steal. At 1030 and 1050 H is still overdue and
  // takes L's window, finishing at 1060.
  auto t = run_simulation(s, c);
  std::vector<std::int64_t> steals;
  for (const auto& e : t.events)
    if (e.kind == EventKind::steal) {
      CHECK(e.entity == "SH");
      CHECK(e.detail == "slot=SL");
      steals.push_back(e.t_us);
    }
  CHECK(steals == std::vector<std::int64_t>{1030000, 1050000, 2030000, 2050000});
  auto h_out = times_of(t, EventKind::output, "SH");
  CHECK(std::count(h_out.begin(), h_out.end(), 1060000) == 1);

  c.stealing = false;
  auto quiet = run_simulation(s, c);
  for (const auto& e : quiet.events) CHECK(e.kind != EventKind::steal);
  // Without the stolen window the spiked job needs five H slots.
  auto q_out = times_of(quiet, EventKind::output, "SH");
  CHECK(std::count(q_out.begin(), q_out.end(), 1090000) == 1);
}

TEST_CASE("overwritten inputs are excluded from response time") {
  DagSpec s = singles({{"X", ComputeModel::constant_ms(33)}});
  SimConfig c = deterministic(1);
  c.warmup_s = 0;
  c.trigger_period_ms["SX"] = 20;
  auto t = run_simulation(s, c);

  // Triggers every 20 ms; a busy node keeps only the newest waiting input.
  auto drops = times_of(t, EventKind::drop, "SX");
  REQUIRE(drops.size() >= 4);
  auto m = measure(t, s);
  const auto& cs = m.chains.at("cX");
  REQUIRE(cs.response_ms.size() >= 6);
  std::vector<double> rt(cs.response_ms.begin(), cs.response_ms.begin() + 6);
  std::vector<double> lat(cs.latency_ms.begin(), cs.latency_ms.begin() + 6);
  CHECK(rt == std::vector<double>{66, 79, 72, 85, 78, 71});
  CHECK(lat == std::vector<double>{46, 39, 52, 45, 38, 51});
}

TEST_CASE("same seed gives identical traces") {
  for (const std::string name : {"facetrack", "nav2d", "nav2d_yolo"}) {
    CAPTURE(name);
    DagSpec s = preset(name);
    SimConfig c;
    c.duration_s = 25;
    c.seed = 7;
    auto a = run_simulation(s, c), b = run_simulation(s, c);
    CHECK(a.to_csv() == b.to_csv());
    CHECK(measure(a, s).to_csv() == measure(b, s).to_csv());
    c.seed = 8;
    if (name != "facetrack") CHECK(run_simulation(s, c).to_csv() != a.to_csv());
  }
}

TEST_CASE("property: every static shared subchain keeps producing") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> cost(1, 40), rec(1, 4);
  for (int round = 0; round < 20; ++round) {
    DagSpec s = singles({{"A", ComputeModel::constant_ms(cost(rng))},
                         {"B", ComputeModel::constant_ms(cost(rng))}});
    s.constants.slack_fraction = 0.05;
    s.constants.switch_overhead_ms = 0.12;
    SimConfig c;
    c.adaptive = false;
    c.stealing = false;
    c.duration_s = 6;
    c.static_schedule = shared_pair(s, rec(rng), rec(rng));
    auto t = run_simulation(s, c);
    const double cycle = c.static_schedule->shared[0].cycle_ms;
    const std::int64_t window = 1000000;
    for (const auto& e : c.static_schedule->shared[0].entries) {
      auto outs = times_of(t, EventKind::output, e.subchain);
      auto need = static_cast<long>(std::floor(window / 1000.0 * e.fraction / cycle)) - 1;
      for (std::int64_t from = 0; from + window <= 6000000; from += 250000) {
        auto n = std::count_if(outs.begin(), outs.end(), [&](auto x) { return x >= from && x < from + window; });
        CHECK(n >= need);
      }
    }
  }
}

TEST_CASE("lineage tokens are source captures") {
  DagSpec s = preset("nav2d_yolo");
  SimConfig c;
  c.duration_s = 30;
  auto t = run_simulation(s, c);
  std::map<std::string, std::set<std::int64_t>> triggers;
  for (const auto& e : t.events)
    if (e.kind == EventKind::trigger) triggers[e.entity].insert(e.t_us);
  std::size_t checked = 0;
  for (const auto& e : t.events) {
    if (e.kind != EventKind::output) continue;
    for (const auto& [chain, token] : e.lineage) {
      const auto& source = s.chains.at(chain).subchain_ids.front();
      CHECK(triggers[source].count(token) == 1);
      CHECK(token <= e.t_us);
      ++checked;
    }
  }
  CHECK(checked > 1000);

  auto m = measure(t, s);
  for (const auto& [id, cs] : m.chains) {
    REQUIRE(cs.response_ms.size() == cs.latency_ms.size());
    for (std::size_t i = 0; i < cs.response_ms.size(); ++i) CHECK(cs.response_ms[i] >= cs.latency_ms[i]);
  }
}

TEST_CASE("window shorter than warmup has no samples") {
  DagSpec s = preset("nav2d");
  SimConfig c;
  c.duration_s = 1.5;
  auto m = measure(run_simulation(s, c), s);
  CHECK(m.window_s == 0);
  for (const auto& [id, cs] : m.chains) CHECK(cs.response_ms.empty());
  CHECK(m.total_violation_s() == 0);
}

TEST_CASE("violation seconds") {
  // X outputs every 33 ms against an upper period bound of 20 ms.
  DagSpec s = singles({{"X", ComputeModel::constant_ms(33)}});
  s.objective.node_period_bounds["X"] = {0.0, 20.0};
  SimConfig c = deterministic(2.002);
  c.warmup_s = 1.001;
  auto m = measure(run_simulation(s, c), s);
  // 13 of every 33 ms are past the bound.
  CHECK(m.violation_s.at("node:X.period") == doctest::Approx(1.001 * 13.0 / 33.0).epsilon(0.02));
}

TEST_CASE("priority chain on nav2d_yolo") { CHECK(priority_chain(preset("nav2d_yolo")) == "loc_path"); }

TEST_CASE("comparing identical configurations") {
  DagSpec s = preset("facetrack");
  SimConfig c;
  c.duration_s = 8;
  auto t = compare_schedules(s, {{"a", c}, {"b", c}});
  REQUIRE(t.values.size() == 2);
  CHECK(t.values[0] == t.values[1]);
  for (const auto& w : t.winners) CHECK(w == "a");
  CHECK(t.columns.back() == "violation_s");
  CHECK_THROWS_AS(compare_schedules(s, {{"a", c}}), std::invalid_argument);
  CHECK_THROWS_AS(baseline_config(s, "nope", c), std::invalid_argument);
}

TEST_CASE("baselines") {
  DagSpec s = preset("nav2d");
  SimConfig c;
  c.duration_s = 25;
  CHECK(baseline_names().size() == 5);
  auto eq = baseline_config(s, "equal_share", c);
  REQUIRE(eq.static_schedule);
  for (const auto& core : eq.static_schedule->shared)
    for (const auto& e : core.entries)
      if (!e.streaming) CHECK(e.fraction == 1.0);
  CHECK_FALSE(baseline_config(s, "no_steal", c).stealing);
  CHECK(baseline_config(s, "static_20s", c).static_schedule.has_value());
}
