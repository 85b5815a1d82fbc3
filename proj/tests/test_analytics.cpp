#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "srsched/analytics.hpp"

using namespace srsched;

TEST_CASE("pipelined period") {
  CHECK(pipelined_period({25, 60, 1}, 1, 1) == 86.0);
  CHECK(pipelined_period({25, 60, 1}, 2, 1) == 60.0);
  CHECK(pipelined_period({10}, 1, 1) == 10.0);
  CHECK(pipelined_period({20, 20}, 2, 2) == 40.0);
  CHECK_THROWS_AS(pipelined_period({1}, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS(pipelined_period({1}, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(pipelined_period({0.0}, 1, 1), std::invalid_argument);
}

TEST_CASE("chain metrics, period-doubling form") {
  auto m = chain_metrics_stage2({10, 20});
  CHECK(m.latency == 50.0);
  CHECK(m.period == 20.0);
  CHECK(m.response_time == 70.0);
  m = chain_metrics_stage2({7});
  CHECK(m.latency == 7.0);
  CHECK(m.response_time == 14.0);
  m = chain_metrics_stage2({5, 5, 5});
  CHECK(m.latency == 25.0);
  CHECK(m.period == 5.0);
  CHECK(m.response_time == 30.0);
  CHECK_THROWS_AS(chain_metrics_stage2({}), std::invalid_argument);
}

TEST_CASE("chain metrics, execution-time form") {
  auto m = chain_metrics_stage1({{10, 10}, {20, 20}});
  CHECK(m.latency == 50.0);
  m = chain_metrics_stage1({{86, 86}});
  CHECK(m.latency == 86.0);
  CHECK(m.response_time == 172.0);
  m = chain_metrics_stage1({{10, 5}, {40, 5}});
  CHECK(m.latency == 50.0);
  CHECK(m.period == 40.0);
  CHECK(m.response_time == 90.0);
  CHECK_THROWS_AS(chain_metrics_stage1({}), std::invalid_argument);
}

TEST_CASE("objective") {
  ObjectiveSpec w;
  CHECK(objective({}, {}, w) == 0.0);
  w.chain_weights["c"] = {1.0, 1.0};
  CHECK(objective({{"c", {50, 20, 70}}}, {}, w) == 70.0);
  CHECK_THROWS_AS(objective({}, {}, w), std::invalid_argument);

  // Navigation weights against a hand-summed total.
  DagSpec nav = preset("nav2d");
  std::map<std::string, ChainMetrics> chains = {{"local", {10, 5, 15}},
                                                {"map_path", {400, 100, 500}},
                                                {"plan_path", {300, 100, 400}},
                                                {"loc_path", {60, 20, 80}}};
  std::map<std::string, double> periods = {{"GL", 20}};
  double expected = 1.0 * 10 + 1.0 * 5 + 0.005 * (400 + 100) + 0.005 * (300 + 100) + 0.005 * (60 + 20) + 0.5 * 20;
  CHECK(objective(chains, periods, nav.objective) == doctest::Approx(expected));
}

TEST_CASE("property: pipelined period bounds and single-core sum") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> cost(0.5, 50);
  std::uniform_int_distribution<int> len(1, 6), cores(1, 8);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> c(len(rng));
    for (auto& x : c) x = cost(rng);
    int k = cores(rng);
    std::uniform_int_distribution<int> qd(1, k);
    int q = qd(rng);
    double p = pipelined_period(c, k, q);
    double sum = 0;
    for (double x : c) {
      CHECK(p >= x);
      sum += x;
    }
    CHECK(p >= sum / (k / q) - 1e-9);
    CHECK(pipelined_period(c, 1, 1) == doctest::Approx(sum).epsilon(1e-12));
  }
}

TEST_CASE("property: monotonicity and response-time identity") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> per(1, 100);
  std::uniform_int_distribution<int> len(1, 5);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> p(len(rng));
    for (auto& x : p) x = per(rng);
    auto base = chain_metrics_stage2(p);
    CHECK(base.response_time == base.latency + base.period);
    std::vector<SubchainTiming> timings;
    for (double x : p) timings.push_back({x, x * 0.5});
    auto s1 = chain_metrics_stage1(timings);
    CHECK(s1.response_time == s1.latency + s1.period);
    std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
    auto q = p;
    q[pick(rng)] += per(rng);
    auto up = chain_metrics_stage2(q);
    CHECK(up.latency >= base.latency);
    CHECK(up.period >= base.period);
    CHECK(up.response_time >= base.response_time);
  }
}

TEST_CASE("property: worst-case latency soundness for two independently triggered subchains") {
  // Exhaustive integer timelines: producer triggered every p1 from phase a,
  // consumer every p2 from phase b, each finishing c_i after its trigger and
  // reading the newest finished producer output at trigger time. Only the
  // first consumption of each capture counts as a new input.
  for (int p1 = 1; p1 <= 6; ++p1)
    for (int p2 = 1; p2 <= 6; ++p2)
      for (int c1 = 1; c1 <= p1; ++c1)
        for (int c2 = 1; c2 <= p2; ++c2)
          for (int a = 0; a < p1; ++a)
            for (int b = 0; b < p2; ++b) {
              const double bound = chain_metrics_stage2({double(p1), double(p2)}).latency;
              int worst = 0, consumed = -1;
              for (int t2 = b; t2 < 200; t2 += p2) {
                int capture = -1;
                for (int t1 = a; t1 + c1 <= t2; t1 += p1) capture = t1;
                if (capture <= consumed) continue;
                consumed = capture;
                worst = std::max(worst, t2 + c2 - capture);
              }
              CHECK(worst <= bound);
            }
}
