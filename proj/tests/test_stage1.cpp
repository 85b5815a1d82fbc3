#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <set>

#include "srsched/stage1.hpp"

using namespace srsched;

namespace {

Stage1Problem problem(std::vector<double> cost, int cores, std::vector<double> w3 = {}) {
  Stage1Problem p;
  for (std::size_t i = 0; i < cost.size(); ++i) {
    p.ids.push_back("S" + std::to_string(i + 1));
    p.cost.push_back(cost[i]);
    p.max_node.push_back(cost[i]);
    p.parallelizable.push_back(false);
    p.period_weight.push_back(w3.empty() ? 1.0 : w3[i]);
    p.period_bound.emplace_back();
  }
  p.cores = cores;
  return p;
}

Stage1Problem random_problem(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nd(1, 5), kd(1, 3);
  std::uniform_real_distribution<double> cd(1, 50), wd(0, 1);
  std::bernoulli_distribution coin(0.3);
  int n = nd(rng), k = kd(rng);
  if (n < k) k = n;
  Stage1Problem p;
  for (int i = 0; i < n; ++i) {
    int nodes = 1 + static_cast<int>(rng() % 3);
    double total = 0, mx = 0;
    for (int x = 0; x < nodes; ++x) {
      double c = cd(rng);
      total += c;
      mx = std::max(mx, c);
    }
    p.ids.push_back("S" + std::to_string(i));
    p.cost.push_back(total);
    p.max_node.push_back(mx);
    p.parallelizable.push_back(coin(rng));
    p.period_weight.push_back(wd(rng));
    p.period_bound.emplace_back();
  }
  for (int c = 0; c < 2; ++c) {
    Stage1Chain ch;
    ch.id = "c" + std::to_string(c);
    int len = 1 + static_cast<int>(rng() % n);
    for (int x = 0; x < len; ++x) ch.subchains.push_back(static_cast<int>(rng() % n));
    ch.weight = {wd(rng), wd(rng)};
    p.chains.push_back(ch);
  }
  p.cores = k;
  return p;
}

// Independent sampler: random set partition, random valid core mapping.
Matrix random_allocation(std::mt19937_64& rng, int n, int k) {
  while (true) {
    std::vector<int> block(n);
    int blocks = 0;
    for (int i = 0; i < n; ++i) {
      block[i] = static_cast<int>(rng() % (blocks + 1));
      blocks = std::max(blocks, block[i] + 1);
    }
    std::vector<int> size(blocks, 0);
    for (int b : block) ++size[b];
    std::vector<int> owner(k);
    for (auto& o : owner) o = static_cast<int>(rng() % blocks);
    std::vector<int> cores(blocks, 0);
    for (int o : owner) ++cores[o];
    bool ok = true;
    for (int b = 0; b < blocks; ++b) ok = ok && cores[b] >= 1 && (size[b] == 1 || cores[b] == 1);
    if (!ok) continue;
    Matrix a(n, std::vector<int>(k, 0));
    for (int j = 0; j < k; ++j)
      for (int i = 0; i < n; ++i)
        if (block[i] == owner[j]) a[i][j] = 1;
    return a;
  }
}

}  // namespace

TEST_CASE("checker examples") {
  SUBCASE("exclusive single cores") {
    auto r = check_allocation(problem({10, 10}, 2), {{1, 0}, {0, 1}});
    CHECK(r.feasible);
    CHECK(r.period == std::vector<double>{10, 10});
  }
  SUBCASE("two subchains on the same two cores") {
    auto r = check_allocation(problem({10, 10}, 2), {{1, 1}, {1, 1}});
    CHECK_FALSE(r.feasible);
    bool a1 = false;
    for (const auto& v : r.violations) a1 = a1 || v.rfind("exclusive_multicore", 0) == 0;
    CHECK(a1);
  }
  SUBCASE("shared pair plus exclusive") {
    auto r = check_allocation(problem({5, 5, 20}, 2), {{1, 0}, {1, 0}, {0, 1}});
    CHECK(r.feasible);
    CHECK(r.period == std::vector<double>{10, 10, 20});
    CHECK(r.execution_time == std::vector<double>{10, 10, 20});
  }
  SUBCASE("empty core and missing subchain") {
    auto r = check_allocation(problem({5, 5}, 2), {{1, 0}, {0, 0}});
    CHECK_FALSE(r.feasible);
    CHECK(r.violations.size() == 2);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(check_allocation(problem({5, 5}, 2), {{1, 0}}), std::invalid_argument);
  }
}

TEST_CASE("solver examples") {
  SUBCASE("two subchains, two cores") {
    auto a = solve_core_allocation(problem({10, 10}, 2));
    CHECK(a.check.objective == 20.0);
    CHECK(a.check.shared_cores == 0);
    CHECK(a.a == Matrix{{0, 1}, {1, 0}});
  }
  SUBCASE("three subchains, two cores") {
    auto a = solve_core_allocation(problem({5, 5, 20}, 2));
    CHECK(a.check.objective == 40.0);
    CHECK(a.a[0] == a.a[1]);
    CHECK(a.a[2] != a.a[0]);
  }
  SUBCASE("parallelizable subchain on two cores") {
    auto p = problem({80}, 2);
    p.max_node = {40};
    p.parallelizable = {true};
    auto a = solve_core_allocation(p);
    CHECK(a.a == Matrix{{1, 1}});
    CHECK(a.check.period[0] == 40.0);
  }
}

TEST_CASE("enumeration counts") {
  CHECK(enumerate_a1_configurations(2, 1).size() == 1);
  CHECK(enumerate_a1_configurations(2, 2).size() == 2);
  CHECK(enumerate_a1_configurations(3, 2).size() == 6);
  for (int n = 1; n <= 6; ++n)
    for (int k = 1; k <= 4; ++k)
      for (bool idle : {false, true}) {
        auto all = enumerate_a1_configurations(n, k, idle);
        CHECK(static_cast<double>(all.size()) == count_a1_configurations(n, k, idle));
        std::set<Matrix> unique(all.begin(), all.end());
        CHECK(unique.size() == all.size());
        Stage1Problem p = problem(std::vector<double>(n, 1.0), k);
        p.idle_sink = idle;
        for (const auto& m : all) CHECK(check_allocation(p, m).feasible);
      }
  CHECK_THROWS_AS(enumerate_a1_configurations(14, 7), TooLargeError);
}

TEST_CASE("bounds relax with warnings, then give up") {
  auto p = problem({10}, 1);
  p.period_bound[0].upper = 6;
  auto a = solve_core_allocation(p);
  CHECK(a.check.feasible);
  CHECK(a.warnings.size() == 1);
  CHECK(a.warnings[0].find("6 ms to 12 ms") != std::string::npos);

  p.period_bound[0].upper = 1;
  CHECK_THROWS_AS(solve_core_allocation(p), InfeasibleError);
}

TEST_CASE("lower period bounds raise tight periods") {
  auto p = problem({5, 5, 20}, 2);
  p.period_bound[2].lower = 50;
  auto r = check_allocation(p, {{1, 0}, {1, 0}, {0, 1}});
  CHECK(r.period[2] == 50.0);
  CHECK(r.execution_time[2] == 20.0);
}

TEST_CASE("property: solver output is feasible and optimal") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 60; ++t) {
    auto p = random_problem(rng);
    auto a = solve_core_allocation(p);
    auto chk = check_allocation(p, a.a);
    CHECK(chk.feasible);
    CHECK(chk.objective == a.check.objective);
    double best = std::numeric_limits<double>::infinity();
    enumerate_a1_configurations(static_cast<int>(p.size()), p.cores, false, [&](const Matrix& m) {
      auto r = check_allocation(p, m);
      if (r.feasible) best = std::min(best, r.objective);
    });
    CHECK(a.check.objective == best);
    for (int s = 0; s < 200; ++s) {
      auto r = check_allocation(p, random_allocation(rng, static_cast<int>(p.size()), p.cores));
      if (r.feasible) CHECK(a.check.objective <= r.objective + 1e-9);
    }
  }
}

TEST_CASE("property: relaxation never increases the violation count") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 40; ++t) {
    auto p = random_problem(rng);
    std::uniform_real_distribution<double> ub(1, 40);
    for (auto& b : p.period_bound) b.upper = ub(rng);
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (int round = 0; round < 4; ++round) {
      std::size_t least = std::numeric_limits<std::size_t>::max();
      for (const auto& m : enumerate_a1_configurations(static_cast<int>(p.size()), p.cores)) {
        auto r = check_allocation(p, m);
        least = std::min(least, r.violations.size());
      }
      CHECK(least <= prev);
      prev = least;
      for (auto& b : p.period_bound) b.upper *= p.soft_constraint_scale;
    }
  }
}

TEST_CASE("property: multi-core period matches pipelined period over divisors") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> cd(1, 30);
  for (int t = 0; t < 300; ++t) {
    int m = 2 + static_cast<int>(rng() % 5);
    std::vector<double> costs(1 + rng() % 4);
    for (auto& c : costs) c = cd(rng);
    double total = 0, mx = 0;
    for (double c : costs) {
      total += c;
      mx = std::max(mx, c);
    }
    auto p = problem({total}, m);
    p.max_node = {mx};
    p.parallelizable = {true};
    auto r = check_allocation(p, {std::vector<int>(m, 1)});
    double expect = std::numeric_limits<double>::infinity();
    for (int q = 1; q <= m; ++q) {
      if (m % q) continue;
      std::vector<double> scaled;
      for (double c : costs) scaled.push_back(c / q);
      expect = std::min(expect, pipelined_period(scaled, m, q));
    }
    CHECK(r.period[0] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("spec-derived problem") {
  DagSpec nav = preset("nav2d");
  auto p = make_stage1_problem(nav, {});
  CHECK(p.size() == 5);
  CHECK(p.cost[0] == 5.0);
  CHECK(p.period_bound[1].lower == doctest::Approx(20.0));
  auto obs = make_stage1_problem(nav, {}, {{"GL", 300.0}});
  CHECK(obs.period_bound[1].lower == 300.0);
  auto a = solve_core_allocation(p);
  CHECK(a.check.feasible);
}
