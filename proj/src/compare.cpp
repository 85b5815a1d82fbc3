#include <cmath>
#include <limits>
#include <sstream>

#include "srsched/simulator.hpp"

namespace srsched {

std::vector<std::string> baseline_names() { return {"adaptive", "static_full", "static_20s", "equal_share", "no_steal"}; }

namespace {

// Tail estimates over every profiled execution up to `until_s`.
Estimates profile_estimates(const DagSpec& spec, const SimEventTrace& profile, double until_s) {
  Estimates out;
  for (const auto& [node, samples] : profile.costs) {
    NodeStats stats(samples.size());
    for (const auto& s : samples)
      if (s.t_s <= until_s) stats.record(s.ms, s.t_s);
    if (stats.size()) out[node] = stats.estimate(spec.constants.estimator_percentile, spec.constants.bootstrap_compute_ms);
  }
  return out;
}

}  // namespace

SimConfig baseline_config(const DagSpec& spec, const std::string& name, const SimConfig& base) {
  SimConfig c = base;
  c.static_schedule.reset();
  if (name == "adaptive" || name == "no_steal") {
    c.adaptive = true;
    c.stealing = name == "adaptive";
    return c;
  }
  c.adaptive = false;
  if (name == "equal_share") {
    Allocation alloc = solve_core_allocation(make_stage1_problem(spec, {}));
    c.static_schedule = equal_share_schedule(spec, alloc, {});
    return c;
  }
  if (name == "static_full" || name == "static_20s") {
    SimConfig profiling = base;
    profiling.adaptive = true;
    profiling.static_schedule.reset();
    SimEventTrace trace = run_simulation(spec, profiling);
    double until = name == "static_full" ? base.duration_s : spec.constants.stage1_period_s;
    c.static_schedule = solve_schedule(spec, profile_estimates(spec, trace, until));
    return c;
  }
  throw std::invalid_argument("unknown baseline '" + name + "'");
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "config";
  for (const auto& c : columns) os << ',' << c;
  os << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    os << rows[r];
    for (double v : values[r]) {
      os << ',';
      if (!std::isnan(v)) os << v;
    }
    os << '\n';
  }
  os << "winner";
  for (const auto& w : winners) os << ',' << w;
  os << '\n';
  return os.str();
}

ComparisonTable compare_schedules(const DagSpec& spec, const std::vector<std::pair<std::string, SimConfig>>& configs) {
  if (configs.size() < 2) throw std::invalid_argument("comparison needs at least two configurations");
  ComparisonTable t;
  for (const auto& c : spec.chains) {
    t.columns.push_back(c.id + ".mean_rt_ms");
    t.columns.push_back(c.id + ".p95_rt_ms");
    t.columns.push_back(c.id + ".max_latency_ms");
  }
  t.columns.push_back("violation_s");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [name, cfg] : configs) {
    EmpiricalMetrics m = measure(run_simulation(spec, cfg), spec);
    std::vector<double> row;
    for (const auto& c : spec.chains) {
      const auto& cs = m.chains.at(c.id);
      Summary rt = summarize(cs.response_ms), lat = summarize(cs.latency_ms);
      row.push_back(rt.count ? rt.mean : nan);
      row.push_back(rt.count ? rt.p95 : nan);
      row.push_back(lat.count ? lat.max : nan);
    }
    row.push_back(m.total_violation_s());
    t.rows.push_back(name);
    t.values.push_back(std::move(row));
  }
  for (std::size_t col = 0; col < t.columns.size(); ++col) {
    std::string winner;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      double v = t.values[r][col];
      if (!std::isnan(v) && v < best) {
        best = v;
        winner = t.rows[r];
      }
    }
    t.winners.push_back(winner);
  }
  return t;
}

}  // namespace srsched
