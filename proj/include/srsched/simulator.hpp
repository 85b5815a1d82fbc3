#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "srsched/estimator.hpp"
#include "srsched/stage2.hpp"

namespace srsched {

// Internal consistency failure inside the simulator (lineage gap, broken
// cycle accounting). Never expected on valid input.
class SimInvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimConfig {
  double duration_s = 30.0;
  std::uint64_t seed = 1;
  bool adaptive = true;
  bool stealing = true;
  std::optional<GlobalSchedule> static_schedule;  // solved from nominal costs when absent
  double warmup_s = 2.0;
  bool deterministic_costs = false;  // every execution costs the node's nominal value
  std::map<std::string, double> trigger_period_ms;  // per-subchain override for exclusive subchains
};

enum class EventKind { trigger, start, preempt, resume, output, drop, steal, resolve_stage1, resolve_stage2, violation };

std::string to_string(EventKind kind);

struct SimEvent {
  std::int64_t t_us = 0;
  EventKind kind = EventKind::trigger;
  std::string entity;
  std::string detail;
  // Outputs only: (chain index, capture time) for every chain the output carries.
  std::vector<std::pair<int, std::int64_t>> lineage;
};

struct CostSample {
  double t_s;
  double ms;
};

struct SimEventTrace {
  std::vector<std::string> chains;  // lineage chain indices
  std::vector<SimEvent> events;
  double duration_s = 0.0;
  double warmup_s = 0.0;
  std::vector<std::string> warnings;
  std::map<std::string, std::vector<CostSample>> costs;  // per node, in execution order

  // time_us,event,entity,detail
  std::string to_csv() const;
};

SimEventTrace run_simulation(const DagSpec& spec, const SimConfig& config);

struct Summary {
  std::size_t count = 0;
  double mean = 0.0, p95 = 0.0, max = 0.0;
};

Summary summarize(const std::vector<double>& values);

struct ChainSamples {
  std::vector<double> response_ms, latency_ms, period_ms;
};

struct EmpiricalMetrics {
  double window_s = 0.0;
  std::map<std::string, ChainSamples> chains;
  std::map<std::string, std::vector<double>> subchain_period_ms;
  std::map<std::string, double> node_throughput_hz;
  std::map<std::string, double> violation_s;  // keyed by bound

  double total_violation_s() const;
  std::string to_csv() const;
};

EmpiricalMetrics measure(const SimEventTrace& trace, const DagSpec& spec);

// Chain whose response time stealing is meant to protect: among chains that
// contain the highest-priority stealer, the heaviest, then the shortest.
std::string priority_chain(const DagSpec& spec);

std::vector<std::string> baseline_names();

// Configuration for a named baseline; static ones run a profiling pass first.
SimConfig baseline_config(const DagSpec& spec, const std::string& name, const SimConfig& base);

struct ComparisonTable {
  std::vector<std::string> rows;     // configuration names
  std::vector<std::string> columns;  // metric names
  std::vector<std::vector<double>> values;
  std::vector<std::string> winners;  // per column, lowest value

  std::string to_csv() const;
};

ComparisonTable compare_schedules(const DagSpec& spec, const std::vector<std::pair<std::string, SimConfig>>& configs);

}  // namespace srsched
