#pragma once

#include <map>
#include <string>
#include <vector>

#include "srsched/analytics.hpp"
#include "srsched/model.hpp"
#include "srsched/stage1.hpp"

namespace srsched {

struct PipelinePlan {
  std::string subchain;
  int q = 1;
  int b = 1;                 // floor(k/q)
  int k = 1;                 // cores owned
  double period = 0.0;       // pipelined_period(c^q, k, q)
  double trigger_period = 0.0;  // period raised to the subchain's lower bound
  double predicted_response_time = 0.0;
  std::vector<double> costs;  // c^q per node
  std::vector<int> cores;
};

// costs_by_q[q-1] holds c^q per node, for q = 1..k.
PipelinePlan select_parallelism(const std::vector<std::vector<double>>& costs_by_q, int k);
PipelinePlan plan_subchain(const DagSpec& spec, const SubchainSpec& sc, const Estimates& estimates, int k);

// One subchain placed on a shared core.
struct FractionVar {
  std::string id;
  int core = 0;
  double cost = 0.0;  // c(S_i)
  bool streaming = false;
  Bound period_bound;
};

struct FractionChain {
  std::string id;
  std::vector<std::string> subchains;
  ChainWeight weight;
  Bound period_bound;
  Bound latency_bound;
};

struct FractionProblem {
  std::vector<FractionVar> vars;              // grouped per core, each in slot order
  std::map<std::string, double> fixed_periods;  // exclusive subchains
  std::vector<FractionChain> chains;
  std::map<std::string, double> subchain_weights;
  std::vector<std::string> priority;  // highest first, for tie-breaks
  double slack_fraction = 0.0;
  double switch_overhead_ms = 0.0;
  double min_cpu_ms = 1.0;
  int max_reciprocal = 64;
  double streaming_cap = 64.0;
  double soft_constraint_scale = 2.0;
};

struct FractionEntry {
  std::string subchain;
  double fraction = 1.0;
  int reciprocal = 1;  // 1/f for non-streaming entries, 0 for streaming
  bool streaming = false;
  double cost_ms = 0.0;
  double budget_ms = 0.0;  // f * c
  double period_ms = 0.0;  // cycle / f
};

struct FractionalSchedule {
  int core = 0;
  std::vector<FractionEntry> entries;  // slot order
  double hyperperiod_ms = 0.0;         // sum of budgets
  double slack_ms = 0.0;
  double overhead_ms = 0.0;
  double cycle_ms = 0.0;  // hyperperiod + slack + overhead

  const FractionEntry* entry(const std::string& subchain) const;
};

struct FractionSolution {
  std::vector<FractionalSchedule> cores;
  std::vector<double> fractions;  // aligned with problem vars
  std::vector<double> relaxed;    // continuous optimum (phase 1)
  double objective = 0.0;
  bool feasible = false;
  std::vector<std::string> warnings;
};

// Builds per-core schedules from a fraction vector.
std::vector<FractionalSchedule> make_core_schedules(const FractionProblem& problem, const std::vector<double>& f);

// Exact objective of a fraction vector; `violation` receives the summed
// relative bound violation (0 when feasible).
double fraction_objective(const FractionProblem& problem, const std::vector<double>& f, double* violation = nullptr);

FractionSolution solve_fractions(const FractionProblem& problem);

struct OracleOptions {
  int max_reciprocal = 8;
  int streaming_points = 64;
  double streaming_max = 4.0;
};

// Exhaustive search; independent arithmetic from the solver. Throws
// TooLargeError for more than 4 subchains.
FractionSolution brute_force_fractions(const FractionProblem& problem, const OracleOptions& options = {});

struct GlobalSchedule {
  Matrix allocation;
  std::vector<FractionalSchedule> shared;
  std::vector<PipelinePlan> exclusive;
  std::map<std::string, double> subchain_period;
  std::map<std::string, ChainMetrics> chain_metrics;
  double objective = 0.0;
  std::vector<std::string> warnings;

  const PipelinePlan* plan(const std::string& subchain) const;
  const FractionalSchedule* shared_core(const std::string& subchain) const;
};

FractionProblem make_fraction_problem(const DagSpec& spec, const Allocation& alloc, const Estimates& estimates,
                                      const std::map<std::string, double>& fixed_periods);

GlobalSchedule build_global_schedule(const DagSpec& spec, const Allocation& alloc, const Estimates& estimates);

// Stage I followed by Stage II.
GlobalSchedule solve_schedule(const DagSpec& spec, const Estimates& estimates,
                              const std::map<std::string, double>& observed_periods = {});

// Allocation from Stage I, fraction 1 on every shared subchain.
GlobalSchedule equal_share_schedule(const DagSpec& spec, const Allocation& alloc, const Estimates& estimates);

// Recomputes periods, chain metrics and objective after editing a schedule.
void refresh_metrics(const DagSpec& spec, GlobalSchedule& schedule);

std::string schedule_to_json(const DagSpec& spec, const GlobalSchedule& schedule);

}  // namespace srsched
