#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "srsched/analytics.hpp"
#include "srsched/model.hpp"

namespace srsched {

// Raised when the relaxed problem still has no feasible allocation.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an instance exceeds the exact-search guard.
class TooLargeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Matrix = std::vector<std::vector<int>>;  // [subchain][core], 0 or 1

struct Stage1Chain {
  std::string id;
  std::vector<int> subchains;
  ChainWeight weight;
  Bound period_bound;
  Bound latency_bound;
};

struct Stage1Problem {
  std::vector<std::string> ids;
  std::vector<double> cost;      // c(S_i)
  std::vector<double> max_node;  // max_x c_x
  std::vector<bool> parallelizable;
  std::vector<double> period_weight;  // w3
  std::vector<Bound> period_bound;
  std::vector<Stage1Chain> chains;
  int cores = 1;
  bool idle_sink = false;
  double soft_constraint_scale = 2.0;
  double big_M = 50000.0;

  std::size_t size() const { return ids.size(); }
};

// `observed_periods` (ms, by subchain id) raise the period lower bound of
// streaming subchains.
Stage1Problem make_stage1_problem(const DagSpec& spec, const Estimates& estimates,
                                  const std::map<std::string, double>& observed_periods = {});

struct AllocationCheck {
  bool feasible = false;
  std::vector<std::string> violations;
  std::vector<int> multi_core, pipeline_width, parallelism, core_count;
  std::vector<double> period, execution_time;
  std::vector<ChainMetrics> chain_metrics;
  double objective = 0.0;
  int shared_cores = 0;
};

AllocationCheck check_allocation(const Stage1Problem& problem, const Matrix& a);

struct Allocation {
  Matrix a;
  AllocationCheck check;
  std::vector<std::string> warnings;
  double big_M = 50000.0;

  int core_of(std::size_t subchain) const;  // first core, -1 if none
  bool shares_core(std::size_t subchain) const;
};

constexpr double kConfigurationGuard = 1e7;

double count_a1_configurations(int n, int k, bool allow_idle = false);
void enumerate_a1_configurations(int n, int k, bool allow_idle, const std::function<void(const Matrix&)>& visit);
std::vector<Matrix> enumerate_a1_configurations(int n, int k, bool allow_idle = false);

Allocation solve_core_allocation(const Stage1Problem& problem);

}  // namespace srsched
