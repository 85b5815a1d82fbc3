#pragma once

#include <map>
#include <string>
#include <vector>

#include "srsched/model.hpp"

namespace srsched {

// Per-node compute estimates in ms, keyed by node id.
using Estimates = std::map<std::string, double>;

struct SubchainTiming {
  double period = 0.0;          // p_i
  double execution_time = 0.0;  // ex_i, trigger to output
  int parallelism = 1;          // q_i
  int pipeline_width = 1;       // b_i
};

struct ChainMetrics {
  double latency = 0.0;
  double period = 0.0;
  double response_time = 0.0;
};

// max(max_j c_j, sum_j c_j / floor(k/q)). Throws std::invalid_argument when
// q is outside [1, k] or a cost is not positive.
double pipelined_period(const std::vector<double>& costs, int k, int q);

ChainMetrics chain_metrics_stage2(const std::vector<double>& periods);
ChainMetrics chain_metrics_stage1(const std::vector<SubchainTiming>& timings);

// Weighted sum over chain latencies/periods and subchain periods. Throws
// std::invalid_argument if a term with nonzero weight has no metric.
double objective(const std::map<std::string, ChainMetrics>& chains,
                 const std::map<std::string, double>& subchain_periods, const ObjectiveSpec& weights);

// Estimate for one node: `estimates` entry if present, else the nominal value.
double node_estimate(const DagSpec& spec, const std::string& node, const Estimates& estimates);

// c^q for every node of a subchain.
std::vector<double> node_costs(const DagSpec& spec, const SubchainSpec& sc, const Estimates& estimates, int q);

// c(S_i): sum of member node estimates.
double subchain_cost(const DagSpec& spec, const SubchainSpec& sc, const Estimates& estimates);

// Tightest node period bound of the subchain's members (bounds apply to
// every node of a subchain since they share one rate).
Bound subchain_period_bound(const DagSpec& spec, const SubchainSpec& sc);

}  // namespace srsched
