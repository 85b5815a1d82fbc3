#include "srsched/analytics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace srsched {

double pipelined_period(const std::vector<double>& costs, int k, int q) {
  if (q < 1 || q > k) throw std::invalid_argument("parallelism q must be in [1, k]");
  if (costs.empty()) throw std::invalid_argument("no node costs");
  double sum = 0.0, mx = 0.0;
  for (double c : costs) {
    if (!(c > 0.0)) throw std::invalid_argument("node costs must be positive");
    sum += c;
    mx = std::max(mx, c);
  }
  return std::max(mx, sum / static_cast<double>(k / q));
}

ChainMetrics chain_metrics_stage2(const std::vector<double>& periods) {
  if (periods.empty()) throw std::invalid_argument("empty chain");
  ChainMetrics m;
  m.latency = periods.front();
  m.period = periods.front();
  for (std::size_t x = 1; x < periods.size(); ++x) {
    m.latency += 2.0 * periods[x];
    m.period = std::max(m.period, periods[x]);
  }
  m.response_time = m.latency + m.period;
  return m;
}

ChainMetrics chain_metrics_stage1(const std::vector<SubchainTiming>& timings) {
  if (timings.empty()) throw std::invalid_argument("empty chain");
  ChainMetrics m;
  m.latency = timings.front().execution_time;
  m.period = timings.front().period;
  for (std::size_t r = 1; r < timings.size(); ++r) {
    m.latency += timings[r].execution_time + timings[r].period;
    m.period = std::max(m.period, timings[r].period);
  }
  m.response_time = m.latency + m.period;
  return m;
}

double objective(const std::map<std::string, ChainMetrics>& chains,
                 const std::map<std::string, double>& subchain_periods, const ObjectiveSpec& weights) {
  double total = 0.0;
  for (const auto& [id, w] : weights.chain_weights) {
    if (w.latency == 0.0 && w.period == 0.0) continue;
    auto it = chains.find(id);
    if (it == chains.end()) throw std::invalid_argument("no metrics for weighted chain '" + id + "'");
    total += w.latency * it->second.latency + w.period * it->second.period;
  }
  for (const auto& [id, w] : weights.subchain_weights) {
    if (w == 0.0) continue;
    auto it = subchain_periods.find(id);
    if (it == subchain_periods.end()) throw std::invalid_argument("no period for weighted subchain '" + id + "'");
    total += w * it->second;
  }
  return total;
}

double node_estimate(const DagSpec& spec, const std::string& node, const Estimates& estimates) {
  auto it = estimates.find(node);
  if (it != estimates.end()) return it->second;
  return spec.node(node).compute_model.nominal_ms();
}

std::vector<double> node_costs(const DagSpec& spec, const SubchainSpec& sc, const Estimates& estimates, int q) {
  std::vector<double> out;
  out.reserve(sc.node_ids.size());
  for (const auto& id : sc.node_ids) out.push_back(spec.node(id).cost_with_cores(node_estimate(spec, id, estimates), q));
  return out;
}

double subchain_cost(const DagSpec& spec, const SubchainSpec& sc, const Estimates& estimates) {
  auto c = node_costs(spec, sc, estimates, 1);
  return std::accumulate(c.begin(), c.end(), 0.0);
}

Bound subchain_period_bound(const DagSpec& spec, const SubchainSpec& sc) {
  Bound b;
  for (const auto& id : sc.node_ids) {
    auto it = spec.objective.node_period_bounds.find(id);
    if (it == spec.objective.node_period_bounds.end()) continue;
    b.lower = std::max(b.lower, it->second.lower);
    b.upper = std::min(b.upper, it->second.upper);
  }
  return b;
}

}  // namespace srsched
