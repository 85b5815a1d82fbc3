#include <algorithm>
#include <numeric>

#include "json.hpp"
#include "srsched/stage2.hpp"

namespace srsched {

const PipelinePlan* GlobalSchedule::plan(const std::string& subchain) const {
  for (const auto& p : exclusive)
    if (p.subchain == subchain) return &p;
  return nullptr;
}

const FractionalSchedule* GlobalSchedule::shared_core(const std::string& subchain) const {
  for (const auto& c : shared)
    if (c.entry(subchain)) return &c;
  return nullptr;
}

namespace {

std::vector<int> cores_of(const Matrix& a, std::size_t i) {
  std::vector<int> out;
  for (std::size_t j = 0; j < a[i].size(); ++j)
    if (a[i][j]) out.push_back(static_cast<int>(j));
  return out;
}

int residents(const Matrix& a, int core) {
  int n = 0;
  for (const auto& row : a) n += row[core];
  return n;
}

bool is_shared(const Matrix& a, std::size_t i) {
  auto c = cores_of(a, i);
  return c.size() == 1 && residents(a, c.front()) > 1;
}

void place_exclusive(const DagSpec& spec, const Allocation& alloc, const Estimates& estimates, GlobalSchedule& g) {
  for (std::size_t i = 0; i < spec.subchains.size(); ++i) {
    if (is_shared(alloc.a, i)) continue;
    auto cores = cores_of(alloc.a, i);
    PipelinePlan plan = plan_subchain(spec, spec.subchains[i], estimates, static_cast<int>(cores.size()));
    plan.cores = cores;
    g.exclusive.push_back(std::move(plan));
  }
}

std::map<std::string, double> fixed_periods(const GlobalSchedule& g) {
  std::map<std::string, double> out;
  for (const auto& p : g.exclusive) out[p.subchain] = p.trigger_period;
  return out;
}

}  // namespace

FractionProblem make_fraction_problem(const DagSpec& spec, const Allocation& alloc, const Estimates& estimates,
                                      const std::map<std::string, double>& fixed) {
  FractionProblem pr;
  const auto order = spec.effective_order();
  for (int core = 0; core < spec.cores; ++core) {
    if (residents(alloc.a, core) < 2) continue;
    for (const auto& id : order) {
      auto i = *spec.subchain_index(id);
      if (!alloc.a[i][core]) continue;
      const auto& sc = spec.subchains[i];
      FractionVar v;
      v.id = sc.id;
      v.core = core;
      v.cost = subchain_cost(spec, sc, estimates);
      v.streaming = spec.node(sc.head()).streaming;
      v.period_bound = subchain_period_bound(spec, sc);
      pr.vars.push_back(v);
    }
  }
  pr.fixed_periods = fixed;
  for (const auto& c : spec.chains) {
    FractionChain ch;
    ch.id = c.id;
    ch.subchains = c.subchain_ids;
    auto w = spec.objective.chain_weights.find(c.id);
    if (w != spec.objective.chain_weights.end()) ch.weight = w->second;
    auto pb = spec.objective.chain_period_bounds.find(c.id);
    if (pb != spec.objective.chain_period_bounds.end()) ch.period_bound = pb->second;
    auto lb = spec.objective.chain_latency_bounds.find(c.id);
    if (lb != spec.objective.chain_latency_bounds.end()) ch.latency_bound = lb->second;
    pr.chains.push_back(std::move(ch));
  }
  pr.subchain_weights = spec.objective.subchain_weights;
  pr.priority = spec.effective_priority();
  pr.slack_fraction = spec.constants.slack_fraction;
  pr.switch_overhead_ms = spec.constants.switch_overhead_ms;
  pr.min_cpu_ms = spec.constants.min_cpu_ms_per_hyperperiod;
  pr.max_reciprocal = spec.constants.max_reciprocal;
  pr.soft_constraint_scale = spec.objective.soft_constraint_scale;
  return pr;
}

void refresh_metrics(const DagSpec& spec, GlobalSchedule& g) {
  g.subchain_period.clear();
  for (const auto& p : g.exclusive) g.subchain_period[p.subchain] = p.trigger_period;
  for (auto& core : g.shared) {
    core.hyperperiod_ms = 0.0;
    for (const auto& e : core.entries) core.hyperperiod_ms += e.budget_ms;
    core.slack_ms = spec.constants.slack_fraction * core.hyperperiod_ms;
    core.overhead_ms = spec.constants.switch_overhead_ms * static_cast<double>(core.entries.size());
    core.cycle_ms = core.hyperperiod_ms + core.slack_ms + core.overhead_ms;
    for (auto& e : core.entries) {
      e.period_ms = core.cycle_ms / e.fraction;
      g.subchain_period[e.subchain] = e.period_ms;
    }
  }
  // A pipelined subchain can take longer than its period to process one
  // input, so exclusive subchains contribute their summed node costs.
  std::map<std::string, double> ex = g.subchain_period;
  for (const auto& p : g.exclusive) ex[p.subchain] = std::accumulate(p.costs.begin(), p.costs.end(), 0.0);
  g.chain_metrics.clear();
  for (const auto& c : spec.chains) {
    std::vector<SubchainTiming> ts;
    for (const auto& s : c.subchain_ids) ts.push_back({g.subchain_period.at(s), ex.at(s)});
    g.chain_metrics[c.id] = chain_metrics_stage1(ts);
  }
  g.objective = objective(g.chain_metrics, g.subchain_period, spec.objective);
}

GlobalSchedule build_global_schedule(const DagSpec& spec, const Allocation& alloc, const Estimates& estimates) {
  GlobalSchedule g;
  g.allocation = alloc.a;
  g.warnings = alloc.warnings;
  place_exclusive(spec, alloc, estimates, g);
  FractionProblem pr = make_fraction_problem(spec, alloc, estimates, fixed_periods(g));
  if (!pr.vars.empty()) {
    FractionSolution sol = solve_fractions(pr);
    g.shared = std::move(sol.cores);
    g.warnings.insert(g.warnings.end(), sol.warnings.begin(), sol.warnings.end());
  }
  refresh_metrics(spec, g);
  return g;
}

GlobalSchedule solve_schedule(const DagSpec& spec, const Estimates& estimates,
                              const std::map<std::string, double>& observed_periods) {
  Allocation alloc = solve_core_allocation(make_stage1_problem(spec, estimates, observed_periods));
  return build_global_schedule(spec, alloc, estimates);
}

GlobalSchedule equal_share_schedule(const DagSpec& spec, const Allocation& alloc, const Estimates& estimates) {
  GlobalSchedule g;
  g.allocation = alloc.a;
  g.warnings = alloc.warnings;
  place_exclusive(spec, alloc, estimates, g);
  FractionProblem pr = make_fraction_problem(spec, alloc, estimates, fixed_periods(g));
  if (!pr.vars.empty()) g.shared = make_core_schedules(pr, std::vector<double>(pr.vars.size(), 1.0));
  refresh_metrics(spec, g);
  return g;
}

std::string schedule_to_json(const DagSpec& spec, const GlobalSchedule& g) {
  using nlohmann::json;
  json doc;
  doc["schema"] = 1;
  doc["objective"] = g.objective;
  doc["allocation"] = json::array();
  for (std::size_t i = 0; i < spec.subchains.size(); ++i)
    doc["allocation"].push_back({{"subchain", spec.subchains[i].id}, {"cores", cores_of(g.allocation, i)}});
  doc["exclusive"] = json::array();
  for (const auto& p : g.exclusive)
    doc["exclusive"].push_back({{"subchain", p.subchain},
                                {"cores", p.cores},
                                {"q", p.q},
                                {"b", p.b},
                                {"period_ms", p.period},
                                {"trigger_period_ms", p.trigger_period},
                                {"predicted_response_time_ms", p.predicted_response_time}});
  doc["shared"] = json::array();
  for (const auto& c : g.shared) {
    json entries = json::array();
    for (const auto& e : c.entries)
      entries.push_back({{"subchain", e.subchain},
                         {"fraction", e.fraction},
                         {"reciprocal", e.reciprocal},
                         {"streaming", e.streaming},
                         {"budget_ms", e.budget_ms},
                         {"period_ms", e.period_ms}});
    doc["shared"].push_back({{"core", c.core},
                             {"hyperperiod_ms", c.hyperperiod_ms},
                             {"slack_ms", c.slack_ms},
                             {"overhead_ms", c.overhead_ms},
                             {"cycle_ms", c.cycle_ms},
                             {"entries", entries}});
  }
  doc["chains"] = json::array();
  for (const auto& [id, m] : g.chain_metrics)
    doc["chains"].push_back(
        {{"chain", id}, {"latency_ms", m.latency}, {"period_ms", m.period}, {"response_time_ms", m.response_time}});
  doc["warnings"] = g.warnings;
  return doc.dump(2);
}

}  // namespace srsched
