#include <algorithm>
#include <cmath>
#include <limits>

#include "srsched/stage2.hpp"

namespace srsched {

namespace {

// Straightforward re-derivation of the shared-core model, kept apart from the
// solver's evaluator.
struct OracleEval {
  double objective = 0.0;
  bool feasible = true;
};

OracleEval oracle_eval(const FractionProblem& pr, const std::vector<double>& f) {
  std::map<int, double> work;
  std::map<int, int> count;
  for (std::size_t i = 0; i < pr.vars.size(); ++i) {
    work[pr.vars[i].core] += f[i] * pr.vars[i].cost;
    count[pr.vars[i].core] += 1;
  }
  std::map<std::string, double> period = pr.fixed_periods;
  OracleEval out;
  for (std::size_t i = 0; i < pr.vars.size(); ++i) {
    const auto& v = pr.vars[i];
    double cycle = work[v.core] + pr.slack_fraction * work[v.core] + pr.switch_overhead_ms * count[v.core];
    period[v.id] = cycle / f[i];
    if (f[i] * v.cost < pr.min_cpu_ms - 1e-9) out.feasible = false;
    if (period[v.id] > v.period_bound.upper * (1 + 1e-9)) out.feasible = false;
    if (period[v.id] < v.period_bound.lower * (1 - 1e-9)) out.feasible = false;
  }
  for (const auto& c : pr.chains) {
    double lat = 0.0, per = 0.0;
    bool touches = false;
    for (std::size_t x = 0; x < c.subchains.size(); ++x) {
      double p = period.at(c.subchains[x]);
      lat += (x == 0 ? 1.0 : 2.0) * p;
      per = std::max(per, p);
      for (const auto& v : pr.vars) touches = touches || v.id == c.subchains[x];
    }
    lat = std::max(lat, c.latency_bound.lower);
    per = std::max(per, c.period_bound.lower);
    out.objective += c.weight.latency * lat + c.weight.period * per;
    if (touches && (per > c.period_bound.upper * (1 + 1e-9) || lat > c.latency_bound.upper * (1 + 1e-9)))
      out.feasible = false;
  }
  for (const auto& [id, w] : pr.subchain_weights) out.objective += w * period.at(id);
  return out;
}

}  // namespace

FractionSolution brute_force_fractions(const FractionProblem& pr, const OracleOptions& opt) {
  const std::size_t n = pr.vars.size();
  if (n == 0) throw std::invalid_argument("fraction problem has no subchains");
  if (n > 4) throw TooLargeError("oracle supports at most 4 subchains");

  std::vector<std::vector<double>> choices(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = pr.vars[i];
    if (v.streaming) {
      double lo = pr.min_cpu_ms / v.cost;
      double hi = opt.streaming_max;
      for (int g = 0; g < opt.streaming_points; ++g)
        choices[i].push_back(lo * std::pow(hi / lo, static_cast<double>(g) / (opt.streaming_points - 1)));
    } else {
      for (int r = 1; r <= opt.max_reciprocal; ++r) choices[i].push_back(1.0 / r);
    }
  }

  FractionSolution best;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> idx(n, 0);
  std::vector<double> f(n);
  while (true) {
    for (std::size_t i = 0; i < n; ++i) f[i] = choices[i][idx[i]];
    OracleEval e = oracle_eval(pr, f);
    if (e.feasible && e.objective < best.objective) {
      best.objective = e.objective;
      best.fractions = f;
      best.feasible = true;
    }
    std::size_t i = 0;
    while (i < n && ++idx[i] == choices[i].size()) idx[i++] = 0;
    if (i == n) break;
  }
  if (best.feasible) best.cores = make_core_schedules(pr, best.fractions);
  return best;
}

}  // namespace srsched
