#include "srsched/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace srsched {

Stage1Problem make_stage1_problem(const DagSpec& spec, const Estimates& estimates,
                                  const std::map<std::string, double>& observed_periods) {
  Stage1Problem p;
  p.cores = spec.cores;
  p.idle_sink = spec.idle_sink;
  p.soft_constraint_scale = spec.objective.soft_constraint_scale;
  for (const auto& sc : spec.subchains) {
    auto costs = node_costs(spec, sc, estimates, 1);
    p.ids.push_back(sc.id);
    p.cost.push_back(std::accumulate(costs.begin(), costs.end(), 0.0));
    p.max_node.push_back(*std::max_element(costs.begin(), costs.end()));
    bool par = std::all_of(sc.node_ids.begin(), sc.node_ids.end(),
                           [&](const std::string& id) { return spec.node(id).parallelizable; });
    p.parallelizable.push_back(par);
    auto w = spec.objective.subchain_weights.find(sc.id);
    p.period_weight.push_back(w == spec.objective.subchain_weights.end() ? 0.0 : w->second);
    Bound b = subchain_period_bound(spec, sc);
    auto obs = observed_periods.find(sc.id);
    if (obs != observed_periods.end() && spec.node(sc.head()).streaming) b.lower = std::max(b.lower, obs->second);
    p.period_bound.push_back(b);
  }
  for (const auto& c : spec.chains) {
    Stage1Chain ch;
    ch.id = c.id;
    for (const auto& s : c.subchain_ids) ch.subchains.push_back(static_cast<int>(*spec.subchain_index(s)));
    auto w = spec.objective.chain_weights.find(c.id);
    if (w != spec.objective.chain_weights.end()) ch.weight = w->second;
    auto pb = spec.objective.chain_period_bounds.find(c.id);
    if (pb != spec.objective.chain_period_bounds.end()) ch.period_bound = pb->second;
    auto lb = spec.objective.chain_latency_bounds.find(c.id);
    if (lb != spec.objective.chain_latency_bounds.end()) ch.latency_bound = lb->second;
    p.chains.push_back(std::move(ch));
  }
  return p;
}

namespace {

struct BoundViolation {
  enum Kind { node_period, chain_period, chain_latency } kind;
  int index;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

AllocationCheck evaluate(const Stage1Problem& pr, const Matrix& a, std::vector<BoundViolation>* bounds) {
  const int n = static_cast<int>(pr.size());
  if (static_cast<int>(a.size()) != n) throw std::invalid_argument("allocation row count differs from subchain count");
  for (const auto& row : a)
    if (static_cast<int>(row.size()) != pr.cores) throw std::invalid_argument("allocation column count differs from core count");

  AllocationCheck r;
  r.multi_core.assign(n, 0);
  r.pipeline_width.assign(n, 1);
  r.parallelism.assign(n, 1);
  r.core_count.assign(n, 0);
  r.period.assign(n, 0.0);
  r.execution_time.assign(n, 0.0);

  std::vector<int> per_core(pr.cores, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < pr.cores; ++j)
      if (a[i][j]) {
        ++r.core_count[i];
        ++per_core[j];
      }

  for (int i = 0; i < n; ++i)
    if (r.core_count[i] == 0) r.violations.push_back("subchain_has_core: subchain '" + pr.ids[i] + "' has no core");
  if (!pr.idle_sink)
    for (int j = 0; j < pr.cores; ++j)
      if (per_core[j] == 0) r.violations.push_back("core_has_subchain: core " + std::to_string(j) + " hosts no subchain");
  for (int i = 0; i < n; ++i) {
    if (r.core_count[i] < 2) continue;
    for (int j = 0; j < pr.cores; ++j)
      if (a[i][j] && per_core[j] > 1)
        r.violations.push_back("exclusive_multicore: subchain '" + pr.ids[i] + "' spans several cores but shares core " +
                               std::to_string(j));
  }
  for (int j = 0; j < pr.cores; ++j)
    if (per_core[j] > 1) ++r.shared_cores;
  if (!r.violations.empty()) return r;

  for (int i = 0; i < n; ++i) {
    const int m = r.core_count[i];
    const double c = pr.cost[i];
    if (m == 1) {
      int j = static_cast<int>(std::find(a[i].begin(), a[i].end(), 1) - a[i].begin());
      const int s = per_core[j];
      r.period[i] = c * s;
      r.execution_time[i] = s > 1 ? r.period[i] : c;
    } else {
      r.multi_core[i] = 1;
      int best_b = m;
      double best_p = std::max(pr.max_node[i] * m, c) / m;
      if (pr.parallelizable[i]) {
        for (int b = m; b >= 1; --b) {
          if (m % b) continue;
          double p = std::max(pr.max_node[i] * b, c) / m;
          if (p < best_p - 1e-12) {
            best_p = p;
            best_b = b;
          }
        }
      }
      r.pipeline_width[i] = best_b;
      r.parallelism[i] = m / best_b;
      r.period[i] = best_p;
      r.execution_time[i] = c;
    }
    const Bound& b = pr.period_bound[i];
    r.period[i] = std::max(r.period[i], b.lower);
    if (m == 1 && per_core[std::find(a[i].begin(), a[i].end(), 1) - a[i].begin()] > 1)
      r.execution_time[i] = r.period[i];
    if (r.period[i] > b.upper * (1 + 1e-12)) {
      r.violations.push_back("node_period_upper: subchain '" + pr.ids[i] + "' period " + fmt(r.period[i]) +
                             " ms exceeds " + fmt(b.upper) + " ms");
      if (bounds) bounds->push_back({BoundViolation::node_period, i});
    }
  }

  for (std::size_t ci = 0; ci < pr.chains.size(); ++ci) {
    const auto& ch = pr.chains[ci];
    std::vector<SubchainTiming> t;
    for (int s : ch.subchains) t.push_back({r.period[s], r.execution_time[s], r.parallelism[s], r.pipeline_width[s]});
    ChainMetrics m = chain_metrics_stage1(t);
    m.period = std::max(m.period, ch.period_bound.lower);
    m.latency = std::max(m.latency, ch.latency_bound.lower);
    m.response_time = m.latency + m.period;
    if (m.period > ch.period_bound.upper * (1 + 1e-12)) {
      r.violations.push_back("chain_period_upper: chain '" + ch.id + "' period " + fmt(m.period) + " ms exceeds " +
                             fmt(ch.period_bound.upper) + " ms");
      if (bounds) bounds->push_back({BoundViolation::chain_period, static_cast<int>(ci)});
    }
    if (m.latency > ch.latency_bound.upper * (1 + 1e-12)) {
      r.violations.push_back("chain_latency_upper: chain '" + ch.id + "' latency " + fmt(m.latency) + " ms exceeds " +
                             fmt(ch.latency_bound.upper) + " ms");
      if (bounds) bounds->push_back({BoundViolation::chain_latency, static_cast<int>(ci)});
    }
    r.chain_metrics.push_back(m);
    r.objective += ch.weight.latency * m.latency + ch.weight.period * m.period;
  }
  for (int i = 0; i < n; ++i) r.objective += pr.period_weight[i] * r.period[i];
  r.feasible = r.violations.empty();
  return r;
}

// Partitions of n labelled items into k blocks of size >= 2.
double blocks_at_least_two(int n, int k) {
  std::vector<std::vector<double>> t(n + 1, std::vector<double>(k + 1, 0.0));
  t[0][0] = 1.0;
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= k; ++j)
      t[i][j] = j * t[i - 1][j] + (i >= 2 ? (i - 1) * t[i - 2][j - 1] : 0.0);
  return t[n][k];
}

double surjections(int from, int onto) {
  if (onto == 0) return from == 0 ? 1.0 : 0.0;
  double total = 0.0;
  for (int i = 0; i <= onto; ++i) {
    double term = std::pow(onto - i, from);
    double binom = 1.0;
    for (int x = 0; x < i; ++x) binom = binom * (onto - x) / (x + 1);
    total += (i % 2 ? -1.0 : 1.0) * binom * term;
  }
  return std::round(total);
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double b = 1.0;
  for (int x = 0; x < k; ++x) b = b * (n - x) / (x + 1);
  return std::round(b);
}

}  // namespace

AllocationCheck check_allocation(const Stage1Problem& problem, const Matrix& a) {
  return evaluate(problem, a, nullptr);
}

int Allocation::core_of(std::size_t subchain) const {
  const auto& row = a.at(subchain);
  auto it = std::find(row.begin(), row.end(), 1);
  return it == row.end() ? -1 : static_cast<int>(it - row.begin());
}

bool Allocation::shares_core(std::size_t subchain) const {
  int j = core_of(subchain);
  if (j < 0) return false;
  int count = 0;
  for (const auto& row : a) count += row[j];
  return count > 1;
}

double count_a1_configurations(int n, int k, bool allow_idle) {
  double total = 0.0;
  for (int singles = 0; singles <= n; ++singles) {
    for (int shared = 0; 2 * shared <= n - singles; ++shared) {
      double parts = binomial(n, singles) * blocks_at_least_two(n - singles, shared);
      if (parts == 0.0 || shared > k) continue;
      double shared_ways = 1.0;
      for (int x = 0; x < shared; ++x) shared_ways *= (k - x);
      const int rest = k - shared;
      double single_ways = 0.0;
      if (allow_idle) {
        for (int used = singles; used <= rest; ++used) single_ways += binomial(rest, used) * surjections(used, singles);
      } else {
        single_ways = surjections(rest, singles);
      }
      total += parts * shared_ways * single_ways;
    }
  }
  return total;
}

void enumerate_a1_configurations(int n, int k, bool allow_idle, const std::function<void(const Matrix&)>& visit) {
  if (n < 1 || k < 1) throw std::invalid_argument("need at least one subchain and one core");
  if (count_a1_configurations(n, k, allow_idle) > kConfigurationGuard)
    throw TooLargeError("instance exceeds the exact-search guard of 1e7 configurations");

  std::vector<int> block(n, 0);
  Matrix a(n, std::vector<int>(k, 0));
  std::vector<std::vector<int>> members;
  std::vector<int> core_block(k, -1);
  std::vector<int> cores_in_block;

  std::function<void(int)> assign = [&](int j) {
    if (j == k) {
      for (std::size_t g = 0; g < members.size(); ++g) {
        if (cores_in_block[g] == 0) return;
        if (members[g].size() > 1 && cores_in_block[g] != 1) return;
      }
      for (auto& row : a) std::fill(row.begin(), row.end(), 0);
      for (int c = 0; c < k; ++c)
        if (core_block[c] >= 0)
          for (int i : members[core_block[c]]) a[i][c] = 1;
      visit(a);
      return;
    }
    if (allow_idle) {
      core_block[j] = -1;
      assign(j + 1);
    }
    for (std::size_t g = 0; g < members.size(); ++g) {
      if (members[g].size() > 1 && cores_in_block[g] >= 1) continue;
      core_block[j] = static_cast<int>(g);
      ++cores_in_block[g];
      assign(j + 1);
      --cores_in_block[g];
    }
    core_block[j] = -1;
  };

  // Restricted growth strings enumerate set partitions.
  std::function<void(int, int)> partition = [&](int i, int blocks) {
    if (i == n) {
      if (blocks > k) return;
      members.assign(blocks, {});
      for (int x = 0; x < n; ++x) members[block[x]].push_back(x);
      cores_in_block.assign(blocks, 0);
      assign(0);
      return;
    }
    for (int b = 0; b <= blocks; ++b) {
      block[i] = b;
      partition(i + 1, std::max(blocks, b + 1));
    }
  };
  partition(0, 0);
}

std::vector<Matrix> enumerate_a1_configurations(int n, int k, bool allow_idle) {
  std::vector<Matrix> out;
  enumerate_a1_configurations(n, k, allow_idle, [&](const Matrix& m) { out.push_back(m); });
  return out;
}

Allocation solve_core_allocation(const Stage1Problem& problem) {
  Stage1Problem pr = problem;
  std::vector<std::string> warnings;
  std::map<std::pair<int, int>, double> relaxed;  // (kind, index) -> cumulative factor
  const double scale = pr.soft_constraint_scale;

  while (true) {
    bool found = false, any_structural = false;
    Allocation best;
    std::size_t least_violations = std::numeric_limits<std::size_t>::max();
    std::vector<BoundViolation> least_bounds;

    enumerate_a1_configurations(static_cast<int>(pr.size()), pr.cores, pr.idle_sink, [&](const Matrix& a) {
      std::vector<BoundViolation> bounds;
      AllocationCheck chk = evaluate(pr, a, &bounds);
      if (!chk.feasible) {
        if (bounds.size() == chk.violations.size()) {
          any_structural = true;
          if (bounds.size() < least_violations) {
            least_violations = bounds.size();
            least_bounds = bounds;
          }
        }
        return;
      }
      any_structural = true;
      bool better = !found;
      if (found) {
        double tol = 1e-9 * std::max(1.0, std::abs(best.check.objective));
        if (chk.objective < best.check.objective - tol) {
          better = true;
        } else if (chk.objective <= best.check.objective + tol) {
          if (chk.shared_cores != best.check.shared_cores)
            better = chk.shared_cores < best.check.shared_cores;
          else
            better = a < best.a;
        }
      }
      if (better) {
        found = true;
        best.a = a;
        best.check = std::move(chk);
      }
    });

    if (found) {
      best.warnings = std::move(warnings);
      best.big_M = pr.big_M;
      return best;
    }
    if (!any_structural) throw InfeasibleError("no allocation satisfies the structural constraints");

    for (const auto& v : least_bounds) {
      double& factor = relaxed.try_emplace({static_cast<int>(v.kind), v.index}, 1.0).first->second;
      if (factor * scale > 8.0 + 1e-9)
        throw InfeasibleError("bounds remain unsatisfiable after relaxing by the maximum factor of 8");
      factor *= scale;
      Bound* b = nullptr;
      std::string what;
      switch (v.kind) {
        case BoundViolation::node_period:
          b = &pr.period_bound[v.index];
          what = "period bound of subchain '" + pr.ids[v.index] + "'";
          break;
        case BoundViolation::chain_period:
          b = &pr.chains[v.index].period_bound;
          what = "period bound of chain '" + pr.chains[v.index].id + "'";
          break;
        case BoundViolation::chain_latency:
          b = &pr.chains[v.index].latency_bound;
          what = "latency bound of chain '" + pr.chains[v.index].id + "'";
          break;
      }
      double old_upper = b->upper;
      b->upper *= scale;
      if (b->lower > b->upper) b->lower /= scale;
      warnings.push_back("warning: relaxed " + what + " from " + fmt(old_upper) + " ms to " + fmt(b->upper) + " ms");
    }
  }
}

}  // namespace srsched
