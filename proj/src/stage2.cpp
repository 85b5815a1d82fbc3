#include "srsched/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace srsched {

PipelinePlan select_parallelism(const std::vector<std::vector<double>>& costs_by_q, int k) {
  if (k < 1) throw std::invalid_argument("need at least one core");
  if (static_cast<int>(costs_by_q.size()) < k) throw std::invalid_argument("cost table shorter than core count");
  PipelinePlan best;
  bool have = false;
  for (int q = 1; q <= k; ++q) {
    const auto& c = costs_by_q[q - 1];
    double p = pipelined_period(c, k, q);
    double rt = std::accumulate(c.begin(), c.end(), 0.0) + p;
    if (!have || rt < best.predicted_response_time - 1e-12) {
      have = true;
      best.q = q;
      best.b = k / q;
      best.k = k;
      best.period = p;
      best.trigger_period = p;
      best.predicted_response_time = rt;
      best.costs = c;
    }
  }
  return best;
}

PipelinePlan plan_subchain(const DagSpec& spec, const SubchainSpec& sc, const Estimates& estimates, int k) {
  std::vector<std::vector<double>> table;
  for (int q = 1; q <= k; ++q) table.push_back(node_costs(spec, sc, estimates, q));
  PipelinePlan plan = select_parallelism(table, k);
  plan.subchain = sc.id;
  plan.trigger_period = std::max(plan.period, subchain_period_bound(spec, sc).lower);
  return plan;
}

const FractionEntry* FractionalSchedule::entry(const std::string& subchain) const {
  for (const auto& e : entries)
    if (e.subchain == subchain) return &e;
  return nullptr;
}

namespace {

struct CompiledChain {
  std::vector<int> var;        // var index per member, -1 for fixed
  std::vector<double> fixed;   // period of fixed members
  ChainWeight weight;
  Bound period_bound, latency_bound;
  bool touches = false;
};

// Index-based view of a problem so evaluation avoids string lookups.
struct Layout {
  std::vector<std::vector<int>> groups;  // var indices per core
  std::map<std::string, int> var_index;
  std::vector<CompiledChain> chains;
  std::vector<double> var_weight;
  double fixed_weight_term = 0.0;
};

Layout layout(const FractionProblem& pr) {
  Layout l;
  std::map<int, int> core_group;
  for (std::size_t i = 0; i < pr.vars.size(); ++i) {
    auto [it, fresh] = core_group.try_emplace(pr.vars[i].core, static_cast<int>(l.groups.size()));
    if (fresh) l.groups.emplace_back();
    l.groups[it->second].push_back(static_cast<int>(i));
    l.var_index[pr.vars[i].id] = static_cast<int>(i);
  }
  for (const auto& c : pr.chains) {
    CompiledChain cc;
    for (const auto& id : c.subchains) {
      auto it = l.var_index.find(id);
      if (it != l.var_index.end()) {
        cc.var.push_back(it->second);
        cc.fixed.push_back(0.0);
        cc.touches = true;
      } else {
        cc.var.push_back(-1);
        cc.fixed.push_back(pr.fixed_periods.at(id));
      }
    }
    cc.weight = c.weight;
    cc.period_bound = c.period_bound;
    cc.latency_bound = c.latency_bound;
    l.chains.push_back(std::move(cc));
  }
  l.var_weight.assign(pr.vars.size(), 0.0);
  for (const auto& [id, w] : pr.subchain_weights) {
    auto it = l.var_index.find(id);
    if (it != l.var_index.end())
      l.var_weight[it->second] += w;
    else if (w != 0.0)
      l.fixed_weight_term += w * pr.fixed_periods.at(id);
  }
  return l;
}

std::vector<double> var_periods(const FractionProblem& pr, const Layout& l, const std::vector<double>& f) {
  std::vector<double> p(pr.vars.size(), 0.0);
  for (const auto& g : l.groups) {
    double h = 0.0;
    for (int i : g) h += f[i] * pr.vars[i].cost;
    double cycle = h * (1.0 + pr.slack_fraction) + pr.switch_overhead_ms * static_cast<double>(g.size());
    for (int i : g) p[i] = cycle / f[i];
  }
  return p;
}

struct Eval {
  double objective = 0.0;
  double violation = 0.0;
  // Log-space violations for the smooth phase.
  double log_violation_sq = 0.0;
};

// `smooth_k` > 0 replaces the chain-period max with a power mean.
Eval evaluate(const FractionProblem& pr, const Layout& l, const std::vector<double>& f, double smooth_k) {
  auto p = var_periods(pr, l, f);
  Eval e;
  auto add_violation = [&](double value, double lo, double hi) {
    if (value > hi) {
      e.violation += value / hi - 1.0;
      double d = std::log(value / hi);
      e.log_violation_sq += d * d;
    }
    if (lo > 0.0 && value < lo) {
      e.violation += lo / value - 1.0;
      double d = std::log(lo / value);
      e.log_violation_sq += d * d;
    }
  };
  for (std::size_t i = 0; i < pr.vars.size(); ++i) {
    const auto& v = pr.vars[i];
    add_violation(p[i], v.period_bound.lower, v.period_bound.upper);
    double budget = f[i] * v.cost;
    if (budget < pr.min_cpu_ms * (1.0 - 1e-12)) add_violation(budget, pr.min_cpu_ms, std::numeric_limits<double>::infinity());
    e.objective += l.var_weight[i] * p[i];
  }
  e.objective += l.fixed_weight_term;
  for (const auto& c : l.chains) {
    double latency = 0.0, period = 0.0;
    for (std::size_t x = 0; x < c.var.size(); ++x) {
      double px = c.var[x] >= 0 ? p[c.var[x]] : c.fixed[x];
      latency += (x == 0 ? 1.0 : 2.0) * px;
      period = std::max(period, px);
    }
    if (smooth_k > 0.0 && c.var.size() > 1) {
      double acc = 0.0;
      for (std::size_t x = 0; x < c.var.size(); ++x) {
        double px = c.var[x] >= 0 ? p[c.var[x]] : c.fixed[x];
        acc += std::pow(px / period, smooth_k);
      }
      period *= std::pow(acc, 1.0 / smooth_k);
    }
    period = std::max(period, c.period_bound.lower);
    latency = std::max(latency, c.latency_bound.lower);
    e.objective += c.weight.latency * latency + c.weight.period * period;
    if (c.touches) {
      add_violation(period, 0.0, c.period_bound.upper);
      add_violation(latency, 0.0, c.latency_bound.upper);
    }
  }
  return e;
}

// Grid scan followed by golden-section refinement around the best sample.
template <class Fn>
double line_min(Fn&& fn, double a, double b, double tol) {
  if (!(b > a)) return a;
  constexpr int kSamples = 24;
  int best = 0;
  double best_v = std::numeric_limits<double>::infinity();
  for (int s = 0; s <= kSamples; ++s) {
    double v = fn(a + (b - a) * s / kSamples);
    if (v < best_v) {
      best_v = v;
      best = s;
    }
  }
  double lo = a + (b - a) * std::max(0, best - 1) / kSamples;
  double hi = a + (b - a) * std::min(kSamples, best + 1) / kSamples;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = fn(x1), f2 = fn(x2);
  while (hi - lo > tol) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = fn(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = fn(x2);
    }
  }
  double x = 0.5 * (lo + hi);
  double candidates[] = {x, a + (b - a) * best / kSamples};
  return fn(candidates[0]) <= fn(candidates[1]) ? candidates[0] : candidates[1];
}

struct Solver {
  const FractionProblem& pr;
  Layout l;
  std::vector<int> rmax;
  std::vector<double> lo, hi;  // fraction domain
  std::vector<int> rank;       // priority rank per var, 0 = highest

  explicit Solver(const FractionProblem& p) : pr(p), l(layout(p)) {
    for (const auto& v : pr.vars) {
      if (v.streaming) {
        double a = pr.min_cpu_ms / v.cost, b = pr.streaming_cap;
        lo.push_back(std::min(a, b));
        hi.push_back(b);
        rmax.push_back(0);
      } else {
        int r = static_cast<int>(std::floor(v.cost / pr.min_cpu_ms + 1e-9));
        r = std::clamp(r, 1, std::max(1, pr.max_reciprocal));
        rmax.push_back(r);
        lo.push_back(1.0 / r);
        hi.push_back(1.0);
      }
      auto it = std::find(pr.priority.begin(), pr.priority.end(), v.id);
      rank.push_back(static_cast<int>(it - pr.priority.begin()));
    }
  }

  double merit_smooth(const std::vector<double>& f) const {
    Eval e = evaluate(pr, l, f, 40.0);
    return std::log(e.objective + 1e-12) + 100.0 * e.log_violation_sq;
  }

  std::vector<double> relax() const {
    const std::size_t n = pr.vars.size();
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = std::log(hi[i]);
    std::vector<double> f(n);
    auto to_f = [&](const std::vector<double>& uu) {
      for (std::size_t i = 0; i < n; ++i) f[i] = std::exp(uu[i]);
      return f;
    };
    double prev = merit_smooth(to_f(u));
    int updates = 0;
    while (updates < 10000) {
      for (std::size_t i = 0; i < n && updates < 10000; ++i, ++updates) {
        auto fn = [&](double x) {
          auto uu = u;
          uu[i] = x;
          return merit_smooth(to_f(uu));
        };
        u[i] = line_min(fn, std::log(lo[i]), std::log(hi[i]), 1e-7);
      }
      double cur = merit_smooth(to_f(u));
      if (std::abs(prev - cur) <= 1e-6 * std::max(1.0, std::abs(cur))) break;
      prev = cur;
    }
    // Scaling every fraction up never lengthens a period, so push the
    // largest non-streaming fraction to 1.
    to_f(u);
    double top = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!pr.vars[i].streaming) top = std::max(top, f[i]);
    if (top > 0.0)
      for (std::size_t i = 0; i < n; ++i) f[i] = std::min(f[i] / top, hi[i]);
    return f;
  }

  struct Point {
    std::vector<double> f;
    Eval e;
  };

  bool better(const Point& a, const Point& b) const {
    const double va = a.e.violation > 1e-9 ? a.e.violation : 0.0;
    const double vb = b.e.violation > 1e-9 ? b.e.violation : 0.0;
    if (va != vb) return va < vb;
    double tol = 1e-9 * std::max(1.0, std::abs(b.e.objective));
    if (a.e.objective < b.e.objective - tol) return true;
    if (a.e.objective > b.e.objective + tol) return false;
    std::vector<int> order(pr.vars.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return rank[x] < rank[y]; });
    for (int i : order) {
      if (a.f[i] > b.f[i] * (1 + 1e-12)) return true;
      if (a.f[i] < b.f[i] * (1 - 1e-12)) return false;
    }
    return false;
  }

  // Re-optimizes streaming fractions with the non-streaming ones fixed.
  Point complete(std::vector<double> f) const {
    std::vector<std::size_t> streaming;
    for (std::size_t i = 0; i < pr.vars.size(); ++i)
      if (pr.vars[i].streaming) streaming.push_back(i);
    if (!streaming.empty()) {
      double scale = evaluate(pr, l, f, 0.0).objective + 1.0;
      auto merit = [&](const std::vector<double>& ff) {
        Eval e = evaluate(pr, l, ff, 0.0);
        return e.objective + 1e3 * scale * e.violation;
      };
      double prev = merit(f);
      for (int sweep = 0; sweep < 50; ++sweep) {
        for (auto i : streaming) {
          auto fn = [&](double x) {
            auto ff = f;
            ff[i] = std::exp(x);
            return merit(ff);
          };
          f[i] = std::exp(line_min(fn, std::log(lo[i]), std::log(hi[i]), 1e-9));
        }
        double cur = merit(f);
        if (streaming.size() == 1 || std::abs(prev - cur) <= 1e-9 * std::max(1.0, std::abs(cur))) break;
        prev = cur;
      }
    }
    return {f, evaluate(pr, l, f, 0.0)};
  }

  // Periods depend only on fraction ratios when slack and overhead are zero,
  // so the relaxed point is rounded at every integer scale. Reciprocals past
  // the bound are clamped to it.
  Point round_grid(const std::vector<double>& relaxed, int* best_scale) const {
    const std::size_t n = pr.vars.size();
    int top = 1;
    for (int r : rmax) top = std::max(top, r);
    std::set<std::vector<int>> seen;
    Point best;
    bool have = false;
    for (int scale = 1; scale <= top; ++scale) {
      std::vector<std::vector<int>> options(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (pr.vars[i].streaming) continue;
        double r = scale / relaxed[i];
        int a = std::clamp(static_cast<int>(std::floor(r + 1e-9)), 1, rmax[i]);
        int b = std::clamp(static_cast<int>(std::ceil(r - 1e-9)), 1, rmax[i]);
        options[i].push_back(a);
        if (b != a) options[i].push_back(b);
      }
      std::size_t total = 1;
      for (const auto& o : options)
        if (!o.empty()) total *= o.size();
      std::vector<double> f(n);
      std::vector<int> key(n, 0);
      for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        for (std::size_t i = 0; i < n; ++i) {
          if (options[i].empty()) {
            f[i] = std::clamp(relaxed[i] / scale, lo[i], hi[i]);
            continue;
          }
          key[i] = options[i][c % options[i].size()];
          f[i] = 1.0 / key[i];
          c /= options[i].size();
        }
        if (!seen.insert(key).second) continue;
        Point pt = complete(f);
        if (!have || better(pt, best)) {
          best = pt;
          have = true;
          *best_scale = scale;
        }
      }
    }
    return best;
  }

  Point polish(Point best) const {
    for (int round = 0; round < 500; ++round) {
      bool improved = false;
      for (std::size_t i = 0; i < pr.vars.size(); ++i) {
        if (pr.vars[i].streaming) continue;
        int r = static_cast<int>(std::lround(1.0 / best.f[i]));
        for (int d : {-1, 1}) {
          int rr = r + d;
          if (rr < 1 || rr > rmax[i]) continue;
          auto f = best.f;
          f[i] = 1.0 / rr;
          Point pt = complete(f);
          if (better(pt, best)) {
            best = pt;
            improved = true;
          }
        }
      }
      if (!improved) break;
    }
    return best;
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::vector<FractionalSchedule> make_core_schedules(const FractionProblem& pr, const std::vector<double>& f) {
  Layout l = layout(pr);
  auto p = var_periods(pr, l, f);
  std::vector<FractionalSchedule> out;
  for (const auto& g : l.groups) {
    FractionalSchedule fs;
    fs.core = pr.vars[g.front()].core;
    for (int i : g) {
      FractionEntry e;
      e.subchain = pr.vars[i].id;
      e.fraction = f[i];
      e.streaming = pr.vars[i].streaming;
      e.reciprocal = e.streaming ? 0 : static_cast<int>(std::lround(1.0 / f[i]));
      e.cost_ms = pr.vars[i].cost;
      e.budget_ms = f[i] * pr.vars[i].cost;
      e.period_ms = p[i];
      fs.hyperperiod_ms += e.budget_ms;
      fs.entries.push_back(e);
    }
    fs.slack_ms = pr.slack_fraction * fs.hyperperiod_ms;
    fs.overhead_ms = pr.switch_overhead_ms * static_cast<double>(g.size());
    fs.cycle_ms = fs.hyperperiod_ms + fs.slack_ms + fs.overhead_ms;
    out.push_back(std::move(fs));
  }
  return out;
}

double fraction_objective(const FractionProblem& problem, const std::vector<double>& f, double* violation) {
  Eval e = evaluate(problem, layout(problem), f, 0.0);
  if (violation) *violation = e.violation;
  return e.objective;
}

FractionSolution solve_fractions(const FractionProblem& problem) {
  if (problem.vars.empty()) throw std::invalid_argument("fraction problem has no subchains");
  FractionProblem pr = problem;
  std::vector<std::string> warnings;
  std::map<std::string, double> relaxed_by;

  while (true) {
    Solver s(pr);
    auto relaxed = s.relax();
    int scale = 1;
    auto best = s.round_grid(relaxed, &scale);
    for (std::size_t i = 0; i < relaxed.size(); ++i)
      if (!pr.vars[i].streaming) relaxed[i] /= scale;
    if (best.e.violation <= 1e-9) {
      FractionSolution out;
      out.fractions = best.f;
      out.relaxed = relaxed;
      out.objective = best.e.objective;
      out.feasible = true;
      out.cores = make_core_schedules(problem, best.f);
      out.warnings = std::move(warnings);
      return out;
    }

    // Relax every bound the best point violates.
    Layout l = layout(pr);
    auto p = var_periods(pr, l, best.f);
    bool relaxed_any = false;
    auto bump = [&](const std::string& key, Bound& b, double value) {
      bool over = value > b.upper * (1 + 1e-9);
      bool under = b.lower > 0.0 && value < b.lower * (1 - 1e-9);
      if (!over && !under) return;
      double& factor = relaxed_by.try_emplace(key, 1.0).first->second;
      if (factor * pr.soft_constraint_scale > 8.0 + 1e-9)
        throw InfeasibleError("bounds remain unsatisfiable after relaxing by the maximum factor of 8 (" + key + ")");
      factor *= pr.soft_constraint_scale;
      if (over) {
        warnings.push_back("warning: relaxed upper " + key + " from " + fmt(b.upper) + " ms to " +
                           fmt(b.upper * pr.soft_constraint_scale) + " ms");
        b.upper *= pr.soft_constraint_scale;
      } else {
        warnings.push_back("warning: relaxed lower " + key + " from " + fmt(b.lower) + " ms to " +
                           fmt(b.lower / pr.soft_constraint_scale) + " ms");
        b.lower /= pr.soft_constraint_scale;
      }
      relaxed_any = true;
    };
    for (std::size_t i = 0; i < pr.vars.size(); ++i)
      bump("period bound of subchain '" + pr.vars[i].id + "'", pr.vars[i].period_bound, p[i]);
    for (auto& c : pr.chains) {
      std::vector<double> ps;
      bool touches = false;
      for (const auto& sid : c.subchains) {
        auto it = l.var_index.find(sid);
        touches = touches || it != l.var_index.end();
        ps.push_back(it != l.var_index.end() ? p[it->second] : pr.fixed_periods.at(sid));
      }
      if (!touches) continue;
      auto m = chain_metrics_stage2(ps);
      bump("period bound of chain '" + c.id + "'", c.period_bound, std::max(m.period, c.period_bound.lower));
      bump("latency bound of chain '" + c.id + "'", c.latency_bound, std::max(m.latency, c.latency_bound.lower));
    }
    if (!relaxed_any) throw InfeasibleError("no fraction assignment satisfies the minimum CPU share");
  }
}

}  // namespace srsched
