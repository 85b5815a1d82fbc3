#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "srsched/simulator.hpp"

namespace srsched {

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  s.p95 = nearest_rank(values, 0.95);
  s.max = *std::max_element(values.begin(), values.end());
  return s;
}

double EmpiricalMetrics::total_violation_s() const {
  double total = 0.0;
  for (const auto& [key, v] : violation_s) total += v;
  return total;
}

std::string EmpiricalMetrics::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "scope,entity,metric,samples,mean_ms,p95_ms,max_ms,throughput_hz,violation_s\n";
  auto row = [&](const char* scope, const std::string& id, const char* metric, const std::vector<double>& v) {
    Summary s = summarize(v);
    os << scope << ',' << id << ',' << metric << ',' << s.count << ',';
    if (s.count)
      os << s.mean << ',' << s.p95 << ',' << s.max;
    else
      os << ",,";
    os << ",,\n";
  };
  for (const auto& [id, c] : chains) {
    row("chain", id, "response_time", c.response_ms);
    row("chain", id, "latency", c.latency_ms);
    row("chain", id, "period", c.period_ms);
  }
  for (const auto& [id, v] : subchain_period_ms) row("subchain", id, "period", v);
  for (const auto& [id, hz] : node_throughput_hz) os << "node," << id << ",throughput,,,,," << hz << ",\n";
  for (const auto& [key, s] : violation_s) os << "bound," << key << ",violation,,,,,," << s << '\n';
  return os.str();
}

namespace {

// Time inside [from, to] during which a period bound is breached, given the
// ascending output instants.
double period_violation_us(const std::vector<std::int64_t>& outputs, const Bound& b, std::int64_t from,
                           std::int64_t to) {
  auto clip = [&](double a, double z) {
    a = std::max(a, static_cast<double>(from));
    z = std::min(z, static_cast<double>(to));
    return z > a ? z - a : 0.0;
  };
  const double upper = b.upper * 1000.0, lower = b.lower * 1000.0;
  double total = 0.0;
  double prev = 0.0;
  bool seen = false;
  for (std::int64_t t : outputs) {
    if (b.has_upper()) total += clip(prev + upper, static_cast<double>(t));
    if (b.has_lower() && seen && static_cast<double>(t) - prev < lower) total += clip(prev, static_cast<double>(t));
    prev = static_cast<double>(t);
    seen = true;
  }
  if (b.has_upper()) total += clip(prev + upper, static_cast<double>(to));
  return total;
}

}  // namespace

EmpiricalMetrics measure(const SimEventTrace& trace, const DagSpec& spec) {
  EmpiricalMetrics m;
  const auto from = static_cast<std::int64_t>(std::llround(trace.warmup_s * 1e6));
  const auto to = static_cast<std::int64_t>(std::llround(trace.duration_s * 1e6));
  m.window_s = std::max(0.0, trace.duration_s - trace.warmup_s);

  std::map<std::string, std::set<std::int64_t>> triggers;
  std::map<std::string, std::vector<const SimEvent*>> outputs;
  std::map<std::string, std::size_t> starts;
  for (const auto& e : trace.events) {
    if (e.kind == EventKind::trigger) triggers[e.entity].insert(e.t_us);
    if (e.kind == EventKind::output) outputs[e.entity].push_back(&e);
    if (e.kind == EventKind::start && e.t_us >= from) ++starts[e.entity];
  }

  std::map<std::string, std::vector<std::int64_t>> sink_times;
  std::map<std::string, std::vector<std::pair<std::int64_t, double>>> sink_latency;
  for (std::size_t c = 0; c < trace.chains.size(); ++c) {
    const ChainSpec& chain = spec.chains.at(c);
    const std::string& source = chain.subchain_ids.front();
    ChainSamples samples;
    std::int64_t last_token = -1, last_out = -1;
    for (const SimEvent* e : outputs[chain.subchain_ids.back()]) {
      auto it = std::find_if(e->lineage.begin(), e->lineage.end(), [&](const auto& l) { return l.first == int(c); });
      if (it == e->lineage.end()) continue;
      const std::int64_t token = it->second;
      if (!triggers[source].count(token))
        throw SimInvariantError("lineage gap: output of '" + chain.id + "' at " + std::to_string(e->t_us) +
                                " us has no capture at " + std::to_string(token) + " us");
      if (token <= last_token) continue;
      if (last_token >= 0 && e->t_us >= from) {
        const std::int64_t rt = e->t_us - last_token, lat = e->t_us - token;
        if (rt != lat + (token - last_token)) throw SimInvariantError("response time identity broken");
        samples.response_ms.push_back(static_cast<double>(rt) / 1000.0);
        samples.latency_ms.push_back(static_cast<double>(lat) / 1000.0);
        samples.period_ms.push_back(static_cast<double>(e->t_us - last_out) / 1000.0);
        sink_latency[chain.id].emplace_back(e->t_us, static_cast<double>(lat) / 1000.0);
      }
      sink_times[chain.id].push_back(e->t_us);
      last_token = token;
      last_out = e->t_us;
    }
    m.chains[chain.id] = std::move(samples);
  }

  for (const auto& sc : spec.subchains) {
    std::vector<double> gaps;
    const auto& outs = outputs[sc.id];
    for (std::size_t i = 1; i < outs.size(); ++i)
      if (outs[i - 1]->t_us >= from) gaps.push_back(static_cast<double>(outs[i]->t_us - outs[i - 1]->t_us) / 1000.0);
    m.subchain_period_ms[sc.id] = std::move(gaps);
    for (const auto& n : sc.node_ids)
      m.node_throughput_hz[n] = m.window_s > 0.0 ? static_cast<double>(starts[n]) / m.window_s : 0.0;
  }

  for (const auto& [node, b] : spec.objective.node_period_bounds) {
    auto si = spec.subchain_of(node);
    if (!si) continue;
    std::vector<std::int64_t> times;
    for (const SimEvent* e : outputs[spec.subchains[*si].id]) times.push_back(e->t_us);
    m.violation_s["node:" + node + ".period"] = period_violation_us(times, b, from, to) / 1e6;
  }
  for (const auto& [chain, b] : spec.objective.chain_period_bounds)
    m.violation_s["chain:" + chain + ".period"] = period_violation_us(sink_times[chain], b, from, to) / 1e6;
  for (const auto& [chain, b] : spec.objective.chain_latency_bounds) {
    double total = 0.0;
    const auto& times = sink_times[chain];
    for (const auto& [t, lat] : sink_latency[chain]) {
      if (lat <= b.upper && lat >= b.lower) continue;
      auto it = std::lower_bound(times.begin(), times.end(), t);
      if (it != times.begin()) total += static_cast<double>(t - std::max(*std::prev(it), from));
    }
    m.violation_s["chain:" + chain + ".latency"] = total / 1e6;
  }
  return m;
}

std::string priority_chain(const DagSpec& spec) {
  if (spec.chains.empty()) return {};
  std::string top;
  for (const auto& id : spec.effective_priority())
    if (spec.may_steal(id)) {
      top = id;
      break;
    }
  const ChainSpec* best = nullptr;
  double best_w = -1.0;
  for (const auto& c : spec.chains) {
    if (std::find(c.subchain_ids.begin(), c.subchain_ids.end(), top) == c.subchain_ids.end()) continue;
    auto it = spec.objective.chain_weights.find(c.id);
    double w = it == spec.objective.chain_weights.end() ? 0.0 : it->second.latency + it->second.period;
    if (!best || w > best_w || (w == best_w && c.subchain_ids.size() < best->subchain_ids.size())) {
      best = &c;
      best_w = w;
    }
  }
  return best ? best->id : spec.chains.front().id;
}

}  // namespace srsched
