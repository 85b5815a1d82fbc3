#include "srsched/model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"

namespace srsched {

using nlohmann::json;

ComputeModel ComputeModel::constant_ms(double v) {
  ComputeModel m;
  m.kind = Kind::constant;
  m.value = v;
  return m;
}

ComputeModel ComputeModel::uniform_ms(double lo, double hi) {
  ComputeModel m;
  m.kind = Kind::uniform;
  m.lo = lo;
  m.hi = hi;
  return m;
}

double ComputeModel::nominal_ms() const {
  switch (kind) {
    case Kind::constant:
      return value;
    case Kind::uniform:
    case Kind::truncated_normal:
      return hi;
    case Kind::bimodal:
      return p_cheap * parts.at(0).nominal_ms() + (1.0 - p_cheap) * parts.at(1).nominal_ms();
    case Kind::drift:
    case Kind::spike:
      return parts.at(0).nominal_ms();
    case Kind::trace:
      return trace.empty() ? value : *std::max_element(trace.begin(), trace.end());
  }
  return value;
}

std::string to_string(ComputeModel::Kind kind) {
  switch (kind) {
    case ComputeModel::Kind::constant: return "constant";
    case ComputeModel::Kind::uniform: return "uniform";
    case ComputeModel::Kind::truncated_normal: return "truncated_normal";
    case ComputeModel::Kind::bimodal: return "bimodal";
    case ComputeModel::Kind::drift: return "drift";
    case ComputeModel::Kind::spike: return "spike";
    case ComputeModel::Kind::trace: return "trace";
  }
  return "constant";
}

namespace {

ComputeModel::Kind kind_from_string(const std::string& s) {
  for (auto k : {ComputeModel::Kind::constant, ComputeModel::Kind::uniform,
                 ComputeModel::Kind::truncated_normal, ComputeModel::Kind::bimodal,
                 ComputeModel::Kind::drift, ComputeModel::Kind::spike, ComputeModel::Kind::trace}) {
    if (to_string(k) == s) return k;
  }
  throw SpecError("unknown compute model kind '" + s + "'");
}

constexpr double kMinSampleMs = 0.001;

}  // namespace

ComputeSampler::ComputeSampler(const ComputeModel& model, std::uint64_t seed)
    : model_(&model), rng_(seed) {}

double ComputeSampler::sample(double t_s) {
  return std::max(kMinSampleMs, draw(*model_, t_s, 1));
}

bool ComputeSampler::spike_due(const ComputeModel& m, double t_s, std::size_t path) {
  auto& st = spikes_[path];
  if (!m.spike_times_s.empty()) {
    if (st.pending.empty() && st.next == 0) st.pending = m.spike_times_s;
  } else if (m.spike_rate_hz > 0.0) {
    // Poisson arrivals, generated lazily so draws stay reproducible.
    std::exponential_distribution<double> gap(m.spike_rate_hz);
    while (st.horizon_s <= t_s) {
      st.horizon_s += gap(rng_);
      st.pending.push_back(st.horizon_s);
    }
  }
  bool due = false;
  while (st.next < st.pending.size() && st.pending[st.next] <= t_s) {
    due = true;
    ++st.next;
  }
  return due;
}

double ComputeSampler::draw(const ComputeModel& m, double t_s, std::size_t path) {
  using Kind = ComputeModel::Kind;
  switch (m.kind) {
    case Kind::constant:
      return m.value;
    case Kind::uniform: {
      std::uniform_real_distribution<double> d(m.lo, m.hi);
      return d(rng_);
    }
    case Kind::truncated_normal: {
      std::normal_distribution<double> d(m.mean, m.stddev);
      for (int i = 0; i < 1000; ++i) {
        double v = d(rng_);
        if (v >= m.lo && v <= m.hi) return v;
      }
      return std::clamp(m.mean, m.lo, m.hi);
    }
    case Kind::bimodal: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      bool cheap = u(rng_) < m.p_cheap;
      return draw(m.parts.at(cheap ? 0 : 1), t_s, path * 4 + (cheap ? 0 : 1));
    }
    case Kind::drift:
      return draw(m.parts.at(0), t_s, path * 4 + 2) + m.slope_ms_per_s * t_s;
    case Kind::spike: {
      double base = draw(m.parts.at(0), t_s, path * 4 + 2);
      return spike_due(m, t_s, path) ? m.spike_cost_ms : base;
    }
    case Kind::trace: {
      if (m.trace.empty()) return m.value;
      auto& pos = trace_pos_[path];
      double v = m.trace[pos % m.trace.size()];
      ++pos;
      return v;
    }
  }
  return m.value;
}

double NodeSpec::cost_with_cores(double base_ms, int q) const {
  if (q <= 1 || !parallelizable) return base_ms;
  if (!max_parallel_cost_table.empty()) {
    auto c1 = max_parallel_cost_table.find(1);
    double ref = c1 != max_parallel_cost_table.end() ? c1->second : compute_model.nominal_ms();
    // Largest tabulated q' <= q; the table is non-increasing in q.
    auto it = max_parallel_cost_table.upper_bound(q);
    if (it == max_parallel_cost_table.begin()) return base_ms;
    --it;
    return ref > 0.0 ? base_ms * it->second / ref : base_ms;
  }
  return base_ms / q;
}

const NodeSpec& DagSpec::node(const std::string& id) const {
  auto i = node_index(id);
  if (!i) throw SpecError("unknown node '" + id + "'");
  return nodes[*i];
}

const SubchainSpec& DagSpec::subchain(const std::string& id) const {
  auto i = subchain_index(id);
  if (!i) throw SpecError("unknown subchain '" + id + "'");
  return subchains[*i];
}

std::optional<std::size_t> DagSpec::node_index(const std::string& id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return i;
  return std::nullopt;
}

std::optional<std::size_t> DagSpec::subchain_index(const std::string& id) const {
  for (std::size_t i = 0; i < subchains.size(); ++i)
    if (subchains[i].id == id) return i;
  return std::nullopt;
}

std::optional<std::size_t> DagSpec::subchain_of(const std::string& id) const {
  for (std::size_t i = 0; i < subchains.size(); ++i)
    for (const auto& n : subchains[i].node_ids)
      if (n == id) return i;
  return std::nullopt;
}

std::vector<std::string> DagSpec::predecessors(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& e : edges)
    if (e.to == id) out.push_back(e.from);
  return out;
}

std::vector<std::string> DagSpec::successors(const std::string& id) const {
  std::vector<std::string> out;
  for (const auto& e : edges)
    if (e.from == id) out.push_back(e.to);
  return out;
}

std::vector<std::string> DagSpec::effective_priority() const {
  if (!objective.priority.empty()) return objective.priority;
  // Default: descending total weight touching the subchain, declaration order on ties.
  std::vector<std::pair<double, std::size_t>> score;
  for (std::size_t i = 0; i < subchains.size(); ++i) {
    double w = 0.0;
    auto it = objective.subchain_weights.find(subchains[i].id);
    if (it != objective.subchain_weights.end()) w += it->second;
    for (const auto& c : chains) {
      auto cw = objective.chain_weights.find(c.id);
      if (cw == objective.chain_weights.end()) continue;
      if (std::find(c.subchain_ids.begin(), c.subchain_ids.end(), subchains[i].id) !=
          c.subchain_ids.end())
        w += cw->second.latency + cw->second.period;
    }
    score.emplace_back(w, i);
  }
  std::stable_sort(score.begin(), score.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::string> out;
  for (const auto& [w, i] : score) out.push_back(subchains[i].id);
  return out;
}

std::vector<std::string> DagSpec::effective_order() const {
  if (!objective.order.empty()) return objective.order;
  return effective_priority();
}

bool DagSpec::may_steal(const std::string& subchain) const {
  if (objective.stealers.empty()) return true;
  return std::find(objective.stealers.begin(), objective.stealers.end(), subchain) !=
         objective.stealers.end();
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

double num(const json& j, const char* key, double fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_number()) throw SpecError(std::string("field '") + key + "' must be a number");
  return it->get<double>();
}

bool flag(const json& j, const char* key, bool fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) throw SpecError(std::string("field '") + key + "' must be a boolean");
  return it->get<bool>();
}

std::string str(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string())
    throw SpecError(std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

std::vector<double> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open trace file '" + path + "'");
  std::vector<double> out;
  std::string line;
  while (std::getline(in, line)) {
    auto comma = line.find_last_of(',');
    std::string cell = comma == std::string::npos ? line : line.substr(comma + 1);
    try {
      std::size_t used = 0;
      double v = std::stod(cell, &used);
      if (v > 0.0) out.push_back(v);
    } catch (const std::exception&) {
      // header or blank line
    }
  }
  if (out.empty()) throw SpecError("trace file '" + path + "' has no positive durations");
  return out;
}

ComputeModel parse_model(const json& j, const std::string& base_dir) {
  if (j.is_number()) return ComputeModel::constant_ms(j.get<double>());
  if (!j.is_object()) throw SpecError("compute_model must be an object or a number");
  ComputeModel m;
  m.kind = kind_from_string(str(j, "kind"));
  using Kind = ComputeModel::Kind;
  switch (m.kind) {
    case Kind::constant:
      m.value = num(j, "value", 1.0);
      break;
    case Kind::uniform:
      m.lo = num(j, "lo", 0.0);
      m.hi = num(j, "hi", 0.0);
      break;
    case Kind::truncated_normal:
      m.mean = num(j, "mean", 0.0);
      m.stddev = num(j, "stddev", 0.0);
      m.lo = num(j, "lo", 0.0);
      m.hi = num(j, "hi", 0.0);
      break;
    case Kind::bimodal:
      m.p_cheap = num(j, "p_cheap", 0.5);
      m.parts.push_back(parse_model(j.at("cheap"), base_dir));
      m.parts.push_back(parse_model(j.at("expensive"), base_dir));
      break;
    case Kind::drift:
      m.slope_ms_per_s = num(j, "slope_ms_per_s", 0.0);
      m.parts.push_back(parse_model(j.at("base"), base_dir));
      break;
    case Kind::spike:
      m.spike_rate_hz = num(j, "spike_rate_hz", 0.0);
      m.spike_cost_ms = num(j, "spike_cost_ms", 0.0);
      if (j.contains("spike_times_s")) m.spike_times_s = j.at("spike_times_s").get<std::vector<double>>();
      m.parts.push_back(parse_model(j.at("base"), base_dir));
      break;
    case Kind::trace: {
      m.trace_path = str(j, "path");
      if (j.contains("values")) {
        m.trace = j.at("values").get<std::vector<double>>();
      } else {
        std::filesystem::path p(m.trace_path);
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        m.trace = load_trace(p.string());
      }
      break;
    }
  }
  return m;
}

json render_model(const ComputeModel& m) {
  using Kind = ComputeModel::Kind;
  json j;
  j["kind"] = to_string(m.kind);
  switch (m.kind) {
    case Kind::constant:
      j["value"] = m.value;
      break;
    case Kind::uniform:
      j["lo"] = m.lo;
      j["hi"] = m.hi;
      break;
    case Kind::truncated_normal:
      j["mean"] = m.mean;
      j["stddev"] = m.stddev;
      j["lo"] = m.lo;
      j["hi"] = m.hi;
      break;
    case Kind::bimodal:
      j["p_cheap"] = m.p_cheap;
      j["cheap"] = render_model(m.parts.at(0));
      j["expensive"] = render_model(m.parts.at(1));
      break;
    case Kind::drift:
      j["slope_ms_per_s"] = m.slope_ms_per_s;
      j["base"] = render_model(m.parts.at(0));
      break;
    case Kind::spike:
      j["spike_rate_hz"] = m.spike_rate_hz;
      j["spike_cost_ms"] = m.spike_cost_ms;
      if (!m.spike_times_s.empty()) j["spike_times_s"] = m.spike_times_s;
      j["base"] = render_model(m.parts.at(0));
      break;
    case Kind::trace:
      j["path"] = m.trace_path;
      j["values"] = m.trace;
      break;
  }
  return j;
}

Bound parse_bound(const json& j, const char* lo_key, const char* hi_key) {
  Bound b;
  b.lower = num(j, lo_key, 0.0);
  b.upper = num(j, hi_key, std::numeric_limits<double>::infinity());
  return b;
}

void tighten(Bound& into, const Bound& b) {
  into.lower = std::max(into.lower, b.lower);
  into.upper = std::min(into.upper, b.upper);
}

json render_bound(const std::string& key_name, const std::string& key, const Bound& b) {
  json j;
  j[key_name] = key;
  if (b.has_lower()) j["lower_ms"] = b.lower;
  if (b.has_upper()) j["upper_ms"] = b.upper;
  return j;
}

void parse_constants(const json& j, Constants& c) {
  c.switch_overhead_ms = num(j, "switch_overhead_ms", c.switch_overhead_ms);
  c.slack_fraction = num(j, "slack_fraction", c.slack_fraction);
  c.min_cpu_ms_per_hyperperiod = num(j, "min_cpu_ms_per_hyperperiod", c.min_cpu_ms_per_hyperperiod);
  c.stage1_period_s = num(j, "stage1_period_s", c.stage1_period_s);
  c.stage2_period_s = num(j, "stage2_period_s", c.stage2_period_s);
  c.estimator_window = static_cast<int>(num(j, "estimator_window", c.estimator_window));
  c.estimator_percentile = num(j, "estimator_percentile", c.estimator_percentile);
  c.bootstrap_compute_ms = num(j, "bootstrap_compute_ms", c.bootstrap_compute_ms);
  c.bootstrap_solve_delay_s = num(j, "bootstrap_solve_delay_s", c.bootstrap_solve_delay_s);
  c.max_reciprocal = static_cast<int>(num(j, "max_reciprocal", c.max_reciprocal));
  c.stage1_solve_cost_ms = num(j, "stage1_solve_cost_ms", c.stage1_solve_cost_ms);
  c.stage2_solve_cost_ms = num(j, "stage2_solve_cost_ms", c.stage2_solve_cost_ms);
}

json render_constants(const Constants& c) {
  return json{{"switch_overhead_ms", c.switch_overhead_ms},
              {"slack_fraction", c.slack_fraction},
              {"min_cpu_ms_per_hyperperiod", c.min_cpu_ms_per_hyperperiod},
              {"stage1_period_s", c.stage1_period_s},
              {"stage2_period_s", c.stage2_period_s},
              {"estimator_window", c.estimator_window},
              {"estimator_percentile", c.estimator_percentile},
              {"bootstrap_compute_ms", c.bootstrap_compute_ms},
              {"bootstrap_solve_delay_s", c.bootstrap_solve_delay_s},
              {"max_reciprocal", c.max_reciprocal},
              {"stage1_solve_cost_ms", c.stage1_solve_cost_ms},
              {"stage2_solve_cost_ms", c.stage2_solve_cost_ms}};
}

void require_unique(const std::vector<std::string>& ids, const char* what) {
  std::set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) throw SpecError(std::string("duplicate ") + what + " id '" + id + "'");
}

}  // namespace

DagSpec parse_spec(const std::string& text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::ostringstream os;
    os << "syntax error at byte " << e.byte << ": " << e.what();
    throw SpecError(os.str());
  }
  if (!doc.is_object()) throw SpecError("spec document must be a JSON object");
  if (!doc.contains("schema") || doc.at("schema") != 1)
    throw SpecError("spec document requires \"schema\": 1");

  DagSpec spec;
  try {
    for (const auto& jn : doc.at("nodes")) {
      NodeSpec n;
      n.id = str(jn, "id");
      n.compute_model = parse_model(jn.at("compute_model"), base_dir);
      n.parallelizable = flag(jn, "parallelizable", false);
      n.streaming = flag(jn, "streaming", false);
      n.explicitly_scheduled = flag(jn, "explicitly_scheduled", true);
      n.rate_hz = num(jn, "rate_hz", 0.0);
      if (jn.contains("max_parallel_cost_table")) {
        for (const auto& [k, v] : jn.at("max_parallel_cost_table").items())
          n.max_parallel_cost_table[std::stoi(k)] = v.get<double>();
      }
      spec.nodes.push_back(std::move(n));
    }
    std::vector<std::string> ids;
    for (const auto& n : spec.nodes) ids.push_back(n.id);
    require_unique(ids, "node");

    for (const auto& je : doc.value("edges", json::array())) {
      EdgeSpec e;
      if (je.is_array() && je.size() == 2) {
        e.from = je[0].get<std::string>();
        e.to = je[1].get<std::string>();
      } else {
        e.from = str(je, "from");
        e.to = str(je, "to");
      }
      for (const auto* end : {&e.from, &e.to})
        if (!spec.node_index(*end)) throw SpecError("edge references unknown node '" + *end + "'");
      spec.edges.push_back(std::move(e));
    }

    for (const auto& js : doc.at("subchains")) {
      SubchainSpec s;
      s.id = str(js, "id");
      s.node_ids = js.at("node_ids").get<std::vector<std::string>>();
      if (s.node_ids.empty()) throw SpecError("subchain '" + s.id + "' has no nodes");
      for (const auto& n : s.node_ids)
        if (!spec.node_index(n)) throw SpecError("subchain '" + s.id + "' references unknown node '" + n + "'");
      spec.subchains.push_back(std::move(s));
    }
    ids.clear();
    for (const auto& s : spec.subchains) ids.push_back(s.id);
    require_unique(ids, "subchain");

    for (const auto& jc : doc.value("chains", json::array())) {
      ChainSpec c;
      c.id = str(jc, "id");
      c.subchain_ids = jc.at("subchain_ids").get<std::vector<std::string>>();
      for (const auto& s : c.subchain_ids)
        if (!spec.subchain_index(s)) throw SpecError("chain '" + c.id + "' references unknown subchain '" + s + "'");
      spec.chains.push_back(std::move(c));
    }
    ids.clear();
    for (const auto& c : spec.chains) ids.push_back(c.id);
    require_unique(ids, "chain");

    auto known_chain = [&](const std::string& id) {
      for (const auto& c : spec.chains)
        if (c.id == id) return;
      throw SpecError("objective references unknown chain '" + id + "'");
    };
    auto known_subchain = [&](const std::string& id) {
      if (!spec.subchain_index(id)) throw SpecError("objective references unknown subchain '" + id + "'");
    };

    const json obj = doc.value("objective", json::object());
    auto& o = spec.objective;
    for (const auto& jw : obj.value("chain_weights", json::array())) {
      auto id = str(jw, "chain");
      known_chain(id);
      double rt = num(jw, "response_time", 0.0);
      auto& w = o.chain_weights[id];
      w.latency += num(jw, "latency", 0.0) + rt;
      w.period += num(jw, "period", 0.0) + rt;
    }
    for (const auto& jw : obj.value("subchain_weights", json::array())) {
      auto id = str(jw, "subchain");
      known_subchain(id);
      o.subchain_weights[id] += num(jw, "period", 0.0);
    }
    for (const auto& jb : obj.value("node_throughput_bounds", json::array())) {
      auto id = str(jb, "node");
      if (!spec.node_index(id)) throw SpecError("objective references unknown node '" + id + "'");
      Bound b;
      double lo_hz = num(jb, "lower_hz", 0.0);
      double hi_hz = num(jb, "upper_hz", 0.0);
      if (hi_hz > 0.0) b.lower = 1000.0 / hi_hz;
      if (lo_hz > 0.0) b.upper = 1000.0 / lo_hz;
      auto [it, fresh] = o.node_period_bounds.try_emplace(id, b);
      if (!fresh) tighten(it->second, b);
    }
    for (const auto& jb : obj.value("node_period_bounds", json::array())) {
      auto id = str(jb, "node");
      if (!spec.node_index(id)) throw SpecError("objective references unknown node '" + id + "'");
      Bound b = parse_bound(jb, "lower_ms", "upper_ms");
      auto [it, fresh] = o.node_period_bounds.try_emplace(id, b);
      if (!fresh) tighten(it->second, b);
    }
    for (const auto& [key, target] : {std::pair{"chain_period_bounds", &o.chain_period_bounds},
                                      std::pair{"chain_latency_bounds", &o.chain_latency_bounds}}) {
      for (const auto& jb : obj.value(key, json::array())) {
        auto id = str(jb, "chain");
        known_chain(id);
        (*target)[id] = parse_bound(jb, "lower_ms", "upper_ms");
      }
    }
    for (const auto& [key, target] : {std::pair{"priority", &o.priority}, std::pair{"order", &o.order},
                                      std::pair{"stealers", &o.stealers}}) {
      if (obj.contains(key)) {
        *target = obj.at(key).get<std::vector<std::string>>();
        for (const auto& s : *target) known_subchain(s);
      }
    }
    o.soft_constraint_scale = num(obj, "soft_constraint_scale", o.soft_constraint_scale);

    spec.cores = static_cast<int>(num(doc, "cores", 1));
    spec.idle_sink = flag(doc, "idle_sink", false);
    if (doc.contains("constants")) parse_constants(doc.at("constants"), spec.constants);
  } catch (const json::exception& e) {
    throw SpecError(std::string("malformed spec: ") + e.what());
  }
  return spec;
}

DagSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open spec file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  auto dir = std::filesystem::path(path).parent_path().string();
  return parse_spec(ss.str(), dir.empty() ? "." : dir);
}

std::string render_spec(const DagSpec& spec) {
  json doc;
  doc["schema"] = 1;
  doc["cores"] = spec.cores;
  if (spec.idle_sink) doc["idle_sink"] = true;
  doc["nodes"] = json::array();
  for (const auto& n : spec.nodes) {
    json jn{{"id", n.id},
            {"compute_model", render_model(n.compute_model)},
            {"parallelizable", n.parallelizable},
            {"streaming", n.streaming},
            {"explicitly_scheduled", n.explicitly_scheduled}};
    if (n.rate_hz > 0.0) jn["rate_hz"] = n.rate_hz;
    if (!n.max_parallel_cost_table.empty()) {
      json t = json::object();
      for (const auto& [q, c] : n.max_parallel_cost_table) t[std::to_string(q)] = c;
      jn["max_parallel_cost_table"] = t;
    }
    doc["nodes"].push_back(jn);
  }
  doc["edges"] = json::array();
  for (const auto& e : spec.edges) doc["edges"].push_back({e.from, e.to});
  doc["subchains"] = json::array();
  for (const auto& s : spec.subchains) doc["subchains"].push_back({{"id", s.id}, {"node_ids", s.node_ids}});
  doc["chains"] = json::array();
  for (const auto& c : spec.chains) doc["chains"].push_back({{"id", c.id}, {"subchain_ids", c.subchain_ids}});

  const auto& o = spec.objective;
  json obj;
  obj["chain_weights"] = json::array();
  for (const auto& [id, w] : o.chain_weights)
    obj["chain_weights"].push_back({{"chain", id}, {"latency", w.latency}, {"period", w.period}});
  obj["subchain_weights"] = json::array();
  for (const auto& [id, w] : o.subchain_weights) obj["subchain_weights"].push_back({{"subchain", id}, {"period", w}});
  obj["node_period_bounds"] = json::array();
  for (const auto& [id, b] : o.node_period_bounds) obj["node_period_bounds"].push_back(render_bound("node", id, b));
  obj["chain_period_bounds"] = json::array();
  for (const auto& [id, b] : o.chain_period_bounds) obj["chain_period_bounds"].push_back(render_bound("chain", id, b));
  obj["chain_latency_bounds"] = json::array();
  for (const auto& [id, b] : o.chain_latency_bounds) obj["chain_latency_bounds"].push_back(render_bound("chain", id, b));
  obj["priority"] = o.priority;
  obj["order"] = o.order;
  obj["stealers"] = o.stealers;
  obj["soft_constraint_scale"] = o.soft_constraint_scale;
  doc["objective"] = obj;
  doc["constants"] = render_constants(spec.constants);
  return doc.dump(2);
}

void apply_override(DagSpec& spec, const std::string& key, const std::string& value) {
  double v = 0.0;
  try {
    v = std::stod(value);
  } catch (const std::exception&) {
    throw SpecError("override '" + key + "' needs a numeric value, got '" + value + "'");
  }
  if (key == "cores") {
    spec.cores = static_cast<int>(v);
    return;
  }
  json c = json::parse(render_spec(spec)).at("constants");
  if (!c.contains(key)) throw SpecError("unknown override key '" + key + "'");
  c[key] = v;
  parse_constants(c, spec.constants);
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationReport::mentions(const std::string& fragment) const {
  return std::any_of(issues.begin(), issues.end(),
                     [&](const std::string& s) { return s.find(fragment) != std::string::npos; });
}

namespace {

void check_model(const ComputeModel& m, const std::string& where, std::vector<std::string>& out) {
  using Kind = ComputeModel::Kind;
  switch (m.kind) {
    case Kind::constant:
      if (!(m.value > 0.0)) out.push_back(where + ": constant compute time must be positive");
      break;
    case Kind::uniform:
      if (!(m.lo > 0.0 && m.lo <= m.hi)) out.push_back(where + ": uniform requires 0 < lo <= hi");
      break;
    case Kind::truncated_normal:
      if (!(m.lo > 0.0 && m.lo <= m.hi && m.stddev >= 0.0))
        out.push_back(where + ": truncated_normal requires 0 < lo <= hi and stddev >= 0");
      break;
    case Kind::bimodal:
      if (!(m.p_cheap > 0.0 && m.p_cheap < 1.0)) out.push_back(where + ": bimodal requires 0 < p_cheap < 1");
      break;
    case Kind::drift:
      break;
    case Kind::spike:
      if (!(m.spike_cost_ms > 0.0)) out.push_back(where + ": spike cost must be positive");
      if (m.spike_rate_hz < 0.0) out.push_back(where + ": spike rate must be non-negative");
      break;
    case Kind::trace:
      if (m.trace.empty()) out.push_back(where + ": trace has no samples");
      for (double v : m.trace)
        if (!(v > 0.0)) {
          out.push_back(where + ": trace durations must be positive");
          break;
        }
      break;
  }
  for (const auto& p : m.parts) check_model(p, where, out);
}

bool has_cycle(std::size_t n, const std::vector<std::vector<std::size_t>>& adj) {
  std::vector<int> indeg(n, 0);
  for (const auto& a : adj)
    for (auto v : a) ++indeg[v];
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) stack.push_back(i);
  std::size_t seen = 0;
  while (!stack.empty()) {
    auto u = stack.back();
    stack.pop_back();
    ++seen;
    for (auto v : adj[u])
      if (--indeg[v] == 0) stack.push_back(v);
  }
  return seen != n;
}

bool edge_exists(const DagSpec& spec, const std::string& a, const std::string& b) {
  return std::any_of(spec.edges.begin(), spec.edges.end(),
                     [&](const EdgeSpec& e) { return e.from == a && e.to == b; });
}

// Subchain-level adjacency: A -> B when a node of A reaches a node of B
// through zero or more nodes that are not explicitly scheduled.
std::vector<std::vector<std::size_t>> subchain_graph(const DagSpec& spec) {
  const auto n = spec.subchains.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::set<std::size_t> targets;
    std::set<std::string> visited;
    std::vector<std::string> frontier;
    for (const auto& id : spec.subchains[a].node_ids)
      for (const auto& s : spec.successors(id)) frontier.push_back(s);
    while (!frontier.empty()) {
      auto v = frontier.back();
      frontier.pop_back();
      if (!visited.insert(v).second) continue;
      auto sc = spec.subchain_of(v);
      if (sc) {
        if (*sc != a) targets.insert(*sc);
        continue;
      }
      for (const auto& s : spec.successors(v)) frontier.push_back(s);
    }
    adj[a].assign(targets.begin(), targets.end());
  }
  return adj;
}

bool is_source_subchain(const DagSpec& spec, std::size_t idx) {
  const auto& head = spec.subchains[idx].head();
  auto preds = spec.predecessors(head);
  if (preds.empty()) return true;
  // Reachable from an unscheduled source through unscheduled nodes only.
  std::set<std::string> visited;
  std::vector<std::string> frontier = preds;
  while (!frontier.empty()) {
    auto v = frontier.back();
    frontier.pop_back();
    if (!visited.insert(v).second) continue;
    if (spec.subchain_of(v)) continue;
    auto pp = spec.predecessors(v);
    if (pp.empty()) return true;
    for (const auto& p : pp) frontier.push_back(p);
  }
  return false;
}

}  // namespace

ValidationReport validate(const DagSpec& spec) {
  ValidationReport r;
  auto& out = r.issues;
  if (spec.cores < 1) out.push_back("core count must be at least 1");

  std::map<std::string, int> membership;
  for (const auto& s : spec.subchains)
    for (const auto& n : s.node_ids) ++membership[n];

  for (const auto& n : spec.nodes) {
    check_model(n.compute_model, "node '" + n.id + "'", out);
    int m = membership.count(n.id) ? membership.at(n.id) : 0;
    if (m > 1) out.push_back("node in multiple subchains: '" + n.id + "'");
    if (n.explicitly_scheduled && m == 0) out.push_back("node not in any subchain: '" + n.id + "'");
    if (!n.explicitly_scheduled && !(n.rate_hz > 0.0))
      out.push_back("node '" + n.id + "' is not explicitly scheduled and needs rate_hz > 0");
    if (!n.explicitly_scheduled && m > 0)
      out.push_back("node '" + n.id + "' is not explicitly scheduled but belongs to a subchain");
    if (!n.max_parallel_cost_table.empty()) {
      double prev = std::numeric_limits<double>::infinity();
      for (const auto& [q, c] : n.max_parallel_cost_table) {
        if (q < 1 || !(c > 0.0)) out.push_back("node '" + n.id + "': cost table entries need q >= 1 and c > 0");
        if (c > prev) out.push_back("node '" + n.id + "': cost table must be non-increasing in q");
        prev = c;
      }
      auto c1 = n.max_parallel_cost_table.find(1);
      if (c1 != n.max_parallel_cost_table.end() &&
          std::abs(c1->second - n.compute_model.nominal_ms()) > 1e-9 * std::max(1.0, c1->second))
        out.push_back("node '" + n.id + "': cost table c^1 differs from the compute model nominal value");
    }
  }

  // Acyclicity of the node graph.
  {
    std::vector<std::vector<std::size_t>> adj(spec.nodes.size());
    for (const auto& e : spec.edges) adj[*spec.node_index(e.from)].push_back(*spec.node_index(e.to));
    if (has_cycle(spec.nodes.size(), adj)) out.push_back("cycle detected in node graph");
  }

  for (const auto& s : spec.subchains) {
    for (std::size_t i = 0; i + 1 < s.node_ids.size(); ++i)
      if (!edge_exists(spec, s.node_ids[i], s.node_ids[i + 1]))
        out.push_back("subchain '" + s.id + "': missing edge " + s.node_ids[i] + " -> " + s.node_ids[i + 1]);
    for (std::size_t i = 0; i < s.node_ids.size(); ++i) {
      const auto& n = spec.node(s.node_ids[i]);
      if (n.streaming && (i != 0)) out.push_back("streaming node '" + n.id + "' must head its own subchain");
      if (n.streaming && s.node_ids.size() != 1)
        out.push_back("streaming node '" + n.id + "' must be alone in its subchain");
    }
  }

  const bool subchains_acyclic = !has_cycle(spec.subchains.size(), subchain_graph(spec));
  if (!subchains_acyclic) out.push_back("cycle detected in subchain graph");

  auto adj = subchain_graph(spec);
  for (const auto& c : spec.chains) {
    if (c.subchain_ids.empty()) {
      out.push_back("chain '" + c.id + "' is empty");
      continue;
    }
    auto first = spec.subchain_index(c.subchain_ids.front());
    if (first && !is_source_subchain(spec, *first))
      out.push_back("chain '" + c.id + "' does not start at a source subchain");
    for (std::size_t i = 0; i + 1 < c.subchain_ids.size(); ++i) {
      auto a = spec.subchain_index(c.subchain_ids[i]);
      auto b = spec.subchain_index(c.subchain_ids[i + 1]);
      if (!a || !b || std::find(adj[*a].begin(), adj[*a].end(), *b) == adj[*a].end())
        out.push_back("chain '" + c.id + "': subchains " + c.subchain_ids[i] + " and " + c.subchain_ids[i + 1] +
                      " are not connected");
    }
  }

  const auto& o = spec.objective;
  for (const auto& [id, w] : o.chain_weights)
    if (w.latency < 0.0 || w.period < 0.0) out.push_back("negative weight on chain '" + id + "'");
  for (const auto& [id, w] : o.subchain_weights)
    if (w < 0.0) out.push_back("negative weight on subchain '" + id + "'");
  auto check_bounds = [&](const std::map<std::string, Bound>& m, const char* what) {
    for (const auto& [id, b] : m)
      if (b.lower > b.upper) out.push_back(std::string(what) + " bound for '" + id + "' has lower > upper");
  };
  check_bounds(o.node_period_bounds, "node period");
  check_bounds(o.chain_period_bounds, "chain period");
  check_bounds(o.chain_latency_bounds, "chain latency");
  if (!(o.soft_constraint_scale > 1.0)) out.push_back("soft_constraint_scale must exceed 1");

  auto check_total_order = [&](const std::vector<std::string>& list, const char* what) {
    if (list.empty()) return;
    std::set<std::string> seen(list.begin(), list.end());
    if (seen.size() != list.size()) out.push_back(std::string(what) + " lists a subchain twice");
    for (const auto& s : spec.subchains)
      if (!seen.count(s.id)) out.push_back(std::string(what) + " omits subchain '" + s.id + "'");
  };
  check_total_order(o.priority, "priority order");
  check_total_order(o.order, "slot order");

  const auto& k = spec.constants;
  if (!(k.switch_overhead_ms >= 0.0)) out.push_back("switch_overhead_ms must be non-negative");
  if (!(k.slack_fraction >= 0.0 && k.slack_fraction < 1.0)) out.push_back("slack_fraction must be in [0, 1)");
  if (!(k.min_cpu_ms_per_hyperperiod > 0.0)) out.push_back("min_cpu_ms_per_hyperperiod must be positive");
  if (!(k.stage1_period_s > 0.0 && k.stage2_period_s > 0.0)) out.push_back("re-solve periods must be positive");
  if (k.estimator_window < 1) out.push_back("estimator_window must be positive");
  if (!(k.estimator_percentile > 0.0 && k.estimator_percentile <= 1.0))
    out.push_back("estimator_percentile must be in (0, 1]");
  if (!(k.bootstrap_compute_ms > 0.0)) out.push_back("bootstrap_compute_ms must be positive");
  if (!(k.bootstrap_solve_delay_s > 0.0)) out.push_back("bootstrap_solve_delay_s must be positive");
  if (k.max_reciprocal < 1) out.push_back("max_reciprocal must be at least 1");

  if (subchains_acyclic && out.empty()) {
    try {
      enumerate_chains(spec);
    } catch (const SpecError& e) {
      out.push_back(e.what());
    }
  }
  return r;
}

std::vector<ChainSpec> derive_chains(const DagSpec& spec) {
  auto adj = subchain_graph(spec);
  if (has_cycle(spec.subchains.size(), adj)) throw SpecError("cycle detected in subchain graph");
  std::vector<ChainSpec> out;
  std::vector<std::size_t> path;
  std::function<void(std::size_t)> walk = [&](std::size_t u) {
    path.push_back(u);
    if (adj[u].empty()) {
      ChainSpec c;
      for (auto i : path) c.subchain_ids.push_back(spec.subchains[i].id);
      std::string id;
      for (const auto& s : c.subchain_ids) id += (id.empty() ? "" : "_") + s;
      c.id = id;
      out.push_back(std::move(c));
    }
    for (auto v : adj[u]) walk(v);
    path.pop_back();
  };
  for (std::size_t i = 0; i < spec.subchains.size(); ++i)
    if (is_source_subchain(spec, i)) walk(i);
  return out;
}

std::vector<ChainSpec> enumerate_chains(const DagSpec& spec) {
  auto derived = derive_chains(spec);
  if (spec.chains.empty()) return derived;
  std::set<std::vector<std::string>> want, have;
  for (const auto& c : derived) want.insert(c.subchain_ids);
  for (const auto& c : spec.chains) have.insert(c.subchain_ids);
  if (want != have) {
    std::string msg = "declared chains differ from derived chains";
    for (const auto& p : want)
      if (!have.count(p)) {
        std::string s;
        for (const auto& x : p) s += (s.empty() ? "" : "->") + x;
        msg += "; missing " + s;
      }
    for (const auto& p : have)
      if (!want.count(p)) {
        std::string s;
        for (const auto& x : p) s += (s.empty() ? "" : "->") + x;
        msg += "; extra " + s;
      }
    throw SpecError(msg);
  }
  return spec.chains;
}

}  // namespace srsched
