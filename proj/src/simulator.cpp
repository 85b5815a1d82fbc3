#include "srsched/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

namespace srsched {

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::trigger: return "trigger";
    case EventKind::start: return "start";
    case EventKind::preempt: return "preempt";
    case EventKind::resume: return "resume";
    case EventKind::output: return "output";
    case EventKind::drop: return "drop";
    case EventKind::steal: return "steal";
    case EventKind::resolve_stage1: return "resolve_stage1";
    case EventKind::resolve_stage2: return "resolve_stage2";
    case EventKind::violation: return "violation";
  }
  return "unknown";
}

std::string SimEventTrace::to_csv() const {
  std::ostringstream os;
  os << "time_us,event,entity,detail\n";
  for (const auto& e : events) {
    os << e.t_us << ',' << to_string(e.kind) << ',' << e.entity << ',' << e.detail;
    for (std::size_t i = 0; i < e.lineage.size(); ++i)
      os << (i || !e.detail.empty() ? ";" : "") << chains[e.lineage[i].first] << '@' << e.lineage[i].second;
    os << '\n';
  }
  return os.str();
}

namespace {

constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::min() / 4;

std::int64_t to_us(double ms) { return static_cast<std::int64_t>(std::llround(ms * 1000.0)); }

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

struct Job {
  std::int64_t trigger_us = 0;
  std::vector<std::int64_t> tokens;  // per chain, -1 when absent
};

struct Server {
  int node = 0;
  std::optional<Job> running;
  std::optional<Job> pending;
  std::int64_t remaining_us = 0;
  std::int64_t resumed_us = 0;
  bool on_core = false;
  double cost_ms = 0.0;
};

struct Sub {
  std::string id;
  std::vector<Server> servers;
  bool streaming = false;
  std::int64_t lower_us = 0;
  double upper_ms = std::numeric_limits<double>::infinity();
  std::vector<int> first_of;
  std::vector<std::pair<int, int>> chain_pred;  // (chain, previous subchain)
  std::vector<std::int64_t> out_tokens;
  bool has_output = false;
  std::int64_t last_trigger_us = kNever;
  std::int64_t last_output_us = 0;
  std::int64_t active_us = 0;  // when the current schedule took over
  int counter = std::numeric_limits<int>::max() / 2;
  int rank = 0;
  bool stealer = false;
  int unit = -1;
  std::int64_t period_us = 0;
};

struct ExclusiveUnit {
  int sub = 0;
  int cores = 1;
  int q = 1;
  std::int64_t period_us = 1;
};

struct Entry {
  int sub = 0;
  std::int64_t budget_us = 0;
  int r = 0;  // 0 for streaming
};

struct Table {
  std::vector<Entry> entries;
  std::int64_t overhead_us = 0;
  std::int64_t slack_us = 0;
};

struct SharedUnit {
  Table table;
  std::optional<Table> next;
  std::size_t slot = 0;
  std::int64_t cycle_start = 0;
  std::int64_t window_end = 0;
  int runner = -1;
  int on_core = -1;  // server index of runner currently executing
  std::uint64_t run_token = 0;
  std::set<int> stole;
  std::int64_t executed = 0, windows = 0, overhead = 0, slack = 0;
};

enum class Ev { ex_trigger, ex_done, slot_start, window_start, window_end, shared_done, cycle_end, resolve };

struct QueuedEvent {
  std::int64_t t;
  std::uint64_t seq;
  Ev kind;
  int unit;
  int a;
  std::uint64_t epoch;
  bool operator>(const QueuedEvent& o) const { return t != o.t ? t > o.t : seq > o.seq; }
};

class Engine {
 public:
  Engine(const DagSpec& spec, const SimConfig& config)
      : spec_(spec),
        cfg_(config),
        est_(static_cast<std::size_t>(spec.constants.estimator_window), spec.constants.estimator_percentile,
             spec.constants.bootstrap_compute_ms) {
    end_us_ = to_us(config.duration_s * 1000.0);
    trace_.duration_s = config.duration_s;
    trace_.warmup_s = config.warmup_s;
    for (const auto& c : spec.chains) trace_.chains.push_back(c.id);

    for (std::size_t i = 0; i < spec.nodes.size(); ++i)
      samplers_.emplace_back(spec.nodes[i].compute_model, mix(config.seed ^ mix(i + 1)));

    auto prio = spec.effective_priority();
    for (const auto& sc : spec.subchains) {
      Sub s;
      s.id = sc.id;
      for (const auto& n : sc.node_ids) {
        Server sv;
        sv.node = static_cast<int>(*spec.node_index(n));
        s.servers.push_back(sv);
      }
      s.streaming = spec.node(sc.head()).streaming;
      Bound b = subchain_period_bound(spec, sc);
      s.lower_us = b.has_lower() ? to_us(b.lower) : 0;
      s.upper_ms = b.upper;
      s.out_tokens.assign(spec.chains.size(), -1);
      auto it = std::find(prio.begin(), prio.end(), sc.id);
      s.rank = static_cast<int>(it - prio.begin());
      s.stealer = spec.may_steal(sc.id);
      subs_.push_back(std::move(s));
    }
    downstream_.assign(subs_.size(), std::vector<char>(subs_.size(), 0));
    for (std::size_t c = 0; c < spec.chains.size(); ++c) {
      const auto& ids = spec.chains[c].subchain_ids;
      for (std::size_t x = 0; x < ids.size(); ++x) {
        int s = static_cast<int>(*spec.subchain_index(ids[x]));
        for (std::size_t y = x + 1; y < ids.size(); ++y) downstream_[s][*spec.subchain_index(ids[y])] = 1;
        if (x == 0)
          subs_[s].first_of.push_back(static_cast<int>(c));
        else
          subs_[s].chain_pred.emplace_back(static_cast<int>(c), static_cast<int>(*spec.subchain_index(ids[x - 1])));
      }
    }
    for (const auto& id : prio) {
      auto i = spec.subchain_index(id);
      if (i && subs_[*i].stealer) stealers_.push_back(static_cast<int>(*i));
    }
    for (const auto& sc : spec.subchains)
      for (const auto& n : sc.node_ids) scheduled_nodes_.push_back(n);
  }

  SimEventTrace run() {
    if (cfg_.adaptive) {
      Estimates boot;
      for (const auto& n : scheduled_nodes_) boot[n] = spec_.constants.bootstrap_compute_ms;
      Allocation alloc = solve_core_allocation(make_stage1_problem(spec_, boot));
      rebuild(equal_share_schedule(spec_, alloc, boot));
      schedule_resolves();
    } else {
      rebuild(cfg_.static_schedule ? *cfg_.static_schedule : solve_schedule(spec_, {}));
    }
    while (!queue_.empty()) {
      QueuedEvent ev = queue_.top();
      if (ev.t > end_us_) break;
      queue_.pop();
      now_ = ev.t;
      if (ev.kind != Ev::resolve && ev.epoch != epoch_) continue;
      dispatch_event(ev);
    }
    return std::move(trace_);
  }

 private:
  const DagSpec& spec_;
  const SimConfig& cfg_;
  Estimator est_;
  std::vector<ComputeSampler> samplers_;
  std::vector<Sub> subs_;
  std::vector<int> stealers_;
  std::vector<std::vector<char>> downstream_;  // [a][b]: b follows a in some chain
  std::vector<std::string> scheduled_nodes_;
  std::vector<ExclusiveUnit> exclusive_;
  std::vector<SharedUnit> shared_;
  GlobalSchedule schedule_;
  std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, std::greater<>> queue_;
  std::uint64_t seq_ = 0, epoch_ = 0;
  std::int64_t now_ = 0, end_us_ = 0;
  SimEventTrace trace_;

  void push(std::int64_t t, Ev kind, int unit, int a = 0) { queue_.push({t, seq_++, kind, unit, a, epoch_}); }

  void emit(EventKind kind, const std::string& entity, std::string detail = {}) {
    trace_.events.push_back({now_, kind, entity, std::move(detail), {}});
  }

  double now_s() const { return static_cast<double>(now_) / 1e6; }

  // Units encoded as non-negative for exclusive and negative for shared.
  static int shared_code(std::size_t i) { return -1 - static_cast<int>(i); }

  void schedule_resolves() {
    const double delay = spec_.constants.bootstrap_solve_delay_s;
    const double s1 = spec_.constants.stage1_period_s, s2 = spec_.constants.stage2_period_s;
    std::set<std::int64_t> stage1, stage2;
    for (double t = delay; t <= cfg_.duration_s + 1e-9; t += s1) stage1.insert(to_us(t * 1000.0));
    for (double t = delay; t <= cfg_.duration_s + 1e-9; t += s2) stage2.insert(to_us(t * 1000.0));
    for (auto t : stage2)
      if (!stage1.count(t)) push(t, Ev::resolve, 0, 2);
    for (auto t : stage1) push(t, Ev::resolve, 0, 1);
  }

  void dispatch_event(const QueuedEvent& ev) {
    switch (ev.kind) {
      case Ev::ex_trigger: exclusive_trigger(ev.unit); break;
      case Ev::ex_done: exclusive_done(ev.unit, ev.a); break;
      case Ev::slot_start: slot_start(ev.unit); break;
      case Ev::window_start: shared_dispatch(ev.unit); break;
      case Ev::window_end: window_end(ev.unit); break;
      case Ev::shared_done: shared_done(ev.unit, ev.a); break;
      case Ev::cycle_end: cycle_end(ev.unit); break;
      case Ev::resolve: resolve(ev.a == 1); break;
    }
  }

  // ---- schedules ----

  void resolve(bool stage1) {
    Estimates est = est_.snapshot(scheduled_nodes_);
    GlobalSchedule g;
    try {
      if (stage1) {
        Allocation alloc = solve_core_allocation(make_stage1_problem(spec_, est, est_.observed_periods()));
        g = build_global_schedule(spec_, alloc, est);
      } else {
        Allocation alloc;
        alloc.a = schedule_.allocation;
        g = build_global_schedule(spec_, alloc, est);
      }
    } catch (const InfeasibleError& e) {
      trace_.warnings.push_back("warning: re-solve at " + fmt(now_s()) + " s kept the previous schedule: " + e.what());
      return;
    }
    if (stage1) emit(EventKind::resolve_stage1, "stage1", "objective=" + fmt(g.objective));
    emit(EventKind::resolve_stage2, "stage2", "objective=" + fmt(g.objective));
    for (const auto& w : g.warnings) trace_.warnings.push_back(w);
    if (g.allocation == schedule_.allocation)
      retune(std::move(g));
    else
      rebuild(std::move(g));
  }

  Table make_table(const FractionalSchedule& fs) const {
    Table t;
    for (const auto& e : fs.entries) {
      Entry en;
      en.sub = static_cast<int>(*spec_.subchain_index(e.subchain));
      en.budget_us = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(e.budget_ms * 1000.0 - 1e-6)));
      en.r = e.streaming ? 0 : std::max(1, e.reciprocal);
      t.entries.push_back(en);
    }
    t.overhead_us = to_us(spec_.constants.switch_overhead_ms);
    t.slack_us = to_us(fs.slack_ms);
    return t;
  }

  std::int64_t exclusive_period(const PipelinePlan& p) const {
    auto it = cfg_.trigger_period_ms.find(p.subchain);
    return std::max<std::int64_t>(1, to_us(it != cfg_.trigger_period_ms.end() ? it->second : p.trigger_period));
  }

  // Overdue threshold for stealing. A streaming subchain emits several
  // outputs per slot but none between slots, so never less than one cycle.
  void set_periods(const GlobalSchedule& g) {
    for (auto& s : subs_) {
      auto it = g.subchain_period.find(s.id);
      s.period_us = it == g.subchain_period.end() ? 0 : to_us(it->second);
      if (const auto* core = g.shared_core(s.id)) s.period_us = std::max(s.period_us, to_us(core->cycle_ms));
    }
  }

  // Same allocation: new fractions apply at each core's next cycle.
  void retune(GlobalSchedule g) {
    for (auto& u : exclusive_)
      if (const auto* p = g.plan(subs_[u.sub].id)) {
        u.period_us = exclusive_period(*p);
        u.q = p->q;
      }
    for (std::size_t i = 0; i < shared_.size() && i < g.shared.size(); ++i) shared_[i].next = make_table(g.shared[i]);
    set_periods(g);
    schedule_ = std::move(g);
  }

  // New allocation: preempt everything and restart every unit now.
  void rebuild(GlobalSchedule g) {
    for (auto& s : subs_)
      for (auto& sv : s.servers)
        if (sv.on_core) {
          sv.remaining_us -= now_ - sv.resumed_us;
          sv.on_core = false;
          if (sv.remaining_us > 0) emit(EventKind::preempt, spec_.nodes[sv.node].id, s.id);
        }
    for (auto& s : subs_)
      for (std::size_t j = 0; j < s.servers.size(); ++j)
        if (s.servers[j].running && s.servers[j].remaining_us <= 0) complete(static_cast<int>(&s - subs_.data()), j);
    ++epoch_;
    exclusive_.clear();
    shared_.clear();
    for (auto& s : subs_) {
      s.unit = -1;
      s.active_us = now_;
    }
    for (const auto& p : g.exclusive) {
      ExclusiveUnit u;
      u.sub = static_cast<int>(*spec_.subchain_index(p.subchain));
      u.cores = p.k;
      u.q = p.q;
      u.period_us = exclusive_period(p);
      subs_[u.sub].unit = static_cast<int>(exclusive_.size());
      exclusive_.push_back(u);
      push(now_, Ev::ex_trigger, subs_[u.sub].unit);
    }
    for (const auto& fs : g.shared) {
      SharedUnit u;
      u.table = make_table(fs);
      for (const auto& e : u.table.entries) subs_[e.sub].unit = shared_code(shared_.size());
      shared_.push_back(std::move(u));
      push(now_, Ev::slot_start, shared_code(shared_.size() - 1));
    }
    set_periods(g);
    schedule_ = std::move(g);
  }

  // ---- jobs ----

  bool gap_ok(const Sub& s) const {
    return s.lower_us == 0 || s.last_trigger_us == kNever || now_ - s.last_trigger_us >= s.lower_us;
  }

  void trigger(int si) {
    Sub& s = subs_[si];
    Job j;
    j.trigger_us = now_;
    if (s.servers.front().pending) emit(EventKind::drop, s.id, "node=" + spec_.nodes[s.servers.front().node].id);
    s.servers.front().pending = std::move(j);
    s.last_trigger_us = now_;
    emit(EventKind::trigger, s.id);
  }

  // Moves the pending job onto the server, or resumes the preempted one.
  void begin(int si, std::size_t j, int q) {
    Sub& s = subs_[si];
    Server& sv = s.servers[j];
    const NodeSpec& node = spec_.nodes[sv.node];
    if (!sv.running) {
      sv.running = std::move(sv.pending);
      sv.pending.reset();
      if (j == 0) read_inputs(s, *sv.running);
      double ms = cfg_.deterministic_costs ? node.compute_model.nominal_ms() : samplers_[sv.node].sample(now_s());
      sv.cost_ms = ms;
      trace_.costs[node.id].push_back({now_s(), ms});
      sv.remaining_us = std::max<std::int64_t>(1, to_us(node.cost_with_cores(ms, q)));
      emit(EventKind::start, node.id, s.id);
    } else {
      emit(EventKind::resume, node.id, s.id);
    }
    sv.on_core = true;
    sv.resumed_us = now_;
  }

  void read_inputs(const Sub& s, Job& job) const {
    job.tokens.assign(spec_.chains.size(), -1);
    for (int c : s.first_of) job.tokens[c] = job.trigger_us;
    for (auto [c, pred] : s.chain_pred) {
      const Sub& p = subs_[pred];
      if (p.has_output) job.tokens[c] = p.out_tokens[c];
    }
  }

  void complete(int si, std::size_t j) {
    Sub& s = subs_[si];
    Server& sv = s.servers[j];
    sv.on_core = false;
    sv.remaining_us = 0;
    est_.record(spec_.nodes[sv.node].id, sv.cost_ms, now_s());
    Job job = std::move(*sv.running);
    sv.running.reset();
    if (j + 1 < s.servers.size()) {
      Server& next = s.servers[j + 1];
      if (next.pending) emit(EventKind::drop, s.id, "node=" + spec_.nodes[next.node].id);
      next.pending = std::move(job);
      return;
    }
    output(si, job);
  }

  void output(int si, const Job& job) {
    Sub& s = subs_[si];
    const double gap_ms = static_cast<double>(now_ - s.last_output_us) / 1000.0;
    if (s.has_output) {
      if (gap_ms > s.upper_ms) emit(EventKind::violation, s.id, "period_ms=" + fmt(gap_ms));
      if (s.lower_us > 0 && now_ - s.last_output_us < s.lower_us)
        emit(EventKind::violation, s.id, "period_ms=" + fmt(gap_ms));
    }
    s.has_output = true;
    s.last_output_us = now_;
    s.out_tokens = job.tokens;
    est_.record_output(s.id, now_s());
    SimEvent ev{now_, EventKind::output, s.id, {}, {}};
    for (std::size_t c = 0; c < job.tokens.size(); ++c)
      if (job.tokens[c] >= 0) ev.lineage.emplace_back(static_cast<int>(c), job.tokens[c]);
    trace_.events.push_back(std::move(ev));
  }

  // ---- exclusive units: nodes are servers sharing the unit's cores ----

  void exclusive_trigger(int ui) {
    ExclusiveUnit& u = exclusive_[ui];
    trigger(u.sub);
    push(now_ + u.period_us, Ev::ex_trigger, ui);
    exclusive_dispatch(ui);
  }

  void exclusive_dispatch(int ui) {
    ExclusiveUnit& u = exclusive_[ui];
    Sub& s = subs_[u.sub];
    int busy = 0;
    for (const auto& sv : s.servers) busy += sv.on_core ? u.q : 0;
    for (std::size_t j = s.servers.size(); j-- > 0;) {
      Server& sv = s.servers[j];
      if (sv.on_core || (!sv.running && !sv.pending)) continue;
      if (busy + u.q > u.cores) break;
      begin(u.sub, j, u.q);
      busy += u.q;
      push(now_ + sv.remaining_us, Ev::ex_done, ui, static_cast<int>(j));
    }
  }

  void exclusive_done(int ui, int j) {
    Sub& s = subs_[exclusive_[ui].sub];
    if (!s.servers[j].on_core) return;
    complete(exclusive_[ui].sub, j);
    exclusive_dispatch(ui);
  }

  // ---- shared units: cyclic executive ----

  SharedUnit& shared(int code) { return shared_[static_cast<std::size_t>(-1 - code)]; }

  bool overdue(const Sub& h) const {
    return h.period_us > 0 && now_ - std::max(h.last_output_us, h.active_us) > h.period_us;
  }

  bool has_work(const Sub& h) const {
    if (h.streaming) return true;
    for (const auto& sv : h.servers)
      if (sv.running || sv.pending) return true;
    return false;
  }

  void slot_start(int code) {
    SharedUnit& u = shared(code);
    if (u.slot == 0) {
      if (u.next) {
        u.table = std::move(*u.next);
        u.next.reset();
      }
      u.cycle_start = now_;
      u.stole.clear();
      u.executed = u.windows = u.overhead = u.slack = 0;
    }
    const Entry& e = u.table.entries[u.slot];
    Sub& owner = subs_[e.sub];
    if (!owner.streaming && ++owner.counter >= e.r && gap_ok(owner)) {
      owner.counter = 0;
      trigger(e.sub);
    }
    u.runner = e.sub;
    if (cfg_.stealing) {
      for (int h : stealers_) {
        const Sub& hs = subs_[h];
        if (h == e.sub || hs.unit != code || hs.rank >= owner.rank || u.stole.count(h)) continue;
        if (downstream_[h][e.sub]) continue;
        if (!overdue(hs) || !has_work(hs)) continue;
        u.runner = h;
        u.stole.insert(h);
        emit(EventKind::steal, hs.id, "slot=" + owner.id);
        break;
      }
    }
    u.overhead += u.table.overhead_us;
    u.windows += e.budget_us;
    u.window_end = now_ + u.table.overhead_us + e.budget_us;
    push(now_ + u.table.overhead_us, Ev::window_start, code);
    push(u.window_end, Ev::window_end, code);
  }

  void shared_dispatch(int code) {
    SharedUnit& u = shared(code);
    if (u.on_core >= 0 || now_ >= u.window_end) return;
    Sub& s = subs_[u.runner];
    int pick = -1;
    for (std::size_t j = s.servers.size(); j-- > 0;)
      if (s.servers[j].running || s.servers[j].pending) {
        pick = static_cast<int>(j);
        break;
      }
    if (pick < 0 && s.streaming && gap_ok(s)) {
      trigger(u.runner);
      pick = 0;
    }
    if (pick < 0) return;
    begin(u.runner, pick, 1);
    u.on_core = pick;
    ++u.run_token;
    const std::int64_t done = now_ + s.servers[pick].remaining_us;
    if (done < u.window_end) push(done, Ev::shared_done, code, static_cast<int>(u.run_token));
  }

  void shared_done(int code, int token) {
    SharedUnit& u = shared(code);
    if (u.on_core < 0 || static_cast<std::uint64_t>(token) != u.run_token) return;
    u.executed += now_ - subs_[u.runner].servers[u.on_core].resumed_us;
    complete(u.runner, u.on_core);
    u.on_core = -1;
    shared_dispatch(code);
  }

  void window_end(int code) {
    SharedUnit& u = shared(code);
    if (u.on_core >= 0) {
      Sub& s = subs_[u.runner];
      Server& sv = s.servers[u.on_core];
      const std::int64_t ran = now_ - sv.resumed_us;
      u.executed += ran;
      sv.remaining_us -= ran;
      if (sv.remaining_us <= 0) {
        complete(u.runner, u.on_core);
      } else {
        sv.on_core = false;
        emit(EventKind::preempt, spec_.nodes[sv.node].id, s.id);
      }
      u.on_core = -1;
    }
    ++u.slot;
    if (u.slot < u.table.entries.size()) {
      slot_start(code);
      return;
    }
    u.slack += u.table.slack_us;
    push(now_ + u.table.slack_us, Ev::cycle_end, code);
  }

  void cycle_end(int code) {
    SharedUnit& u = shared(code);
    const std::int64_t length = now_ - u.cycle_start;
    if (u.executed < 0 || u.executed > u.windows || length != u.windows + u.overhead + u.slack)
      throw SimInvariantError("cycle accounting broken at " + std::to_string(now_) + " us");
    u.slot = 0;
    slot_start(code);
  }
};

}  // namespace

SimEventTrace run_simulation(const DagSpec& spec, const SimConfig& config) {
  if (!(config.duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
  Engine engine(spec, config);
  return engine.run();
}

}  // namespace srsched
