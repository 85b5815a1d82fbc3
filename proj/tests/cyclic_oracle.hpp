#pragma once

// Exhaustive search over cyclic unit-slot schedules of a single-input pipeline
// on k cores. Each node is single-threaded and handles inputs in capture order;
// a node job runs on at most one core per slot and may be preempted or moved.
// An input is captured in the slot its first node starts.
//
// A schedule with a bound is feasible iff a cycle is reachable in the finite
// state graph whose paths respect the bound.

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace cyclic_oracle {

struct Job {
  int stage, rem, age;
};

struct State {
  std::vector<Job> jobs;  // oldest first
  int base = -1;          // age of the capture before jobs[0], -1 before the first output
  int youngest = -1;      // age of the most recent capture

  // Ages only matter for response time. Without them a repeated state still
  // means every input captured in between was output, since nodes keep order.
  std::string key(bool ages) const {
    std::string k;
    k.push_back(static_cast<char>(ages ? base + 1 : 0));
    k.push_back(static_cast<char>(youngest + 1));
    for (const auto& j : jobs) {
      k.push_back(static_cast<char>(j.stage));
      k.push_back(static_cast<char>(j.rem));
      if (ages) k.push_back(static_cast<char>(j.age));
    }
    return k;
  }
};

enum class Mode { response_time, period };

class Search {
 public:
  Search(std::vector<int> costs, int cores, Mode mode, int bound)
      : c_(std::move(costs)), k_(cores), mode_(mode), bound_(bound) {
    total_ = std::accumulate(c_.begin(), c_.end(), 0);
    max_jobs_ = 2 * static_cast<int>(c_.size()) * k_;
  }

  bool feasible() {
    std::unordered_set<std::string> on_path, dead;
    struct Frame {
      State s;
      std::vector<State> next;
      std::size_t i = 0;
    };
    std::vector<Frame> stack;
    stack.push_back({State{}, successors(State{}), 0});
    on_path.insert(stack.back().s.key(ages()));
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.i == f.next.size()) {
        std::string k = f.s.key(ages());
        on_path.erase(k);
        dead.insert(k);
        stack.pop_back();
        continue;
      }
      State n = f.next[f.i++];
      std::string k = n.key(ages());
      if (on_path.count(k)) return true;
      if (dead.count(k)) continue;
      on_path.insert(k);
      auto succ = successors(n);
      stack.push_back({std::move(n), std::move(succ), 0});
    }
    return false;
  }

 private:
  bool ages() const { return mode_ == Mode::response_time; }

  int remaining(const Job& j) const {
    int r = j.rem;
    for (std::size_t x = j.stage + 1; x < c_.size(); ++x) r += c_[x];
    return r;
  }

  bool admissible(const State& s) const {
    if (mode_ == Mode::response_time) {
      for (std::size_t j = 0; j < s.jobs.size(); ++j) {
        int pred = j == 0 ? s.base : s.jobs[j - 1].age;
        if (pred >= 0 && pred + remaining(s.jobs[j]) > bound_) return false;
      }
      return s.youngest < 0 || s.youngest + total_ <= bound_;
    }
    if (static_cast<int>(s.jobs.size()) > max_jobs_) return false;
    return s.youngest < 0 || s.youngest <= bound_;
  }

  std::vector<State> successors(const State& s) const {
    // Runnable work: the oldest job at each stage, plus a fresh capture when
    // the first node is free.
    std::vector<int> runnable;
    std::vector<bool> seen(c_.size(), false);
    for (std::size_t j = 0; j < s.jobs.size(); ++j)
      if (!seen[s.jobs[j].stage]) {
        seen[s.jobs[j].stage] = true;
        runnable.push_back(static_cast<int>(j));
      }
    const bool can_capture = !seen[0];
    const int options = static_cast<int>(runnable.size()) + (can_capture ? 1 : 0);

    std::vector<State> out;
    for (int mask = 0; mask < (1 << options); ++mask) {
      if (__builtin_popcount(static_cast<unsigned>(mask)) > k_) continue;
      const bool capture = can_capture && (mask & (1 << runnable.size()));
      if (s.youngest < 0 && !capture) continue;  // idling before the first input is a trivial cycle
      State n = s;
      for (std::size_t r = 0; r < runnable.size(); ++r)
        if (mask & (1 << r)) --n.jobs[runnable[r]].rem;
      if (capture) {
        if (mode_ == Mode::period && s.youngest > bound_) continue;
        n.jobs.push_back({0, c_[0] - 1, 0});
        n.youngest = 0;
      }
      for (auto& j : n.jobs) ++j.age;
      if (n.base >= 0) ++n.base;
      if (n.youngest >= 0) ++n.youngest;
      bool ok = true;
      for (auto& j : n.jobs)
        if (j.rem == 0) {
          ++j.stage;
          if (j.stage < static_cast<int>(c_.size())) j.rem = c_[j.stage];
        }
      while (!n.jobs.empty() && n.jobs.front().stage == static_cast<int>(c_.size())) {
        if (mode_ == Mode::response_time && n.base >= 0 && n.base > bound_) ok = false;
        n.base = n.jobs.front().age;
        n.jobs.erase(n.jobs.begin());
      }
      if (ok && admissible(n)) out.push_back(std::move(n));
    }
    return out;
  }

  std::vector<int> c_;
  int k_;
  Mode mode_;
  int bound_;
  int total_ = 0;
  int max_jobs_ = 0;
};

// Smallest bound for which a cyclic schedule exists.
inline int optimum(const std::vector<int>& costs, int cores, Mode mode) {
  for (int b = 1;; ++b)
    if (Search(costs, cores, mode, b).feasible()) return b;
}

}  // namespace cyclic_oracle
