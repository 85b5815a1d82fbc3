#include "srsched/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace srsched {

double nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty window");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

ModeSplit classify_modes(const std::vector<double>& window, const ModeOptions& opt) {
  ModeSplit out;
  std::vector<double> v = window;
  std::sort(v.begin(), v.end());
  out.low = v;
  const std::size_t n = v.size();
  if (n < opt.min_samples || n < 2) return out;

  std::vector<double> s(n + 1, 0.0), s2(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    s[i + 1] = s[i] + v[i];
    s2[i + 1] = s2[i] + v[i] * v[i];
  }
  auto sse = [&](std::size_t a, std::size_t b) {
    double m = static_cast<double>(b - a);
    double sum = s[b] - s[a];
    return (s2[b] - s2[a]) - sum * sum / m;
  };
  std::size_t best = 0;
  double best_cost = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    if (v[k] == v[k - 1]) continue;
    double cost = sse(0, k) + sse(k, n);
    if (best == 0 || cost < best_cost) {
      best = k;
      best_cost = cost;
    }
  }
  if (best == 0) return out;
  const double mean_low = s[best] / static_cast<double>(best);
  const double mean_high = (s[n] - s[best]) / static_cast<double>(n - best);
  const double share_low = static_cast<double>(best) / static_cast<double>(n);
  if (mean_low <= 0.0 || mean_high / mean_low < opt.min_mean_ratio) return out;
  if (share_low < opt.min_share || 1.0 - share_low < opt.min_share) return out;
  out.modes = 2;
  out.threshold = 0.5 * (v[best - 1] + v[best]);
  out.low.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(best));
  out.high.assign(v.begin() + static_cast<std::ptrdiff_t>(best), v.end());
  return out;
}

void NodeStats::record(double duration_ms, double /*t_s*/) {
  if (!(duration_ms > 0.0)) throw std::invalid_argument("durations must be positive");
  window_.push_back(duration_ms);
  while (window_.size() > capacity_) window_.pop_front();
}

void NodeStats::record_output(double t_s) {
  if (last_output_s_ >= 0.0) {
    gaps_.push_back((t_s - last_output_s_) * 1000.0);
    while (gaps_.size() > capacity_) gaps_.pop_front();
  }
  last_output_s_ = t_s;
}

double NodeStats::estimate(double percentile, double bootstrap_ms, const ModeOptions& options) const {
  if (window_.empty()) return bootstrap_ms;
  std::vector<double> w(window_.begin(), window_.end());
  ModeSplit split = classify_modes(w, options);
  if (split.modes == 1) return nearest_rank(std::move(w), percentile);
  const double n = static_cast<double>(w.size());
  return static_cast<double>(split.low.size()) / n * nearest_rank(split.low, percentile) +
         static_cast<double>(split.high.size()) / n * nearest_rank(split.high, percentile);
}

double NodeStats::observed_period(double percentile) const {
  if (gaps_.empty()) return 0.0;
  return nearest_rank({gaps_.begin(), gaps_.end()}, percentile);
}

void Estimator::record(const std::string& node, double duration_ms, double t_s) {
  nodes_.try_emplace(node, window_).first->second.record(duration_ms, t_s);
}

void Estimator::record_output(const std::string& subchain, double t_s) {
  outputs_.try_emplace(subchain, window_).first->second.record_output(t_s);
}

double Estimator::estimate(const std::string& node) const {
  auto it = nodes_.find(node);
  if (it == nodes_.end()) return bootstrap_ms_;
  return it->second.estimate(percentile_, bootstrap_ms_);
}

Estimates Estimator::snapshot(const std::vector<std::string>& nodes) const {
  Estimates out;
  for (const auto& n : nodes) out[n] = estimate(n);
  return out;
}

std::map<std::string, double> Estimator::observed_periods(double percentile) const {
  std::map<std::string, double> out;
  for (const auto& [id, st] : outputs_) {
    double p = st.observed_period(percentile);
    if (p > 0.0) out[id] = p;
  }
  return out;
}

const NodeStats* Estimator::stats(const std::string& node) const {
  auto it = nodes_.find(node);
  return it == nodes_.end() ? nullptr : &it->second;
}

}  // namespace srsched
