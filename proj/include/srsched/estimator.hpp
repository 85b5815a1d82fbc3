#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "srsched/analytics.hpp"

namespace srsched {

// Nearest-rank percentile: element ceil(p*n) (1-based) of the sorted values.
// Throws std::invalid_argument on an empty input.
double nearest_rank(std::vector<double> values, double p);

struct ModeOptions {
  std::size_t min_samples = 10;
  double min_mean_ratio = 4.0;
  double min_share = 0.10;
};

struct ModeSplit {
  int modes = 1;
  double threshold = 0.0;  // low mode holds values <= threshold
  std::vector<double> low, high;
};

ModeSplit classify_modes(const std::vector<double>& window, const ModeOptions& options = {});

class NodeStats {
 public:
  explicit NodeStats(std::size_t window = 50) : capacity_(window) {}

  void record(double duration_ms, double t_s);
  void record_output(double t_s);

  std::size_t size() const { return window_.size(); }
  std::vector<double> window() const { return {window_.begin(), window_.end()}; }

  double estimate(double percentile, double bootstrap_ms, const ModeOptions& options = {}) const;
  // Percentile of recent inter-output gaps in ms; 0 when fewer than 2 outputs.
  double observed_period(double percentile = 0.75) const;

 private:
  std::size_t capacity_;
  std::deque<double> window_;
  std::deque<double> gaps_;
  double last_output_s_ = -1.0;
};

class Estimator {
 public:
  Estimator(std::size_t window = 50, double percentile = 0.95, double bootstrap_ms = 5.0)
      : window_(window), percentile_(percentile), bootstrap_ms_(bootstrap_ms) {}

  void record(const std::string& node, double duration_ms, double t_s);
  void record_output(const std::string& subchain, double t_s);
  double estimate(const std::string& node) const;
  // Estimates for the given nodes (bootstrap value for unseen ones).
  Estimates snapshot(const std::vector<std::string>& nodes) const;
  std::map<std::string, double> observed_periods(double percentile = 0.75) const;
  const NodeStats* stats(const std::string& node) const;

 private:
  std::size_t window_;
  double percentile_;
  double bootstrap_ms_;
  std::map<std::string, NodeStats> nodes_;
  std::map<std::string, NodeStats> outputs_;
};

}  // namespace srsched
