#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace srsched {

// Thrown by parse_spec and by lookups on malformed specs.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Distribution of a node's per-execution compute time. All times are in
// milliseconds. Composite kinds (bimodal, drift, spike) carry their inner
// models in `parts`.
struct ComputeModel {
  enum class Kind { constant, uniform, truncated_normal, bimodal, drift, spike, trace };

  Kind kind = Kind::constant;
  double value = 1.0;           // constant
  double lo = 0.0, hi = 0.0;    // uniform, truncated_normal
  double mean = 0.0, stddev = 0.0;
  double p_cheap = 0.5;         // bimodal: parts[0] cheap, parts[1] expensive
  double slope_ms_per_s = 0.0;  // drift: parts[0] base
  double spike_rate_hz = 0.0;   // spike: parts[0] base
  double spike_cost_ms = 0.0;
  std::vector<double> spike_times_s;  // explicit spike instants; overrides the rate
  std::string trace_path;
  std::vector<double> trace;  // loaded trace values

  std::vector<ComputeModel> parts;

  static ComputeModel constant_ms(double v);
  static ComputeModel uniform_ms(double lo, double hi);

  // Representative (worst-case-leaning) value used as c^1 when no
  // measurements exist.
  double nominal_ms() const;

  bool operator==(const ComputeModel&) const = default;
};

std::string to_string(ComputeModel::Kind kind);

// Stateful sampler for one node. Draw sequences depend only on the seed and
// the sequence of (time) queries, so two simulations that execute the node the
// same number of times see the same costs.
class ComputeSampler {
 public:
  ComputeSampler(const ComputeModel& model, std::uint64_t seed);

  double sample(double t_s);

 private:
  struct SpikeState {
    std::vector<double> pending;  // upcoming spike instants, ascending
    std::size_t next = 0;
    double horizon_s = 0.0;
  };

  double draw(const ComputeModel& m, double t_s, std::size_t path);
  bool spike_due(const ComputeModel& m, double t_s, std::size_t path);

  const ComputeModel* model_;
  std::mt19937_64 rng_;
  std::map<std::size_t, SpikeState> spikes_;
  std::map<std::size_t, std::size_t> trace_pos_;
};

struct NodeSpec {
  std::string id;
  ComputeModel compute_model;
  bool parallelizable = false;
  std::map<int, double> max_parallel_cost_table;  // q -> ms
  bool streaming = false;
  bool explicitly_scheduled = true;
  double rate_hz = 0.0;  // firing rate of nodes that are not explicitly scheduled

  // c^q: compute time given at most q cores, scaled from `base_ms` (c^1).
  double cost_with_cores(double base_ms, int q) const;

  bool operator==(const NodeSpec&) const = default;
};

struct EdgeSpec {
  std::string from;
  std::string to;
  bool operator==(const EdgeSpec&) const = default;
};

struct SubchainSpec {
  std::string id;
  std::vector<std::string> node_ids;
  const std::string& head() const { return node_ids.front(); }
  bool operator==(const SubchainSpec&) const = default;
};

struct ChainSpec {
  std::string id;
  std::vector<std::string> subchain_ids;
  bool operator==(const ChainSpec&) const = default;
};

struct Bound {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  bool has_lower() const { return lower > 0.0; }
  bool has_upper() const { return upper < std::numeric_limits<double>::infinity(); }
  bool operator==(const Bound&) const = default;
};

struct ChainWeight {
  double latency = 0.0;
  double period = 0.0;
  bool operator==(const ChainWeight&) const = default;
};

struct ObjectiveSpec {
  std::map<std::string, ChainWeight> chain_weights;
  std::map<std::string, double> subchain_weights;  // weight on subchain period
  std::map<std::string, Bound> node_period_bounds;    // ms; from throughput bounds
  std::map<std::string, Bound> chain_period_bounds;   // ms
  std::map<std::string, Bound> chain_latency_bounds;  // ms
  std::vector<std::string> priority;  // highest first
  std::vector<std::string> order;     // slot order on shared cores
  std::vector<std::string> stealers;  // subchains allowed to steal; empty = all
  double soft_constraint_scale = 2.0;

  bool operator==(const ObjectiveSpec&) const = default;
};

struct Constants {
  double switch_overhead_ms = 0.12;
  double slack_fraction = 0.05;
  double min_cpu_ms_per_hyperperiod = 1.0;
  double stage1_period_s = 20.0;
  double stage2_period_s = 5.0;
  int estimator_window = 50;
  double estimator_percentile = 0.95;
  double bootstrap_compute_ms = 5.0;
  double bootstrap_solve_delay_s = 2.0;
  int max_reciprocal = 64;
  double stage1_solve_cost_ms = 60.0;
  double stage2_solve_cost_ms = 25.0;

  bool operator==(const Constants&) const = default;
};

struct DagSpec {
  std::vector<NodeSpec> nodes;
  std::vector<EdgeSpec> edges;
  std::vector<SubchainSpec> subchains;
  std::vector<ChainSpec> chains;
  ObjectiveSpec objective;
  int cores = 1;
  bool idle_sink = false;
  Constants constants;

  const NodeSpec& node(const std::string& id) const;
  const SubchainSpec& subchain(const std::string& id) const;
  std::optional<std::size_t> node_index(const std::string& id) const;
  std::optional<std::size_t> subchain_index(const std::string& id) const;
  // Index of the subchain that contains node `id`, if any.
  std::optional<std::size_t> subchain_of(const std::string& id) const;
  std::vector<std::string> predecessors(const std::string& id) const;
  std::vector<std::string> successors(const std::string& id) const;

  // Subchains that can steal, in priority order, and slot order (both
  // resolved to defaults when the objective leaves them empty).
  std::vector<std::string> effective_priority() const;
  std::vector<std::string> effective_order() const;
  bool may_steal(const std::string& subchain) const;

  bool operator==(const DagSpec&) const = default;
};

// Parses the JSON spec document. `base_dir` resolves relative trace paths.
DagSpec parse_spec(const std::string& text, const std::string& base_dir = ".");
DagSpec load_spec(const std::string& path);
std::string render_spec(const DagSpec& spec);

// Applies a `key=value` override to constants or `cores`.
void apply_override(DagSpec& spec, const std::string& key, const std::string& value);

struct ValidationReport {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
  bool mentions(const std::string& fragment) const;
};

ValidationReport validate(const DagSpec& spec);

// All subchain-level source-to-sink paths. Throws SpecError when the spec
// declares chains that differ from the derived set.
std::vector<ChainSpec> enumerate_chains(const DagSpec& spec);
std::vector<ChainSpec> derive_chains(const DagSpec& spec);

DagSpec preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace srsched
