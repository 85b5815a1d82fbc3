#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "srsched/simulator.hpp"

namespace srsched {

enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitInvalid = 2, kExitInfeasible = 3, kExitInvariant = 4 };

// Runs the command line; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Spec file path, or a preset name when no such file exists.
DagSpec resolve_spec(const std::string& path_or_preset);

struct SweepAxis {
  std::string name;  // source_period_ms or cores
  std::vector<double> values;
};

SweepAxis parse_axis(const std::string& text);  // name=v1,v2,...

// Applies one axis value to a copy of the spec and config.
void apply_axis(const std::string& name, double value, DagSpec& spec, SimConfig& config);

// Per-chain metric names in summary and sweep CSVs.
std::vector<std::string> summary_metrics();

// chain,metric,value
std::string summary_csv(const DagSpec& spec, const EmpiricalMetrics& m);

// <axis>,chain,metric,value; point i runs with seed ^ i.
std::string sweep_csv(const DagSpec& spec, const SweepAxis& axis, const SimConfig& base);

}  // namespace srsched
