#include "srsched/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

namespace srsched {

namespace fs = std::filesystem;

DagSpec resolve_spec(const std::string& path_or_preset) {
  if (fs::exists(path_or_preset)) return load_spec(path_or_preset);
  auto names = preset_names();
  if (std::find(names.begin(), names.end(), path_or_preset) != names.end()) return preset(path_or_preset);
  throw SpecError("no spec file or preset named '" + path_or_preset + "'");
}

SweepAxis parse_axis(const std::string& text) {
  auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("axis must look like name=v1,v2,...");
  SweepAxis a;
  a.name = text.substr(0, eq);
  if (a.name != "source_period_ms" && a.name != "cores")
    throw std::invalid_argument("unknown axis '" + a.name + "' (source_period_ms or cores)");
  std::stringstream ss(text.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !(v > 0)) throw std::invalid_argument("bad axis value '" + item + "'");
    a.values.push_back(v);
  }
  if (a.values.empty()) throw std::invalid_argument("axis '" + a.name + "' has no values");
  return a;
}

void apply_axis(const std::string& name, double value, DagSpec& spec, SimConfig& config) {
  if (name == "cores") {
    spec.cores = static_cast<int>(value);
    return;
  }
  if (name != "source_period_ms") throw std::invalid_argument("unknown axis '" + name + "'");
  for (const auto& c : spec.chains) config.trigger_period_ms[c.subchain_ids.front()] = value;
}

std::vector<std::string> summary_metrics() {
  return {"mean_rt_ms", "p95_rt_ms", "max_rt_ms", "mean_latency_ms", "max_latency_ms", "mean_period_ms"};
}

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::vector<std::pair<std::string, std::vector<std::string>>> summary_rows(const DagSpec& spec,
                                                                            const EmpiricalMetrics& m) {
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  for (const auto& c : spec.chains) {
    const auto& cs = m.chains.at(c.id);
    Summary rt = summarize(cs.response_ms), lat = summarize(cs.latency_ms), per = summarize(cs.period_ms);
    auto v = [](const Summary& s, double x) { return s.count ? num(x) : std::string(); };
    rows.push_back({c.id,
                    {v(rt, rt.mean), v(rt, rt.p95), v(rt, rt.max), v(lat, lat.mean), v(lat, lat.max), v(per, per.mean)}});
  }
  return rows;
}

std::string summary_block(const DagSpec& spec, const EmpiricalMetrics& m, const std::string& prefix) {
  std::ostringstream os;
  auto names = summary_metrics();
  for (const auto& [chain, values] : summary_rows(spec, m))
    for (std::size_t i = 0; i < names.size(); ++i) os << prefix << chain << ',' << names[i] << ',' << values[i] << '\n';
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
}

fs::path default_dir() {
  const char* env = std::getenv("SRSCHED_OUT_DIR");
  return env && *env ? fs::path(env) : fs::path("srsched_out");
}

std::string fraction_csv(const GlobalSchedule& g) {
  std::ostringstream os;
  os << "subchain,placement,cores,fraction,budget_ms,period_ms\n";
  for (const auto& p : g.exclusive) {
    os << p.subchain << ",exclusive,";
    for (std::size_t i = 0; i < p.cores.size(); ++i) os << (i ? " " : "") << p.cores[i];
    os << ",1,," << num(p.trigger_period) << '\n';
  }
  for (const auto& c : g.shared)
    for (const auto& e : c.entries)
      os << e.subchain << ",shared," << c.core << ',' << num(e.fraction) << ',' << num(e.budget_ms) << ','
         << num(e.period_ms) << '\n';
  return os.str();
}

struct Common {
  std::string spec;
  std::string out;
  std::vector<std::string> sets;
  int cores = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--spec", c.spec, "Spec file or preset name")->required();
  cmd->add_option("--out", c.out, "Output path");
  cmd->add_option("--set", c.sets, "Constant override key=value (repeatable)");
  cmd->add_option("--cores", c.cores, "Core count override")->check(CLI::PositiveNumber);
}

DagSpec load_common(const Common& c, SimConfig* config = nullptr) {
  DagSpec spec = resolve_spec(c.spec);
  for (const auto& s : c.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw SpecError("override '" + s + "' is not key=value");
    std::string key = s.substr(0, eq), value = s.substr(eq + 1);
    if (key == "source_period_ms" && config) {
      apply_axis(key, parse_axis(s).values.front(), spec, *config);
      continue;
    }
    apply_override(spec, key, value);
  }
  if (c.cores > 0) spec.cores = c.cores;
  ValidationReport r = validate(spec);
  if (!r.ok()) {
    std::string msg = "spec is invalid:";
    for (const auto& i : r.issues) msg += "\n  " + i;
    throw SpecError(msg);
  }
  return spec;
}

struct SimFlags {
  std::uint64_t seed = 1;
  double duration = 30.0;
  bool adaptive = false, fixed = false, no_steal = false;
};

void add_sim(CLI::App* cmd, SimFlags& f) {
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--duration", f.duration, "Simulated seconds")->check(CLI::PositiveNumber);
  auto* a = cmd->add_flag("--adaptive", f.adaptive, "Re-solve online (default)");
  cmd->add_flag("--static", f.fixed, "Solve once from nominal costs")->excludes(a);
  cmd->add_flag("--no-steal", f.no_steal, "Disable priority stealing");
}

SimConfig sim_config(const SimFlags& f) {
  SimConfig c;
  c.seed = f.seed;
  c.duration_s = f.duration;
  c.adaptive = !f.fixed;
  c.stealing = !f.no_steal;
  return c;
}

}  // namespace

std::string summary_csv(const DagSpec& spec, const EmpiricalMetrics& m) {
  return "chain,metric,value\n" + summary_block(spec, m, "");
}

std::string sweep_csv(const DagSpec& spec, const SweepAxis& axis, const SimConfig& base) {
  std::vector<std::future<std::string>> jobs;
  for (std::size_t i = 0; i < axis.values.size(); ++i) {
    jobs.push_back(std::async(std::launch::async, [&, i] {
      DagSpec s = spec;
      SimConfig c = base;
      c.seed = base.seed ^ static_cast<std::uint64_t>(i);
      apply_axis(axis.name, axis.values[i], s, c);
      return summary_block(s, measure(run_simulation(s, c), s), num(axis.values[i]) + ",");
    }));
  }
  std::string csv = axis.name + ",chain,metric,value\n";
  for (auto& j : jobs) csv += j.get();
  return csv;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage CPU scheduler for sense-react DAGs", "srsched"};
  app.require_subcommand(1);

  Common common;
  SimFlags sim;
  std::string axis_text, baselines_text, preset_name;
  bool list = false;

  auto* solve = app.add_subcommand("solve", "Solve a schedule and write it (.json or .csv)");
  add_common(solve, common);
  auto* simulate = app.add_subcommand("simulate", "Simulate and write trace, metrics and summary CSVs");
  add_common(simulate, common);
  add_sim(simulate, sim);
  auto* sweep = app.add_subcommand("sweep", "Simulate once per axis value");
  add_common(sweep, common);
  add_sim(sweep, sim);
  sweep->add_option("--axis", axis_text, "source_period_ms=v1,v2,... or cores=v1,v2,...")->required();
  auto* compare = app.add_subcommand("compare", "Compare baseline configurations");
  add_common(compare, common);
  add_sim(compare, sim);
  compare->add_option("--baselines", baselines_text, "Comma-separated baseline names")->required();
  auto* pre = app.add_subcommand("preset", "Export a built-in spec");
  pre->add_option("name", preset_name, "Preset name");
  pre->add_option("--out", common.out, "Output path (stdout when absent)");
  pre->add_flag("--list", list, "List preset names");
  auto* val = app.add_subcommand("validate", "Validate a spec");
  val->add_option("--spec", common.spec, "Spec file or preset name")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*val) {
      DagSpec spec = resolve_spec(common.spec);
      ValidationReport r = validate(spec);
      for (const auto& i : r.issues) out << i << '\n';
      if (!r.ok()) return kExitInvalid;
      out << "ok\n";
      return kExitOk;
    }

    if (*pre) {
      if (list || preset_name.empty()) {
        for (const auto& n : preset_names()) out << n << '\n';
        return kExitOk;
      }
      std::string doc = render_spec(preset(preset_name));
      if (common.out.empty())
        out << doc << '\n';
      else
        write_file(common.out, doc + "\n");
      return kExitOk;
    }

    if (*solve) {
      DagSpec spec = load_common(common);
      GlobalSchedule g = solve_schedule(spec, {});
      fs::path path = common.out.empty() ? default_dir() / "schedule.json" : fs::path(common.out);
      write_file(path, path.extension() == ".csv" ? fraction_csv(g) : schedule_to_json(spec, g) + "\n");
      out << "objective " << num(g.objective) << '\n';
      for (const auto& p : g.exclusive)
        out << p.subchain << " exclusive cores=" << p.k << " q=" << p.q << " trigger_period_ms="
            << num(p.trigger_period) << '\n';
      for (const auto& c : g.shared)
        for (const auto& e : c.entries)
          out << e.subchain << " shared core=" << c.core << " fraction=" << num(e.fraction)
              << " period_ms=" << num(e.period_ms) << '\n';
      for (const auto& [id, cm] : g.chain_metrics)
        out << "chain " << id << " latency_ms=" << num(cm.latency) << " rt_ms=" << num(cm.response_time) << '\n';
      for (const auto& w : g.warnings) err << w << '\n';
      out << "wrote " << path.string() << '\n';
      return kExitOk;
    }

    SimConfig config = sim_config(sim);
    DagSpec spec = load_common(common, &config);

    if (*simulate) {
      SimEventTrace trace = run_simulation(spec, config);
      EmpiricalMetrics m = measure(trace, spec);
      fs::path dir = common.out.empty() ? default_dir() : fs::path(common.out);
      write_file(dir / "trace.csv", trace.to_csv());
      write_file(dir / "metrics.csv", m.to_csv());
      write_file(dir / "summary.csv", summary_csv(spec, m));
      for (const auto& w : trace.warnings) err << w << '\n';
      for (const auto& c : spec.chains) {
        Summary rt = summarize(m.chains.at(c.id).response_ms);
        out << c.id << " samples=" << rt.count << " mean_rt_ms=" << num(rt.mean) << " p95_rt_ms=" << num(rt.p95)
            << '\n';
      }
      out << "violation_s=" << num(m.total_violation_s()) << '\n';
      out << "wrote " << dir.string() << '\n';
      return kExitOk;
    }

    if (*sweep) {
      SweepAxis axis = parse_axis(axis_text);
      fs::path path = common.out.empty() ? default_dir() / "sweep.csv" : fs::path(common.out);
      write_file(path, sweep_csv(spec, axis, config));
      out << "wrote " << path.string() << '\n';
      return kExitOk;
    }

    if (*compare) {
      std::vector<std::pair<std::string, SimConfig>> configs;
      std::stringstream ss(baselines_text);
      std::string name;
      while (std::getline(ss, name, ',')) configs.emplace_back(name, baseline_config(spec, name, config));
      ComparisonTable t = compare_schedules(spec, configs);
      fs::path path = common.out.empty() ? default_dir() / "compare.csv" : fs::path(common.out);
      std::string csv = t.to_csv();
      write_file(path, csv);
      out << csv << "wrote " << path.string() << '\n';
      return kExitOk;
    }
  } catch (const SpecError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const SimInvariantError& e) {
    err << "invariant breach: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace srsched
