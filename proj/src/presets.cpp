#include "srsched/model.hpp"

namespace srsched {

namespace {

NodeSpec node(std::string id, ComputeModel m) {
  NodeSpec n;
  n.id = std::move(id);
  n.compute_model = std::move(m);
  return n;
}

NodeSpec sensor(std::string id, double rate_hz) {
  NodeSpec n = node(std::move(id), ComputeModel::constant_ms(0.001));
  n.explicitly_scheduled = false;
  n.rate_hz = rate_hz;
  return n;
}

ComputeModel drift(double base_ms, double slope) {
  ComputeModel m;
  m.kind = ComputeModel::Kind::drift;
  m.slope_ms_per_s = slope;
  m.parts.push_back(ComputeModel::constant_ms(base_ms));
  return m;
}

ComputeModel bimodal(double p_cheap, ComputeModel cheap, ComputeModel expensive) {
  ComputeModel m;
  m.kind = ComputeModel::Kind::bimodal;
  m.p_cheap = p_cheap;
  m.parts.push_back(std::move(cheap));
  m.parts.push_back(std::move(expensive));
  return m;
}

ComputeModel spike(ComputeModel base, double rate_hz, double cost_ms) {
  ComputeModel m;
  m.kind = ComputeModel::Kind::spike;
  m.spike_rate_hz = rate_hz;
  m.spike_cost_ms = cost_ms;
  m.parts.push_back(std::move(base));
  return m;
}

void edge(DagSpec& s, const std::string& a, const std::string& b) { s.edges.push_back({a, b}); }

void chain(DagSpec& s, std::string id, std::vector<std::string> subchains, double rt_weight) {
  s.chains.push_back({id, std::move(subchains)});
  if (rt_weight > 0.0) s.objective.chain_weights[id] = {rt_weight, rt_weight};
}

DagSpec facetrack() {
  DagSpec s;
  s.nodes.push_back(node("camera", ComputeModel::constant_ms(25.0)));
  s.nodes.push_back(node("detector", ComputeModel::uniform_ms(55.0, 60.0)));
  s.nodes.push_back(node("planner", ComputeModel::constant_ms(1.0)));
  edge(s, "camera", "detector");
  edge(s, "detector", "planner");
  s.subchains.push_back({"track", {"camera", "detector", "planner"}});
  chain(s, "track", {"track"}, 1.0);
  s.objective.priority = {"track"};
  s.cores = 1;
  return s;
}

DagSpec nav2d() {
  DagSpec s;
  s.nodes.push_back(sensor("scan", 50.0));
  s.nodes.push_back(sensor("odom", 50.0));
  s.nodes.push_back(node("local_map", ComputeModel::constant_ms(3.0)));
  s.nodes.push_back(node("local_plan", ComputeModel::constant_ms(2.0)));
  auto gl = node("global_loc",
                 bimodal(0.6, ComputeModel::constant_ms(1.0), spike(ComputeModel::uniform_ms(8.0, 12.0), 0.2, 80.0)));
  gl.streaming = true;
  s.nodes.push_back(gl);
  s.nodes.push_back(node("global_map", drift(30.0, 0.5)));
  s.nodes.push_back(node("global_plan", drift(20.0, 0.4)));
  s.nodes.push_back(node("nav_cmd", ComputeModel::constant_ms(2.0)));

  edge(s, "scan", "local_map");
  edge(s, "odom", "local_map");
  edge(s, "local_map", "local_plan");
  edge(s, "scan", "global_loc");
  edge(s, "global_loc", "global_map");
  edge(s, "global_map", "global_plan");
  edge(s, "global_loc", "global_plan");
  edge(s, "global_plan", "nav_cmd");
  edge(s, "global_loc", "nav_cmd");
  edge(s, "nav_cmd", "local_plan");

  s.subchains.push_back({"local", {"local_map", "local_plan"}});
  s.subchains.push_back({"GL", {"global_loc"}});
  s.subchains.push_back({"GM", {"global_map"}});
  s.subchains.push_back({"GP", {"global_plan"}});
  s.subchains.push_back({"NC", {"nav_cmd"}});

  chain(s, "local", {"local"}, 1.0);
  chain(s, "map_path", {"GL", "GM", "GP", "NC", "local"}, 0.005);
  chain(s, "plan_path", {"GL", "GP", "NC", "local"}, 0.005);
  chain(s, "loc_path", {"GL", "NC", "local"}, 0.005);
  s.objective.subchain_weights["GL"] = 0.5;

  s.objective.node_period_bounds["global_loc"] = {1000.0 / 50.0, Bound{}.upper};
  s.objective.node_period_bounds["global_plan"] = {1000.0 / 1.0, Bound{}.upper};
  s.objective.node_period_bounds["global_map"] = {0.0, 400.0};
  s.objective.priority = {"local", "GL", "NC", "GM", "GP"};
  s.objective.order = {"GL", "GM", "GP", "NC", "local"};
  s.objective.stealers = {"GL"};
  s.cores = 2;
  return s;
}

DagSpec nav2d_yolo() {
  DagSpec s = nav2d();
  s.nodes.push_back(sensor("camera", 30.0));
  s.nodes.push_back(node("preprocess", ComputeModel::constant_ms(25.0)));
  s.nodes.push_back(node("yolo", ComputeModel::uniform_ms(150.0, 200.0)));
  edge(s, "camera", "preprocess");
  edge(s, "preprocess", "yolo");
  s.subchains.push_back({"pre", {"preprocess"}});
  s.subchains.push_back({"yolo", {"yolo"}});
  chain(s, "detect", {"pre", "yolo"}, 0.0005);
  s.objective.priority = {"local", "GL", "NC", "GM", "GP", "pre", "yolo"};
  s.objective.order = {"GL", "GM", "GP", "NC", "pre", "yolo", "local"};
  s.cores = 3;
  return s;
}

DagSpec vr() {
  DagSpec s;
  s.nodes.push_back(sensor("imu", 500.0));
  s.nodes.push_back(sensor("integrator", 500.0));
  s.nodes.push_back(node("camera", ComputeModel::constant_ms(2.0)));
  s.nodes.push_back(node("vio", ComputeModel::uniform_ms(8.0, 12.0)));
  s.nodes.push_back(node("render", ComputeModel::uniform_ms(4.0, 7.0)));
  s.nodes.push_back(node("timewarp", ComputeModel::constant_ms(2.0)));

  edge(s, "camera", "vio");
  edge(s, "vio", "integrator");
  edge(s, "imu", "integrator");
  edge(s, "integrator", "render");
  edge(s, "integrator", "timewarp");
  edge(s, "render", "timewarp");

  s.subchains.push_back({"cam_vio", {"camera", "vio"}});
  s.subchains.push_back({"render", {"render"}});
  s.subchains.push_back({"timewarp", {"timewarp"}});

  chain(s, "timewarp", {"timewarp"}, 1.0);
  chain(s, "render", {"render", "timewarp"}, 0.5);
  chain(s, "vio_render", {"cam_vio", "render", "timewarp"}, 0.005);
  chain(s, "vio_timewarp", {"cam_vio", "timewarp"}, 0.005);

  const double vsync = 8.33;
  s.objective.node_period_bounds["timewarp"] = {vsync, vsync};
  s.objective.node_period_bounds["render"] = {vsync, Bound{}.upper};
  s.objective.priority = {"timewarp", "render", "cam_vio"};
  s.objective.order = {"timewarp", "cam_vio", "render"};
  s.objective.stealers = {"timewarp"};
  s.cores = 2;
  return s;
}

}  // namespace

std::vector<std::string> preset_names() { return {"facetrack", "nav2d", "nav2d_yolo", "vr"}; }

DagSpec preset(const std::string& name) {
  if (name == "facetrack") return facetrack();
  if (name == "nav2d") return nav2d();
  if (name == "nav2d_yolo") return nav2d_yolo();
  if (name == "vr") return vr();
  throw SpecError("unknown preset '" + name + "'");
}

}  // namespace srsched
