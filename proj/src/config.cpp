#include "gravcollapse/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "gravcollapse/errors.hpp"

namespace gravcollapse {

namespace {

std::string where(const YAML::Node& n) {
  const auto m = n.Mark();
  return m.is_null() ? std::string("") : "line " + std::to_string(m.line + 1) + ": ";
}

// Reads the keys of one mapping, remembering which ones were consumed so
// that leftovers can be reported as unknown.
class Section {
 public:
  Section(const YAML::Node& node, std::string name) : node_(node), name_(std::move(name)) {
    if (node_ && !node_.IsMap()) throw ConfigError(where(node_) + "section '" + name_ + "' must be a mapping");
  }

  template <class T>
  void read(const std::string& key, T& out) {
    known_.insert(key);
    if (!node_ || !node_[key]) return;
    const YAML::Node v = node_[key];
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(where(v) + "bad value for '" + name_ + "." + key + "'");
    }
  }

  void read_size(const std::string& key, std::size_t& out) {
    long long v = static_cast<long long>(out);
    read(key, v);
    if (v < 0) throw ConfigError(where(node_[key]) + "'" + name_ + "." + key + "' must be >= 0");
    out = static_cast<std::size_t>(v);
  }

  void read_sizes(const std::string& key, std::vector<std::size_t>& out) {
    std::vector<long long> v(out.begin(), out.end());
    read(key, v);
    out.clear();
    for (long long x : v) {
      if (x < 0) throw ConfigError(where(node_[key]) + "'" + name_ + "." + key + "' entries must be >= 0");
      out.push_back(static_cast<std::size_t>(x));
    }
  }

  void finish() const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!known_.count(key))
        throw ConfigError(where(kv.first) + "unknown key '" + key + "' in section '" + name_ + "'");
    }
  }

 private:
  YAML::Node node_;
  std::string name_;
  std::set<std::string> known_;
};

const std::set<std::string> kTopLevel{"scenario",        "model",       "grid",          "ensemble",
                                      "output",          "sweep",       "eigenstate_drift", "hydrogen_analog",
                                      "pointer_cat",     "scaling_sweep", "mass_identical", "bipartite",
                                      "two_branch_oracle"};

void read_model(const YAML::Node& n, ModelParams& m) {
  Section s(n, "model");
  s.read("epsilon", m.epsilon);
  s.read("grav_strength", m.grav_strength);
  s.read("hbar", m.hbar);
  s.read("particle_masses", m.particle_masses);
  s.read("grav_masses", m.grav_masses);
  s.read("softening", m.softening);
  s.read("smear_length", m.smear_length);
  s.read("dt", m.dt);
  s.read("t_max", m.t_max);
  s.read("seed", m.seed);
  s.read("localization_self_terms", m.localization_self_terms);
  s.read("pin_positions", m.pin_positions);
  std::string flow = m.flow == FlowMode::Normalized ? "normalized" : "unnormalized";
  s.read("flow", flow);
  if (flow == "normalized")
    m.flow = FlowMode::Normalized;
  else if (flow == "unnormalized")
    m.flow = FlowMode::Unnormalized;
  else
    throw ConfigError(where(n["flow"]) + "model.flow must be 'normalized' or 'unnormalized'");
  s.finish();
}

void read_sections(const YAML::Node& root, RunConfig& c) {
  auto& sp = c.spec;
  read_model(root["model"], sp.model);
  {
    Section s(root["grid"], "grid");
    s.read_sizes("points", sp.grid.points);
    s.read("box", sp.grid.box);
    std::string boundary = "periodic";
    s.read("boundary", boundary);
    if (boundary != "periodic") throw ConfigError(where(root["grid"]["boundary"]) + "grid.boundary must be 'periodic'");
    s.finish();
  }
  {
    // Unset ensemble fields follow the model.
    sp.ensemble.base_seed = sp.model.seed;
    if (sp.kind != ScenarioKind::PointerCat && sp.kind != ScenarioKind::ScalingSweep &&
        sp.kind != ScenarioKind::MassIdenticalSuperposition && sp.kind != ScenarioKind::BipartiteNoSignal)
      sp.ensemble.t_max = sp.model.t_max;
    Section s(root["ensemble"], "ensemble");
    s.read_size("n_runs", sp.ensemble.n_runs);
    s.read("base_seed", sp.ensemble.base_seed);
    s.read("collapse_threshold", sp.ensemble.collapse_threshold);
    s.read("t_max", sp.ensemble.t_max);
    s.finish();
  }
  {
    Section s(root["eigenstate_drift"], "eigenstate_drift");
    auto& e = sp.eigenstate_drift;
    s.read("omega", e.omega);
    s.read_size("level", e.level);
    s.read("coherent", e.coherent);
    s.read("displacement", e.displacement);
    s.read_size("cadence", e.cadence);
    s.finish();
  }
  {
    Section s(root["hydrogen_analog"], "hydrogen_analog");
    auto& h = sp.hydrogen;
    s.read("coulomb", h.coulomb);
    s.read("coulomb_softening", h.coulomb_softening);
    s.read("x_eff", h.x_eff);
    s.read("relax_dtau", h.relax_dtau);
    s.read_size("relax_steps", h.relax_steps);
    s.finish();
  }
  {
    Section s(root["pointer_cat"], "pointer_cat");
    auto& p = sp.pointer_cat;
    s.read("width", p.width);
    s.read("separation", p.separation);
    s.read("weight_left", p.weight_left);
    s.read("force_branch", p.force_branch);
    s.read("survivor_fidelity", p.survivor_fidelity);
    s.finish();
  }
  {
    Section s(root["scaling_sweep"], "scaling_sweep");
    auto& w = sp.scaling_sweep;
    s.read("epsilons", w.epsilons);
    s.read("strengths", w.strengths);
    s.read("steps_per_collapse", w.steps_per_collapse);
    s.read("extra_thresholds", w.extra_thresholds);
    s.finish();
  }
  {
    Section s(root["mass_identical"], "mass_identical");
    s.read("displacements", sp.mass_identical.displacements);
    s.read("horizon_factor", sp.mass_identical.horizon_factor);
    s.finish();
  }
  {
    Section s(root["bipartite"], "bipartite");
    auto& b = sp.bipartite;
    s.read("width", b.width);
    s.read("separation_a", b.separation_a);
    s.read("separation_b", b.separation_b);
    s.read("grav_mass_a", b.grav_mass_a);
    s.read("grav_mass_b", b.grav_mass_b);
    s.read("region_shift", b.region_shift);
    s.read_size("bins", b.bins);
    s.read_size("fine_bins", b.fine_bins);
    s.read_size("resamples", b.resamples);
    s.read("level", b.level);
    s.finish();
  }
  {
    Section s(root["two_branch_oracle"], "two_branch_oracle");
    auto& o = sp.oracle;
    s.read("p", o.p);
    s.read("lambda_full", o.lambda_full);
    s.read("lambda_empty", o.lambda_empty);
    s.read_size("samples", o.samples);
    s.finish();
  }
  {
    Section s(root["output"], "output");
    std::string dir = c.output_dir.string();
    s.read("directory", dir);
    c.output_dir = dir;
    s.read("formats", c.formats);
    for (const auto& f : c.formats)
      if (f != "json" && f != "csv") throw ConfigError(where(root["output"]["formats"]) + "unknown output format '" + f + "'");
    s.finish();
  }
  if (const auto sw = root["sweep"]) {
    if (!sw.IsMap()) throw ConfigError(where(sw) + "section 'sweep' must map dotted keys to value lists");
    for (const auto& kv : sw) {
      SweepAxis axis;
      axis.key = kv.first.as<std::string>();
      if (axis.key.find('.') == std::string::npos)
        throw ConfigError(where(kv.first) + "sweep key '" + axis.key + "' must be of the form section.key");
      try {
        axis.values = kv.second.as<std::vector<double>>();
      } catch (const YAML::Exception&) {
        throw ConfigError(where(kv.second) + "sweep values for '" + axis.key + "' must be a list of numbers");
      }
      if (axis.values.empty()) throw ConfigError(where(kv.second) + "sweep axis '" + axis.key + "' is empty");
      c.sweep.push_back(std::move(axis));
    }
  }
}

RunConfig parse_node(const YAML::Node& root) {
  if (!root || !root.IsMap()) throw ConfigError("config must be a mapping with a 'scenario' key");
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (!kTopLevel.count(key)) throw ConfigError(where(kv.first) + "unknown top-level key '" + key + "'");
  }
  if (!root["scenario"]) throw ConfigError("missing required key 'scenario'");
  const auto name = root["scenario"].as<std::string>();
  const auto kind = scenario_from_string(name);
  if (!kind) throw ConfigError(where(root["scenario"]) + "unknown scenario '" + name + "'");

  RunConfig c;
  c.spec = default_spec(*kind);
  read_sections(root, c);
  try {
    c.spec.validate();
  } catch (const std::logic_error& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return c;
}

YAML::Node to_node(const RunConfig& c) {
  const auto& sp = c.spec;
  YAML::Node root;
  root["scenario"] = to_string(sp.kind);
  auto& m = sp.model;
  YAML::Node model;
  model["epsilon"] = m.epsilon;
  model["grav_strength"] = m.grav_strength;
  model["hbar"] = m.hbar;
  model["particle_masses"] = m.particle_masses;
  model["grav_masses"] = m.grav_masses;
  model["softening"] = m.softening;
  model["smear_length"] = m.smear_length;
  model["dt"] = m.dt;
  model["t_max"] = m.t_max;
  model["seed"] = m.seed;
  model["localization_self_terms"] = m.localization_self_terms;
  model["pin_positions"] = m.pin_positions;
  model["flow"] = m.flow == FlowMode::Normalized ? "normalized" : "unnormalized";
  root["model"] = model;

  YAML::Node grid;
  std::vector<long long> pts(sp.grid.points.begin(), sp.grid.points.end());
  grid["points"] = pts;
  grid["box"] = sp.grid.box;
  grid["boundary"] = "periodic";
  root["grid"] = grid;

  YAML::Node ens;
  ens["n_runs"] = static_cast<long long>(sp.ensemble.n_runs);
  ens["base_seed"] = sp.ensemble.base_seed;
  ens["collapse_threshold"] = sp.ensemble.collapse_threshold;
  ens["t_max"] = sp.ensemble.t_max;
  root["ensemble"] = ens;

  YAML::Node ed;
  ed["omega"] = sp.eigenstate_drift.omega;
  ed["level"] = static_cast<long long>(sp.eigenstate_drift.level);
  ed["coherent"] = sp.eigenstate_drift.coherent;
  ed["displacement"] = sp.eigenstate_drift.displacement;
  ed["cadence"] = static_cast<long long>(sp.eigenstate_drift.cadence);
  root["eigenstate_drift"] = ed;

  YAML::Node h;
  h["coulomb"] = sp.hydrogen.coulomb;
  h["coulomb_softening"] = sp.hydrogen.coulomb_softening;
  h["x_eff"] = sp.hydrogen.x_eff;
  h["relax_dtau"] = sp.hydrogen.relax_dtau;
  h["relax_steps"] = static_cast<long long>(sp.hydrogen.relax_steps);
  root["hydrogen_analog"] = h;

  YAML::Node p;
  p["width"] = sp.pointer_cat.width;
  p["separation"] = sp.pointer_cat.separation;
  p["weight_left"] = sp.pointer_cat.weight_left;
  p["force_branch"] = sp.pointer_cat.force_branch;
  p["survivor_fidelity"] = sp.pointer_cat.survivor_fidelity;
  root["pointer_cat"] = p;

  YAML::Node w;
  w["epsilons"] = sp.scaling_sweep.epsilons;
  w["strengths"] = sp.scaling_sweep.strengths;
  w["steps_per_collapse"] = sp.scaling_sweep.steps_per_collapse;
  w["extra_thresholds"] = sp.scaling_sweep.extra_thresholds;
  root["scaling_sweep"] = w;

  YAML::Node mi;
  mi["displacements"] = sp.mass_identical.displacements;
  mi["horizon_factor"] = sp.mass_identical.horizon_factor;
  root["mass_identical"] = mi;

  YAML::Node b;
  b["width"] = sp.bipartite.width;
  b["separation_a"] = sp.bipartite.separation_a;
  b["separation_b"] = sp.bipartite.separation_b;
  b["grav_mass_a"] = sp.bipartite.grav_mass_a;
  b["grav_mass_b"] = sp.bipartite.grav_mass_b;
  b["region_shift"] = sp.bipartite.region_shift;
  b["bins"] = static_cast<long long>(sp.bipartite.bins);
  b["fine_bins"] = static_cast<long long>(sp.bipartite.fine_bins);
  b["resamples"] = static_cast<long long>(sp.bipartite.resamples);
  b["level"] = sp.bipartite.level;
  root["bipartite"] = b;

  YAML::Node o;
  o["p"] = sp.oracle.p;
  o["lambda_full"] = sp.oracle.lambda_full;
  o["lambda_empty"] = sp.oracle.lambda_empty;
  o["samples"] = static_cast<long long>(sp.oracle.samples);
  root["two_branch_oracle"] = o;

  YAML::Node out;
  out["directory"] = c.output_dir.string();
  out["formats"] = c.formats;
  root["output"] = out;

  if (!c.sweep.empty()) {
    YAML::Node sw;
    for (const auto& axis : c.sweep) sw[axis.key] = axis.values;
    root["sweep"] = sw;
  }
  return root;
}

std::string emit_node(const YAML::Node& n) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e.SetFloatPrecision(9);
  e << n;
  return std::string(e.c_str()) + "\n";
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ConfigError("config text is empty");
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": YAML parse error: " + e.msg);
  }
  return parse_node(root);
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const RunConfig& config) { return emit_node(to_node(config)); }

std::vector<std::pair<std::string, RunConfig>> expand_sweep(const RunConfig& config) {
  if (config.sweep.empty()) return {{"", config}};
  std::vector<std::pair<std::string, RunConfig>> out;
  std::vector<std::size_t> idx(config.sweep.size(), 0);
  for (std::size_t point = 0;; ++point) {
    YAML::Node root = to_node(config);
    root.remove("sweep");
    for (std::size_t a = 0; a < config.sweep.size(); ++a) {
      const auto& key = config.sweep[a].key;
      const auto dot = key.find('.');
      const auto section = key.substr(0, dot), field = key.substr(dot + 1);
      if (!root[section] || !root[section].IsMap() || !root[section][field])
        throw ConfigError("sweep key '" + key + "' does not name a config field");
      root[section][field] = config.sweep[a].values[idx[a]];
    }
    char name[32];
    std::snprintf(name, sizeof name, "point_%03zu", point);
    // Round-trip through text so the point is validated like a user config.
    out.emplace_back(name, parse_config(emit_node(root)));
    std::size_t a = config.sweep.size();
    while (a-- > 0) {
      if (++idx[a] < config.sweep[a].values.size()) break;
      idx[a] = 0;
      if (a == 0) return out;
    }
  }
}

}  // namespace gravcollapse
