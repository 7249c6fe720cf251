#include "etso/scenario.hpp"

#include "etso/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace etso {
namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw SchemaError(where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

template <class T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return require(obj, key, where).get<T>();
  } catch (const json::exception& e) {
    throw SchemaError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return fallback;
  return get<T>(obj, key, where);
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vector3 get_vec3(const json& obj, const char* key, const Vector3& fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const auto v = get<std::vector<double>>(obj, key, where);
  if (v.size() != 3) throw SchemaError(where + "." + key + ": expected 3 numbers");
  return {v[0], v[1], v[2]};
}

Plant parse_plant(const json& j) {
  const std::string w = "environment.plant";
  Plant p;
  p.mass = get_or(j, "mass", p.mass, w);
  p.drag = get_or(j, "drag", p.drag, w);
  p.lead_time_xy = get_or(j, "lead_time_xy", p.lead_time_xy, w);
  p.lead_time_z = get_or(j, "lead_time_z", p.lead_time_z, w);
  if (j.contains("gain_units")) {
    const auto u = get<std::vector<double>>(j, "gain_units", w);
    if (u.size() != 4) throw SchemaError(w + ".gain_units: expected 4 numbers");
    p.gain_units = Eigen::Vector4d(u[0], u[1], u[2], u[3]);
  }
  p.actuation_limit = get_or(j, "actuation_limit", p.actuation_limit, w);
  p.time_step = get_or(j, "time_step", p.time_step, w);
  p.crash_bound = get_or(j, "crash_bound", p.crash_bound, w);
  p.start_offset = get_vec3(j, "start_offset", p.start_offset, w);
  p.wind_bias = get_vec3(j, "wind_bias", p.wind_bias, w);
  p.gust_amplitude = get_or(j, "gust_amplitude", p.gust_amplitude, w);
  return p;
}

ReferenceTrajectory parse_reference(const json& j, const std::string& w) {
  const ReferenceShape shape = parse_shape(get<std::string>(j, "shape", w));
  ReferenceTrajectory r = ReferenceTrajectory::make(
      shape, 2, get_or(j, "duration", 10.0, w), get_or(j, "amplitude", 1.0, w),
      get_or(j, "altitude", 1.0, w), get_or(j, "altitude_amplitude", 1.0, w),
      get_or(j, "altitude_frequency", 2, w), get_or(j, "waist", 1.0, w));
  const json& wp = require(j, "waypoints", w);
  if (wp.is_number_integer()) {
    const int count = wp.get<int>();
    if (count < 2) throw ConfigError(w + ".waypoints: need at least 2");
    r.fill_waypoints(static_cast<std::size_t>(count));
  } else if (wp.is_array()) {
    r.waypoints.clear();
    for (const auto& p : wp) {
      const auto v = p.get<std::vector<double>>();
      if (v.size() != 3) throw SchemaError(w + ".waypoints: each waypoint needs 3 coordinates");
      r.waypoints.emplace_back(v[0], v[1], v[2]);
    }
  } else {
    throw SchemaError(w + ".waypoints: expected a count or a list of points");
  }
  r.validate();
  return r;
}

ThresholdScaling parse_scaling(const std::string& s) {
  if (s == "scaled") return ThresholdScaling::Scaled;
  if (s == "unscaled") return ThresholdScaling::Unscaled;
  throw ConfigError("trigger.scaling must be 'scaled' or 'unscaled', got '" + s + "'");
}

KernelParams parse_kernel(const json& j, const std::string& w) {
  KernelParams k;
  k.lengthscales = to_vector(get<std::vector<double>>(j, "lengthscales", w));
  k.prior_mean = get_or(j, "prior_mean", k.prior_mean, w);
  k.noise_std_dev = get_or(j, "noise_std_dev", k.noise_std_dev, w);
  k.prior_std_dev = get_or(j, "prior_std_dev", k.prior_std_dev, w);
  k.validate();
  return k;
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

}  // namespace

std::vector<std::string> scenario_ids() {
  std::vector<std::string> ids;
  for (const auto& [id, text] : embedded_scenarios()) ids.push_back(id);
  return ids;
}

json load_scenario_document(const std::string& id_or_path) {
  for (const auto& [id, text] : embedded_scenarios()) {
    if (id == id_or_path) {
      try {
        return json::parse(text);
      } catch (const json::exception& e) {
        throw SchemaError("embedded scenario '" + id + "': " + e.what());
      }
    }
  }
  std::ifstream in(id_or_path);
  if (!in) throw NotFoundError("no scenario id or readable file named '" + id_or_path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(id_or_path + ": " + e.what());
  }
}

void apply_override(json& document, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  json* node = &document;
  std::stringstream path(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(path, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) {
      throw ConfigError("override key '" + key + "' does not name an existing setting");
    }
    node = &(*node)[parts[i]];
  }
  *node = parse_value(assignment.substr(eq + 1));
}

Scenario parse_scenario(const json& doc) {
  if (!doc.is_object()) throw SchemaError("scenario document must be an object");
  const std::string schema = get_or<std::string>(doc, "schema", "", "scenario");
  if (schema != "etso-scenario/1") {
    throw SchemaError("scenario schema must be 'etso-scenario/1', got '" + schema + "'");
  }
  Scenario sc;
  sc.document = doc;
  sc.id = get<std::string>(doc, "id", "scenario");
  sc.description = get_or<std::string>(doc, "description", "", "scenario");
  sc.scenario_class = get_or<std::string>(doc, "class", "stationary", "scenario");
  sc.horizon = get_or(doc, "horizon", 60, "scenario");
  if (doc.contains("expected")) sc.expected = doc.at("expected");

  EtsoConfig& e = sc.etso;
  const json& grid = require(doc, "grid", "scenario");
  e.grid = GridDomain(get<std::vector<double>>(grid, "lower", "grid"),
                      get<std::vector<double>>(grid, "upper", "grid"),
                      get<std::vector<std::size_t>>(grid, "counts", "grid"));
  e.backup_controller = to_vector(get<std::vector<double>>(doc, "backup", "scenario"));
  e.learn_rounds = get_or(doc, "learn_rounds", e.learn_rounds, "scenario");
  e.epsilon = get_or(doc, "epsilon", e.epsilon, "scenario");
  e.beta.base = get_or(doc, "beta", e.beta.base, "scenario");
  const std::string beta_kind = get_or<std::string>(doc, "beta_schedule", "constant", "scenario");
  if (beta_kind == "constant") {
    e.beta.kind = BetaSchedule::Kind::Constant;
  } else if (beta_kind == "logarithmic") {
    e.beta.kind = BetaSchedule::Kind::Logarithmic;
  } else {
    throw ConfigError("beta_schedule must be 'constant' or 'logarithmic'");
  }
  e.kernel = parse_kernel(require(doc, "kernel", "scenario"), "kernel");
  e.recompute_safe_set_in_exploit =
      get_or(doc, "recompute_safe_set_in_exploit", false, "scenario");
  if (doc.contains("fixed_scale") && !doc.at("fixed_scale").is_null()) {
    e.fixed_scale = get<double>(doc, "fixed_scale", "scenario");
  }
  const json trig = doc.value("trigger", json::object());
  e.trigger.delta_b = get_or(trig, "delta_b", e.trigger.delta_b, "trigger");
  e.trigger.scaling = parse_scaling(get_or<std::string>(trig, "scaling", "scaled", "trigger"));
  e.trigger.noise_std_dev = get_or(trig, "noise_std_dev", e.kernel.noise_std_dev, "trigger");

  EnvironmentConfig& env = sc.environment;
  const json& ej = require(doc, "environment", "scenario");
  const std::string kind = get<std::string>(ej, "kind", "environment");
  env.observation_noise = get<double>(ej, "observation_noise", "environment");
  env.critical_cost = get<double>(ej, "critical_cost", "environment");
  env.horizon = sc.horizon;
  e.critical_cost = env.critical_cost;
  if (kind == "plant") {
    env.kind = EnvironmentConfig::Kind::PlantTracking;
    env.plant = parse_plant(ej.value("plant", json::object()));
    env.measurements_per_episode =
        get_or<std::size_t>(ej, "measurements_per_episode", 10, "environment");
    env.cost_exponent = get_or(ej, "cost_exponent", 0.5, "environment");
    const json& refs = require(ej, "references", "environment");
    if (!refs.is_object()) throw SchemaError("environment.references must be an object");
    for (const auto& [name, r] : refs.items()) {
      env.references[name] = parse_reference(r, "environment.references." + name);
    }
    const json& modes = require(ej, "modes", "environment");
    if (!modes.is_array()) throw SchemaError("environment.modes must be a list");
    for (const auto& m : modes) {
      ModeSchedule::Entry entry;
      entry.start_round = get<int>(m, "start_round", "environment.modes");
      entry.mode.reference = get<std::string>(m, "reference", "environment.modes");
      entry.mode.gain_factor = get_or(m, "gain_factor", 1.0, "environment.modes");
      env.schedule.entries.push_back(entry);
    }
    env.schedule.dwell_rounds = get_or(ej, "dwell_rounds", 1, "environment");
    env.schedule.validate();
  } else if (kind == "gp-sample") {
    env.kind = EnvironmentConfig::Kind::GpSampleSynthetic;
    const json& syn = require(ej, "synthetic", "environment");
    env.synthetic_kernel = syn.contains("kernel") ? parse_kernel(syn.at("kernel"), "synthetic.kernel")
                                                  : e.kernel;
    if (syn.contains("change") && !syn.at("change").is_null()) {
      const json& c = syn.at("change");
      SyntheticChange ch;
      ch.round = get<int>(c, "round", "synthetic.change");
      const std::string mode = get<std::string>(c, "mode", "synthetic.change");
      if (mode == "resample") {
        ch.kind = SyntheticChange::Kind::Resample;
      } else if (mode == "shift") {
        ch.kind = SyntheticChange::Kind::Shift;
        ch.shift = get<double>(c, "shift", "synthetic.change");
      } else {
        throw ConfigError("synthetic.change.mode must be 'resample' or 'shift'");
      }
      env.change = ch;
    }
  } else {
    throw ConfigError("environment.kind must be 'plant' or 'gp-sample', got '" + kind + "'");
  }
  if (sc.horizon < e.learn_rounds || e.learn_rounds < 2) {
    throw ConfigError("need horizon >= learn_rounds >= 2");
  }
  e.validate();
  return sc;
}

Scenario load_scenario(const std::string& id_or_path, const std::vector<std::string>& overrides) {
  json doc = load_scenario_document(id_or_path);
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_scenario(doc);
}

bool ValidationReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

ModeSweep sweep_mode(const Scenario& scenario, const Environment& env, std::size_t mode) {
  int round = 1;
  for (int t = 1; t <= scenario.horizon; ++t) {
    if (env.mode_at(t) == mode) {
      round = t;
      break;
    }
  }
  const GridDomain& grid = scenario.etso.grid;
  ModeSweep out;
  out.cost.resize(static_cast<Eigen::Index>(grid.size()));
  out.crashed.assign(grid.size(), false);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Evaluation ev = env.true_cost(round, grid.point(i));
    out.cost[static_cast<Eigen::Index>(i)] = ev.true_cost;
    out.crashed[i] = ev.crashed;
  }
  return out;
}

ValidationReport validate_scenario(const Scenario& sc) {
  ValidationReport report;
  auto add = [&](std::string name, bool passed, std::string detail) {
    report.checks.push_back({std::move(name), passed, std::move(detail)});
  };
  auto fmt = [](double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
  };

  const EtsoConfig& cfg = sc.etso;
  const Environment env(sc.environment, cfg.grid, cfg.backup_controller, 0);
  const Vector backup = cfg.grid.point(cfg.grid.nearest(cfg.backup_controller));
  const double beta = cfg.beta.at(1);
  const double j_min_norm =
      safety_threshold(cfg.kernel.prior_mean, beta, cfg.kernel.noise_std_dev, cfg.epsilon);

  // Mode start rounds, including the first.
  std::vector<int> starts{1};
  for (int t = 2; t <= sc.horizon; ++t) {
    if (env.mode_at(t) != env.mode_at(t - 1)) starts.push_back(t);
  }

  std::vector<double> backup_cost(starts.size());
  std::vector<double> scale(starts.size());
  for (std::size_t m = 0; m < starts.size(); ++m) {
    const Evaluation ev = env.true_cost(starts[m], backup);
    backup_cost[m] = ev.true_cost;
    scale[m] = cfg.fixed_scale ? *cfg.fixed_scale : normalization_scale(ev.true_cost);
    const double margin = cfg.epsilon * scale[m];
    add("backup-clears-critical[mode " + std::to_string(m) + "]",
        !ev.crashed && ev.true_cost - margin >= sc.environment.critical_cost,
        "J(theta_B) = " + fmt(ev.true_cost) + ", J_crit = " + fmt(sc.environment.critical_cost));
    const double j_min_raw = j_min_norm * scale[m];
    add("critical-below-threshold[mode " + std::to_string(m) + "]",
        sc.environment.critical_cost <= j_min_raw,
        "J_crit = " + fmt(sc.environment.critical_cost) + ", raw j_min = " + fmt(j_min_raw));
  }

  bool late = true;
  for (std::size_t m = 1; m < starts.size(); ++m) late = late && starts[m] > cfg.learn_rounds;
  add("changes-after-learning", late, "learn_rounds = " + std::to_string(cfg.learn_rounds));

  if (sc.environment.kind != EnvironmentConfig::Kind::PlantTracking) {
    add("schedule", true, "synthetic objective");
    return report;
  }

  // Integration convergence: halving the step must move costs by < 1e-3 relative.
  std::vector<ModeSweep> sweeps;
  for (std::size_t m = 0; m < starts.size(); ++m) sweeps.push_back(sweep_mode(sc, env, m));
  {
    double worst = 0.0;
    for (std::size_t m = 0; m < starts.size(); ++m) {
      const ModeSpec& mode = sc.environment.schedule.entries[env.mode_at(starts[m])].mode;
      Plant fine = sc.environment.plant;
      fine.gain_factor = mode.gain_factor;
      fine.time_step *= 0.5;
      Plant coarse = fine;
      coarse.time_step *= 2.0;
      const auto& ref = sc.environment.references.at(mode.reference);
      std::vector<Vector> probes{backup};
      const double j_min_raw = j_min_norm * scale[m];
      const std::size_t stride = std::max<std::size_t>(cfg.grid.size() / 16, 1);
      for (std::size_t i = 0; i < cfg.grid.size(); i += stride) {
        const auto k = static_cast<Eigen::Index>(i);
        if (!sweeps[m].crashed[i] && sweeps[m].cost[k] >= j_min_raw) probes.push_back(cfg.grid.point(i));
      }
      for (const auto& th : probes) {
        const auto a = simulate_episode(coarse, th, ref, sc.environment.measurements_per_episode);
        const auto b = simulate_episode(fine, th, ref, sc.environment.measurements_per_episode);
        if (a.crashed || b.crashed) continue;
        const double ja = episode_cost(a.trajectory, ref.waypoints, sc.environment.cost_exponent);
        const double jb = episode_cost(b.trajectory, ref.waypoints, sc.environment.cost_exponent);
        worst = std::max(worst, std::abs(ja - jb) / std::max(std::abs(jb), 1e-12));
      }
    }
    add("step-halving", worst < 1e-3, "max relative change " + fmt(worst));
  }

  if (starts.size() < 2) {
    add("class", sc.scenario_class == "stationary", "single mode");
    return report;
  }

  // Reference exploit threshold: Scaled kappa at t' = tau with posterior std sigma_n.
  TriggerConfig trig = cfg.trigger;
  const double kappa_ref = threshold(trig, TriggerState{starts[1]}, cfg.kernel.noise_std_dev);

  // Incumbent candidates: the best 2% of mode-0 points that are safe by their true cost.
  const double j_min_raw0 = j_min_norm * scale[0];
  std::vector<std::size_t> safe0;
  for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
    if (!sweeps[0].crashed[i] && sweeps[0].cost[static_cast<Eigen::Index>(i)] >= j_min_raw0) {
      safe0.push_back(i);
    }
  }
  std::sort(safe0.begin(), safe0.end(), [&](std::size_t a, std::size_t b) {
    return sweeps[0].cost[static_cast<Eigen::Index>(a)] > sweeps[0].cost[static_cast<Eigen::Index>(b)];
  });
  const std::size_t top = std::max<std::size_t>(safe0.size() / 50, 1);
  double min_change = 1e300;
  double max_change = 0.0;
  for (std::size_t r = 0; r < std::min(top, safe0.size()); ++r) {
    const auto k = static_cast<Eigen::Index>(safe0[r]);
    const double d = std::abs(sweeps[1].cost[k] - sweeps[0].cost[k]) / scale[0];
    min_change = std::min(min_change, d);
    max_change = std::max(max_change, d);
  }
  std::size_t shifted = 0;
  for (std::size_t i : safe0) shifted += sweeps[1].crashed[i] ? 1 : 0;

  const std::string range = "normalized |dJ| at incumbents in [" + fmt(min_change) + ", " +
                            fmt(max_change) + "], exploit kappa " + fmt(kappa_ref);
  if (sc.scenario_class == "insignificant-change") {
    add("class", max_change < kappa_ref, range);
  } else if (sc.scenario_class == "significant-change") {
    add("class", min_change >= 5.0 * kappa_ref, range);
  } else if (sc.scenario_class == "safe-set-shift") {
    add("class", min_change > kappa_ref && shifted > 0,
        range + "; " + std::to_string(shifted) + " mode-0 safe points crash in mode 1");
  } else {
    add("class", false, "unknown class '" + sc.scenario_class + "' for a multi-mode schedule");
  }
  return report;
}

}  // namespace etso
