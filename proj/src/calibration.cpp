#include "optosyn/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <span>

#include <json.hpp>

#include "optosyn/errors.hpp"
#include "optosyn/experiments.hpp"
#include "optosyn/optim.hpp"

namespace optosyn {

namespace {

/* weight responses below this are too small to normalize against */
constexpr double kWeightFloor = 1e-9;

struct FieldAccess {
  double (*get)(const DeviceParams&);
  void (*set)(DeviceParams&, double);
};

const std::map<std::string, FieldAccess>& field_registry() {
  static const std::map<std::string, FieldAccess> reg = {
      {"c_ox_over_e",
       {[](const DeviceParams& p) { return p.c_ox_over_e; },
        [](DeviceParams& p, double v) { p.c_ox_over_e = v; }}},
      {"v_dirac0",
       {[](const DeviceParams& p) { return p.v_dirac0; },
        [](DeviceParams& p, double v) { p.v_dirac0 = v; }}},
      {"mu_e",
       {[](const DeviceParams& p) { return p.mu_e; },
        [](DeviceParams& p, double v) { p.mu_e = v; }}},
      {"mu_h",
       {[](const DeviceParams& p) { return p.mu_h; },
        [](DeviceParams& p, double v) { p.mu_h = v; }}},
      {"n_residual",
       {[](const DeviceParams& p) { return p.n_residual; },
        [](DeviceParams& p, double v) { p.n_residual = v; }}},
      {"n_clamp",
       {[](const DeviceParams& p) { return p.n_clamp; },
        [](DeviceParams& p, double v) { p.n_clamp = v; }}},
      {"alpha_fast",
       {[](const DeviceParams& p) { return p.alpha_fast; },
        [](DeviceParams& p, double v) {
          p.alpha_fast = v;
          p.alpha_slow = 1.0 - v;  // the pool fractions always sum to one
        }}},
      {"tau_fast",
       {[](const DeviceParams& p) { return p.tau_fast; },
        [](DeviceParams& p, double v) { p.tau_fast = v; }}},
      {"tau_slow",
       {[](const DeviceParams& p) { return p.tau_slow; },
        [](DeviceParams& p, double v) { p.tau_slow = v; }}},
      {"n_sat",
       {[](const DeviceParams& p) { return p.n_sat; },
        [](DeviceParams& p, double v) { p.n_sat = v; }}},
      {"n_traps_total",
       {[](const DeviceParams& p) { return p.n_traps_total; },
        [](DeviceParams& p, double v) { p.n_traps_total = v; }}},
      {"c_trap0",
       {[](const DeviceParams& p) { return p.c_trap0; },
        [](DeviceParams& p, double v) { p.c_trap0 = v; }}},
      {"v_trap_ref",
       {[](const DeviceParams& p) { return p.v_trap_ref; },
        [](DeviceParams& p, double v) { p.v_trap_ref = v; }}},
      {"tau_trap_hold",
       {[](const DeviceParams& p) { return p.tau_trap_hold; },
        [](DeviceParams& p, double v) { p.tau_trap_hold = v; }}},
      {"tau_trap_reset",
       {[](const DeviceParams& p) { return p.tau_trap_reset; },
        [](DeviceParams& p, double v) { p.tau_trap_reset = v; }}},
      {"v_reset_threshold",
       {[](const DeviceParams& p) { return p.v_reset_threshold; },
        [](DeviceParams& p, double v) { p.v_reset_threshold = v; }}},
      {"width",
       {[](const DeviceParams& p) { return p.width; },
        [](DeviceParams& p, double v) { p.width = v; }}},
      {"length",
       {[](const DeviceParams& p) { return p.length; },
        [](DeviceParams& p, double v) { p.length = v; }}},
      {"v_ds",
       {[](const DeviceParams& p) { return p.v_ds; },
        [](DeviceParams& p, double v) { p.v_ds = v; }}},
  };
  return reg;
}

bool parse_eta_field(const std::string& field, int& channel) {
  if (field.rfind("eta_", 0) != 0) return false;
  const std::string tail = field.substr(4);
  if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos)
    return false;
  channel = std::stoi(tail);
  return true;
}

double ltp_weight_at(const Dataset& ds, double t) {
  for (const auto& row : ds.rows)
    if (std::abs(row[0] - t) < 1e-9) return row[1];
  throw ValidationError("calibration: potentiation table has no row at t=" +
                        std::to_string(t) + " s");
}

}  // namespace

double get_field(const DeviceParams& p, const std::string& field) {
  const auto& reg = field_registry();
  if (const auto it = reg.find(field); it != reg.end()) return it->second.get(p);
  int channel = 0;
  if (parse_eta_field(field, channel)) {
    if (const auto it = p.eta.find(channel); it != p.eta.end()) return it->second;
    throw ValidationError("get_field: no eta entry for channel " +
                          std::to_string(channel) + " nm");
  }
  throw ValidationError("get_field: unknown field '" + field + "'");
}

void set_field(DeviceParams& p, const std::string& field, double value) {
  const auto& reg = field_registry();
  if (const auto it = reg.find(field); it != reg.end()) {
    it->second.set(p, value);
    return;
  }
  int channel = 0;
  if (parse_eta_field(field, channel)) {
    p.eta[channel] = value;
    return;
  }
  throw ValidationError("set_field: unknown field '" + field + "'");
}

std::vector<std::string> calibratable_fields() {
  std::vector<std::string> names;
  for (const auto& [name, access] : field_registry()) names.push_back(name);
  names.push_back("eta_<nm>");
  return names;
}

double predict_ppf_6ms(const DeviceParams& p, double dt) {
  return run_ppf_sweep(p, 0.0, {6e-3}, dt).rows[0][1];
}

double predict_v_cross_405_10uw(const DeviceParams& p, double) {
  return v_cross(p, Illumination{{405, 10e-6}});
}

double predict_weight_vg0(const DeviceParams& p, double dt) {
  return run_gate_sweep(p, {0.0}, PulseSpec{405, 50e-6, 5e-3}, dt).rows[0][2];
}

double predict_weight_vg20(const DeviceParams& p, double dt) {
  return run_gate_sweep(p, {20.0}, PulseSpec{405, 50e-6, 5e-3}, dt).rows[0][2];
}

double predict_ltp_retention_vg_m20(const DeviceParams& p, double dt) {
  const auto ds = run_ltp(p, -20.0, 50e-6, 0.1, 10.5, 1, 3.0, dt);
  const double w1 = ltp_weight_at(ds, 1.6);    // 1 s past the write edge
  const double w10 = ltp_weight_at(ds, 10.6);  // 10 s past the write edge
  if (std::abs(w1) < kWeightFloor)
    throw DivisionByNearZero("predict_ltp_retention_vg_m20: no response to scale by");
  return w10 / w1;
}

double predict_stp_residual_vg0(const DeviceParams& p, double dt) {
  const auto ds = run_ltp(p, 0.0, 50e-6, 0.1, 10.5, 1, 3.0, dt);
  const double w_end = ltp_weight_at(ds, 0.6);  // write edge
  const double w10 = ltp_weight_at(ds, 10.6);
  if (std::abs(w_end) < kWeightFloor)
    throw DivisionByNearZero("predict_stp_residual_vg0: no response to scale by");
  return std::abs(w10) / std::abs(w_end);
}

std::vector<CalibrationTarget> default_targets() {
  return {
      {"ppf_6ms", predict_ppf_6ms, TargetKind::Equal, 155.0, 1.0, 10.0},
      {"v_cross_405_10uw", predict_v_cross_405_10uw, TargetKind::Equal, 5.0, 1.0, 2.0},
      {"weight_vg0", predict_weight_vg0, TargetKind::AtMost, -0.02, 1.0, 0.01},
      {"weight_vg20", predict_weight_vg20, TargetKind::AtLeast, 0.02, 1.0, 0.01},
      {"ltp_retention_vg_m20", predict_ltp_retention_vg_m20, TargetKind::AtLeast, 0.90,
       1.0, 0.03},
      {"stp_residual_vg0", predict_stp_residual_vg0, TargetKind::AtMost, 0.02, 1.0,
       0.01},
  };
}

std::vector<FieldBound> default_bounds() {
  return {
      {"v_dirac0", 4.0, 20.0},
      {"tau_fast", 1e-3, 0.02},
      {"tau_slow", 0.04, 0.4},
      {"alpha_fast", 0.5, 0.95},
      {"eta_405", 1e21, 1e23},
      {"n_sat", 2e15, 1e17},
      {"c_trap0", 0.02, 20.0},
      {"n_traps_total", 5e14, 2e16},
  };
}

CalibrationResult calibrate(const DeviceParams& initial,
                            const std::vector<FieldBound>& bounds,
                            const std::vector<CalibrationTarget>& targets, int budget,
                            std::uint64_t seed, double dt) {
  if (targets.empty()) throw ValidationError("calibrate: at least one target required");
  if (budget < 1) throw ValidationError("calibrate: budget must be >= 1");
  for (const auto& t : targets) {
    if (!(t.tolerance > 0.0))
      throw ValidationError("calibrate: tolerance for '" + t.name + "' must be > 0");
    if (!t.predictor)
      throw ValidationError("calibrate: target '" + t.name + "' has no predictor");
  }
  initial.validate();

  struct FreeField {
    std::string field;
    double lo, hi;
    bool log_scale;
  };
  DeviceParams base = initial;
  std::vector<FreeField> free_fields;
  std::set<std::string> seen;
  for (const auto& b : bounds) {
    if (!seen.insert(b.field).second)
      throw ValidationError("calibrate: duplicate bound for '" + b.field + "'");
    const double v0 = get_field(initial, b.field);
    if (b.lo > b.hi)
      throw InfeasibleBounds("calibrate: bound for '" + b.field + "' has lo > hi");
    if (b.lo == b.hi) {
      set_field(base, b.field, b.lo);  // frozen at the pinned value
      continue;
    }
    if (v0 < b.lo || v0 > b.hi)
      throw InfeasibleBounds("calibrate: initial " + b.field + "=" + std::to_string(v0) +
                             " lies outside [" + std::to_string(b.lo) + ", " +
                             std::to_string(b.hi) + "]");
    free_fields.push_back({b.field, b.lo, b.hi, b.lo > 0.0});
  }
  base.validate();

  auto decode = [&](std::span<const double> x) {
    DeviceParams p = base;
    for (std::size_t i = 0; i < free_fields.size(); ++i) {
      const auto& f = free_fields[i];
      set_field(p, f.field, f.log_scale ? std::exp(x[i]) : x[i]);
    }
    return p;
  };

  auto residuals_of = [&](const DeviceParams& p) {
    std::vector<TargetResidual> rs;
    for (const auto& t : targets) {
      const double pred = t.predictor(p, dt);
      double miss = 0.0;
      switch (t.kind) {
        case TargetKind::Equal: miss = pred - t.target_value; break;
        case TargetKind::AtMost: miss = std::max(0.0, pred - t.target_value); break;
        case TargetKind::AtLeast: miss = std::max(0.0, t.target_value - pred); break;
      }
      rs.push_back({t.name, pred, t.target_value, miss / t.tolerance});
    }
    return rs;
  };

  auto objective_of = [&](const std::vector<TargetResidual>& rs) {
    double obj = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i)
      obj += targets[i].weight * rs[i].residual * rs[i].residual;
    return obj;
  };

  CalibrationResult result;
  int evals = 0;

  if (free_fields.empty()) {
    result.params = base;
    result.residuals = residuals_of(base);
    result.objective = objective_of(result.residuals);
    result.evaluations = 1;
    result.accepted_objectives = {result.objective};
    return result;
  }

  auto f = [&](std::span<const double> x) {
    ++evals;
    try {
      const DeviceParams p = decode(x);
      p.validate();
      return objective_of(residuals_of(p));
    } catch (const NumericalError&) {
      return 1e30;  // infeasible candidate, not a fatal condition
    } catch (const ValidationError&) {
      return 1e30;
    }
  };

  std::vector<double> x0;
  std::vector<std::pair<double, double>> box;
  for (const auto& fr : free_fields) {
    const double v0 = get_field(base, fr.field);
    x0.push_back(fr.log_scale ? std::log(v0) : v0);
    box.emplace_back(fr.log_scale ? std::log(fr.lo) : fr.lo,
                     fr.log_scale ? std::log(fr.hi) : fr.hi);
  }

  SimplexOptions opt;
  opt.max_evals = budget;
  opt.seed = seed;
  opt.init_step_rel = 0.2;
  const auto sr = minimize_simplex(f, x0, opt, box);

  DeviceParams best = decode(sr.x);
  try {
    best.validate();
    result.residuals = residuals_of(best);
  } catch (const ValidationError&) {
    best = base;  // the search never left the infeasible plateau
    result.residuals = residuals_of(base);
  }
  ++evals;
  result.params = best;
  result.objective = objective_of(result.residuals);
  result.evaluations = evals;
  result.budget_exhausted = !sr.converged;
  result.accepted_objectives = sr.accepted;
  return result;
}

DeviceParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("load_params: cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("load_params: " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw SchemaError("load_params: top level must be an object");

  const std::vector<std::string> scalar_keys = {
      "c_ox_over_e", "v_dirac0",     "mu_e",          "mu_h",
      "n_residual",  "n_clamp",      "alpha_fast",    "alpha_slow",
      "tau_fast",    "tau_slow",     "n_sat",         "n_traps_total",
      "c_trap0",     "v_trap_ref",   "tau_trap_hold", "tau_trap_reset",
      "v_reset_threshold", "width",  "length",        "v_ds"};
  for (const auto& [key, value] : doc.items()) {
    if (key == "eta") continue;
    if (std::find(scalar_keys.begin(), scalar_keys.end(), key) == scalar_keys.end())
      throw SchemaError("load_params: unknown field '" + key + "'");
    if (!value.is_number())
      throw SchemaError("load_params: field '" + key + "' must be a number");
  }
  DeviceParams p;
  for (const auto& key : scalar_keys) {
    if (!doc.contains(key)) throw SchemaError("load_params: missing field '" + key + "'");
    if (key == "alpha_slow")
      p.alpha_slow = doc[key].get<double>();
    else
      set_field(p, key, doc[key].get<double>());
  }
  if (!doc.contains("eta") || !doc["eta"].is_object())
    throw SchemaError("load_params: missing object field 'eta'");
  p.eta.clear();
  for (const auto& [key, value] : doc["eta"].items()) {
    if (key.empty() || key.find_first_not_of("0123456789") != std::string::npos)
      throw SchemaError("load_params: eta channel '" + key + "' is not a wavelength");
    if (!value.is_number())
      throw SchemaError("load_params: eta." + key + " must be a number");
    p.eta[std::stoi(key)] = value.get<double>();
  }
  p.validate();
  return p;
}

void save_params(const DeviceParams& p, const std::string& path) {
  nlohmann::ordered_json doc;
  doc["c_ox_over_e"] = p.c_ox_over_e;
  doc["v_dirac0"] = p.v_dirac0;
  doc["mu_e"] = p.mu_e;
  doc["mu_h"] = p.mu_h;
  doc["n_residual"] = p.n_residual;
  doc["n_clamp"] = p.n_clamp;
  nlohmann::ordered_json eta;
  for (const auto& [ch, value] : p.eta) eta[std::to_string(ch)] = value;
  doc["eta"] = std::move(eta);
  doc["alpha_fast"] = p.alpha_fast;
  doc["alpha_slow"] = p.alpha_slow;
  doc["tau_fast"] = p.tau_fast;
  doc["tau_slow"] = p.tau_slow;
  doc["n_sat"] = p.n_sat;
  doc["n_traps_total"] = p.n_traps_total;
  doc["c_trap0"] = p.c_trap0;
  doc["v_trap_ref"] = p.v_trap_ref;
  doc["tau_trap_hold"] = p.tau_trap_hold;
  doc["tau_trap_reset"] = p.tau_trap_reset;
  doc["v_reset_threshold"] = p.v_reset_threshold;
  doc["width"] = p.width;
  doc["length"] = p.length;
  doc["v_ds"] = p.v_ds;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("save_params: cannot open " + path);
  out << doc.dump(2) << "\n";
}

std::string residual_report_json(const CalibrationResult& result) {
  nlohmann::ordered_json doc;
  doc["objective"] = result.objective;
  doc["evaluations"] = result.evaluations;
  doc["budget_exhausted"] = result.budget_exhausted;
  nlohmann::ordered_json rs = nlohmann::ordered_json::array();
  for (const auto& r : result.residuals)
    rs.push_back({{"name", r.name},
                  {"predicted", r.predicted},
                  {"target", r.target},
                  {"residual", r.residual}});
  doc["residuals"] = std::move(rs);
  doc["accepted_objectives"] = result.accepted_objectives;
  return doc.dump(2) + "\n";
}

}  // namespace optosyn
