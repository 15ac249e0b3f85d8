#include "optosyn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "optosyn/errors.hpp"
#include "optosyn/version.hpp"

namespace optosyn {

namespace {

/* kills the floating-point dust on times assembled from sums */
double snap(double t, double dt) { return std::round(t / dt) * dt; }

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

StimulusProtocol single_pulse_protocol(double v_g, double v_ds, const PulseSpec& pulse,
                                       double dt) {
  StimulusProtocol proto;
  proto.channels = {pulse.channel_nm};
  proto.pulses.push_back({pulse.channel_nm, pulse.power_w, kHarnessOnset, pulse.duration_s});
  proto.default_v_g = v_g;
  proto.v_ds = v_ds;
  proto.t_end = snap(kHarnessOnset + pulse.duration_s + 0.345, dt);
  proto.settle_time = 0.1;
  return proto;
}

double classification_code(double delta_a) {
  switch (classify(delta_a)) {
    case Classification::Inhibitory: return -1.0;
    case Classification::Excitatory: return 1.0;
    case Classification::Null: break;
  }
  return 0.0;
}

/* (t, weight) table relative to the first (dark, settled) sample, one row
   every 10 ms */
void tabulate_weight(const CurrentTrace& trace, Dataset& ds) {
  const double i_dark = trace.current_a[0];
  if (std::abs(i_dark) < kCurrentFloor)
    throw DivisionByNearZero("tabulate_weight: dark current below the current floor");
  const auto stride = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(0.01 / trace.dt)));
  for (std::size_t i = 0; i < trace.size(); i += stride)
    ds.rows.push_back({trace.time_at(i), (trace.current_a[i] - i_dark) / i_dark});
}

}  // namespace

void write_dataset(const Dataset& ds, const DeviceParams& p, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto base = (std::filesystem::path(dir) / ds.id).string();

  std::ofstream csv(base + ".csv", std::ios::binary);
  if (!csv) throw ValidationError("write_dataset: cannot open " + base + ".csv");
  for (std::size_t c = 0; c < ds.columns.size(); ++c)
    csv << (c ? "," : "") << ds.columns[c];
  csv << "\n";
  for (const auto& row : ds.rows) {
    if (row.size() != ds.columns.size())
      throw ValidationError("write_dataset: row width does not match the column count");
    for (std::size_t c = 0; c < row.size(); ++c) csv << (c ? "," : "") << format_full(row[c]);
    csv << "\n";
  }

  nlohmann::ordered_json manifest;
  manifest["id"] = ds.id;
  manifest["generator"] = std::string("optosyn ") + kVersion;
  manifest["params_digest"] = params_digest(p);
  manifest["dt_s"] = ds.dt;
  manifest["columns"] = ds.columns;
  manifest["row_count"] = ds.rows.size();
  manifest["protocol_digests"] = ds.protocol_digests;
  std::ofstream mj(base + ".manifest.json", std::ios::binary);
  if (!mj) throw ValidationError("write_dataset: cannot open " + base + ".manifest.json");
  mj << manifest.dump(2) << "\n";
}

Dataset run_gate_sweep(const DeviceParams& p, const std::vector<double>& gates_v,
                       const PulseSpec& pulse, double dt) {
  Dataset ds;
  ds.id = "gate_sweep";
  ds.columns = {"v_g_v", "delta_i_a", "weight", "class"};
  ds.dt = dt;
  for (double v_g : gates_v) {
    const auto trace = integrate(p, single_pulse_protocol(v_g, p.v_ds, pulse, dt), dt);
    const auto i0 = trace.index_at(kHarnessOnset);
    const double delta = delta_psc(trace, {0, i0}, {i0, trace.size()});
    ds.rows.push_back({v_g, delta, weight_change(trace, {0, i0}, {i0, trace.size()}),
                       classification_code(delta)});
    ds.protocol_digests.push_back(trace.digest);
  }
  return ds;
}

Dataset run_duration_sweep(const DeviceParams& p, double v_g,
                           const std::vector<double>& durations_s, int channel_nm,
                           double power_w, double dt) {
  Dataset ds;
  ds.id = "duration_sweep";
  ds.columns = {"duration_s", "delta_i_a", "weight"};
  ds.dt = dt;
  for (double dur : durations_s) {
    const PulseSpec pulse{channel_nm, power_w, dur};
    const auto trace = integrate(p, single_pulse_protocol(v_g, p.v_ds, pulse, dt), dt);
    const auto i0 = trace.index_at(kHarnessOnset);
    ds.rows.push_back({dur, delta_psc(trace, {0, i0}, {i0, trace.size()}),
                       weight_change(trace, {0, i0}, {i0, trace.size()})});
    ds.protocol_digests.push_back(trace.digest);
  }
  return ds;
}

Dataset run_ppf_sweep(const DeviceParams& p, double v_g,
                      const std::vector<double>& intervals_s, double dt) {
  Dataset ds;
  ds.id = "ppf";
  ds.columns = {"interval_s", "ppf_pct"};
  ds.dt = dt;
  const PulseSpec pulse{405, 50e-6, 5e-3};
  for (double gap : intervals_s) {
    if (!(gap > pulse.duration_s))
      throw ValidationError("run_ppf_sweep: interval " + std::to_string(gap) +
                            " s must exceed the pulse duration " +
                            std::to_string(pulse.duration_s) + " s");
    const double t1 = kHarnessOnset;
    const double t2 = t1 + gap;  // onset-to-onset spacing
    StimulusProtocol proto;
    proto.channels = {pulse.channel_nm};
    proto.pulses.push_back({pulse.channel_nm, pulse.power_w, t1, pulse.duration_s});
    proto.pulses.push_back({pulse.channel_nm, pulse.power_w, t2, pulse.duration_s});
    proto.default_v_g = v_g;
    proto.v_ds = p.v_ds;
    proto.t_end = snap(t2 + gap + 0.3, dt);
    proto.settle_time = 0.1;
    const auto trace = integrate(p, proto, dt);
    const auto i1 = trace.index_at(t1);
    const auto i2 = trace.index_at(t2);
    const auto i3 = trace.index_at(t2 + gap);
    ds.rows.push_back({gap, ppf_index(trace, {0, i1}, {i1, i2}, {i2, i3})});
    ds.protocol_digests.push_back(trace.digest);
  }
  return ds;
}

Dataset run_train(const DeviceParams& p, double v_g, int n_pulses, double pulse_s,
                  double gap_s, double power_w, double dt) {
  if (n_pulses < 1) throw ValidationError("run_train: n_pulses must be >= 1");
  if (!(gap_s > 0.0)) throw ValidationError("run_train: gap_s must be > 0");
  StimulusProtocol proto;
  proto.channels = {405};
  for (int k = 0; k < n_pulses; ++k)
    proto.pulses.push_back({405, power_w, kHarnessOnset + k * (pulse_s + gap_s), pulse_s});
  proto.default_v_g = v_g;
  proto.v_ds = p.v_ds;
  proto.t_end = snap(kHarnessOnset + n_pulses * (pulse_s + gap_s) + 0.3, dt);
  proto.settle_time = 0.1;
  const auto trace = integrate(p, proto, dt);

  Dataset ds;
  ds.id = "train";
  ds.columns = {"pulse_number", "t_edge_s", "weight"};
  ds.dt = dt;
  ds.protocol_digests.push_back(trace.digest);
  for (int k = 0; k < n_pulses; ++k) {
    const double edge = proto.pulses[static_cast<std::size_t>(k)].t_end();
    const auto ie = trace.index_at(edge);
    ds.rows.push_back({static_cast<double>(k + 1), edge,
                       weight_change(trace, {0, 1}, {ie, ie + 1})});
  }
  return ds;
}

Dataset run_ltp(const DeviceParams& p, double v_g, double power_w, double pulse_s,
                double observe_s, int n_pulses, double period_s, double dt) {
  if (n_pulses < 1) throw ValidationError("run_ltp: n_pulses must be >= 1");
  if (n_pulses > 1 && !(period_s > pulse_s))
    throw ValidationError("run_ltp: period_s must exceed pulse_s");
  if (!(observe_s > 0.0)) throw ValidationError("run_ltp: observe_s must be > 0");
  const double t0 = 0.5;  // long dark lead so the (t, weight) table shows the baseline
  StimulusProtocol proto;
  proto.channels = {405};
  for (int k = 0; k < n_pulses; ++k)
    proto.pulses.push_back({405, power_w, t0 + k * period_s, pulse_s});
  proto.default_v_g = v_g;
  proto.v_ds = p.v_ds;
  proto.t_end = snap(t0 + (n_pulses - 1) * period_s + pulse_s + observe_s, dt);
  proto.settle_time = 0.1;
  const auto trace = integrate(p, proto, dt);

  Dataset ds;
  ds.id = "ltp";
  ds.columns = {"t_s", "weight"};
  ds.dt = dt;
  ds.protocol_digests.push_back(trace.digest);
  tabulate_weight(trace, ds);
  return ds;
}

Dataset run_reset(const DeviceParams& p, double v_g_write, double v_reset,
                  double reset_s, double dt) {
  if (!(reset_s > 0.0) || !(3.0 + reset_s < 6.0))
    throw ValidationError("run_reset: reset_s must lie in (0, 3) s");
  StimulusProtocol proto;
  proto.channels = {405};
  proto.pulses.push_back({405, 50e-6, 0.5, 0.1});
  proto.gate_segments.push_back({v_reset, 3.0, reset_s});
  proto.default_v_g = v_g_write;
  proto.v_ds = p.v_ds;
  proto.t_end = 6.0;
  proto.settle_time = 0.1;
  const auto trace = integrate(p, proto, dt);

  Dataset ds;
  ds.id = "reset";
  ds.columns = {"t_s", "weight"};
  ds.dt = dt;
  ds.protocol_digests.push_back(trace.digest);
  tabulate_weight(trace, ds);
  return ds;
}

Dataset run_temporal_summation(const DeviceParams& p, double v_g, double power_405_w,
                               double power_532_w, const std::vector<double>& delays_s,
                               double dt) {
  const double dur = 0.02;
  Dataset ds;
  ds.id = "temporal_summation";
  ds.columns = {"delay_s", "delta_i_a"};
  ds.dt = dt;
  for (double delay : delays_s) {
    const double onset_a = kHarnessOnset + std::max(0.0, -delay);
    const double onset_b = onset_a + delay;
    StimulusProtocol proto;
    proto.channels = {405, 532};
    proto.pulses.push_back({405, power_405_w, onset_a, dur});
    proto.pulses.push_back({532, power_532_w, onset_b, dur});
    proto.default_v_g = v_g;
    proto.v_ds = p.v_ds;
    proto.t_end = snap(std::max(onset_a, onset_b) + dur + 0.3, dt);
    proto.settle_time = 0.1;
    const auto trace = integrate(p, proto, dt);
    const double delta =
        trace.current_a[trace.index_at(onset_a + dur)] - trace.current_a[0];
    ds.rows.push_back({delay, delta});
    ds.protocol_digests.push_back(trace.digest);
  }
  return ds;
}

Dataset run_power_summation(const DeviceParams& p, double v_g,
                            const std::vector<std::pair<double, double>>& power_pairs_w,
                            double dt) {
  const double dur = 0.02;
  Dataset ds;
  ds.id = "power_summation";
  ds.columns = {"power_405_w", "power_532_w", "delta_i_a", "arithmetic_sum_a"};
  ds.dt = dt;

  auto measure = [&](double p405, double p532) {
    StimulusProtocol proto;
    proto.channels = {405, 532};
    if (p405 > 0.0) proto.pulses.push_back({405, p405, kHarnessOnset, dur});
    if (p532 > 0.0) proto.pulses.push_back({532, p532, kHarnessOnset, dur});
    proto.default_v_g = v_g;
    proto.v_ds = p.v_ds;
    proto.t_end = snap(kHarnessOnset + dur + 0.33, dt);
    proto.settle_time = 0.1;
    const auto trace = integrate(p, proto, dt);
    ds.protocol_digests.push_back(trace.digest);
    return trace.current_a[trace.index_at(kHarnessOnset + dur)] - trace.current_a[0];
  };

  std::map<double, double> single_405, single_532;
  auto single = [&](std::map<double, double>& cache, bool is_405, double power) {
    if (!(power > 0.0)) return 0.0;
    const auto it = cache.find(power);
    if (it != cache.end()) return it->second;
    const double delta = is_405 ? measure(power, 0.0) : measure(0.0, power);
    cache.emplace(power, delta);
    return delta;
  };

  for (const auto& [p405, p532] : power_pairs_w) {
    const double s405 = single(single_405, true, p405);
    const double s532 = single(single_532, false, p532);
    const bool is_single = !(p405 > 0.0) || !(p532 > 0.0);
    const double measured = is_single ? s405 + s532 : measure(p405, p532);
    ds.rows.push_back({p405, p532, measured, s405 + s532});
  }
  return ds;
}

Dataset run_logic(const DeviceParams& p, LogicMode mode, double dt, double threshold_a) {
  const double power = mode == LogicMode::And ? 10e-6 : 50e-6;
  const double v =
      mode == LogicMode::And ? v_cross(p, Illumination{{405, power}}) : 20.0;
  const LightPulse a{405, power, kHarnessOnset, 1.0};
  const LightPulse b{405, power, kHarnessOnset, 1.0};
  LogicConfig cfg;
  cfg.v_g = v;
  cfg.threshold_a = threshold_a > 0.0 ? threshold_a : 1.0;  // resolved after the runs
  const auto rows = truth_table(p, cfg, a, b, dt);

  double thr = threshold_a;
  if (!(thr > 0.0)) {
    thr = mode == LogicMode::And
              ? 0.5 * std::abs(rows[3].delta_a)
              : 0.5 * std::min(std::abs(rows[1].delta_a), std::abs(rows[2].delta_a));
    if (thr < kCurrentFloor)
      throw DivisionByNearZero("run_logic: reference response below the current floor");
  }

  Dataset ds;
  ds.id = mode == LogicMode::And ? "logic_and" : "logic_or";
  ds.columns = {"a_on", "b_on", "delta_i_a", "out", "threshold_a", "v_g_v"};
  ds.dt = dt;
  for (const auto& row : rows) {
    ds.rows.push_back({row.a_on ? 1.0 : 0.0, row.b_on ? 1.0 : 0.0, row.delta_a,
                       std::abs(row.delta_a) >= thr ? 1.0 : 0.0, thr, v});
    ds.protocol_digests.push_back(
        protocol_digest(p, logic_protocol(p, cfg, a, b, row.a_on, row.b_on, dt), dt));
  }
  return ds;
}

}  // namespace optosyn
