#include "optosyn/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "optosyn/errors.hpp"

namespace optosyn {

namespace {

struct Rates {
  double f, s, tr;
};

/* shared right-hand side with the generation rate hoisted out */
inline Rates rhs(const DeviceState& st, double v_g, double g, const DeviceParams& p) {
  const double pool = st.n_fast + st.n_slow;
  const double fill = std::max(0.0, 1.0 - pool / p.n_sat);
  const double capture =
      trap_capture_rate(v_g, p) * pool * (1.0 - st.n_trap / p.n_traps_total);
  return {p.alpha_fast * g * fill - st.n_fast / p.tau_fast,
          p.alpha_slow * g * fill - st.n_slow / p.tau_slow,
          capture - st.n_trap / trap_release_tau(v_g, p)};
}

std::string format_v(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void fnv1a(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
}

void mix_f64(std::uint64_t& h, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  fnv1a(h, &bits, sizeof bits);
}

void mix_i64(std::uint64_t& h, std::int64_t v) { fnv1a(h, &v, sizeof v); }

void mix_params(std::uint64_t& h, const DeviceParams& p) {
  mix_f64(h, p.c_ox_over_e);
  mix_f64(h, p.v_dirac0);
  mix_f64(h, p.mu_e);
  mix_f64(h, p.mu_h);
  mix_f64(h, p.n_residual);
  mix_f64(h, p.n_clamp);
  for (const auto& [ch, eta] : p.eta) {
    mix_i64(h, ch);
    mix_f64(h, eta);
  }
  mix_f64(h, p.alpha_fast);
  mix_f64(h, p.alpha_slow);
  mix_f64(h, p.tau_fast);
  mix_f64(h, p.tau_slow);
  mix_f64(h, p.n_sat);
  mix_f64(h, p.n_traps_total);
  mix_f64(h, p.c_trap0);
  mix_f64(h, p.v_trap_ref);
  mix_f64(h, p.tau_trap_hold);
  mix_f64(h, p.tau_trap_reset);
  mix_f64(h, p.v_reset_threshold);
  mix_f64(h, p.width);
  mix_f64(h, p.length);
  mix_f64(h, p.v_ds);
}

std::string hex_digest(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::size_t CurrentTrace::index_at(double t) const {
  const auto i = static_cast<long long>(std::llround(t / dt));
  if (i < 0 || static_cast<std::size_t>(i) >= size() ||
      std::abs(static_cast<double>(i) * dt - t) > 1e-6 * dt)
    throw ValidationError("trace.index_at: t=" + std::to_string(t) +
                          " s is not on the sample grid (dt=" + std::to_string(dt) + " s)");
  return static_cast<std::size_t>(i);
}

DeviceState rk4_step(const DeviceState& s, double v_g, const Illumination& light,
                     double h, const DeviceParams& p) {
  const double g = generation_rate(light, p);
  const Rates k1 = rhs(s, v_g, g, p);
  DeviceState m;
  m.n_fast = s.n_fast + 0.5 * h * k1.f;
  m.n_slow = s.n_slow + 0.5 * h * k1.s;
  m.n_trap = s.n_trap + 0.5 * h * k1.tr;
  const Rates k2 = rhs(m, v_g, g, p);
  m.n_fast = s.n_fast + 0.5 * h * k2.f;
  m.n_slow = s.n_slow + 0.5 * h * k2.s;
  m.n_trap = s.n_trap + 0.5 * h * k2.tr;
  const Rates k3 = rhs(m, v_g, g, p);
  m.n_fast = s.n_fast + h * k3.f;
  m.n_slow = s.n_slow + h * k3.s;
  m.n_trap = s.n_trap + h * k3.tr;
  const Rates k4 = rhs(m, v_g, g, p);

  DeviceState out;
  out.n_fast = s.n_fast + h / 6.0 * (k1.f + 2.0 * k2.f + 2.0 * k3.f + k4.f);
  out.n_slow = s.n_slow + h / 6.0 * (k1.s + 2.0 * k2.s + 2.0 * k3.s + k4.s);
  out.n_trap = s.n_trap + h / 6.0 * (k1.tr + 2.0 * k2.tr + 2.0 * k3.tr + k4.tr);
  out.n_fast = std::max(0.0, out.n_fast);
  out.n_slow = std::max(0.0, out.n_slow);
  out.n_trap = std::min(std::max(0.0, out.n_trap), p.n_traps_total);
  out.t = s.t + h;
  return out;
}

DeviceState steady_state(const DeviceParams& p, double v_g, const Illumination& light) {
  p.validate();
  DeviceState s = photo_pool_fixed_point(light, p);
  /* trap balance: capture*(1 - x/N) = x/tau, linear in x */
  const double cap = trap_capture_rate(v_g, p) * (s.n_fast + s.n_slow);
  const double tau = trap_release_tau(v_g, p);
  s.n_trap = cap * tau * p.n_traps_total / (p.n_traps_total + cap * tau);
  s.t = 0.0;
  return s;
}

CurrentTrace integrate(const DeviceParams& params, const StimulusProtocol& protocol,
                       double dt) {
  params.validate();
  validate_protocol(protocol);
  for (int ch : protocol.channels) {
    if (!params.eta.count(ch))
      throw ValidationError("integrate: protocol channel " + std::to_string(ch) +
                            " nm has no eta entry in the device parameters");
  }
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw ValidationError("integrate: dt must be finite and > 0");
  if (dt > params.tau_fast / 10.0 * (1.0 + 1e-12))
    throw StepTooLarge("integrate: dt=" + std::to_string(dt) +
                       " s exceeds tau_fast/10=" + std::to_string(params.tau_fast / 10.0) +
                       " s");
  for (const auto& pulse : protocol.pulses) {
    if (dt > pulse.duration / 5.0 * (1.0 + 1e-12))
      throw StepTooLarge("integrate: dt=" + std::to_string(dt) +
                         " s exceeds a fifth of the shortest pulse (" +
                         std::to_string(pulse.duration) + " s)");
  }
  const auto n_steps = static_cast<long long>(std::llround(protocol.t_end / dt));
  if (n_steps < 1 ||
      std::abs(static_cast<double>(n_steps) * dt - protocol.t_end) > 1e-6 * dt)
    throw ValidationError("integrate: t_end=" + std::to_string(protocol.t_end) +
                          " s must be an integer multiple of dt=" + std::to_string(dt) +
                          " s");

  DeviceParams p = params;
  p.v_ds = protocol.v_ds;  // the protocol carries the measurement bias

  /* breakpoints that are not already on the sample grid split the step */
  std::vector<double> off_grid;
  for (double bp : breakpoints(protocol)) {
    const double j = std::round(bp / dt);
    if (std::abs(j * dt - bp) > 1e-9 * dt) off_grid.push_back(bp);
  }

  CurrentTrace trace;
  trace.dt = dt;
  trace.protocol = protocol;
  trace.digest = protocol_digest(params, protocol, dt);
  trace.current_a.reserve(static_cast<std::size_t>(n_steps) + 1);

  DeviceState state = steady_state(p, protocol.default_v_g, {});
  Illumination light;
  for (int ch : protocol.channels) light[ch] = 0.0;

  auto inputs_at = [&](double t, double& v_g) {
    v_g = gate_at(protocol, t);
    for (auto& [ch, power] : light) power = power_at(protocol, ch, t);
  };

  auto record = [&](double t) {
    const double i_now = channel_current(state, gate_at(protocol, t), p);
    if (!std::isfinite(i_now) || !std::isfinite(state.n_fast) ||
        !std::isfinite(state.n_slow) || !std::isfinite(state.n_trap))
      throw NonFinite("integrate: non-finite state or current at t=" + std::to_string(t) +
                      " s");
    trace.current_a.push_back(i_now);
  };

  record(0.0);
  std::size_t bp_idx = 0;
  for (long long k = 0; k < n_steps; ++k) {
    const double t0 = static_cast<double>(k) * dt;
    const double t1 = static_cast<double>(k + 1) * dt;
    while (bp_idx < off_grid.size() && off_grid[bp_idx] <= t0) ++bp_idx;

    double cursor = t0;
    std::size_t j = bp_idx;
    double v_g;
    while (j < off_grid.size() && off_grid[j] < t1) {
      const double h = off_grid[j] - cursor;
      inputs_at(cursor + 0.5 * h, v_g);
      state = rk4_step(state, v_g, light, h, p);
      cursor = off_grid[j];
      ++j;
    }
    /* an unsplit interval advances by exactly dt */
    const double h = (cursor == t0) ? dt : t1 - cursor;
    inputs_at(cursor + 0.5 * h, v_g);
    state = rk4_step(state, v_g, light, h, p);
    state.t = t1;
    record(t1);
  }

  for (const auto& pulse : protocol.pulses) {
    trace.events.emplace_back(pulse.t_start,
                              "pulse_on " + std::to_string(pulse.channel_nm) + "nm");
    trace.events.emplace_back(pulse.t_end(),
                              "pulse_off " + std::to_string(pulse.channel_nm) + "nm");
  }
  for (const auto& seg : protocol.gate_segments) {
    trace.events.emplace_back(seg.t_start, "gate " + format_v(seg.v_g) + " V");
    trace.events.emplace_back(seg.t_end(),
                              "gate " + format_v(protocol.default_v_g) + " V");
  }
  std::sort(trace.events.begin(), trace.events.end());
  return trace;
}

std::string protocol_digest(const DeviceParams& p, const StimulusProtocol& protocol,
                            double dt) {
  std::uint64_t h = 14695981039346656037ULL;
  fnv1a(h, "optosyn-run-v1", 14);
  mix_params(h, p);
  for (int ch : protocol.channels) mix_i64(h, ch);
  for (const auto& pulse : protocol.pulses) {
    mix_i64(h, pulse.channel_nm);
    mix_f64(h, pulse.power_w);
    mix_f64(h, pulse.t_start);
    mix_f64(h, pulse.duration);
  }
  for (const auto& seg : protocol.gate_segments) {
    mix_f64(h, seg.v_g);
    mix_f64(h, seg.t_start);
    mix_f64(h, seg.duration);
  }
  mix_f64(h, protocol.default_v_g);
  mix_f64(h, protocol.v_ds);
  mix_f64(h, protocol.t_end);
  mix_f64(h, protocol.settle_time);
  fnv1a(h, protocol.description.data(), protocol.description.size());
  mix_f64(h, dt);
  return hex_digest(h);
}

std::string params_digest(const DeviceParams& p) {
  std::uint64_t h = 14695981039346656037ULL;
  fnv1a(h, "optosyn-params-v1", 17);
  mix_params(h, p);
  return hex_digest(h);
}

void write_trace_csv(const CurrentTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("write_trace_csv: cannot open " + path);
  std::vector<int> channels = trace.protocol.channels;
  std::sort(channels.begin(), channels.end());
  out << "t_s,i_a,v_g";
  for (int ch : channels) out << ",power_" << ch << "_w";
  out << "\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double t = trace.time_at(i);
    out << format_full(t) << "," << format_full(trace.current_a[i]) << ","
        << format_full(gate_at(trace.protocol, t));
    for (int ch : channels) out << "," << format_full(power_at(trace.protocol, ch, t));
    out << "\n";
  }
}

void write_events_csv(const CurrentTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("write_events_csv: cannot open " + path);
  out << "t_s,label\n";
  for (const auto& [t, label] : trace.events)
    out << format_full(t) << "," << label << "\n";
}

std::string trace_to_json(const CurrentTrace& trace) {
  nlohmann::ordered_json doc;
  doc["dt_s"] = trace.dt;
  doc["digest"] = trace.digest;
  doc["current_a"] = trace.current_a;
  std::vector<int> channels = trace.protocol.channels;
  std::sort(channels.begin(), channels.end());
  nlohmann::ordered_json v_g = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < trace.size(); ++i)
    v_g.push_back(gate_at(trace.protocol, trace.time_at(i)));
  doc["v_g"] = std::move(v_g);
  for (int ch : channels) {
    nlohmann::ordered_json power = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < trace.size(); ++i)
      power.push_back(power_at(trace.protocol, ch, trace.time_at(i)));
    doc["power_" + std::to_string(ch) + "_w"] = std::move(power);
  }
  nlohmann::ordered_json events = nlohmann::ordered_json::array();
  for (const auto& [t, label] : trace.events)
    events.push_back({{"t_s", t}, {"label", label}});
  doc["events"] = std::move(events);
  return doc.dump(2) + "\n";
}

}  // namespace optosyn
