#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "optosyn/device.hpp"
#include "optosyn/stimulus.hpp"

namespace optosyn {

/* Drain-current record of one simulated protocol, sampled uniformly at
   dt on [0, t_end].  Events mark the input discontinuities. */
struct CurrentTrace {
  double dt = 0.0;                  // s
  std::vector<double> current_a;    // one sample per grid point, A
  std::vector<std::pair<double, std::string>> events;  // (t_s, label), sorted
  StimulusProtocol protocol;
  std::string digest;               // protocol + params + dt fingerprint

  std::size_t size() const { return current_a.size(); }
  double time_at(std::size_t i) const { return static_cast<double>(i) * dt; }

  /* index of the sample at time t; throws ValidationError when t is not
     on the sample grid (within 1e-6 * dt) or out of range */
  std::size_t index_at(double t) const;
};

/* One classical 4th-order step of length h under constant inputs.  The
   trap stays inside [0, n_traps_total] and the pools stay non-negative. */
DeviceState rk4_step(const DeviceState& s, double v_g, const Illumination& light,
                     double h, const DeviceParams& p);

/* Fixed point of state_derivative under constant gate and illumination:
   closed-form pool balance, then the trap balance at those pools. */
DeviceState steady_state(const DeviceParams& p, double v_g, const Illumination& light);

/* Integrate a protocol from the dark equilibrium at default_v_g.  Steps
   run at dt and are shortened at protocol breakpoints so every input
   edge is a step boundary; samples stay on the uniform dt grid.  The
   protocol's v_ds overrides the device default for the run.
   Throws StepTooLarge when dt exceeds tau_fast/10 or a fifth of the
   shortest pulse, NonFinite when the state leaves the finite range. */
CurrentTrace integrate(const DeviceParams& p, const StimulusProtocol& protocol, double dt);

/* stable 64-bit fingerprint of params + protocol + dt, 16 hex chars */
std::string protocol_digest(const DeviceParams& p, const StimulusProtocol& protocol,
                            double dt);

/* stable 64-bit fingerprint of the device parameters alone, 16 hex chars */
std::string params_digest(const DeviceParams& p);

/* columns: t_s, i_a, v_g, then power_<channel>_w per declared channel */
void write_trace_csv(const CurrentTrace& trace, const std::string& path);

/* sidecar with columns t_s, label */
void write_events_csv(const CurrentTrace& trace, const std::string& path);

/* JSON mirror of the trace with the same content as the CSV pair */
std::string trace_to_json(const CurrentTrace& trace);

}  // namespace optosyn
