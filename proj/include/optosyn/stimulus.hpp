#pragma once

#include <map>
#include <string>
#include <vector>

namespace optosyn {

/* rectangular optical pulse, active on [t_start, t_start + duration) */
struct LightPulse {
  int channel_nm = 405;   // wavelength channel, nm
  double power_w = 0.0;   // incident power, W, >= 0
  double t_start = 0.0;   // s
  double duration = 0.0;  // s, > 0

  double t_end() const { return t_start + duration; }
  bool operator==(const LightPulse&) const = default;
};

/* gate-bias override, active on [t_start, t_start + duration) */
struct GateSegment {
  double v_g = 0.0;       // V
  double t_start = 0.0;   // s
  double duration = 0.0;  // s, > 0

  double t_end() const { return t_start + duration; }
  bool operator==(const GateSegment&) const = default;
};

/* One experiment: declared wavelength channels, light pulses, gate
   schedule, and the measurement settings.  All windows live inside
   [0, t_end]; gate segments never overlap; pulses on the same channel
   may overlap and their powers add. */
struct StimulusProtocol {
  std::vector<int> channels;          // declared wavelength channels, nm, unique
  std::vector<LightPulse> pulses;
  std::vector<GateSegment> gate_segments;
  double default_v_g = 0.0;           // V, gate outside all segments
  double v_ds = 0.5;                  // V, source-drain bias during the run
  double t_end = 0.0;                 // s, > 0
  double settle_time = 0.0;           // s, >= 0, pre-stimulus equilibration hold
  std::string description;

  bool operator==(const StimulusProtocol&) const = default;
};

/* throws ValidationError naming the offending field and time window */
void validate_protocol(const StimulusProtocol& p);

/* Parse a protocol document.  Pulses may carry "power_param": "<name>"
   instead of "power_w"; such powers are resolved from `bindings`.
   Throws SchemaError for malformed documents and ValidationError for
   well-formed but inconsistent ones. */
StimulusProtocol parse_protocol(const std::string& text,
                                const std::map<std::string, double>& bindings = {});

/* canonical JSON document; parse_protocol(serialize_protocol(p)) == p */
std::string serialize_protocol(const StimulusProtocol& p);

/* Summed power on one channel at time t, W.  Throws UnknownChannel for
   channels the protocol does not declare; returns 0 outside all pulses. */
double power_at(const StimulusProtocol& p, int channel_nm, double t);

/* gate bias at time t, V; default_v_g outside all segments */
double gate_at(const StimulusProtocol& p, double t);

/* sorted unique edge times of all pulses and gate segments plus 0 and
   t_end; every input discontinuity appears here */
std::vector<double> breakpoints(const StimulusProtocol& p);

}  // namespace optosyn
