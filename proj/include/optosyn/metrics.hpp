#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "optosyn/device.hpp"
#include "optosyn/simulator.hpp"
#include "optosyn/stimulus.hpp"

namespace optosyn {

/* half-open sample range [first, last) on a trace */
struct Window {
  std::size_t first = 0;
  std::size_t last = 0;

  std::size_t count() const { return last - first; }
  bool operator==(const Window&) const = default;
};

/* currents below this magnitude count as no response, A */
inline constexpr double kCurrentFloor = 1e-15;

enum class Classification { Inhibitory, Null, Excitatory };

/* mean current over the window; throws EmptyWindow */
double window_mean(const CurrentTrace& trace, Window w);

/* Signed extremum of (I - baseline) over the response window, where the
   baseline is the mean over baseline_w.  Negative values are inhibitory. */
double delta_psc(const CurrentTrace& trace, Window baseline_w, Window response_w);

Classification classify(double delta_a);

/* Facilitation ratio in percent: 100 * A2/A1 with both peak deviations
   measured against the shared pre-first-pulse baseline.  Throws
   DivisionByNearZero when A1 falls below the current floor. */
double ppf_index(const CurrentTrace& trace, Window baseline_w, Window first_w,
                 Window second_w);

/* relative synaptic weight change: delta_psc / baseline mean */
double weight_change(const CurrentTrace& trace, Window baseline_w, Window response_w);

struct FitOptions {
  double max_rms_rel = 0.05;  // FitDiverged beyond this fraction of the data range
  int max_evals = 4000;
};

/* a1*exp(-(t-t0)/tau1) + a2*exp(-(t-t0)/tau2) + c fitted to the segment,
   amplitudes referenced to the segment start t0, tau1 <= tau2 */
struct DecayFit {
  double a1 = 0.0;   // A
  double tau1 = 0.0; // s
  double a2 = 0.0;   // A
  double tau2 = 0.0; // s
  double c = 0.0;    // A
  double rms = 0.0;  // A
  double r2 = 0.0;

  double eval(double dt_from_start) const;
};

/* Least squares with the two time constants searched by downhill simplex
   and the amplitudes solved linearly at every candidate; seeded from a
   log-linear single-exponential fit.  Needs >= 50 samples. */
DecayFit fit_double_exp(std::span<const double> t_s, std::span<const double> y_a,
                        const FitOptions& opt = {});

DecayFit fit_double_exp(const CurrentTrace& trace, Window w, const FitOptions& opt = {});

struct LogicConfig {
  double v_g = 0.0;         // V, operating gate bias
  double threshold_a = 0.0; // A, output turns 1 at |delta| >= threshold, > 0
  double tail_s = 0.2;      // s, observation window after the shared edge
};

struct TruthRow {
  bool a_on = false;
  bool b_on = false;
  double delta_a = 0.0;  // signed response at the shared trailing edge
  bool out = false;

  bool operator==(const TruthRow&) const = default;
};

/* Protocol for one input combination of the two-pulse gate: the enabled
   pulses at bias cfg.v_g, observed for cfg.tail_s past the shared edge. */
StimulusProtocol logic_protocol(const DeviceParams& p, const LogicConfig& cfg,
                                const LightPulse& a, const LightPulse& b, bool a_on,
                                bool b_on, double dt);

/* Runs the four input combinations of two pulses (possibly on the same
   channel) and thresholds |delta| at the shared trailing edge.  The two
   pulses must end together. */
std::vector<TruthRow> truth_table(const DeviceParams& p, const LogicConfig& cfg,
                                  const LightPulse& a, const LightPulse& b, double dt);

/* named scalars plus the exact sample ranges they came from */
struct MetricsReport {
  std::string kind;
  std::map<std::string, double> values;
  std::map<std::string, Window> windows;
};

std::string report_to_json(const MetricsReport& report);

}  // namespace optosyn
