#pragma once

#include <string>
#include <utility>
#include <vector>

#include "optosyn/device.hpp"
#include "optosyn/metrics.hpp"
#include "optosyn/simulator.hpp"
#include "optosyn/stimulus.hpp"

namespace optosyn {

/* One experiment's result table plus the fingerprints needed to rerun it. */
struct Dataset {
  std::string id;                            // file stem of the CSV/manifest pair
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;     // columns.size() values per row
  std::vector<std::string> protocol_digests; // one per simulated protocol
  double dt = 0.0;                           // s
};

/* Writes <dir>/<id>.csv and <dir>/<id>.manifest.json (params digest,
   protocol digests, dt, generator version).  Creates dir if missing. */
void write_dataset(const Dataset& ds, const DeviceParams& p, const std::string& dir);

/* rectangular probe pulse shared by the sweep harnesses */
struct PulseSpec {
  int channel_nm = 405;      // nm
  double power_w = 50e-6;    // W
  double duration_s = 5e-3;  // s
};

/* All harnesses start their first pulse at the same onset so their
   readouts land on identical sample indices and stay comparable. */
inline constexpr double kHarnessOnset = 0.05;  // s

/* columns v_g_v, delta_i_a, weight, class (-1 inhibitory, 0, +1 excitatory) */
Dataset run_gate_sweep(const DeviceParams& p, const std::vector<double>& gates_v,
                       const PulseSpec& pulse, double dt);

/* columns duration_s, delta_i_a, weight */
Dataset run_duration_sweep(const DeviceParams& p, double v_g,
                           const std::vector<double>& durations_s, int channel_nm,
                           double power_w, double dt);

/* Paired 405 nm pulses (50 uW, 5 ms) separated onset-to-onset by each
   interval; facilitation measured over matched windows of one interval
   each.  Intervals must exceed the pulse duration.
   columns interval_s, ppf_pct */
Dataset run_ppf_sweep(const DeviceParams& p, double v_g,
                      const std::vector<double>& intervals_s, double dt);

/* n identical 405 nm pulses; the weight is read at each trailing edge.
   columns pulse_number, t_edge_s, weight */
Dataset run_train(const DeviceParams& p, double v_g, int n_pulses, double pulse_s,
                  double gap_s, double power_w, double dt);

/* Potentiation and retention: n_pulses writes (405 nm) spaced period_s
   apart, then an observation tail; weight sampled every 10 ms.
   columns t_s, weight */
Dataset run_ltp(const DeviceParams& p, double v_g, double power_w, double pulse_s,
                double observe_s, int n_pulses, double period_s, double dt);

/* One write pulse at v_g_write, then a gate excursion to v_reset for
   reset_s, then recovery back at v_g_write; weight sampled every 10 ms.
   columns t_s, weight */
Dataset run_reset(const DeviceParams& p, double v_g_write, double v_reset,
                  double reset_s, double dt);

/* Two 20 ms pulses (405 and 532 nm) with the 532 onset delayed by each
   entry (negative = 532 first); response read at the 405 trailing edge.
   columns delay_s, delta_i_a */
Dataset run_temporal_summation(const DeviceParams& p, double v_g, double power_405_w,
                               double power_532_w, const std::vector<double>& delays_s,
                               double dt);

/* Simultaneous 20 ms pulses on both channels for each power pair; the
   joint response is tabulated against the sum of the two single-channel
   responses (singles are cached and reused across pairs).
   columns power_405_w, power_532_w, delta_i_a, arithmetic_sum_a */
Dataset run_power_summation(const DeviceParams& p, double v_g,
                            const std::vector<std::pair<double, double>>& power_pairs_w,
                            double dt);

enum class LogicMode { And, Or };

/* Optical logic gate from two equal 1 s pulses on the 405 nm channel.
   And: biased at the crossover gate voltage for a single 10 uW input, so
   only the doubled power leaves the null point; threshold defaults to
   half the both-on response.  Or: biased at +20 V with 50 uW inputs;
   threshold defaults to half the smaller single-input response.
   columns a_on, b_on, delta_i_a, out, threshold_a, v_g_v */
Dataset run_logic(const DeviceParams& p, LogicMode mode, double dt,
                  double threshold_a = 0.0 /* 0 picks the mode default */);

}  // namespace optosyn
