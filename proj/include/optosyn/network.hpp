#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "optosyn/device.hpp"
#include "optosyn/simulator.hpp"
#include "optosyn/stimulus.hpp"

namespace optosyn {

/* one postsynaptic device reached by an axon, with its optical coupling */
struct FanoutTarget {
  std::string device_id;
  double coupling = 1.0;  // power scale factor, >= 0
};

/* one presynaptic axon: a wavelength channel fanned out to devices */
struct AxonFanout {
  int channel_nm = 405;
  std::vector<FanoutTarget> targets;
};

/* Expand a shared pulse schedule into one protocol per device: every
   device receives the pulses of the channels routed to it, powers scaled
   by the coupling, in schedule order.  Devices outside `device_ids`
   throw UnknownDevice.  The base protocol supplies bias, t_end, settle
   time and description.  One delivered pulse per (pulse, target) pair:
   duplicate (channel, device) routes stack. */
std::map<std::string, StimulusProtocol> route(const std::vector<AxonFanout>& fanouts,
                                              const std::vector<LightPulse>& schedule,
                                              const std::vector<std::string>& device_ids,
                                              const StimulusProtocol& base);

/* Per-pixel illumination held constant for duration_s: power_w maps a
   wavelength channel to rows*cols row-major pixel powers. */
struct Frame {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::map<int, std::vector<double>> power_w;  // channel -> per-pixel W
  double duration_s = 0.0;                     // multiple of the array dt
};

/* synaptic weight map after the frames stepped so far */
struct NeuralImage {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weight;  // row-major (I - I_dark)/I_dark
  double t = 0.0;              // s
};

/* Grid of independent devices sharing a gate bias, each integrating its
   own pixel's light.  Stepping is deterministic and bit-identical for
   every thread count: pixels never share state. */
class RetinaArray {
 public:
  RetinaArray(std::size_t rows, std::size_t cols, const DeviceParams& shared,
              double v_g, double dt);

  /* replace one pixel's device before any stepping */
  void set_pixel_params(std::size_t row, std::size_t col, const DeviceParams& p);

  void step_frames(const std::vector<Frame>& frames, int n_threads = 1);

  NeuralImage image() const;
  double t() const { return t_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const DeviceState& state_at(std::size_t row, std::size_t col) const;

 private:
  std::size_t index(std::size_t row, std::size_t col) const;

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  double v_g_ = 0.0;  // V
  double dt_ = 0.0;   // s
  double t_ = 0.0;    // s
  std::vector<DeviceParams> params_;  // one per pixel
  std::vector<DeviceState> states_;
  std::vector<double> i_dark_;        // A, per pixel at construction
};

/* 8/16-bit grayscale PGM (P2 or P5), values normalized to [0, 1] */
struct PgmImage {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major, [0, 1]
};

PgmImage read_pgm(const std::string& path);

/* P2 output, values clamped to [0, 1] and scaled to maxval 255 */
void write_pgm(const std::string& path, std::size_t rows, std::size_t cols,
               const std::vector<double>& values);

}  // namespace optosyn
