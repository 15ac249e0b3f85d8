#include "optosyn/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include "optosyn/errors.hpp"
#include "optosyn/metrics.hpp"

namespace optosyn {

std::map<std::string, StimulusProtocol> route(const std::vector<AxonFanout>& fanouts,
                                              const std::vector<LightPulse>& schedule,
                                              const std::vector<std::string>& device_ids,
                                              const StimulusProtocol& base) {
  std::set<std::string> known(device_ids.begin(), device_ids.end());
  for (const auto& fanout : fanouts) {
    for (const auto& target : fanout.targets) {
      if (!known.count(target.device_id))
        throw UnknownDevice("route: fanout for channel " +
                            std::to_string(fanout.channel_nm) + " nm names device '" +
                            target.device_id + "' which is not in device_ids");
      if (!(target.coupling >= 0.0) || !std::isfinite(target.coupling))
        throw ValidationError("route: coupling for device '" + target.device_id +
                              "' must be finite and >= 0");
    }
  }

  std::map<std::string, StimulusProtocol> protocols;
  for (const auto& id : device_ids) {
    StimulusProtocol proto = base;
    proto.channels.clear();
    proto.pulses.clear();
    std::set<int> channels;
    for (const auto& fanout : fanouts)
      for (const auto& target : fanout.targets)
        if (target.device_id == id) channels.insert(fanout.channel_nm);
    proto.channels.assign(channels.begin(), channels.end());
    for (const auto& pulse : schedule) {
      for (const auto& fanout : fanouts) {
        if (fanout.channel_nm != pulse.channel_nm) continue;
        for (const auto& target : fanout.targets) {
          if (target.device_id != id) continue;
          LightPulse delivered = pulse;
          delivered.power_w = pulse.power_w * target.coupling;
          proto.pulses.push_back(delivered);
        }
      }
    }
    validate_protocol(proto);
    protocols.emplace(id, std::move(proto));
  }
  return protocols;
}

std::size_t RetinaArray::index(std::size_t row, std::size_t col) const {
  if (row >= rows_ || col >= cols_)
    throw ValidationError("retina: pixel (" + std::to_string(row) + ", " +
                          std::to_string(col) + ") is outside the " +
                          std::to_string(rows_) + "x" + std::to_string(cols_) +
                          " array");
  return row * cols_ + col;
}

RetinaArray::RetinaArray(std::size_t rows, std::size_t cols, const DeviceParams& shared,
                         double v_g, double dt)
    : rows_(rows), cols_(cols), v_g_(v_g), dt_(dt) {
  if (rows_ < 1 || cols_ < 1)
    throw ValidationError("retina: the array needs at least one pixel");
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw ValidationError("retina: dt must be finite and > 0");
  shared.validate();
  if (dt > shared.tau_fast / 10.0 * (1.0 + 1e-12))
    throw StepTooLarge("retina: dt=" + std::to_string(dt) + " s exceeds tau_fast/10=" +
                       std::to_string(shared.tau_fast / 10.0) + " s");
  const std::size_t n = rows_ * cols_;
  params_.assign(n, shared);
  states_.reserve(n);
  i_dark_.reserve(n);
  const DeviceState dark = steady_state(shared, v_g_, {});
  const double i_dark = channel_current(dark, v_g_, shared);
  if (std::abs(i_dark) < kCurrentFloor)
    throw DivisionByNearZero("retina: dark current below the current floor");
  for (std::size_t i = 0; i < n; ++i) {
    states_.push_back(dark);
    i_dark_.push_back(i_dark);
  }
}

void RetinaArray::set_pixel_params(std::size_t row, std::size_t col,
                                   const DeviceParams& p) {
  if (t_ > 0.0)
    throw ValidationError("retina: pixel parameters are fixed once stepping starts");
  p.validate();
  if (dt_ > p.tau_fast / 10.0 * (1.0 + 1e-12))
    throw StepTooLarge("retina: dt=" + std::to_string(dt_) + " s exceeds tau_fast/10=" +
                       std::to_string(p.tau_fast / 10.0) + " s for the new pixel");
  const std::size_t i = index(row, col);
  params_[i] = p;
  states_[i] = steady_state(p, v_g_, {});
  i_dark_[i] = channel_current(states_[i], v_g_, p);
  if (std::abs(i_dark_[i]) < kCurrentFloor)
    throw DivisionByNearZero("retina: dark current below the current floor");
}

void RetinaArray::step_frames(const std::vector<Frame>& frames, int n_threads) {
  if (n_threads < 1) throw ValidationError("retina: n_threads must be >= 1");
  const std::size_t n = rows_ * cols_;
  for (const auto& frame : frames) {
    if (frame.rows != rows_ || frame.cols != cols_)
      throw ValidationError("retina: frame is " + std::to_string(frame.rows) + "x" +
                            std::to_string(frame.cols) + ", the array is " +
                            std::to_string(rows_) + "x" + std::to_string(cols_));
    const auto n_sub = static_cast<long long>(std::llround(frame.duration_s / dt_));
    if (n_sub < 1 ||
        std::abs(static_cast<double>(n_sub) * dt_ - frame.duration_s) > 1e-6 * dt_)
      throw ValidationError(
          "retina: frame duration " + std::to_string(frame.duration_s) +
          " s must be a positive integer multiple of dt=" + std::to_string(dt_) + " s");
    for (const auto& [ch, powers] : frame.power_w) {
      if (powers.size() != n)
        throw ValidationError("retina: channel " + std::to_string(ch) + " carries " +
                              std::to_string(powers.size()) + " pixels, expected " +
                              std::to_string(n));
      for (double power : powers)
        if (!(power >= 0.0) || !std::isfinite(power))
          throw ValidationError("retina: channel " + std::to_string(ch) +
                                " has a negative or non-finite pixel power");
    }

    auto run_chunk = [&](std::size_t first, std::size_t last) {
      Illumination light;
      for (std::size_t i = first; i < last; ++i) {
        light.clear();
        for (const auto& [ch, powers] : frame.power_w) light[ch] = powers[i];
        DeviceState s = states_[i];
        for (long long k = 0; k < n_sub; ++k)
          s = rk4_step(s, v_g_, light, dt_, params_[i]);
        if (!std::isfinite(s.n_fast) || !std::isfinite(s.n_slow) ||
            !std::isfinite(s.n_trap))
          throw NonFinite("retina: non-finite state in pixel " + std::to_string(i));
        states_[i] = s;
      }
    };

    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(n_threads), n);
    if (workers == 1) {
      run_chunk(0, n);
    } else {
      std::vector<std::thread> threads;
      std::vector<std::exception_ptr> errors(workers);
      const std::size_t chunk = (n + workers - 1) / workers;
      for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t first = w * chunk;
        const std::size_t last = std::min(n, first + chunk);
        threads.emplace_back([&, w, first, last] {
          try {
            if (first < last) run_chunk(first, last);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& thread : threads) thread.join();
      for (const auto& error : errors)
        if (error) std::rethrow_exception(error);
    }
    t_ += static_cast<double>(n_sub) * dt_;
  }
}

NeuralImage RetinaArray::image() const {
  NeuralImage img;
  img.rows = rows_;
  img.cols = cols_;
  img.t = t_;
  img.weight.reserve(rows_ * cols_);
  for (std::size_t i = 0; i < rows_ * cols_; ++i) {
    const double now = channel_current(states_[i], v_g_, params_[i]);
    img.weight.push_back((now - i_dark_[i]) / i_dark_[i]);
  }
  return img;
}

const DeviceState& RetinaArray::state_at(std::size_t row, std::size_t col) const {
  return states_[index(row, col)];
}

PgmImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("read_pgm: cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P2" && magic != "P5")
    throw SchemaError("read_pgm: " + path + " is not a P2/P5 grayscale image");

  auto next_token = [&]() -> long long {
    for (;;) {
      int c = in.peek();
      if (c == '#') {
        std::string comment;
        std::getline(in, comment);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    long long value = 0;
    if (!(in >> value)) throw SchemaError("read_pgm: truncated header in " + path);
    return value;
  };

  const long long cols = next_token();
  const long long rows = next_token();
  const long long maxval = next_token();
  if (cols < 1 || rows < 1 || maxval < 1 || maxval > 65535)
    throw SchemaError("read_pgm: bad dimensions or maxval in " + path);

  PgmImage img;
  img.rows = static_cast<std::size_t>(rows);
  img.cols = static_cast<std::size_t>(cols);
  img.values.reserve(img.rows * img.cols);
  const std::size_t n = img.rows * img.cols;
  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) {
      const long long v = next_token();
      if (v < 0 || v > maxval)
        throw SchemaError("read_pgm: sample out of range in " + path);
      img.values.push_back(static_cast<double>(v) / static_cast<double>(maxval));
    }
  } else {
    in.get();  // the single whitespace byte after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(n * static_cast<std::size_t>(bytes));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
      throw SchemaError("read_pgm: truncated pixel data in " + path);
    for (std::size_t i = 0; i < n; ++i) {
      const long long v = bytes == 1
                              ? raw[i]
                              : (static_cast<long long>(raw[2 * i]) << 8) | raw[2 * i + 1];
      if (v > maxval) throw SchemaError("read_pgm: sample out of range in " + path);
      img.values.push_back(static_cast<double>(v) / static_cast<double>(maxval));
    }
  }
  return img;
}

void write_pgm(const std::string& path, std::size_t rows, std::size_t cols,
               const std::vector<double>& values) {
  if (values.size() != rows * cols)
    throw ValidationError("write_pgm: expected " + std::to_string(rows * cols) +
                          " values, got " + std::to_string(values.size()));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("write_pgm: cannot open " + path);
  out << "P2\n" << cols << " " << rows << "\n255\n";
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = std::clamp(values[r * cols + c], 0.0, 1.0);
      out << (c ? " " : "") << static_cast<int>(std::lround(v * 255.0));
    }
    out << "\n";
  }
}

}  // namespace optosyn
