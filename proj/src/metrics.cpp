#include "optosyn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "optosyn/errors.hpp"
#include "optosyn/optim.hpp"

namespace optosyn {

namespace {

void check_window(const CurrentTrace& trace, Window w, const char* name) {
  if (w.first >= w.last)
    throw EmptyWindow(std::string(name) + ": window [" + std::to_string(w.first) + ", " +
                      std::to_string(w.last) + ") selects no samples");
  if (w.last > trace.size())
    throw EmptyWindow(std::string(name) + ": window end " + std::to_string(w.last) +
                      " exceeds trace length " + std::to_string(trace.size()));
}

double peak_abs_deviation(const CurrentTrace& trace, Window w, double baseline) {
  double peak = 0.0;
  for (std::size_t i = w.first; i < w.last; ++i)
    peak = std::max(peak, std::abs(trace.current_a[i] - baseline));
  return peak;
}

/* solve the 3x3 normal equations for (a1, a2, c); returns false when the
   system stays singular even with a ridge */
bool solve_amplitudes(const std::vector<double>& b1, const std::vector<double>& b2,
                      std::span<const double> y, double out[3]) {
  const std::size_t n = y.size();
  double g[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  double r[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const double row[3] = {b1[i], b2[i], 1.0};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) g[a][b] += row[a] * row[b];
      r[a] += row[a] * y[i];
    }
  }
  const double ridge = 1e-12 * (g[0][0] + g[1][1] + g[2][2]) / 3.0;
  for (int attempt = 0; attempt < 2; ++attempt) {
    double m[3][4];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) m[a][b] = g[a][b] + (a == b ? attempt * ridge : 0.0);
      m[a][3] = r[a];
    }
    bool ok = true;
    for (int col = 0; col < 3 && ok; ++col) {
      int pivot = col;
      for (int row = col + 1; row < 3; ++row)
        if (std::abs(m[row][col]) > std::abs(m[pivot][col])) pivot = row;
      if (std::abs(m[pivot][col]) < 1e-300) {
        ok = false;
        break;
      }
      std::swap_ranges(m[col], m[col] + 4, m[pivot]);
      for (int row = 0; row < 3; ++row) {
        if (row == col) continue;
        const double factor = m[row][col] / m[col][col];
        for (int b = col; b < 4; ++b) m[row][b] -= factor * m[col][b];
      }
    }
    if (!ok) continue;
    for (int a = 0; a < 3; ++a) out[a] = m[a][3] / m[a][a];
    if (std::isfinite(out[0]) && std::isfinite(out[1]) && std::isfinite(out[2]))
      return true;
  }
  return false;
}

}  // namespace

double window_mean(const CurrentTrace& trace, Window w) {
  check_window(trace, w, "window_mean");
  const double sum = std::accumulate(trace.current_a.begin() + w.first,
                                     trace.current_a.begin() + w.last, 0.0);
  return sum / static_cast<double>(w.count());
}

double delta_psc(const CurrentTrace& trace, Window baseline_w, Window response_w) {
  check_window(trace, response_w, "delta_psc");
  const double baseline = window_mean(trace, baseline_w);
  double best = 0.0;
  for (std::size_t i = response_w.first; i < response_w.last; ++i) {
    const double dev = trace.current_a[i] - baseline;
    if (std::abs(dev) > std::abs(best)) best = dev;
  }
  return best;
}

Classification classify(double delta_a) {
  if (std::abs(delta_a) <= kCurrentFloor) return Classification::Null;
  return delta_a < 0.0 ? Classification::Inhibitory : Classification::Excitatory;
}

double ppf_index(const CurrentTrace& trace, Window baseline_w, Window first_w,
                 Window second_w) {
  check_window(trace, first_w, "ppf_index");
  check_window(trace, second_w, "ppf_index");
  const double baseline = window_mean(trace, baseline_w);
  const double a1 = peak_abs_deviation(trace, first_w, baseline);
  const double a2 = peak_abs_deviation(trace, second_w, baseline);
  if (a1 < kCurrentFloor)
    throw DivisionByNearZero("ppf_index: first response " + std::to_string(a1) +
                             " A is below the current floor");
  return 100.0 * a2 / a1;
}

double weight_change(const CurrentTrace& trace, Window baseline_w, Window response_w) {
  const double baseline = window_mean(trace, baseline_w);
  if (std::abs(baseline) < kCurrentFloor)
    throw DivisionByNearZero("weight_change: baseline " + std::to_string(baseline) +
                             " A is below the current floor");
  return delta_psc(trace, baseline_w, response_w) / baseline;
}

double DecayFit::eval(double dt_from_start) const {
  return a1 * std::exp(-dt_from_start / tau1) + a2 * std::exp(-dt_from_start / tau2) + c;
}

DecayFit fit_double_exp(std::span<const double> t_s, std::span<const double> y_a,
                        const FitOptions& opt) {
  const std::size_t n = t_s.size();
  if (n != y_a.size())
    throw ValidationError("fit_double_exp: t and y lengths differ");
  if (n < 50)
    throw ValidationError("fit_double_exp: needs >= 50 samples, got " + std::to_string(n));

  const double t0 = t_s.front();
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = t_s[i] - t0;
    if (i > 0 && !(s[i] > s[i - 1]))
      throw ValidationError("fit_double_exp: times must be strictly increasing");
  }
  const double span_s = s.back();

  const auto [y_min_it, y_max_it] = std::minmax_element(y_a.begin(), y_a.end());
  const double y_range = *y_max_it - *y_min_it;

  /* seed: offset from the tail, single time constant from a log-linear fit */
  const std::size_t n_tail = std::max<std::size_t>(5, n / 20);
  double c0 = 0.0;
  for (std::size_t i = n - n_tail; i < n; ++i) c0 += y_a[i];
  c0 /= static_cast<double>(n_tail);

  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    peak = std::max(peak, std::abs(y_a[i] - c0));
  const double sign = (y_a.front() - c0) >= 0.0 ? 1.0 : -1.0;

  double tau_seed = span_s / 3.0;
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = sign * (y_a[i] - c0);
      if (v > 1e-3 * peak) {
        const double ly = std::log(v);
        sx += s[i];
        sy += ly;
        sxx += s[i] * s[i];
        sxy += s[i] * ly;
        ++m;
      }
    }
    if (m >= 10) {
      const double denom = static_cast<double>(m) * sxx - sx * sx;
      if (std::abs(denom) > 0.0) {
        const double slope = (static_cast<double>(m) * sxy - sx * sy) / denom;
        if (slope < -1e-300) {
          const double tau = -1.0 / slope;
          if (tau > span_s * 1e-5 && tau < span_s * 1e3) tau_seed = tau;
        }
      }
    }
  }

  std::vector<double> b1(n), b2(n);
  double amps[3] = {0, 0, c0};
  auto objective = [&](std::span<const double> x) {
    const double tau1 = std::exp(x[0]);
    const double tau2 = std::exp(x[1]);
    for (std::size_t i = 0; i < n; ++i) {
      b1[i] = std::exp(-s[i] / tau1);
      b2[i] = std::exp(-s[i] / tau2);
    }
    if (!solve_amplitudes(b1, b2, y_a, amps)) return 1e300;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = amps[0] * b1[i] + amps[1] * b2[i] + amps[2] - y_a[i];
      sse += r * r;
    }
    return sse;
  };

  SimplexOptions nm;
  nm.max_evals = opt.max_evals;
  nm.init_step_rel = 0.6;
  nm.restarts = 3;
  const std::pair<double, double> tau_box{std::log(span_s * 1e-5), std::log(span_s * 1e3)};
  const std::vector<std::pair<double, double>> bounds{tau_box, tau_box};
  const auto best = minimize_simplex(
      objective, {std::log(tau_seed / 3.0), std::log(tau_seed * 3.0)}, nm, bounds);

  DecayFit fit;
  fit.tau1 = std::exp(best.x[0]);
  fit.tau2 = std::exp(best.x[1]);
  const double sse = objective(best.x);  // re-solve amplitudes at the optimum
  fit.a1 = amps[0];
  fit.a2 = amps[1];
  fit.c = amps[2];
  if (fit.tau1 > fit.tau2) {
    std::swap(fit.tau1, fit.tau2);
    std::swap(fit.a1, fit.a2);
  }
  fit.rms = std::sqrt(sse / static_cast<double>(n));

  double mean = 0.0;
  for (double v : y_a) mean += v;
  mean /= static_cast<double>(n);
  double sst = 0.0;
  for (double v : y_a) sst += (v - mean) * (v - mean);
  fit.r2 = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);

  if (!std::isfinite(fit.rms) || (y_range > 0.0 && fit.rms > opt.max_rms_rel * y_range))
    throw FitDiverged("fit_double_exp: rms residual " + std::to_string(fit.rms) +
                      " A exceeds " + std::to_string(opt.max_rms_rel) +
                      " of the data range " + std::to_string(y_range) + " A");
  return fit;
}

DecayFit fit_double_exp(const CurrentTrace& trace, Window w, const FitOptions& opt) {
  check_window(trace, w, "fit_double_exp");
  std::vector<double> t(w.count()), y(w.count());
  for (std::size_t i = w.first; i < w.last; ++i) {
    t[i - w.first] = trace.time_at(i);
    y[i - w.first] = trace.current_a[i];
  }
  return fit_double_exp(t, y, opt);
}

StimulusProtocol logic_protocol(const DeviceParams& p, const LogicConfig& cfg,
                                const LightPulse& a, const LightPulse& b, bool a_on,
                                bool b_on, double dt) {
  if (std::abs(a.t_end() - b.t_end()) > 1e-12)
    throw ValidationError("logic_protocol: the two pulses must share their trailing edge");
  if (!(a.t_start >= dt) || !(b.t_start >= dt))
    throw ValidationError("logic_protocol: pulses must start after the first sample");

  std::vector<int> channels{a.channel_nm};
  if (b.channel_nm != a.channel_nm) channels.push_back(b.channel_nm);
  std::sort(channels.begin(), channels.end());

  StimulusProtocol proto;
  proto.channels = channels;
  if (a_on) proto.pulses.push_back(a);
  if (b_on) proto.pulses.push_back(b);
  proto.default_v_g = cfg.v_g;
  proto.v_ds = p.v_ds;
  proto.t_end = std::round((a.t_end() + cfg.tail_s) / dt) * dt;
  proto.settle_time = 0.1;
  return proto;
}

std::vector<TruthRow> truth_table(const DeviceParams& p, const LogicConfig& cfg,
                                  const LightPulse& a, const LightPulse& b, double dt) {
  if (!(cfg.threshold_a > 0.0))
    throw ValidationError("truth_table: threshold_a must be > 0");

  const double edge = a.t_end();
  std::vector<TruthRow> rows;
  for (int a_on = 0; a_on <= 1; ++a_on) {
    for (int b_on = 0; b_on <= 1; ++b_on) {
      const auto proto = logic_protocol(p, cfg, a, b, a_on != 0, b_on != 0, dt);
      const auto trace = integrate(p, proto, dt);
      const double baseline = window_mean(trace, {0, 1});
      const double delta = trace.current_a[trace.index_at(edge)] - baseline;
      rows.push_back({a_on != 0, b_on != 0, delta, std::abs(delta) >= cfg.threshold_a});
    }
  }
  return rows;
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json doc;
  doc["kind"] = report.kind;
  for (const auto& [name, value] : report.values) doc["values"][name] = value;
  for (const auto& [name, w] : report.windows)
    doc["windows"][name] = {{"first", w.first}, {"last", w.last}};
  return doc.dump(2) + "\n";
}

}  // namespace optosyn
