#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "optosyn/calibration.hpp"
#include "optosyn/device.hpp"
#include "optosyn/errors.hpp"
#include "optosyn/experiments.hpp"
#include "optosyn/metrics.hpp"
#include "optosyn/network.hpp"
#include "optosyn/simulator.hpp"
#include "optosyn/stimulus.hpp"
#include "optosyn/version.hpp"

namespace {

using namespace optosyn;

struct GlobalOpts {
  std::string params_path = "params/default.json";
  bool params_explicit = false;
  double dt = 1e-4;      // s
  std::string out_dir = "results";
  std::uint64_t seed = 0;
  std::string format = "csv";
  bool svg = false;
  std::string id;        // overrides the dataset/trace file stem
};

/* Built-in fallback when no parameter file is available yet; the two
   stock channels get nominal efficiencies so every subcommand can run
   before a calibration has been saved. */
DeviceParams builtin_params() {
  DeviceParams p;
  p.eta[405] = 1.2e22;  // carriers/s per W
  p.eta[532] = 7.0e21;  // carriers/s per W
  return p;
}

DeviceParams effective_params(const GlobalOpts& g) {
  if (std::filesystem::exists(g.params_path)) return load_params(g.params_path);
  if (g.params_explicit)
    throw ValidationError("--params: file not found: " + g.params_path);
  std::fprintf(stderr, "note: %s not found; using built-in default parameters\n",
               g.params_path.c_str());
  return builtin_params();
}

std::string read_text_file(const std::string& path, const char* flag) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(std::string(flag) + ": cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
}

/* Minimal standalone line plot; a rendering convenience, not a data
   format, so nothing downstream parses it. */
void write_svg_xy(const std::string& path, const std::string& x_label,
                  const std::string& y_label, const std::vector<double>& xs,
                  const std::vector<double>& ys) {
  const double w = 720.0, h = 440.0;
  const double ml = 70.0, mr = 20.0, mt = 20.0, mb = 50.0;
  double x_lo = xs.empty() ? 0.0 : *std::min_element(xs.begin(), xs.end());
  double x_hi = xs.empty() ? 1.0 : *std::max_element(xs.begin(), xs.end());
  double y_lo = ys.empty() ? 0.0 : *std::min_element(ys.begin(), ys.end());
  double y_hi = ys.empty() ? 1.0 : *std::max_element(ys.begin(), ys.end());
  if (x_hi - x_lo <= 0.0) { x_lo -= 0.5; x_hi += 0.5; }
  if (y_hi - y_lo <= 0.0) { y_lo -= 0.5; y_hi += 0.5; }
  const auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (w - ml - mr); };
  const auto py = [&](double y) { return h - mb - (y - y_lo) / (y_hi - y_lo) * (h - mt - mb); };

  char num[64];
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<line x1=\"" << ml << "\" y1=\"" << (h - mb) << "\" x2=\"" << (w - mr) << "\" y2=\""
    << (h - mb) << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << (h - mb)
    << "\" stroke=\"black\"/>\n";
  s << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
    std::snprintf(num, sizeof num, "%.2f,%.2f ", px(xs[i]), py(ys[i]));
    s << num;
  }
  s << "\"/>\n";
  const auto text = [&](double x, double y, const std::string& t, const char* anchor) {
    s << "<text x=\"" << x << "\" y=\"" << y << "\" font-family=\"sans-serif\" font-size=\"12\""
      << " text-anchor=\"" << anchor << "\">" << t << "</text>\n";
  };
  std::snprintf(num, sizeof num, "%.4g", x_lo);
  text(ml, h - mb + 16.0, num, "middle");
  std::snprintf(num, sizeof num, "%.4g", x_hi);
  text(w - mr, h - mb + 16.0, num, "middle");
  std::snprintf(num, sizeof num, "%.4g", y_lo);
  text(ml - 6.0, h - mb, num, "end");
  std::snprintf(num, sizeof num, "%.4g", y_hi);
  text(ml - 6.0, mt + 10.0, num, "end");
  text((ml + w - mr) / 2.0, h - 14.0, x_label, "middle");
  text(ml, mt - 6.0 + 12.0, y_label, "start");
  s << "</svg>\n";
  write_text_file(path, s.str());
}

std::string dataset_json(const Dataset& ds, const DeviceParams& p) {
  nlohmann::ordered_json j;
  j["id"] = ds.id;
  j["generator"] = std::string("optosyn ") + kVersion;
  j["params_digest"] = params_digest(p);
  j["dt_s"] = ds.dt;
  j["columns"] = ds.columns;
  j["rows"] = ds.rows;
  j["protocol_digests"] = ds.protocol_digests;
  return j.dump(2) + "\n";
}

/* Shared tail of every table-producing subcommand: CSV + manifest always,
   JSON mirror and SVG on request.  x_col/y_col pick the plotted pair. */
void emit_dataset(Dataset ds, const DeviceParams& p, const GlobalOpts& g,
                  std::size_t x_col = 0, std::size_t y_col = 1) {
  if (!g.id.empty()) ds.id = g.id;
  write_dataset(ds, p, g.out_dir);
  const auto base = (std::filesystem::path(g.out_dir) / ds.id).string();
  if (g.format == "json") write_text_file(base + ".json", dataset_json(ds, p));
  if (g.svg) {
    std::vector<double> xs, ys;
    xs.reserve(ds.rows.size());
    ys.reserve(ds.rows.size());
    for (const auto& row : ds.rows) {
      xs.push_back(row[x_col]);
      ys.push_back(row[y_col]);
    }
    write_svg_xy(base + ".svg", ds.columns[x_col], ds.columns[y_col], xs, ys);
  }
  std::printf("wrote %s.csv (%zu rows)\n", base.c_str(), ds.rows.size());
}

std::map<std::string, double> parse_bindings(const std::vector<std::string>& binds) {
  std::map<std::string, double> out;
  for (const auto& b : binds) {
    const auto eq = b.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ValidationError("--bind: expected name=value, got '" + b + "'");
    const auto name = b.substr(0, eq);
    const auto text = b.substr(eq + 1);
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(text, &used);
    } catch (const std::exception&) {
      throw ValidationError("--bind: value for '" + name + "' is not a number: '" + text + "'");
    }
    if (used != text.size())
      throw ValidationError("--bind: value for '" + name + "' is not a number: '" + text + "'");
    out[name] = value;
  }
  return out;
}

void cmd_simulate(const GlobalOpts& g, const std::string& protocol_path,
                  const std::vector<std::string>& binds) {
  const auto p = effective_params(g);
  const auto text = read_text_file(protocol_path, "protocol");
  const auto protocol = parse_protocol(text, parse_bindings(binds));
  const auto trace = integrate(p, protocol, g.dt);

  std::filesystem::create_directories(g.out_dir);
  const auto stem =
      g.id.empty() ? std::filesystem::path(protocol_path).stem().string() : g.id;
  const auto base = (std::filesystem::path(g.out_dir) / stem).string();
  write_trace_csv(trace, base + "_trace.csv");
  write_events_csv(trace, base + "_events.csv");
  if (g.format == "json") write_text_file(base + "_trace.json", trace_to_json(trace));
  if (g.svg) {
    std::vector<double> ts(trace.size());
    for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = trace.time_at(i);
    write_svg_xy(base + "_trace.svg", "t_s", "i_a", ts, trace.current_a);
  }
  std::printf("wrote %s_trace.csv (%zu samples, %zu events)\n", base.c_str(), trace.size(),
              trace.events.size());
  std::printf("digest %s\n", trace.digest.c_str());
}

void cmd_retina(const GlobalOpts& g, const std::string& image_path, double peak_power_w,
                int channel_nm, double v_g, double frame_s, double lead_s, double tail_s,
                int threads) {
  const auto p = effective_params(g);
  const auto img = read_pgm(image_path);
  const auto n = img.rows * img.cols;

  std::vector<Frame> frames;
  const auto dark = [&](double duration) {
    return Frame{img.rows, img.cols, {{channel_nm, std::vector<double>(n, 0.0)}}, duration};
  };
  if (lead_s > 0.0) frames.push_back(dark(lead_s));
  std::vector<double> powers(n);
  for (std::size_t i = 0; i < n; ++i) powers[i] = img.values[i] * peak_power_w;
  frames.push_back(Frame{img.rows, img.cols, {{channel_nm, powers}}, frame_s});
  if (tail_s > 0.0) frames.push_back(dark(tail_s));

  RetinaArray array(img.rows, img.cols, p, v_g, g.dt);
  array.step_frames(frames, threads);
  const auto out = array.image();

  Dataset ds;
  ds.id = g.id.empty() ? "retina" : g.id;
  ds.columns = {"row", "col", "weight"};
  ds.dt = g.dt;
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.cols; ++c)
      ds.rows.push_back({static_cast<double>(r), static_cast<double>(c),
                         out.weight[r * out.cols + c]});
  write_dataset(ds, p, g.out_dir);
  const auto base = (std::filesystem::path(g.out_dir) / ds.id).string();
  if (g.format == "json") write_text_file(base + ".json", dataset_json(ds, p));

  double peak = 0.0;
  for (const auto w : out.weight) peak = std::max(peak, std::abs(w));
  std::vector<double> shade(n, 0.0);
  if (peak > 0.0)
    for (std::size_t i = 0; i < n; ++i) shade[i] = std::abs(out.weight[i]) / peak;
  write_pgm(base + ".pgm", out.rows, out.cols, shade);
  std::printf("wrote %s.csv and %s.pgm (%zux%zu, t=%.3f s, max |weight|=%.6g)\n", base.c_str(),
              base.c_str(), out.rows, out.cols, array.t(), peak);
}

void cmd_calibrate(const GlobalOpts& g, int budget, const std::vector<std::string>& free_fields,
                   const std::string& save_path) {
  const auto initial = effective_params(g);
  auto bounds = default_bounds();
  if (!free_fields.empty()) {
    std::vector<FieldBound> kept;
    for (const auto& name : free_fields) {
      const auto it = std::find_if(bounds.begin(), bounds.end(),
                                   [&](const FieldBound& b) { return b.field == name; });
      if (it == bounds.end())
        throw ValidationError("--free: no default search box for field '" + name + "'");
      kept.push_back(*it);
    }
    bounds = kept;
  }

  const auto result = calibrate(initial, bounds, default_targets(), budget, g.seed, g.dt);

  const auto parent = std::filesystem::path(save_path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  save_params(result.params, save_path);
  auto report_path = std::filesystem::path(save_path);
  report_path.replace_extension();
  write_text_file(report_path.string() + ".residuals.json", residual_report_json(result));

  for (const auto& r : result.residuals)
    std::printf("  %-24s predicted %12.6g  target %12.6g  residual %+.4f\n", r.name.c_str(),
                r.predicted, r.target, r.residual);
  std::printf("objective %.6g after %d evaluations\n", result.objective, result.evaluations);
  std::printf("saved %s (params digest %s)\n", save_path.c_str(),
              params_digest(result.params).c_str());
  if (result.budget_exhausted)
    std::fprintf(stderr, "warning: evaluation budget exhausted; kept the best point found\n");
}

void cmd_fit_decay(const std::string& trace_path, double from_s, double to_s) {
  std::ifstream in(trace_path, std::ios::binary);
  if (!in) throw ValidationError("--trace: cannot open " + trace_path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("--trace: empty file " + trace_path);

  std::vector<std::string> header;
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
  const auto col_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ValidationError("--trace: column '" + name + "' missing from " + trace_path);
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto t_col = col_of("t_s");
  const auto i_col = col_of("i_a");

  std::vector<double> ts, ys;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream rs(line);
    std::vector<double> cells;
    for (std::string cell; std::getline(rs, cell, ',');) cells.push_back(std::stod(cell));
    const auto t = cells.at(t_col);
    if (t < from_s || t > to_s) continue;
    ts.push_back(t);
    ys.push_back(cells.at(i_col));
  }
  if (ts.empty())
    throw EmptyWindow("fit-decay: no samples in [" + std::to_string(from_s) + ", " +
                      std::to_string(to_s) + "] s");

  const auto fit = fit_double_exp(ts, ys);
  nlohmann::ordered_json j;
  j["a1_a"] = fit.a1;
  j["tau1_s"] = fit.tau1;
  j["a2_a"] = fit.a2;
  j["tau2_s"] = fit.tau2;
  j["c_a"] = fit.c;
  j["rms_a"] = fit.rms;
  j["r2"] = fit.r2;
  std::printf("%s\n", j.dump(2).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"optosyn: light-gated synaptic phototransistor simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("optosyn ") + kVersion);

  GlobalOpts g;
  app.add_option("--params", g.params_path,
                 "device parameter JSON file (default params/default.json; built-in "
                 "defaults when the default path is absent)")
      ->each([&g](const std::string&) { g.params_explicit = true; });
  app.add_option("--dt", g.dt, "integration step, s")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out_dir, "output directory for datasets and traces");
  app.add_option("--seed", g.seed, "random seed for the calibration search");
  app.add_option("--format", g.format, "table output format: csv (always) or json (adds a mirror)")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--svg", g.svg, "also write a simple SVG line plot");
  app.add_option("--id", g.id, "override the output file stem");

  /* simulate */
  std::string protocol_path;
  std::vector<std::string> binds;
  auto* sim = app.add_subcommand("simulate", "integrate one protocol file and write its trace");
  sim->add_option("protocol", protocol_path, "protocol JSON file")->required();
  sim->add_option("--bind", binds,
                  "value for a pulse power_param placeholder, name=value (W); repeatable");
  sim->callback([&] { cmd_simulate(g, protocol_path, binds); });

  /* sweep-gate */
  std::vector<double> gates;
  PulseSpec gate_pulse;
  auto* swg = app.add_subcommand("sweep-gate",
                                 "response sign and size of one probe pulse across gate biases");
  swg->add_option("--gates", gates, "gate biases, V (comma separated)")->delimiter(',');
  swg->add_option("--channel", gate_pulse.channel_nm, "probe wavelength channel, nm");
  swg->add_option("--power-w", gate_pulse.power_w, "probe power, W")->check(CLI::PositiveNumber);
  swg->add_option("--pulse-s", gate_pulse.duration_s, "probe duration, s")
      ->check(CLI::PositiveNumber);
  swg->callback([&] {
    if (gates.empty())
      for (int v = -50; v <= 50; v += 10) gates.push_back(v);
    const auto p = effective_params(g);
    emit_dataset(run_gate_sweep(p, gates, gate_pulse, g.dt), p, g, 0, 1);
  });

  /* duration */
  double dur_v_g = 0.0;
  std::vector<double> durations = {1e-3, 2e-3, 5e-3, 0.01, 0.02, 0.05, 0.1};
  int dur_channel = 405;
  double dur_power = 50e-6;
  auto* dur = app.add_subcommand("duration", "response growth with pulse duration");
  dur->add_option("--v-g", dur_v_g, "gate bias, V");
  dur->add_option("--durations", durations, "pulse durations, s (comma separated)")
      ->delimiter(',');
  dur->add_option("--channel", dur_channel, "wavelength channel, nm");
  dur->add_option("--power-w", dur_power, "pulse power, W")->check(CLI::PositiveNumber);
  dur->callback([&] {
    const auto p = effective_params(g);
    emit_dataset(run_duration_sweep(p, dur_v_g, durations, dur_channel, dur_power, g.dt), p, g,
                 0, 1);
  });

  /* ppf */
  double ppf_v_g = 0.0;
  std::vector<double> intervals = {6e-3, 0.01, 0.02, 0.055, 0.1, 0.2, 0.5};
  auto* ppf = app.add_subcommand("ppf", "paired-pulse facilitation versus pulse interval");
  ppf->add_option("--v-g", ppf_v_g, "gate bias, V");
  ppf->add_option("--intervals", intervals, "onset-to-onset intervals, s (comma separated)")
      ->delimiter(',');
  ppf->callback([&] {
    const auto p = effective_params(g);
    emit_dataset(run_ppf_sweep(p, ppf_v_g, intervals, g.dt), p, g, 0, 1);
  });

  /* train */
  double train_v_g = -20.0, train_pulse_s = 5e-3, train_gap_s = 0.01, train_power = 50e-6;
  int train_n = 10;
  auto* trn = app.add_subcommand("train", "weight growth over a pulse train");
  trn->add_option("--v-g", train_v_g, "gate bias, V");
  trn->add_option("--n", train_n, "number of pulses")->check(CLI::PositiveNumber);
  trn->add_option("--pulse-s", train_pulse_s, "pulse duration, s")->check(CLI::PositiveNumber);
  trn->add_option("--gap-s", train_gap_s, "gap between pulses, s")->check(CLI::PositiveNumber);
  trn->add_option("--power-w", train_power, "pulse power, W")->check(CLI::PositiveNumber);
  trn->callback([&] {
    const auto p = effective_params(g);
    emit_dataset(run_train(p, train_v_g, train_n, train_pulse_s, train_gap_s, train_power, g.dt),
                 p, g, 0, 2);
  });

  /* ltp */
  double ltp_v_g = -20.0, ltp_power = 50e-6, ltp_pulse_s = 0.1, ltp_observe_s = 10.5,
         ltp_period_s = 3.0;
  int ltp_n = 1;
  auto* ltp = app.add_subcommand("ltp", "long-term potentiation write and retention");
  ltp->add_option("--v-g", ltp_v_g, "gate bias, V");
  ltp->add_option("--power-w", ltp_power, "write pulse power, W")->check(CLI::PositiveNumber);
  ltp->add_option("--pulse-s", ltp_pulse_s, "write pulse duration, s")
      ->check(CLI::PositiveNumber);
  ltp->add_option("--observe-s", ltp_observe_s, "observation tail after the last write, s")
      ->check(CLI::PositiveNumber);
  ltp->add_option("--n", ltp_n, "number of write pulses")->check(CLI::PositiveNumber);
  ltp->add_option("--period-s", ltp_period_s, "write pulse period, s")
      ->check(CLI::PositiveNumber);
  ltp->callback([&] {
    const auto p = effective_params(g);
    emit_dataset(run_ltp(p, ltp_v_g, ltp_power, ltp_pulse_s, ltp_observe_s, ltp_n, ltp_period_s,
                         g.dt),
                 p, g, 0, 1);
  });

  /* reset */
  double rst_v_write = -20.0, rst_v_reset = 40.0, rst_reset_s = 0.1;
  auto* rst = app.add_subcommand("reset", "gate-pulse erasure of a written weight");
  rst->add_option("--v-g-write", rst_v_write, "write/read gate bias, V");
  rst->add_option("--v-reset", rst_v_reset, "reset gate excursion, V");
  rst->add_option("--reset-s", rst_reset_s, "reset excursion duration, s")
      ->check(CLI::PositiveNumber);
  rst->callback([&] {
    const auto p = effective_params(g);
    emit_dataset(run_reset(p, rst_v_write, rst_v_reset, rst_reset_s, g.dt), p, g, 0, 1);
  });

  /* summation-time */
  double ts_p405 = 0.0, ts_p532 = 0.0, ts_v_g = 20.0;
  std::vector<double> delays = {-0.03, -0.02, -0.01, -0.005, 0.0, 0.005, 0.01, 0.015, 0.03};
  auto* tsum = app.add_subcommand("summation-time",
                                  "two-channel response versus inter-pulse delay");
  tsum->add_option("--power-405-w", ts_p405, "405 nm pulse power, W")
      ->required()
      ->check(CLI::PositiveNumber);
  tsum->add_option("--power-532-w", ts_p532, "532 nm pulse power, W")
      ->required()
      ->check(CLI::PositiveNumber);
  tsum->add_option("--delays", delays, "532 onset delays, s (negative = 532 first)")
      ->delimiter(',');
  tsum->add_option("--v-g", ts_v_g, "gate bias, V");
  tsum->callback([&] {
    const auto p = effective_params(g);
    emit_dataset(run_temporal_summation(p, ts_v_g, ts_p405, ts_p532, delays, g.dt), p, g, 0, 1);
  });

  /* summation-power */
  std::vector<double> powers = {5e-6, 1e-5, 2e-5, 4e-5, 8e-5, 1.6e-4, 3.2e-4};
  double ps_v_g = 20.0;
  auto* psum = app.add_subcommand("summation-power",
                                  "joint versus summed single-channel response over power");
  psum->add_option("--powers", powers, "per-channel powers, W (comma separated)")
      ->delimiter(',');
  psum->add_option("--v-g", ps_v_g, "gate bias, V");
  psum->callback([&] {
    std::vector<std::pair<double, double>> pairs;
    for (const auto pw : powers) {
      pairs.emplace_back(pw, 0.0);
      pairs.emplace_back(0.0, pw);
      pairs.emplace_back(pw, pw);
    }
    const auto p = effective_params(g);
    emit_dataset(run_power_summation(p, ps_v_g, pairs, g.dt), p, g, 0, 2);
  });

  /* logic */
  std::string logic_mode;
  double logic_threshold = 0.0;
  auto* lgc = app.add_subcommand("logic", "optical AND/OR truth table");
  lgc->add_option("--mode", logic_mode, "gate type: and | or")
      ->required()
      ->check(CLI::IsMember({"and", "or"}));
  lgc->add_option("--threshold-a", logic_threshold,
                  "output threshold, A (0 picks the mode default)");
  lgc->callback([&] {
    const auto mode = logic_mode == "and" ? LogicMode::And : LogicMode::Or;
    const auto p = effective_params(g);
    auto ds = run_logic(p, mode, g.dt, logic_threshold);
    emit_dataset(ds, p, g, 0, 2);
    std::printf("a b | delta_i_a      out\n");
    for (const auto& row : ds.rows)
      std::printf("%.0f %.0f | %+.6e  %.0f\n", row[0], row[1], row[2], row[3]);
  });

  /* retina */
  std::string image_path;
  double ret_peak = 50e-6, ret_v_g = -20.0, ret_frame_s = 0.1, ret_lead_s = 0.5,
         ret_tail_s = 1.0;
  int ret_channel = 405, ret_threads = 1;
  auto* ret = app.add_subcommand("retina", "project a grayscale image onto a device array");
  ret->add_option("image", image_path, "input PGM image (P2 or P5)")->required();
  ret->add_option("--peak-power-w", ret_peak, "power of a full-white pixel, W")
      ->check(CLI::PositiveNumber);
  ret->add_option("--channel", ret_channel, "illumination wavelength channel, nm");
  ret->add_option("--v-g", ret_v_g, "shared gate bias, V");
  ret->add_option("--frame-s", ret_frame_s, "bright frame duration, s")
      ->check(CLI::PositiveNumber);
  ret->add_option("--lead-s", ret_lead_s, "dark lead-in duration, s (0 skips it)");
  ret->add_option("--tail-s", ret_tail_s, "dark tail duration, s (0 skips it)");
  ret->add_option("--threads", ret_threads, "worker threads")->check(CLI::PositiveNumber);
  ret->callback([&] {
    cmd_retina(g, image_path, ret_peak, ret_channel, ret_v_g, ret_frame_s, ret_lead_s,
               ret_tail_s, ret_threads);
  });

  /* calibrate */
  int budget = 400;
  std::vector<std::string> free_fields;
  std::string save_path = "params/default.json";
  auto* cal = app.add_subcommand("calibrate", "fit free parameters to the built-in targets");
  cal->add_option("--budget", budget, "maximum objective evaluations")
      ->check(CLI::PositiveNumber);
  cal->add_option("--free", free_fields,
                  "fields to search (comma separated; default: every field with a search box)")
      ->delimiter(',');
  cal->add_option("--save", save_path, "output parameter JSON file");
  cal->callback([&] { cmd_calibrate(g, budget, free_fields, save_path); });

  /* fit-decay */
  std::string trace_path;
  double fit_from = 0.0, fit_to = 0.0;
  auto* fit = app.add_subcommand("fit-decay", "double-exponential fit of a trace segment");
  fit->add_option("trace", trace_path, "trace CSV written by simulate")->required();
  fit->add_option("--from", fit_from, "window start, s")->required();
  fit->add_option("--to", fit_to, "window end, s")->required();
  fit->callback([&] { cmd_fit_decay(trace_path, fit_from, fit_to); });

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 3;
  }
  return 0;
}
