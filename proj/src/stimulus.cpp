#include "optosyn/stimulus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "optosyn/errors.hpp"

namespace optosyn {

namespace {

using nlohmann::ordered_json;

std::string window_str(double t_start, double duration) {
  std::ostringstream os;
  os << "[" << t_start << ", " << t_start + duration << ") s";
  return os.str();
}

void check_keys(const ordered_json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key))
      throw SchemaError(where + ": unknown field \"" + key + "\"");
  }
}

double get_number(const ordered_json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key))
    throw SchemaError(where + ": missing field \"" + key + "\"");
  if (!obj.at(key).is_number())
    throw SchemaError(where + ": field \"" + key + "\" must be a number");
  return obj.at(key).get<double>();
}

int get_channel(const ordered_json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key))
    throw SchemaError(where + ": missing field \"" + key + "\"");
  if (!obj.at(key).is_number_integer())
    throw SchemaError(where + ": field \"" + key + "\" must be an integer");
  return obj.at(key).get<int>();
}

}  // namespace

void validate_protocol(const StimulusProtocol& p) {
  if (!(p.t_end > 0.0) || !std::isfinite(p.t_end))
    throw ValidationError("protocol.t_end must be finite and > 0");
  if (!(p.settle_time >= 0.0) || !std::isfinite(p.settle_time))
    throw ValidationError("protocol.settle_time must be finite and >= 0");
  if (!std::isfinite(p.default_v_g))
    throw ValidationError("protocol.default_v_g must be finite");
  if (!(p.v_ds >= 0.0) || !std::isfinite(p.v_ds))
    throw ValidationError("protocol.v_ds must be finite and >= 0");

  std::set<int> declared(p.channels.begin(), p.channels.end());
  if (declared.size() != p.channels.size())
    throw ValidationError("protocol.channels must be unique");

  for (std::size_t i = 0; i < p.pulses.size(); ++i) {
    const auto& pulse = p.pulses[i];
    const std::string where = "protocol.pulses[" + std::to_string(i) + "]";
    if (!declared.count(pulse.channel_nm))
      throw UnknownChannel(where + ": channel " + std::to_string(pulse.channel_nm) +
                           " nm is not declared in protocol.channels");
    if (!(pulse.power_w >= 0.0) || !std::isfinite(pulse.power_w))
      throw ValidationError(where + ".power_w must be finite and >= 0, window " +
                            window_str(pulse.t_start, pulse.duration));
    if (!(pulse.duration > 0.0) || !std::isfinite(pulse.duration))
      throw ValidationError(where + ".duration must be finite and > 0");
    if (!(pulse.t_start >= 0.0) || !(pulse.t_end() <= p.t_end))
      throw ValidationError(where + ": window " + window_str(pulse.t_start, pulse.duration) +
                            " lies outside [0, " + std::to_string(p.t_end) + "] s");
  }

  std::vector<GateSegment> sorted = p.gate_segments;
  std::sort(sorted.begin(), sorted.end(),
            [](const GateSegment& a, const GateSegment& b) { return a.t_start < b.t_start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& seg = sorted[i];
    const std::string where = "protocol.gate_segments[" + std::to_string(i) + "]";
    if (!std::isfinite(seg.v_g))
      throw ValidationError(where + ".v_g must be finite");
    if (!(seg.duration > 0.0) || !std::isfinite(seg.duration))
      throw ValidationError(where + ".duration must be finite and > 0");
    if (!(seg.t_start >= 0.0) || !(seg.t_end() <= p.t_end))
      throw ValidationError(where + ": window " + window_str(seg.t_start, seg.duration) +
                            " lies outside [0, " + std::to_string(p.t_end) + "] s");
    if (i > 0 && sorted[i - 1].t_end() > seg.t_start)
      throw ValidationError("protocol.gate_segments: windows " +
                            window_str(sorted[i - 1].t_start, sorted[i - 1].duration) +
                            " and " + window_str(seg.t_start, seg.duration) + " overlap");
  }
}

StimulusProtocol parse_protocol(const std::string& text,
                                const std::map<std::string, double>& bindings) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("protocol: not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("protocol: top level must be an object");
  check_keys(doc,
             {"channels", "pulses", "gate_segments", "default_v_g", "v_ds", "t_end",
              "settle_time", "description"},
             "protocol");

  StimulusProtocol p;

  if (!doc.contains("channels") || !doc.at("channels").is_array())
    throw SchemaError("protocol: field \"channels\" must be an array of integers");
  for (const auto& ch : doc.at("channels")) {
    if (!ch.is_number_integer())
      throw SchemaError("protocol.channels: entries must be integers (nm)");
    p.channels.push_back(ch.get<int>());
  }

  if (doc.contains("pulses")) {
    if (!doc.at("pulses").is_array())
      throw SchemaError("protocol: field \"pulses\" must be an array");
    std::size_t i = 0;
    for (const auto& jp : doc.at("pulses")) {
      const std::string where = "protocol.pulses[" + std::to_string(i) + "]";
      if (!jp.is_object()) throw SchemaError(where + " must be an object");
      check_keys(jp, {"channel_nm", "power_w", "power_param", "t_start", "duration"}, where);
      LightPulse pulse;
      pulse.channel_nm = get_channel(jp, "channel_nm", where);
      pulse.t_start = get_number(jp, "t_start", where);
      pulse.duration = get_number(jp, "duration", where);
      const bool has_power = jp.contains("power_w");
      const bool has_param = jp.contains("power_param");
      if (has_power == has_param)
        throw SchemaError(where + ": exactly one of \"power_w\" and \"power_param\" is required");
      if (has_power) {
        pulse.power_w = get_number(jp, "power_w", where);
      } else {
        if (!jp.at("power_param").is_string())
          throw SchemaError(where + ": field \"power_param\" must be a string");
        const auto name = jp.at("power_param").get<std::string>();
        const auto it = bindings.find(name);
        if (it == bindings.end())
          throw ValidationError(where + ": power parameter \"" + name +
                                "\" has no binding; pass --bind " + name + "=<watts>");
        pulse.power_w = it->second;
      }
      p.pulses.push_back(pulse);
      ++i;
    }
  }

  if (doc.contains("gate_segments")) {
    if (!doc.at("gate_segments").is_array())
      throw SchemaError("protocol: field \"gate_segments\" must be an array");
    std::size_t i = 0;
    for (const auto& jg : doc.at("gate_segments")) {
      const std::string where = "protocol.gate_segments[" + std::to_string(i) + "]";
      if (!jg.is_object()) throw SchemaError(where + " must be an object");
      check_keys(jg, {"v_g", "t_start", "duration"}, where);
      GateSegment seg;
      seg.v_g = get_number(jg, "v_g", where);
      seg.t_start = get_number(jg, "t_start", where);
      seg.duration = get_number(jg, "duration", where);
      p.gate_segments.push_back(seg);
      ++i;
    }
  }

  p.default_v_g = get_number(doc, "default_v_g", "protocol");
  p.v_ds = get_number(doc, "v_ds", "protocol");
  p.t_end = get_number(doc, "t_end", "protocol");
  p.settle_time = get_number(doc, "settle_time", "protocol");
  if (doc.contains("description")) {
    if (!doc.at("description").is_string())
      throw SchemaError("protocol: field \"description\" must be a string");
    p.description = doc.at("description").get<std::string>();
  }

  validate_protocol(p);
  return p;
}

std::string serialize_protocol(const StimulusProtocol& p) {
  ordered_json doc;
  doc["channels"] = p.channels;
  doc["pulses"] = ordered_json::array();
  for (const auto& pulse : p.pulses) {
    doc["pulses"].push_back({{"channel_nm", pulse.channel_nm},
                             {"power_w", pulse.power_w},
                             {"t_start", pulse.t_start},
                             {"duration", pulse.duration}});
  }
  doc["gate_segments"] = ordered_json::array();
  for (const auto& seg : p.gate_segments) {
    doc["gate_segments"].push_back(
        {{"v_g", seg.v_g}, {"t_start", seg.t_start}, {"duration", seg.duration}});
  }
  doc["default_v_g"] = p.default_v_g;
  doc["v_ds"] = p.v_ds;
  doc["t_end"] = p.t_end;
  doc["settle_time"] = p.settle_time;
  if (!p.description.empty()) doc["description"] = p.description;
  return doc.dump(2) + "\n";
}

double power_at(const StimulusProtocol& p, int channel_nm, double t) {
  if (std::find(p.channels.begin(), p.channels.end(), channel_nm) == p.channels.end())
    throw UnknownChannel("power_at: channel " + std::to_string(channel_nm) +
                         " nm is not declared in protocol.channels");
  double total = 0.0;
  for (const auto& pulse : p.pulses) {
    if (pulse.channel_nm == channel_nm && t >= pulse.t_start && t < pulse.t_end())
      total += pulse.power_w;
  }
  return total;
}

double gate_at(const StimulusProtocol& p, double t) {
  for (const auto& seg : p.gate_segments) {
    if (t >= seg.t_start && t < seg.t_end()) return seg.v_g;
  }
  return p.default_v_g;
}

std::vector<double> breakpoints(const StimulusProtocol& p) {
  std::set<double> edges{0.0, p.t_end};
  for (const auto& pulse : p.pulses) {
    edges.insert(pulse.t_start);
    edges.insert(pulse.t_end());
  }
  for (const auto& seg : p.gate_segments) {
    edges.insert(seg.t_start);
    edges.insert(seg.t_end());
  }
  return {edges.begin(), edges.end()};
}

}  // namespace optosyn
