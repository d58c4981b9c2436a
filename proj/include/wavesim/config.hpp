#pragma once

// Declarative run description and its JSON form.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wavesim/aodv.hpp"
#include "wavesim/apps.hpp"
#include "wavesim/engine.hpp"
#include "wavesim/mac.hpp"
#include "wavesim/phy.hpp"

namespace wavesim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ScenarioKind : std::uint8_t { single_hop, multi_hop, node_to_node, custom };
enum class NodeRole : std::uint8_t { mobile, server };
enum class BssMode : std::uint8_t { wave, wbss };

inline const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::single_hop: return "single_hop";
    case ScenarioKind::multi_hop: return "multi_hop";
    case ScenarioKind::node_to_node: return "node_to_node";
    case ScenarioKind::custom: return "custom";
  }
  return "?";
}
inline const char* to_string(NodeRole r) { return r == NodeRole::mobile ? "mobile" : "server"; }
inline const char* to_string(BssMode m) { return m == BssMode::wave ? "wave" : "wbss"; }

struct NodeSpec {
  NodeId id = 0;
  NodeRole role = NodeRole::mobile;
  double position_m = 0.0;
  double speed_kmh = 0.0;
  int direction = 1;
};

struct VoiceFlowSpec {
  NodeId caller = 0;
  NodeId callee = 1;
  double start_s = 0.0;
  std::optional<double> end_s;
};

struct FtpFlowSpec {
  NodeId client = 0;
  NodeId server = 1;
  double start_s = 0.0;
};

struct GeometryConfig {
  double mobile_start_m = -1000.0;
  double server_position_m = 0.0;
  double far_server_position_m = 950.0;
  /// Start of node 2 relative to node 1 in the node-to-node scenario.
  double node2_offset_m = -200.0;
};

struct MetricsConfig {
  double throughput_window_s = 1.0;
  double rate_window_s = 1.0;
  double contact_probe_ms = 10.0;
};

struct ScenarioConfig {
  ScenarioKind scenario = ScenarioKind::single_hop;
  std::uint64_t seed = 1;
  double duration_s = 120.0;
  std::string output_dir = "wave-sim-out";
  double speed_kmh = 32.0;
  double node1_speed_kmh = 32.0;
  double traffic_start_s = 0.0;
  int channel = ChannelId::kControlChannel;
  GeometryConfig geometry;
  PhyParams phy;
  MacParams mac;
  BssMode bss_mode = BssMode::wave;
  std::string wbss_service = "voice";
  AodvParams aodv;
  VoiceParams voice;
  H323Params h323;
  FtpParams ftp;
  double ftp_inter_request_s = 10.0;
  MetricsConfig metrics;
  std::vector<NodeSpec> nodes;
  std::vector<VoiceFlowSpec> voice_flows;
  std::vector<FtpFlowSpec> ftp_flows;

  SimTime duration() const { return from_seconds(duration_s); }
};

namespace detail {

using nlohmann::json;

/// Walks one JSON object, remembering which keys were consumed.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("config: '" + where() + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = obj_.find(key);
    seen_.insert(key);
    if (it == obj_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: key '" + qualify(key) + "' has the wrong type (" + it->type_name() + ")");
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    auto it = obj_.find(key);
    seen_.insert(key);
    if (it == obj_.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  void finish(bool strict) const {
    if (!strict) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("config: unknown key '" + qualify(it.key()) + "'");
    }
  }

  std::string qualify(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& key, const std::string& constraint) {
  if (!ok) throw ConfigError("config: key '" + key + "' " + constraint);
}

inline SimTime us(std::int64_t v) { return SimTime{v}; }

}  // namespace detail

/// Checks cross-field invariants; throws ConfigError naming key and constraint.
inline void validate(const ScenarioConfig& c) {
  using detail::require;
  require(c.duration_s > 0 && std::isfinite(c.duration_s), "duration_s", "must be > 0");
  require(c.speed_kmh >= 0, "speed_kmh", "must be >= 0");
  require(c.node1_speed_kmh >= 0, "node1_speed_kmh", "must be >= 0");
  require(c.traffic_start_s >= 0, "traffic_start_s", "must be >= 0");
  require(ChannelId::is_legal(c.channel), "channel", "must be an even DSRC channel in 172..184");
  require(c.ftp_inter_request_s > 0, "ftp.inter_request_s", "must be > 0");
  require(c.metrics.throughput_window_s > 0, "metrics.throughput_window_s", "must be > 0");
  require(c.metrics.rate_window_s > 0, "metrics.rate_window_s", "must be > 0");
  require(c.metrics.contact_probe_ms > 0, "metrics.contact_probe_ms", "must be > 0");
  try {
    c.phy.validate();
    c.mac.validate();
    c.aodv.validate();
    c.voice.validate();
    c.h323.validate();
    c.ftp.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (c.scenario == ScenarioKind::custom) {
    require(c.nodes.size() >= 2, "nodes", "must list at least 2 nodes");
    for (std::size_t i = 0; i < c.nodes.size(); ++i) {
      const NodeSpec& n = c.nodes[i];
      const std::string k = "nodes[" + std::to_string(i) + "]";
      require(n.id == i, k + ".id", "must equal its index " + std::to_string(i));
      require(n.speed_kmh >= 0, k + ".speed_kmh", "must be >= 0");
      require(n.direction == 1 || n.direction == -1, k + ".direction", "must be +1 or -1");
      require(n.role == NodeRole::mobile || n.speed_kmh == 0, k + ".speed_kmh", "must be 0 for a server");
    }
    auto known = [&](NodeId id) { return id < c.nodes.size(); };
    for (std::size_t i = 0; i < c.voice_flows.size(); ++i) {
      const auto& f = c.voice_flows[i];
      const std::string k = "voice_flows[" + std::to_string(i) + "]";
      require(known(f.caller) && known(f.callee), k, "references an unknown node");
      require(f.caller != f.callee, k, "needs distinct caller and callee");
      require(f.start_s >= 0, k + ".start_s", "must be >= 0");
      require(!f.end_s || *f.end_s >= f.start_s, k + ".end_s", "must be >= start_s");
    }
    for (std::size_t i = 0; i < c.ftp_flows.size(); ++i) {
      const auto& f = c.ftp_flows[i];
      const std::string k = "ftp_flows[" + std::to_string(i) + "]";
      require(known(f.client) && known(f.server), k, "references an unknown node");
      require(f.client != f.server, k, "needs distinct client and server");
      require(f.start_s >= 0, k + ".start_s", "must be >= 0");
    }
  } else {
    require(c.nodes.empty() && c.voice_flows.empty() && c.ftp_flows.empty(), "nodes",
            "node and flow lists are only allowed with scenario \"custom\"");
  }
}

inline ScenarioConfig config_from_json(const nlohmann::json& j, bool strict = true) {
  using detail::ObjectReader;
  ScenarioConfig c;
  ObjectReader root(j, "");

  std::string scenario = to_string(c.scenario);
  root.get("scenario", scenario);
  if (scenario == "single_hop") c.scenario = ScenarioKind::single_hop;
  else if (scenario == "multi_hop") c.scenario = ScenarioKind::multi_hop;
  else if (scenario == "node_to_node") c.scenario = ScenarioKind::node_to_node;
  else if (scenario == "custom") c.scenario = ScenarioKind::custom;
  else throw ConfigError("config: key 'scenario' must be one of single_hop, multi_hop, node_to_node, custom");

  root.get("seed", c.seed);
  root.get("duration_s", c.duration_s);
  root.get("output_dir", c.output_dir);
  root.get("speed_kmh", c.speed_kmh);
  root.get("node1_speed_kmh", c.node1_speed_kmh);
  root.get("traffic_start_s", c.traffic_start_s);
  root.get("channel", c.channel);

  if (const auto* g = root.child("geometry")) {
    ObjectReader r(*g, "geometry");
    r.get("mobile_start_m", c.geometry.mobile_start_m);
    r.get("server_position_m", c.geometry.server_position_m);
    r.get("far_server_position_m", c.geometry.far_server_position_m);
    r.get("node2_offset_m", c.geometry.node2_offset_m);
    r.finish(strict);
  }
  if (const auto* p = root.child("phy")) {
    ObjectReader r(*p, "phy");
    std::int64_t slot = c.phy.slot.count(), sifs = c.phy.sifs.count(), difs = c.phy.difs.count(),
                 overhead = c.phy.phy_overhead.count();
    r.get("center_frequency_ghz", c.phy.center_frequency_ghz);
    r.get("channel_bandwidth_mhz", c.phy.channel_bandwidth_mhz);
    r.get("data_rate_bps", c.phy.data_rate_bps);
    r.get("modulation", c.phy.modulation);
    r.get("slot_us", slot);
    r.get("sifs_us", sifs);
    r.get("difs_us", difs);
    r.get("phy_overhead_us", overhead);
    r.get("tx_power_dbm", c.phy.tx_power_dbm);
    r.get("comm_range_m", c.phy.comm_range_m);
    c.phy.slot = detail::us(slot);
    c.phy.sifs = detail::us(sifs);
    c.phy.difs = detail::us(difs);
    c.phy.phy_overhead = detail::us(overhead);
    r.finish(strict);
  }
  if (const auto* m = root.child("mac")) {
    ObjectReader r(*m, "mac");
    r.get("cw_min", c.mac.cw_min);
    r.get("cw_max", c.mac.cw_max);
    r.get("retry_limit", c.mac.retry_limit);
    r.get_optional("rts_threshold_octets", c.mac.rts_threshold);
    r.get("ack_octets", c.mac.ack_octets);
    r.get("rts_octets", c.mac.rts_octets);
    r.get("cts_octets", c.mac.cts_octets);
    std::optional<std::int64_t> ack_timeout;
    if (c.mac.ack_timeout) ack_timeout = c.mac.ack_timeout->count();
    r.get_optional("ack_timeout_us", ack_timeout);
    c.mac.ack_timeout = ack_timeout ? std::optional<SimTime>(detail::us(*ack_timeout)) : std::nullopt;
    std::string mode = to_string(c.bss_mode);
    r.get("bss_mode", mode);
    if (mode == "wave") c.bss_mode = BssMode::wave;
    else if (mode == "wbss") c.bss_mode = BssMode::wbss;
    else throw ConfigError("config: key 'mac.bss_mode' must be \"wave\" or \"wbss\"");
    r.get("wbss_service", c.wbss_service);
    r.finish(strict);
  }
  if (const auto* a = root.child("aodv")) {
    ObjectReader r(*a, "aodv");
    double hello = to_seconds(c.aodv.hello_interval), life = to_seconds(c.aodv.active_route_lifetime),
           disc = to_seconds(c.aodv.discovery_timeout), fwd = to_seconds(c.aodv.rreq_forward_delay) * 1e3,
           jit = to_seconds(c.aodv.broadcast_jitter) * 1e3;
    r.get("hello_enabled", c.aodv.hello_enabled);
    r.get("hello_interval_s", hello);
    r.get("allowed_hello_loss", c.aodv.allowed_hello_loss);
    r.get("active_route_lifetime_s", life);
    r.get("rreq_retries", c.aodv.rreq_retries);
    r.get("discovery_timeout_s", disc);
    r.get("rreq_forward_delay_ms", fwd);
    r.get("broadcast_jitter_ms", jit);
    r.get("net_diameter", c.aodv.net_diameter);
    r.get("rreq_octets", c.aodv.rreq_octets);
    r.get("rrep_octets", c.aodv.rrep_octets);
    r.get("rerr_octets", c.aodv.rerr_octets);
    r.get("hello_octets", c.aodv.hello_octets);
    r.get("reroute_limit", c.aodv.reroute_limit);
    c.aodv.hello_interval = from_seconds(hello);
    c.aodv.active_route_lifetime = from_seconds(life);
    c.aodv.discovery_timeout = from_seconds(disc);
    c.aodv.rreq_forward_delay = from_millis(fwd);
    c.aodv.broadcast_jitter = from_millis(jit);
    r.finish(strict);
  }
  if (const auto* v = root.child("voice")) {
    ObjectReader r(*v, "voice");
    double interval = to_seconds(c.voice.frame_interval) * 1e3;
    r.get("codec_rate_bps", c.voice.codec_rate_bps);
    r.get("frame_interval_ms", interval);
    r.get("include_packetization_delay", c.voice.include_packetization_delay);
    c.voice.frame_interval = from_millis(interval);
    r.finish(strict);
  }
  if (const auto* h = root.child("h323")) {
    ObjectReader r(*h, "h323");
    double timeout = to_seconds(c.h323.response_timeout);
    r.get("message_octets", c.h323.message_octets);
    r.get("response_timeout_s", timeout);
    c.h323.response_timeout = from_seconds(timeout);
    r.finish(strict);
  }
  if (const auto* f = root.child("ftp")) {
    ObjectReader r(*f, "ftp");
    double timeout = to_seconds(c.ftp.session_timeout);
    r.get("file_size_octets", c.ftp.file_size_octets);
    r.get("segment_octets", c.ftp.segment_octets);
    r.get("request_octets", c.ftp.request_octets);
    r.get("session_timeout_s", timeout);
    r.get("inter_request_s", c.ftp_inter_request_s);
    c.ftp.session_timeout = from_seconds(timeout);
    r.finish(strict);
  }
  if (const auto* m = root.child("metrics")) {
    ObjectReader r(*m, "metrics");
    r.get("throughput_window_s", c.metrics.throughput_window_s);
    r.get("rate_window_s", c.metrics.rate_window_s);
    r.get("contact_probe_ms", c.metrics.contact_probe_ms);
    r.finish(strict);
  }
  if (const auto* n = root.child("nodes")) {
    if (!n->is_array()) throw ConfigError("config: key 'nodes' must be an array");
    for (std::size_t i = 0; i < n->size(); ++i) {
      ObjectReader r((*n)[i], "nodes[" + std::to_string(i) + "]");
      NodeSpec s;
      s.id = static_cast<NodeId>(i);
      std::string role = "mobile";
      r.get("id", s.id);
      r.get("role", role);
      r.get("position_m", s.position_m);
      r.get("speed_kmh", s.speed_kmh);
      r.get("direction", s.direction);
      if (role == "mobile") s.role = NodeRole::mobile;
      else if (role == "server") s.role = NodeRole::server;
      else throw ConfigError("config: key '" + r.qualify("role") + "' must be \"mobile\" or \"server\"");
      r.finish(strict);
      c.nodes.push_back(s);
    }
  }
  if (const auto* v = root.child("voice_flows")) {
    if (!v->is_array()) throw ConfigError("config: key 'voice_flows' must be an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      ObjectReader r((*v)[i], "voice_flows[" + std::to_string(i) + "]");
      VoiceFlowSpec s;
      r.get("caller", s.caller);
      r.get("callee", s.callee);
      r.get("start_s", s.start_s);
      r.get_optional("end_s", s.end_s);
      r.finish(strict);
      c.voice_flows.push_back(s);
    }
  }
  if (const auto* f = root.child("ftp_flows")) {
    if (!f->is_array()) throw ConfigError("config: key 'ftp_flows' must be an array");
    for (std::size_t i = 0; i < f->size(); ++i) {
      ObjectReader r((*f)[i], "ftp_flows[" + std::to_string(i) + "]");
      FtpFlowSpec s;
      r.get("client", s.client);
      r.get("server", s.server);
      r.get("start_s", s.start_s);
      r.finish(strict);
      c.ftp_flows.push_back(s);
    }
  }
  root.finish(strict);
  validate(c);
  return c;
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
  using nlohmann::json;
  auto opt = [](const auto& o) -> json { return o ? json(*o) : json(nullptr); };
  json j;
  j["scenario"] = to_string(c.scenario);
  j["seed"] = c.seed;
  j["duration_s"] = c.duration_s;
  j["output_dir"] = c.output_dir;
  j["speed_kmh"] = c.speed_kmh;
  j["node1_speed_kmh"] = c.node1_speed_kmh;
  j["traffic_start_s"] = c.traffic_start_s;
  j["channel"] = c.channel;
  j["geometry"] = {{"mobile_start_m", c.geometry.mobile_start_m},
                   {"server_position_m", c.geometry.server_position_m},
                   {"far_server_position_m", c.geometry.far_server_position_m},
                   {"node2_offset_m", c.geometry.node2_offset_m}};
  j["phy"] = {{"center_frequency_ghz", c.phy.center_frequency_ghz},
              {"channel_bandwidth_mhz", c.phy.channel_bandwidth_mhz},
              {"data_rate_bps", c.phy.data_rate_bps},
              {"modulation", c.phy.modulation},
              {"slot_us", c.phy.slot.count()},
              {"sifs_us", c.phy.sifs.count()},
              {"difs_us", c.phy.difs.count()},
              {"phy_overhead_us", c.phy.phy_overhead.count()},
              {"tx_power_dbm", c.phy.tx_power_dbm},
              {"comm_range_m", c.phy.comm_range_m}};
  std::optional<std::int64_t> ack_timeout;
  if (c.mac.ack_timeout) ack_timeout = c.mac.ack_timeout->count();
  j["mac"] = {{"cw_min", c.mac.cw_min},
              {"cw_max", c.mac.cw_max},
              {"retry_limit", c.mac.retry_limit},
              {"rts_threshold_octets", opt(c.mac.rts_threshold)},
              {"ack_octets", c.mac.ack_octets},
              {"rts_octets", c.mac.rts_octets},
              {"cts_octets", c.mac.cts_octets},
              {"ack_timeout_us", opt(ack_timeout)},
              {"bss_mode", to_string(c.bss_mode)},
              {"wbss_service", c.wbss_service}};
  j["aodv"] = {{"hello_enabled", c.aodv.hello_enabled},
               {"hello_interval_s", to_seconds(c.aodv.hello_interval)},
               {"allowed_hello_loss", c.aodv.allowed_hello_loss},
               {"active_route_lifetime_s", to_seconds(c.aodv.active_route_lifetime)},
               {"rreq_retries", c.aodv.rreq_retries},
               {"discovery_timeout_s", to_seconds(c.aodv.discovery_timeout)},
               {"rreq_forward_delay_ms", to_seconds(c.aodv.rreq_forward_delay) * 1e3},
               {"broadcast_jitter_ms", to_seconds(c.aodv.broadcast_jitter) * 1e3},
               {"net_diameter", c.aodv.net_diameter},
               {"rreq_octets", c.aodv.rreq_octets},
               {"rrep_octets", c.aodv.rrep_octets},
               {"rerr_octets", c.aodv.rerr_octets},
               {"hello_octets", c.aodv.hello_octets},
               {"reroute_limit", c.aodv.reroute_limit}};
  j["voice"] = {{"codec_rate_bps", c.voice.codec_rate_bps},
                {"frame_interval_ms", to_seconds(c.voice.frame_interval) * 1e3},
                {"include_packetization_delay", c.voice.include_packetization_delay}};
  j["h323"] = {{"message_octets", c.h323.message_octets},
               {"response_timeout_s", to_seconds(c.h323.response_timeout)}};
  j["ftp"] = {{"file_size_octets", c.ftp.file_size_octets},
              {"segment_octets", c.ftp.segment_octets},
              {"request_octets", c.ftp.request_octets},
              {"session_timeout_s", to_seconds(c.ftp.session_timeout)},
              {"inter_request_s", c.ftp_inter_request_s}};
  j["metrics"] = {{"throughput_window_s", c.metrics.throughput_window_s},
                  {"rate_window_s", c.metrics.rate_window_s},
                  {"contact_probe_ms", c.metrics.contact_probe_ms}};
  if (c.scenario == ScenarioKind::custom) {
    json nodes = json::array();
    for (const auto& n : c.nodes)
      nodes.push_back({{"id", n.id}, {"role", to_string(n.role)}, {"position_m", n.position_m},
                       {"speed_kmh", n.speed_kmh}, {"direction", n.direction}});
    json voice = json::array();
    for (const auto& f : c.voice_flows)
      voice.push_back({{"caller", f.caller}, {"callee", f.callee}, {"start_s", f.start_s}, {"end_s", opt(f.end_s)}});
    json ftp = json::array();
    for (const auto& f : c.ftp_flows)
      ftp.push_back({{"client", f.client}, {"server", f.server}, {"start_s", f.start_s}});
    j["nodes"] = nodes;
    j["voice_flows"] = voice;
    j["ftp_flows"] = ftp;
  }
  return j;
}

inline bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) { return to_json(a) == to_json(b); }

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline ScenarioConfig load_config(const std::filesystem::path& path, bool strict = true) {
  return config_from_json(read_json_file(path), strict);
}

/// Sets a dotted key (`aodv.hello_interval_s`) to a value given as text; the
/// text is read as JSON when it parses, otherwise as a string.
inline void apply_override(nlohmann::json& j, const std::string& dotted_key, const std::string& text) {
  if (dotted_key.empty()) throw ConfigError("config: empty override key");
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  nlohmann::json* node = &j;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t dot = dotted_key.find('.', pos);
    const std::string part = dotted_key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty()) throw ConfigError("config: malformed override key '" + dotted_key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    nlohmann::json& next = (*node)[part];
    if (next.is_null()) next = nlohmann::json::object();
    if (!next.is_object()) throw ConfigError("config: override key '" + dotted_key + "' crosses a non-object");
    node = &next;
    pos = dot + 1;
  }
}

}  // namespace wavesim
