#pragma once

// Scenario builders, single runs, output files and parameter sweeps.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "wavesim/config.hpp"
#include "wavesim/metrics.hpp"
#include "wavesim/network.hpp"

namespace wavesim {

struct BuiltScenario {
  std::unique_ptr<Network> net;
  std::vector<NodeRole> roles;
  std::vector<std::string> labels;
};

inline NetworkOptions network_options(const ScenarioConfig& c) {
  NetworkOptions o;
  o.seed = c.seed;
  o.channel = ChannelId(c.channel);
  o.phy = c.phy;
  o.mac = c.mac;
  o.aodv = c.aodv;
  o.voice = c.voice;
  o.h323 = c.h323;
  o.ftp = c.ftp;
  o.throughput_window = from_seconds(c.metrics.throughput_window_s);
  o.rate_window = from_seconds(c.metrics.rate_window_s);
  o.contact_probe = from_millis(c.metrics.contact_probe_ms);
  return o;
}

/// Builds the topology and schedules its traffic; throws ConfigError when the
/// geometry cannot produce the requested scenario.
inline BuiltScenario build_scenario(const ScenarioConfig& c) {
  validate(c);
  BuiltScenario b;
  b.net = std::make_unique<Network>(network_options(c));
  Network& net = *b.net;
  const SimTime start = from_seconds(c.traffic_start_s);
  const SimTime end = c.duration();
  auto add = [&](MobilityProfile m, NodeRole role, std::string label) {
    const NodeId id = net.add_node(m);
    b.roles.push_back(role);
    b.labels.push_back(std::move(label));
    return id;
  };
  bool voice = false;
  bool ftp = false;

  switch (c.scenario) {
    case ScenarioKind::single_hop: {
      const NodeId mobile = add(MobilityProfile(c.geometry.mobile_start_m, c.speed_kmh), NodeRole::mobile, "mobile");
      const NodeId server = add(MobilityProfile::fixed(c.geometry.server_position_m), NodeRole::server, "server");
      if (start <= end) net.apps().start_call(mobile, server, start);
      voice = true;
      break;
    }
    case ScenarioKind::multi_hop: {
      const auto& g = c.geometry;
      if (!in_range(g.server_position_m, g.far_server_position_m, c.phy))
        throw ConfigError("config: key 'geometry.far_server_position_m' places the far server out of range of the "
                          "near server, so no relay path exists");
      if (in_range(g.mobile_start_m, g.far_server_position_m, c.phy))
        throw ConfigError("config: key 'geometry.far_server_position_m' puts the far server within direct range of "
                          "the mobile start, so the call would not be multi-hop");
      if (!in_range(g.mobile_start_m, g.server_position_m, c.phy))
        throw ConfigError("config: key 'geometry.mobile_start_m' must be within range of the near server");
      const NodeId mobile = add(MobilityProfile(g.mobile_start_m, c.speed_kmh), NodeRole::mobile, "mobile");
      add(MobilityProfile::fixed(g.server_position_m), NodeRole::server, "near_server");
      const NodeId far = add(MobilityProfile::fixed(g.far_server_position_m), NodeRole::server, "far_server");
      if (start <= end) net.apps().start_call(mobile, far, start);
      voice = true;
      break;
    }
    case ScenarioKind::node_to_node: {
      const NodeId n1 = add(MobilityProfile(0.0, c.node1_speed_kmh), NodeRole::mobile, "node1");
      const NodeId n2 = add(MobilityProfile(c.geometry.node2_offset_m, c.speed_kmh), NodeRole::mobile, "node2");
      net.apps().start_ftp_series(n1, n2, start, from_seconds(c.ftp_inter_request_s), end);
      ftp = true;
      break;
    }
    case ScenarioKind::custom: {
      for (const auto& n : c.nodes) {
        add(MobilityProfile(n.position_m, n.speed_kmh, n.direction), n.role,
            std::string(to_string(n.role)) + std::to_string(n.id));
      }
      for (const auto& f : c.voice_flows) {
        std::optional<SimTime> flow_end;
        if (f.end_s) flow_end = from_seconds(*f.end_s);
        net.apps().start_call(f.caller, f.callee, from_seconds(f.start_s), flow_end);
        voice = true;
      }
      for (const auto& f : c.ftp_flows) {
        net.apps().start_ftp(f.client, f.server, from_seconds(f.start_s));
        ftp = true;
      }
      break;
    }
  }

  if (c.bss_mode == BssMode::wbss) {
    const auto it = std::find(b.roles.begin(), b.roles.end(), NodeRole::server);
    const NodeId provider = it == b.roles.end() ? 1 : static_cast<NodeId>(it - b.roles.begin());
    const std::vector<std::uint8_t> service(c.wbss_service.begin(), c.wbss_service.end());
    for (NodeId id = 0; id < net.size(); ++id)
      if (id != provider) net.mac(id).set_join_policy(JoinPolicy{service});
    WbssAdvertisement ad;
    ad.bssid = Bssid(MacAddress::for_node(provider).value());
    ad.service = service;
    ad.channel = ChannelId(c.channel);
    net.mac(provider).wbss_advertise(ad);
  }

  MetricsRecorder& m = net.metrics();
  for (Series s : {Series::wlan_throughput_bps, Series::wlan_delay_s, Series::aodv_discovery_time_s,
                   Series::aodv_sent_pps, Series::aodv_received_pps, Series::pkts_tx_pps, Series::pkts_rx_pps})
    m.enable(s);
  if (voice) {
    m.enable(Series::h323_setup_time_s);
    m.enable(Series::voice_e2e_delay_s);
  }
  if (ftp) m.enable(Series::ftp_response_s);
  return b;
}

struct RunResult {
  ScenarioConfig config;
  BuiltScenario scenario;
  RunSummary summary;

  Network& net() { return *scenario.net; }
  const Network& net() const { return *scenario.net; }
  const MetricsRecorder& metrics() const { return scenario.net->metrics(); }
};

inline RunResult run_scenario(const ScenarioConfig& c) {
  RunResult r;
  r.config = c;
  r.scenario = build_scenario(c);
  r.summary = r.scenario.net->run_until(c.duration());
  r.scenario.net->finalize(c.duration());
  return r;
}

inline nlohmann::json run_info(const RunResult& r) {
  using nlohmann::json;
  const Network& net = r.net();
  json j;
  j["config"] = to_json(r.config);
  j["events_processed"] = r.summary.events_processed;
  j["final_clock_us"] = r.summary.final_clock.count();
  const FrameLedger l = net.ledger();
  j["ledger"] = {{"generated", l.generated}, {"delivered", l.delivered}, {"collided", l.collided},
                 {"filtered", l.filtered}, {"retry_exhausted", l.retry_exhausted}, {"in_flight", l.in_flight},
                 {"balanced", l.balanced()}};
  json nodes = json::array();
  for (NodeId id = 0; id < net.size(); ++id) {
    const auto& cc = net.control(id);
    nodes.push_back({{"id", id}, {"label", r.scenario.labels[id]}, {"role", to_string(r.scenario.roles[id])},
                     {"aodv_sent", cc.sent}, {"aodv_received", cc.received},
                     {"final_position_m", net.position(id, r.summary.final_clock)}});
  }
  j["nodes"] = nodes;
  json calls = json::array();
  for (const auto& [id, c] : net.apps().calls()) {
    calls.push_back({{"id", id}, {"caller", c.caller}, {"callee", c.callee}, {"state", to_string(c.state)},
                     {"abort_reason", c.abort_reason},
                     {"setup_time_s", c.setup_time ? json(to_seconds(*c.setup_time)) : json(nullptr)},
                     {"frames_sent", c.frames_sent}, {"frames_received", c.frames_received},
                     {"frames_lost", c.frames_lost}});
  }
  j["voice_calls"] = calls;
  json sessions = json::array();
  for (const auto& [id, s] : net.apps().sessions()) {
    const auto rt = s.response_time();
    sessions.push_back({{"id", id}, {"client", s.client}, {"server", s.server}, {"state", to_string(s.state)},
                        {"failure_reason", s.failure_reason}, {"file_size", s.file_size},
                        {"delivered_octets", s.delivered_octets}, {"lost_octets", s.lost_octets()},
                        {"request_time_us", s.request_time.count()},
                        {"response_time_s", rt ? json(to_seconds(*rt)) : json(nullptr)}});
  }
  j["ftp_sessions"] = sessions;
  json contacts = json::array();
  for (const auto& c : net.contacts()) {
    contacts.push_back({{"a", c.a}, {"b", c.b}, {"enter_us", c.enter.count()},
                        {"leave_us", c.leave ? json(c.leave->count()) : json(nullptr)}});
  }
  j["contacts"] = contacts;
  j["drops"] = net.drops();
  j["discoveries_failed"] = net.discoveries_failed();
  j["definitions"] = {
      {"wlan_delay_s", "MAC head-of-queue to ACK received (unicast) or airtime end (broadcast); frames that "
                       "exhaust retries are not sampled"},
      {"wlan_throughput_bps", "payload bits of MSDUs acknowledged or cleanly received, per window"},
      {"voice_e2e_delay_s", "reception at the callee minus the capture time of the frame's first sample"},
      {"aodv_sent_pps", "AODV control packets transmitted by all nodes, per window"},
      {"aodv_received_pps", "AODV control packets received by all nodes, per window"},
      {"pkts_tx_pps", "MAC data frame transmissions including retries, per window"},
      {"pkts_rx_pps", "MAC data frames delivered upward, per window"},
      {"ledger.collided", "broadcasts no station received cleanly"}};
  return j;
}

/// CSV files, `run_info.json` and `contacts.csv` under `dir`.
inline void write_outputs(const RunResult& r, const std::filesystem::path& dir) {
  export_csv(r.metrics(), dir);
  {
    std::ofstream out(dir / "run_info.json", std::ios::binary | std::ios::trunc);
    if (!out) throw ExportError("cannot write " + (dir / "run_info.json").string());
    out << run_info(r).dump(2) << '\n';
  }
  std::ofstream out(dir / "contacts.csv", std::ios::binary | std::ios::trunc);
  if (!out) throw ExportError("cannot write " + (dir / "contacts.csv").string());
  out << "a,b,enter_us,leave_us\n";
  for (const auto& c : r.net().contacts())
    out << c.a << ',' << c.b << ',' << c.enter.count() << ',' << (c.leave ? std::to_string(c.leave->count()) : "")
        << '\n';
}

inline std::string summary_table(const RunResult& r) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %-5s %8s %14s %14s %14s\n", "series", "unit", "count", "mean", "min",
                "max");
  os << line;
  for (const auto& si : kSeriesCatalog) {
    if (!r.metrics().enabled(si.id)) continue;
    const Aggregate& a = r.metrics().aggregate(si.id);
    if (a.count == 0) {
      std::snprintf(line, sizeof line, "%-24s %-5s %8llu %14s %14s %14s\n", std::string(si.name).c_str(),
                    std::string(si.unit).c_str(), 0ULL, "-", "-", "-");
    } else {
      std::snprintf(line, sizeof line, "%-24s %-5s %8llu %14.6g %14.6g %14.6g\n", std::string(si.name).c_str(),
                    std::string(si.unit).c_str(), static_cast<unsigned long long>(a.count), a.mean(), a.min, a.max);
    }
    os << line;
  }
  const FrameLedger l = r.net().ledger();
  os << "ledger: generated=" << l.generated << " delivered=" << l.delivered << " collided=" << l.collided
     << " filtered=" << l.filtered << " retry_exhausted=" << l.retry_exhausted << " in_flight=" << l.in_flight
     << (l.balanced() ? " (balanced)" : " (UNBALANCED)") << '\n';
  return os.str();
}

struct SweepRun {
  std::string value;
  std::filesystem::path output_dir;
  std::string error;
  std::string table;
};

/// One run per value of `key`, written to `<base_out>/<key>=<value>`; runs
/// execute on up to `jobs` threads, each with its own network.
inline std::vector<SweepRun> sweep(const nlohmann::json& base, const std::string& key,
                                   const std::vector<std::string>& values, const std::filesystem::path& base_out,
                                   unsigned jobs = 0) {
  std::vector<ScenarioConfig> configs;
  std::vector<SweepRun> out;
  for (const auto& v : values) {
    nlohmann::json j = base;
    apply_override(j, key, v);
    configs.push_back(config_from_json(j));
    out.push_back({v, base_out / (key + "=" + v), "", ""});
  }
  if (jobs == 0) jobs = std::max(1U, std::thread::hardware_concurrency());
  std::size_t next = 0;
  while (next < configs.size()) {
    std::vector<std::future<void>> batch;
    for (unsigned k = 0; k < jobs && next < configs.size(); ++k, ++next) {
      batch.push_back(std::async(std::launch::async, [&, i = next] {
        try {
          RunResult r = run_scenario(configs[i]);
          write_outputs(r, out[i].output_dir);
          out[i].table = summary_table(r);
        } catch (const std::exception& e) {
          out[i].error = e.what();
        }
      }));
    }
    for (auto& f : batch) f.get();
  }
  return out;
}

}  // namespace wavesim
