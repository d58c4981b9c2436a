#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "support.hpp"

using namespace wavesim;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("wavesim_scenario_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_json(const fs::path& dir, const std::string& name, const json& j) {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string error_of(const json& j) {
  try {
    config_from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(WAVE_SIM_BIN) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

ScenarioConfig short_run(ScenarioKind kind, double duration = 20) {
  ScenarioConfig c;
  c.scenario = kind;
  c.duration_s = duration;
  return c;
}

}  // namespace

TEST(Config, MinimalFileFillsDefaults) {
  const auto c = config_from_json(json::parse(R"({"scenario":"single_hop","speed_kmh":32,"seed":1})"));
  EXPECT_EQ(c.scenario, ScenarioKind::single_hop);
  EXPECT_EQ(c.seed, 1u);
  EXPECT_DOUBLE_EQ(c.duration_s, 120);
  EXPECT_EQ(c.phy.difs.count(), 58);
  EXPECT_EQ(c.mac.cw_min, 15);
  EXPECT_EQ(c.mac.cw_max, 1023);
  EXPECT_EQ(c.mac.retry_limit, 7);
  EXPECT_FALSE(c.mac.rts_threshold);
  EXPECT_EQ(c.aodv.hello_interval, from_seconds(1));
  EXPECT_EQ(c.channel, 178);
}

TEST(Config, EmptyBlocksAreValid) {
  EXPECT_NO_THROW(config_from_json(
      json::parse(R"({"phy":{},"mac":{},"aodv":{},"voice":{},"h323":{},"ftp":{},"metrics":{},"geometry":{}})")));
}

TEST(Config, PowerCeilingCited) {
  const auto msg = error_of(json::parse(R"({"phy":{"tx_power_dbm":50}})"));
  EXPECT_NE(msg.find("44.8"), std::string::npos) << msg;
  EXPECT_NE(msg.find("phy.tx_power_dbm"), std::string::npos) << msg;
}

TEST(Config, DifsInvariantNamed) {
  const auto msg = error_of(json::parse(R"({"phy":{"difs_us":60}})"));
  EXPECT_NE(msg.find("phy.difs_us"), std::string::npos) << msg;
}

TEST(Config, UnknownKeyStrictOnly) {
  const auto j = json::parse(R"({"mac":{"cw_min":15,"turbo":true}})");
  EXPECT_NE(error_of(j).find("mac.turbo"), std::string::npos);
  EXPECT_NO_THROW(config_from_json(j, false));
}

TEST(Config, WrongTypeNamed) {
  EXPECT_NE(error_of(json::parse(R"({"aodv":{"hello_interval_s":"fast"}})")).find("aodv.hello_interval_s"),
            std::string::npos);
}

TEST(Config, BadValuesRejected) {
  EXPECT_NE(error_of(json::parse(R"({"scenario":"ring"})")).find("scenario"), std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"channel":177})")).find("channel"), std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"mac":{"cw_min":20}})")).find("cw_min"), std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"duration_s":0})")).find("duration_s"), std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"speed_kmh":-3})")).find("speed_kmh"), std::string::npos);
}

TEST(Config, MissingFileNamesPath) {
  try {
    load_config("/nonexistent/dir/s1.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/s1.json"), std::string::npos);
  }
}

TEST(Config, MalformedJsonNamesPath) {
  const auto dir = scratch("bad");
  const auto p = dir / "bad.json";
  std::ofstream(p) << "{\"scenario\": ";
  try {
    load_config(p);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(p.string()), std::string::npos);
  }
}

TEST(Config, CustomCrossReferences) {
  json j = json::parse(R"({"scenario":"custom",
    "nodes":[{"role":"mobile","position_m":0,"speed_kmh":32},{"role":"server","position_m":500}],
    "voice_flows":[{"caller":0,"callee":1,"start_s":1}]})");
  EXPECT_NO_THROW(config_from_json(j));
  j["voice_flows"][0]["callee"] = 5;
  EXPECT_NE(error_of(j).find("voice_flows[0]"), std::string::npos);
  j["voice_flows"][0]["callee"] = 1;
  j["nodes"].erase(1);
  EXPECT_NE(error_of(j).find("nodes"), std::string::npos);
  EXPECT_NE(error_of(json::parse(R"({"nodes":[{},{}]})")).find("custom"), std::string::npos);
}

TEST(Config, RoundTripDefaultsAndVariants) {
  std::vector<json> inputs{
      json::object(),
      json::parse(R"({"scenario":"multi_hop","seed":99,"mac":{"rts_threshold_octets":500,"ack_timeout_us":150}})"),
      json::parse(R"({"scenario":"node_to_node","speed_kmh":97,"aodv":{"hello_enabled":false},
                      "voice":{"include_packetization_delay":false},"ftp":{"inter_request_s":5}})"),
      json::parse(R"({"scenario":"custom","nodes":[{"position_m":-5.5,"speed_kmh":65,"direction":-1},
                      {"role":"server","position_m":700}],"ftp_flows":[{"client":0,"server":1,"start_s":2}],
                      "voice_flows":[{"caller":1,"callee":0,"start_s":0,"end_s":30}]})"),
  };
  for (const auto& in : inputs) {
    const auto a = config_from_json(in);
    const auto b = config_from_json(to_json(a));
    EXPECT_TRUE(a == b) << in.dump();
    EXPECT_EQ(to_json(a), to_json(b));
  }
}

TEST(Config, RoundTripRandomised) {
  RngStream r(17, "cfg");
  for (int i = 0; i < 200; ++i) {
    json j;
    j["seed"] = rng_uniform(r, 0, 1'000'000);
    j["speed_kmh"] = static_cast<double>(rng_uniform(r, 0, 200'000)) / 1000.0;
    j["duration_s"] = static_cast<double>(rng_uniform(r, 1, 10'000)) / 7.0;
    j["channel"] = 172 + 2 * rng_uniform(r, 0, 6);
    j["mac"]["cw_min"] = (1 << rng_uniform(r, 0, 5)) - 1;
    j["mac"]["retry_limit"] = rng_uniform(r, 0, 10);
    j["aodv"]["hello_interval_s"] = static_cast<double>(rng_uniform(r, 100, 5000)) / 1000.0;
    j["aodv"]["rreq_forward_delay_ms"] = static_cast<double>(rng_uniform(r, 0, 100'000)) / 1000.0;
    j["phy"]["comm_range_m"] = static_cast<double>(rng_uniform(r, 100, 5000));
    const auto a = config_from_json(j);
    EXPECT_TRUE(a == config_from_json(to_json(a))) << j.dump();
  }
}

TEST(Config, OverrideDottedKeys) {
  json j = json::object();
  apply_override(j, "aodv.hello_interval_s", "2.5");
  apply_override(j, "mac.bss_mode", "wbss");
  apply_override(j, "seed", "7");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.aodv.hello_interval, from_seconds(2.5));
  EXPECT_EQ(c.bss_mode, BssMode::wbss);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_THROW(apply_override(j, "a..b", "1"), ConfigError);
}

TEST(Build, SingleHop) {
  auto b = build_scenario(short_run(ScenarioKind::single_hop));
  EXPECT_EQ(b.net->size(), 2u);
  EXPECT_EQ(b.roles, (std::vector<NodeRole>{NodeRole::mobile, NodeRole::server}));
  EXPECT_EQ(b.net->apps().calls().size(), 1u);
  EXPECT_DOUBLE_EQ(b.net->mobility(0).speed_kmh(), 32);
  EXPECT_TRUE(b.net->mobility(1).is_fixed());
}

TEST(Build, MultiHopTargetsFarServer) {
  auto b = build_scenario(short_run(ScenarioKind::multi_hop));
  ASSERT_EQ(b.net->size(), 3u);
  const auto& call = b.net->apps().calls().begin()->second;
  EXPECT_EQ(call.caller, 0u);
  EXPECT_EQ(call.callee, 2u);
  const PhyParams phy;
  EXPECT_FALSE(in_range(b.net->position(0, SimTime{0}), b.net->position(2, SimTime{0}), phy));
  EXPECT_TRUE(in_range(b.net->position(1, SimTime{0}), b.net->position(2, SimTime{0}), phy));
}

TEST(Build, MultiHopGeometryRejected) {
  auto c = short_run(ScenarioKind::multi_hop);
  c.geometry.far_server_position_m = 2100;
  EXPECT_THROW(build_scenario(c), ConfigError);
  c.geometry.far_server_position_m = -500;
  EXPECT_THROW(build_scenario(c), ConfigError);
  c.geometry.far_server_position_m = 950;
  c.geometry.mobile_start_m = -1500;
  EXPECT_THROW(build_scenario(c), ConfigError);
}

TEST(Build, NodeToNode) {
  auto c = short_run(ScenarioKind::node_to_node);
  c.speed_kmh = 97;
  auto b = build_scenario(c);
  ASSERT_EQ(b.net->size(), 2u);
  EXPECT_DOUBLE_EQ(b.net->mobility(0).speed_kmh(), 32);
  EXPECT_DOUBLE_EQ(b.net->mobility(1).speed_kmh(), 97);
  EXPECT_EQ(b.net->mobility(0).direction(), b.net->mobility(1).direction());
  b.net->run_until(SimTime{1});
  EXPECT_EQ(b.net->apps().sessions().size(), 1u);
}

TEST(Build, Custom) {
  auto c = config_from_json(json::parse(R"({"scenario":"custom","duration_s":10,
    "nodes":[{"position_m":0},{"position_m":600},{"role":"server","position_m":1200}],
    "voice_flows":[{"caller":0,"callee":2,"start_s":1,"end_s":5}],
    "ftp_flows":[{"client":1,"server":2,"start_s":2}]})"));
  auto r = run_scenario(c);
  EXPECT_EQ(r.net().size(), 3u);
  EXPECT_EQ(r.net().apps().call(1).state, CallState::ended);
  EXPECT_GT(r.net().apps().call(1).frames_received, 150u);
  EXPECT_EQ(r.net().apps().sessions().begin()->second.state, FtpState::completed);
  EXPECT_TRUE(r.metrics().enabled(Series::ftp_response_s));
  EXPECT_TRUE(r.metrics().enabled(Series::voice_e2e_delay_s));
}

TEST(Run, ApplicableSeriesOnly) {
  auto r = run_scenario(short_run(ScenarioKind::single_hop));
  EXPECT_TRUE(r.metrics().enabled(Series::voice_e2e_delay_s));
  EXPECT_FALSE(r.metrics().enabled(Series::ftp_response_s));
  auto f = run_scenario(short_run(ScenarioKind::node_to_node));
  EXPECT_TRUE(f.metrics().enabled(Series::ftp_response_s));
  EXPECT_FALSE(f.metrics().enabled(Series::voice_e2e_delay_s));
}

TEST(Run, WbssModeCarriesTraffic) {
  auto c = short_run(ScenarioKind::multi_hop);
  c.bss_mode = BssMode::wbss;
  auto r = run_scenario(c);
  const Bssid bss(MacAddress::for_node(1).value());
  for (NodeId n = 0; n < 3; ++n) EXPECT_EQ(r.net().mac(n).mode(), StationMode::member_of(bss)) << n;
  EXPECT_GT(r.net().apps().call(1).frames_received, 800u);
}

TEST(Run, ConservationAndRateCeiling) {
  for (auto kind : {ScenarioKind::single_hop, ScenarioKind::multi_hop, ScenarioKind::node_to_node}) {
    auto r = run_scenario(short_run(kind, 40));
    EXPECT_TRUE(r.net().ledger().balanced());
    for (const auto& s : r.metrics().samples(Series::wlan_throughput_bps)) EXPECT_LE(s.value, 6e6);
  }
}

TEST(Output, SameSeedByteIdentical) {
  auto c = short_run(ScenarioKind::multi_hop, 30);
  const auto d1 = scratch("det1");
  const auto d2 = scratch("det2");
  const auto d3 = scratch("det3");
  write_outputs(run_scenario(c), d1);
  write_outputs(run_scenario(c), d2);
  c.seed = 2;
  write_outputs(run_scenario(c), d3);
  bool any_diff = false;
  for (const auto& e : fs::directory_iterator(d1)) {
    const auto name = e.path().filename();
    EXPECT_EQ(slurp(d1 / name), slurp(d2 / name)) << name;
    if (name != "run_info.json" && slurp(d1 / name) != slurp(d3 / name)) any_diff = true;
  }
  EXPECT_TRUE(any_diff);
  EXPECT_TRUE(fs::exists(d1 / "contacts.csv"));
  EXPECT_TRUE(fs::exists(d1 / "summary.csv"));
}

TEST(Output, RunInfoRecordsLedgerAndDefinitions) {
  const auto r = run_scenario(short_run(ScenarioKind::single_hop, 10));
  const json info = run_info(r);
  EXPECT_TRUE(info["ledger"]["balanced"].get<bool>());
  EXPECT_TRUE(info["definitions"].contains("wlan_delay_s"));
  EXPECT_EQ(info["voice_calls"].size(), 1u);
  EXPECT_EQ(config_from_json(info["config"]), r.config);
}

TEST(Sweep, SiblingDirectories) {
  const auto out = scratch("sweep");
  json base = json::parse(R"({"scenario":"single_hop","duration_s":5})");
  const auto runs = sweep(base, "speed_kmh", {"32", "65", "97"}, out, 3);
  ASSERT_EQ(runs.size(), 3u);
  for (const auto& r : runs) {
    EXPECT_TRUE(r.error.empty()) << r.error;
    EXPECT_TRUE(fs::exists(r.output_dir / "summary.csv"));
    const json info = json::parse(slurp(r.output_dir / "run_info.json"));
    EXPECT_EQ(std::to_string(info["config"]["speed_kmh"].get<int>()), r.value);
  }
  EXPECT_TRUE(fs::exists(out / "speed_kmh=65"));
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  const auto good = write_json(dir, "good.json", json::parse(R"({"scenario":"single_hop","duration_s":3})"));
  const auto bad = write_json(dir, "bad.json", json::parse(R"({"phy":{"tx_power_dbm":50}})"));
  EXPECT_EQ(run_cli("--version"), 0);
  EXPECT_EQ(run_cli("validate --config " + good.string()), 0);
  EXPECT_EQ(run_cli("validate --config " + bad.string()), 1);
  EXPECT_EQ(run_cli("validate --config " + (dir / "missing.json").string()), 1);
  EXPECT_EQ(run_cli("run --config " + good.string() + " --out " + (dir / "o").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "o" / "voice_e2e_delay_s.csv"));
  EXPECT_EQ(run_cli("frobnicate"), 1);
}

TEST(Cli, FlagsOverrideFileOverrideDefaults) {
  const auto dir = scratch("prec");
  const auto cfg = write_json(dir, "c.json", json::parse(R"({"scenario":"single_hop","duration_s":4,"seed":3,
                                                              "output_dir":")" + (dir / "file_out").string() + "\"}"));
  ASSERT_EQ(run_cli("run --config " + cfg.string()), 0);
  json info = json::parse(slurp(dir / "file_out" / "run_info.json"));
  EXPECT_EQ(info["config"]["seed"], 3);
  EXPECT_EQ(info["config"]["duration_s"], 4.0);
  EXPECT_EQ(info["config"]["speed_kmh"], 32.0);

  ASSERT_EQ(run_cli("run --config " + cfg.string() + " --seed 7 --duration 2 --out " + (dir / "flag_out").string()), 0);
  info = json::parse(slurp(dir / "flag_out" / "run_info.json"));
  EXPECT_EQ(info["config"]["seed"], 7);
  EXPECT_EQ(info["config"]["duration_s"], 2.0);
  EXPECT_FALSE(fs::exists(dir / "flag_out" / "file_out"));

  ASSERT_EQ(run_cli("run --config " + cfg.string() + " --seed 7 --duration 2 --out " + (dir / "again").string()), 0);
  EXPECT_EQ(slurp(dir / "flag_out" / "voice_e2e_delay_s.csv"), slurp(dir / "again" / "voice_e2e_delay_s.csv"));
}

TEST(Cli, SweepWritesSiblings) {
  const auto dir = scratch("cli_sweep");
  const auto cfg = write_json(dir, "s1.json", json::parse(R"({"scenario":"single_hop","duration_s":3})"));
  ASSERT_EQ(run_cli("sweep --config " + cfg.string() + " --param speed_kmh=32,65,97 --out " + (dir / "sw").string()), 0);
  for (const char* v : {"32", "65", "97"}) EXPECT_TRUE(fs::exists(dir / "sw" / (std::string("speed_kmh=") + v)));
  EXPECT_EQ(run_cli("sweep --config " + cfg.string() + " --param speed_kmh=-1"), 1);
}
