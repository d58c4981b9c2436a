#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wavesim/wavesim.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

nlohmann::json load_with_flags(const std::string& path, std::optional<std::uint64_t> seed,
                               std::optional<double> duration, const std::string& out) {
  nlohmann::json j = wavesim::read_json_file(path);
  if (!j.is_object()) throw wavesim::ConfigError("config: top level of '" + path + "' must be an object");
  if (seed) j["seed"] = *seed;
  if (duration) j["duration_s"] = *duration;
  if (!out.empty()) j["output_dir"] = out;
  return j;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, std::optional<double> duration,
            const std::string& out) {
  wavesim::ScenarioConfig cfg;
  try {
    cfg = wavesim::config_from_json(load_with_flags(path, seed, duration, out));
    wavesim::build_scenario(cfg);
  } catch (const wavesim::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    const auto t0 = std::chrono::steady_clock::now();
    wavesim::RunResult r = wavesim::run_scenario(cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    wavesim::write_outputs(r, cfg.output_dir);
    std::cout << "scenario " << wavesim::to_string(cfg.scenario) << ", seed " << cfg.seed << ", " << cfg.duration_s
              << " s simulated, " << r.summary.events_processed << " events, " << wall << " s wall\n";
    std::cout << wavesim::summary_table(r);
    std::cout << "output: " << cfg.output_dir << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}

int cmd_sweep(const std::string& path, const std::string& param, const std::string& out, unsigned jobs) {
  nlohmann::json base;
  std::string key;
  std::vector<std::string> values;
  try {
    const auto eq = param.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == param.size())
      throw wavesim::ConfigError("sweep: --param must look like key=v1,v2,...");
    key = param.substr(0, eq);
    values = split(param.substr(eq + 1), ',');
    base = load_with_flags(path, std::nullopt, std::nullopt, "");
    for (const auto& v : values) {
      nlohmann::json j = base;
      wavesim::apply_override(j, key, v);
      wavesim::build_scenario(wavesim::config_from_json(j));
    }
  } catch (const wavesim::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  const std::string base_out = out.empty() ? base.value("output_dir", std::string("wave-sim-out")) : out;
  int status = kOk;
  try {
    for (const auto& run : wavesim::sweep(base, key, values, base_out, jobs)) {
      std::cout << "== " << key << '=' << run.value << " -> " << run.output_dir.string() << '\n';
      if (!run.error.empty()) {
        std::cerr << "error: " << key << '=' << run.value << ": " << run.error << '\n';
        status = kRuntimeError;
        continue;
      }
      std::cout << run.table;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return status;
}

int cmd_validate(const std::string& path) {
  try {
    const wavesim::ScenarioConfig cfg = wavesim::load_config(path);
    wavesim::build_scenario(cfg);
    std::cout << path << ": ok (" << wavesim::to_string(cfg.scenario) << ")\n";
  } catch (const wavesim::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"802.11p/WAVE highway network simulator"};
  app.set_version_flag("--version", std::string("wave-sim ") + wavesim::kVersion);
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string out;
  std::string param;
  unsigned jobs = 0;

  auto* run = app.add_subcommand("run", "run one scenario and write CSV output");
  run->add_option("--config", config, "scenario JSON file")->required();
  run->add_option("--seed", seed, "override the seed");
  run->add_option("--duration", duration, "override the duration in seconds");
  run->add_option("--out", out, "override the output directory");

  auto* sw = app.add_subcommand("sweep", "run one scenario per parameter value");
  sw->add_option("--config", config, "scenario JSON file")->required();
  sw->add_option("--param", param, "key=v1,v2,... (dotted keys reach nested blocks)")->required();
  sw->add_option("--out", out, "parent directory for the per-value outputs");
  sw->add_option("--jobs", jobs, "concurrent runs (0 = hardware threads)");

  auto* val = app.add_subcommand("validate", "check a config without running it");
  val->add_option("--config", config, "scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*run) return cmd_run(config, seed, duration, out);
  if (*sw) return cmd_sweep(config, param, out, jobs);
  return cmd_validate(config);
}
