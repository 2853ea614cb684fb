// riverhelm command-line front end.
//
//   riverhelm serve --config gateway.conf
//   riverhelm validate map.mdl
//   riverhelm scenario map.mdl script.jsonl [--report out.json] [--log session.jsonl]
//   riverhelm replay map.mdl session.jsonl

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "riverhelm/event_log.hpp"
#include "riverhelm/gateway.hpp"
#include "riverhelm/http_server.hpp"
#include "riverhelm/mdl.hpp"
#include "riverhelm/scenario.hpp"

namespace {

using namespace riverhelm;

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Loads and validates a map, printing diagnostics. nullptr on failure.
std::shared_ptr<const mdl::MapDocument> load_map(const std::string& path) {
  const auto text = read_file(path);
  if (!text) {
    std::cerr << path << ": cannot read file\n";
    return nullptr;
  }
  try {
    auto file = mdl::parse_mdl(*text);
    return std::make_shared<const mdl::MapDocument>(std::move(file.document));
  } catch (const mdl::ParseError& e) {
    std::cerr << path << ":" << e.line() << ":" << e.col() << ": PARSE_ERROR " << e.message() << "\n";
  } catch (const mdl::ValidationError& e) {
    const auto& d = e.diagnostic();
    std::cerr << path << ":" << d.line << ":" << d.col << ": " << d.rule_id << " " << d.offending_id << ": "
              << d.message << "\n";
  }
  return nullptr;
}

int cmd_validate(const std::string& path) {
  const auto text = read_file(path);
  if (!text) {
    std::cerr << path << ": cannot read file\n";
    return kExitUsage;
  }
  try {
    const auto diags = mdl::check_mdl(*text);
    for (const auto& d : diags) {
      std::cout << path << ":" << d.line << ":" << d.col << ": " << d.rule_id << " " << d.offending_id << ": "
                << d.message << "\n";
    }
    if (!diags.empty()) return kExitFailed;
  } catch (const mdl::ParseError& e) {
    std::cout << path << ":" << e.line() << ":" << e.col() << ": PARSE_ERROR " << e.message() << "\n";
    return kExitFailed;
  }
  std::cout << path << ": ok\n";
  return kExitOk;
}

int cmd_scenario(const std::string& map_path, const std::string& script_path, const std::string& report_path,
                 const std::string& log_path) {
  const auto map = load_map(map_path);
  if (!map) return kExitUsage;
  std::ifstream script(script_path);
  if (!script) {
    std::cerr << script_path << ": cannot read file\n";
    return kExitUsage;
  }
  try {
    const auto steps = scenario::parse_script(script);
    std::unique_ptr<log::EventLog> log;
    if (!log_path.empty()) log = std::make_unique<log::EventLog>(log_path);
    const auto report = scenario::run(map, steps, log.get());
    for (const auto& c : report.checks) {
      std::cout << script_path << ":" << c.line << ": " << (c.ok ? "ok" : "FAILED") << " " << c.action << ": "
                << c.message << "\n";
    }
    std::cout << (report.passed ? "passed" : "failed") << " at t=" << report.final_time << " s, " << report.polls
              << " polls\n";
    if (!report_path.empty()) {
      std::ofstream out(report_path);
      if (!out) {
        std::cerr << report_path << ": cannot write report\n";
        return kExitUsage;
      }
      out << report.to_json().dump(2) << "\n";
    }
    return report.passed ? kExitOk : kExitFailed;
  } catch (const scenario::ScenarioError& e) {
    std::cerr << script_path << ": " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kExitUsage;
}

int cmd_replay(const std::string& map_path, const std::string& log_path) {
  const auto map = load_map(map_path);
  if (!map) return kExitUsage;
  std::ifstream in(log_path);
  if (!in) {
    std::cerr << log_path << ": cannot read file\n";
    return kExitUsage;
  }
  try {
    const auto result = log::replay(map, log::read_log(in));
    std::cout << "inputs replayed: " << result.inputs << "\n";
    std::cout << "outputs: " << (result.outputs_match ? "identical" : "diverged: " + result.divergence) << "\n";
    if (!result.checkpoint) {
      std::cout << "registry: no checkpoint in log\n";
      return kExitFailed;
    }
    std::cout << "registry: " << (result.registry_matches ? "identical" : "differs") << "\n";
    return result.registry_matches && result.outputs_match ? kExitOk : kExitFailed;
  } catch (const std::exception& e) {
    std::cerr << log_path << ": " << e.what() << "\n";
  }
  return kExitUsage;
}

int cmd_serve(const std::string& config_path) {
  gateway::ServeConfig config;
  try {
    config = gateway::load_serve_config(config_path);
  } catch (const gateway::ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return kExitUsage;
  }
  const auto map = load_map(config.map_path.string());
  if (!map) return kExitUsage;
  try {
    std::unique_ptr<log::EventLog> log;
    if (config.log_path) log = std::make_unique<log::EventLog>(config.log_path->string());
    gateway::Gateway gw(map, config, std::move(log));
    gateway::HttpServer http(gw);
    const int port = http.bind(config.host, config.port);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    http.start();
    std::cerr << "riverhelm: serving map '" << map->id << "' on http://" << config.host << ":" << port << "\n";
    while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    http.stop();
    gw.stop();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"River robot fleet gateway and tools"};
  app.require_subcommand(1);

  std::string config_path;
  auto* serve = app.add_subcommand("serve", "Run the HTTP gateway");
  serve->add_option("--config", config_path, "Gateway configuration file")->required()->check(CLI::ExistingFile);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check an MDL map and print diagnostics");
  validate->add_option("map", validate_path, "MDL file")->required();

  std::string map_path, script_path, report_path, log_path;
  auto* run = app.add_subcommand("scenario", "Run a scenario script headless");
  run->add_option("map", map_path, "MDL file")->required();
  run->add_option("script", script_path, "JSONL scenario script")->required();
  run->add_option("--report", report_path, "Write a JSON report");
  run->add_option("--log", log_path, "Write the session log (JSONL)");

  std::string replay_map, replay_log;
  auto* replay = app.add_subcommand("replay", "Re-run a session log and compare the final registry");
  replay->add_option("map", replay_map, "MDL file")->required();
  replay->add_option("log", replay_log, "Session log (JSONL)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  if (*serve) return cmd_serve(config_path);
  if (*validate) return cmd_validate(validate_path);
  if (*run) return cmd_scenario(map_path, script_path, report_path, log_path);
  if (*replay) return cmd_replay(replay_map, replay_log);
  return kExitUsage;
}
