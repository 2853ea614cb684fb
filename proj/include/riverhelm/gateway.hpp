#pragma once

// Gateway runtime: owns the session on a dedicated simulation thread. Other
// threads either read published registry snapshots or submit tasks that run
// on the simulation thread between steps.

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <variant>
#include <vector>

#include "riverhelm/agent.hpp"
#include "riverhelm/event_log.hpp"

namespace riverhelm::gateway {

struct RobotEntry {
  std::string id;
  std::variant<std::string, GeoCoordinate> at;  // landmark id or coordinate
  double fuel = 1.0;
};

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path map_path;
  std::optional<std::filesystem::path> log_path;
  sim::SimConfig sim;
  agent::AgentConfig agent;
  double sim_step = 1.0;
  double pacing = 1.0;  // wall seconds per simulated second; 0 advances only on request
  bool simulation_controls = false;
  std::vector<RobotEntry> robots;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& message)
      : std::runtime_error(line == 0 ? message : "line " + std::to_string(line) + ": " + message) {}
};

/// key = value lines, '#' comments. Relative paths resolve against base_dir.
ServeConfig parse_serve_config(std::istream& in, const std::filesystem::path& base_dir);
ServeConfig load_serve_config(const std::filesystem::path& path);

class Gateway {
 public:
  /// Registers the configured robots and starts the simulation thread.
  Gateway(std::shared_ptr<const mdl::MapDocument> map, const ServeConfig& config,
          std::unique_ptr<log::EventLog> log = nullptr);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Runs f(session) on the simulation thread and returns its result;
  /// exceptions thrown by f propagate to the caller.
  template <typename F>
  auto submit(F&& f) -> std::invoke_result_t<F, agent::Session&> {
    using R = std::invoke_result_t<F, agent::Session&>;
    auto task = std::make_shared<std::packaged_task<R()>>(
        [this, fn = std::forward<F>(f)]() mutable { return fn(*session_); });
    auto result = task->get_future();
    enqueue([task] { (*task)(); });
    return result.get();
  }

  std::shared_ptr<const agent::Registry> registry() const { return session_->store().get(); }
  log::EventLog& log() { return *log_; }
  const mdl::MapDocument& map() const { return *map_; }
  const ServeConfig& config() const { return config_; }
  bool manual_clock() const { return config_.pacing <= 0.0; }

  /// Advances a manual clock by whole simulation steps covering `seconds`.
  double advance(double seconds);

  /// Writes a checkpoint, stops the simulation thread and closes the log.
  void stop();

 private:
  void enqueue(std::function<void()> task);
  void run();

  std::shared_ptr<const mdl::MapDocument> map_;
  ServeConfig config_;
  std::unique_ptr<log::EventLog> log_;
  std::unique_ptr<agent::Session> session_;
  std::unique_ptr<log::Recorder> recorder_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> tasks_;
  bool stopping_ = false;
  std::thread thread_;
};

}  // namespace riverhelm::gateway
