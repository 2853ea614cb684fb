#pragma once

// Append-only session log. Every operator input, command, fix and exception
// event becomes one LogRecord; inputs carry the simulation step they were
// applied at, which is enough to re-run the session deterministically.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "riverhelm/agent.hpp"
#include "riverhelm/codec.hpp"

namespace riverhelm::log {

using codec::json;

namespace kind {
inline constexpr const char* session = "session";
inline constexpr const char* robot_added = "robot_added";
inline constexpr const char* ui_event = "ui_event";
inline constexpr const char* acknowledge = "acknowledge";
inline constexpr const char* sim_control = "sim_control";
inline constexpr const char* command = "command";
inline constexpr const char* gps_fix = "gps_fix";
inline constexpr const char* exception_event = "exception_event";
inline constexpr const char* robot_snapshot = "robot_snapshot";
inline constexpr const char* checkpoint = "checkpoint";
}  // namespace kind

struct LogRecord {
  std::uint64_t seq = 0;
  double t = 0.0;
  std::uint64_t step = 0;
  std::string kind;
  json payload;

  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

json encode(const LogRecord& r);
LogRecord decode_record(const json& j);

/// Reads JSONL; throws codec::CodecError naming the offending line.
std::vector<LogRecord> read_log(std::istream& in);

/// Thread-safe record sink with an optional JSONL file mirror.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(const std::string& path);

  std::uint64_t append(std::string kind, double t, std::uint64_t step, json payload);

  /// Records with seq > after.
  std::vector<LogRecord> since(std::uint64_t after) const;
  std::vector<LogRecord> records() const { return since(0); }
  std::uint64_t last_seq() const;

  /// Blocks until a record with seq > after exists, the log is closed or the
  /// timeout expires. Returns true when new records are available.
  bool wait_beyond(std::uint64_t after, std::chrono::milliseconds timeout) const;
  void close();

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<LogRecord> records_;
  std::optional<std::ofstream> file_;
  bool closed_ = false;
};

/// Session observer writing everything to an EventLog.
class Recorder final : public agent::SessionObserver {
 public:
  Recorder(EventLog& log, const agent::Session& session) : log_(log), session_(session) {}

  void on_robot_added(const sim::RobotSpec& spec, double poll_interval) override;
  void on_ui_event(const agent::UIEvent& e, const agent::InterpreterResponse& r) override;
  void on_acknowledge(const std::string& robot_id, const std::string& operator_id,
                      const std::optional<guard::ExceptionEvent>& result) override;
  void on_sim_control(const std::string& robot_id, std::string_view control, bool value) override;
  void on_command(const std::string& robot_id, const sim::RoboticCommand& c, const sim::CommandReply& r,
                  agent::CommandOrigin origin) override;
  void on_gps_fix(const sim::GpsFix& f) override;
  void on_exception_event(const guard::ExceptionEvent& e) override;
  void on_snapshot(const agent::RobotSnapshot& s) override;

 private:
  void write(const char* kind, json payload);

  EventLog& log_;
  const agent::Session& session_;
};

/// Writes the header record that replay needs to rebuild the session.
void record_session(EventLog& log, const agent::Session& session, double sim_step);
/// Writes the current registry as a checkpoint.
void record_checkpoint(EventLog& log, const agent::Session& session);

struct ReplayResult {
  agent::Registry registry;                 // replayed registry at the last checkpoint (or end)
  std::optional<agent::Registry> checkpoint;  // last recorded checkpoint
  bool registry_matches = false;            // bit-for-bit equal to the checkpoint
  bool outputs_match = false;               // every recorded record reproduced in order
  std::size_t inputs = 0;
  std::string divergence;                   // first mismatch, empty when none
};

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Re-runs a logged session against `map`. Throws ReplayError when the log
/// has no session record or was recorded against a different map.
ReplayResult replay(std::shared_ptr<const mdl::MapDocument> map, const std::vector<LogRecord>& records);

}  // namespace riverhelm::log
