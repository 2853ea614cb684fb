#pragma once

// Headless scenario scripts: JSONL, one timed action per line.
//
//   {"t": 0,   "action": "config", "poll_interval": 15, "sim_step": 1}
//   {"t": 0,   "action": "spawn", "robot": "r1", "at": "A"}
//   {"t": 5,   "action": "event", "robot": "r1",
//              "event": {"type": "DragRobot", "target": {"lat": 45.0, "lon": 7.0}}}
//   {"t": 5,   "action": "event", "robot": "r1", "event": {"type": "PlaceRobot"}, "expect": "Dispatched"}
//   {"t": 5,   "action": "await", "robot": "r1", "timeout": 600}      until its commands are done
//   {"t": 60,  "action": "inject_failure", "robot": "r1", "flag": "gps", "value": true}
//   {"t": 400, "action": "assert", "robot": "r1", "state": "Anchored", "near": {"landmark": "C", "radius": 5}}
//   {"t": 500, "action": "end"}
//
// Actions at time t run once the simulation clock reaches t (an await may
// already have carried the clock past it).

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "riverhelm/agent.hpp"
#include "riverhelm/codec.hpp"
#include "riverhelm/event_log.hpp"

namespace riverhelm::scenario {

using codec::json;

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Step {
  std::size_t line = 0;
  double t = 0.0;
  std::string action;
  json body;
};

/// Throws ScenarioError on malformed lines or decreasing timestamps.
std::vector<Step> parse_script(std::istream& in);

struct Check {
  std::size_t line = 0;
  std::string action;
  bool ok = true;
  std::string message;
};

struct Report {
  bool passed = true;
  double final_time = 0.0;
  std::uint64_t steps = 0;
  std::uint64_t polls = 0;
  std::vector<Check> checks;
  agent::Registry registry;

  json to_json() const;
};

/// Runs the script as fast as possible. When `log` is given the session is
/// recorded into it, ending with a checkpoint. Throws ScenarioError for
/// actions that cannot be carried out (unknown robot, bad fields).
Report run(std::shared_ptr<const mdl::MapDocument> map, const std::vector<Step>& steps,
           log::EventLog* log = nullptr);

}  // namespace riverhelm::scenario
