#pragma once

// JSON wire format shared by the HTTP API, the event log and scenario scripts.

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "riverhelm/agent.hpp"

namespace riverhelm::codec {

using nlohmann::json;

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json encode(const GeoCoordinate& p);
json encode(const Vec2& v);
json encode(const sim::FailureFlags& f);
json encode(const sim::RoboticCommand& c);
json encode(const sim::Telemetry& t);
json encode(const sim::CommandReply& r);
json encode(const sim::GpsFix& f);
json encode(const sim::RobotState& s);
json encode(const sim::RobotSpec& s);
json encode(const sim::SimConfig& c);
json encode(guard::CauseSet causes);
json encode(const guard::ExceptionStatus& s);
json encode(const guard::ExceptionEvent& e);
json encode(const guard::GuardConfig& c);
json encode(const agent::UIEvent& e);
json encode(const agent::InterpreterResponse& r);
json encode(const agent::AgentConfig& c);
json encode(const agent::RobotSnapshot& s);
json encode(const agent::Registry& r);

// Decoders throw CodecError on malformed input.
GeoCoordinate decode_geo(const json& j);
Vec2 decode_vec2(const json& j);
sim::FailureFlags decode_failures(const json& j);
sim::RoboticCommand decode_command(const json& j);
sim::Telemetry decode_telemetry(const json& j);
sim::CommandReply decode_reply(const json& j);
sim::GpsFix decode_fix(const json& j);
sim::RobotState decode_robot_state(const json& j);
sim::RobotSpec decode_robot_spec(const json& j);
sim::SimConfig decode_sim_config(const json& j);
guard::CauseSet decode_causes(const json& j);
guard::ExceptionStatus decode_status(const json& j);
guard::ExceptionEvent decode_exception_event(const json& j);
guard::GuardConfig decode_guard_config(const json& j);
agent::UIEvent decode_ui_event(const json& j);
agent::InterpreterResponse decode_response(const json& j);
agent::AgentConfig decode_agent_config(const json& j);
agent::RobotSnapshot decode_snapshot(const json& j);
agent::Registry decode_registry(const json& j);

/// Parses text as JSON, mapping syntax errors to CodecError.
json parse(std::string_view text);

}  // namespace riverhelm::codec
