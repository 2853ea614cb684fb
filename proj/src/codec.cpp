#include "riverhelm/codec.hpp"

namespace riverhelm::codec {

namespace {

const json& member(const json& j, const char* key) {
  if (!j.is_object()) throw CodecError(std::string("expected an object holding '") + key + "'");
  const auto it = j.find(key);
  if (it == j.end()) throw CodecError(std::string("missing field '") + key + "'");
  return *it;
}

template <typename T>
T get(const json& j, const char* key) {
  const auto& v = member(j, key);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw CodecError(std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return get<T>(j, key);
}

double number(const json& j, const char* key) {
  const auto& v = member(j, key);
  if (!v.is_number()) throw CodecError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

double number_or(const json& j, const char* key, double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return number(j, key);
}

std::optional<std::string> opt_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get<std::string>(j, key);
}

json opt(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

}  // namespace

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw CodecError(e.what());
  }
}

json encode(const GeoCoordinate& p) { return {{"lat", p.lat}, {"lon", p.lon}, {"depth", p.depth}}; }

GeoCoordinate decode_geo(const json& j) {
  GeoCoordinate p{number(j, "lat"), number(j, "lon"), number_or(j, "depth", 0.0)};
  if (!is_valid(p)) throw CodecError("coordinate out of range");
  return p;
}

json encode(const Vec2& v) { return {{"east", v.east}, {"north", v.north}}; }

Vec2 decode_vec2(const json& j) { return {number(j, "east"), number(j, "north")}; }

json encode(const sim::FailureFlags& f) {
  return {{"communication", f.communication}, {"gps", f.gps}, {"sensor_power", f.sensor_power},
          {"propulsion", f.propulsion}};
}

sim::FailureFlags decode_failures(const json& j) {
  sim::FailureFlags f;
  f.communication = get<bool>(j, "communication");
  f.gps = get<bool>(j, "gps");
  f.sensor_power = get<bool>(j, "sensor_power");
  f.propulsion = get<bool>(j, "propulsion");
  return f;
}

json encode(const sim::RoboticCommand& c) {
  json j{{"type", sim::command_name(c)}};
  if (const auto* m = std::get_if<sim::cmd::MoveTo>(&c)) {
    j["target"] = encode(m->target);
    j["speed"] = m->speed;
  } else if (const auto* p = std::get_if<sim::cmd::Park>(&c)) {
    j["terminal"] = p->terminal;
  }
  return j;
}

sim::RoboticCommand decode_command(const json& j) {
  const auto type = get<std::string>(j, "type");
  if (type == "GetCoordinates") return sim::cmd::GetCoordinates{};
  if (type == "MoveTo") return sim::cmd::MoveTo{decode_geo(member(j, "target")), number(j, "speed")};
  if (type == "Anchor") return sim::cmd::Anchor{};
  if (type == "ReleaseAnchor") return sim::cmd::ReleaseAnchor{};
  if (type == "Park") return sim::cmd::Park{get<std::string>(j, "terminal")};
  if (type == "Halt") return sim::cmd::Halt{};
  throw CodecError("unknown command type '" + type + "'");
}

json encode(const sim::Telemetry& t) {
  return {{"navigating", t.navigating}, {"anchored", t.anchored}, {"parked_at", opt(t.parked_at)},
          {"fuel", t.fuel},           {"velocity", encode(t.velocity)}, {"failures", encode(t.failures)}};
}

sim::Telemetry decode_telemetry(const json& j) {
  sim::Telemetry t;
  t.navigating = get<bool>(j, "navigating");
  t.anchored = get<bool>(j, "anchored");
  t.parked_at = opt_string(j, "parked_at");
  t.fuel = number(j, "fuel");
  t.velocity = decode_vec2(member(j, "velocity"));
  t.failures = decode_failures(member(j, "failures"));
  return t;
}

json encode(const sim::GpsFix& f) {
  return {{"robot", f.robot_id}, {"position", encode(f.position)}, {"timestamp", f.timestamp}};
}

sim::GpsFix decode_fix(const json& j) {
  return {get<std::string>(j, "robot"), decode_geo(member(j, "position")), number(j, "timestamp")};
}

json encode(const sim::CommandReply& r) {
  return {{"status", sim::to_string(r.status)},
          {"fix", r.fix ? encode(*r.fix) : json(nullptr)},
          {"telemetry", r.telemetry ? encode(*r.telemetry) : json(nullptr)}};
}

sim::CommandReply decode_reply(const json& j) {
  sim::CommandReply r;
  const auto status = get<std::string>(j, "status");
  bool found = false;
  for (auto s : {sim::CommandStatus::ok, sim::CommandStatus::comm_timeout, sim::CommandStatus::gps_unavailable,
                 sim::CommandStatus::anchor_refused, sim::CommandStatus::not_at_terminal,
                 sim::CommandStatus::immobilized, sim::CommandStatus::invalid_command}) {
    if (sim::to_string(s) == status) {
      r.status = s;
      found = true;
    }
  }
  if (!found) throw CodecError("unknown command status '" + status + "'");
  if (j.contains("fix") && !j["fix"].is_null()) r.fix = decode_fix(j["fix"]);
  if (j.contains("telemetry") && !j["telemetry"].is_null()) r.telemetry = decode_telemetry(j["telemetry"]);
  return r;
}

json encode(const sim::RobotState& s) {
  return {{"id", s.id},
          {"position", encode(s.position)},
          {"velocity", encode(s.velocity)},
          {"anchored", s.anchored},
          {"parked_at", opt(s.parked_at)},
          {"fuel", s.fuel},
          {"failures", encode(s.failures)},
          {"last_fix_time", s.last_fix_time ? json(*s.last_fix_time) : json(nullptr)}};
}

sim::RobotState decode_robot_state(const json& j) {
  sim::RobotState s;
  s.id = get<std::string>(j, "id");
  s.position = decode_geo(member(j, "position"));
  s.velocity = decode_vec2(member(j, "velocity"));
  s.anchored = get<bool>(j, "anchored");
  s.parked_at = opt_string(j, "parked_at");
  s.fuel = number(j, "fuel");
  s.failures = decode_failures(member(j, "failures"));
  if (j.contains("last_fix_time") && !j["last_fix_time"].is_null()) s.last_fix_time = number(j, "last_fix_time");
  return s;
}

json encode(const sim::RobotSpec& s) {
  return {{"id", s.id}, {"position", encode(s.position)}, {"fuel", s.fuel},
          {"anchor_operational", s.anchor_operational}};
}

sim::RobotSpec decode_robot_spec(const json& j) {
  sim::RobotSpec s;
  s.id = get<std::string>(j, "id");
  s.position = decode_geo(member(j, "position"));
  s.fuel = number_or(j, "fuel", 1.0);
  s.anchor_operational = get_or<bool>(j, "anchor_operational", true);
  return s;
}

json encode(const sim::SimConfig& c) {
  return {{"arrival_radius_m", c.arrival_radius_m},
          {"max_speed_mps", c.max_speed_mps},
          {"fuel_burn_per_m", c.fuel_burn_per_m},
          {"max_anchor_depth_m", c.max_anchor_depth_m},
          {"corridor_m", c.corridor_m},
          {"gps_noise_m", c.gps_noise_m},
          {"seed", c.seed}};
}

sim::SimConfig decode_sim_config(const json& j) {
  sim::SimConfig c;
  c.arrival_radius_m = number_or(j, "arrival_radius_m", c.arrival_radius_m);
  c.max_speed_mps = number_or(j, "max_speed_mps", c.max_speed_mps);
  c.fuel_burn_per_m = number_or(j, "fuel_burn_per_m", c.fuel_burn_per_m);
  c.max_anchor_depth_m = number_or(j, "max_anchor_depth_m", c.max_anchor_depth_m);
  c.corridor_m = number_or(j, "corridor_m", c.corridor_m);
  c.gps_noise_m = number_or(j, "gps_noise_m", c.gps_noise_m);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  return c;
}

json encode(guard::CauseSet causes) {
  json arr = json::array();
  for (auto c : causes.to_vector()) arr.push_back(guard::to_string(c));
  return arr;
}

guard::CauseSet decode_causes(const json& j) {
  if (!j.is_array()) throw CodecError("cause set must be an array");
  guard::CauseSet out;
  for (const auto& c : j) {
    if (!c.is_string()) throw CodecError("cause must be a string");
    const auto cause = guard::cause_from_string(c.get<std::string>());
    if (!cause) throw CodecError("unknown cause '" + c.get<std::string>() + "'");
    out.insert(*cause);
  }
  return out;
}

namespace {

guard::State decode_state(const json& j, const char* key) {
  const auto s = get<std::string>(j, key);
  const auto state = guard::state_from_string(s);
  if (!state) throw CodecError("unknown exception state '" + s + "'");
  return *state;
}

}  // namespace

json encode(const guard::ExceptionStatus& s) {
  return {{"state", guard::to_string(s.state)},
          {"causes", encode(s.causes)},
          {"episode", encode(s.episode)},
          {"since", s.since}};
}

guard::ExceptionStatus decode_status(const json& j) {
  return {decode_state(j, "state"), decode_causes(member(j, "causes")), decode_causes(member(j, "episode")),
          number(j, "since")};
}

json encode(const guard::ExceptionEvent& e) {
  json j{{"robot", e.robot_id},
         {"from", guard::to_string(e.from)},
         {"to", guard::to_string(e.to)},
         {"causes", encode(e.causes)},
         {"episode", encode(e.episode)},
         {"timestamp", e.timestamp},
         {"action", guard::to_string(e.action)}};
  if (!e.operator_id.empty()) j["operator"] = e.operator_id;
  return j;
}

guard::ExceptionEvent decode_exception_event(const json& j) {
  guard::ExceptionEvent e;
  e.robot_id = get<std::string>(j, "robot");
  e.from = decode_state(j, "from");
  e.to = decode_state(j, "to");
  e.causes = decode_causes(member(j, "causes"));
  e.episode = decode_causes(member(j, "episode"));
  e.timestamp = number(j, "timestamp");
  const auto action = get<std::string>(j, "action");
  if (action == "none") {
    e.action = guard::Action::none;
  } else if (action == "anchor") {
    e.action = guard::Action::anchor;
  } else if (action == "auto_park") {
    e.action = guard::Action::auto_park;
  } else {
    throw CodecError("unknown guard action '" + action + "'");
  }
  e.operator_id = get_or<std::string>(j, "operator", "");
  return e;
}

json encode(const guard::GuardConfig& c) {
  return {{"comm_timeout", c.comm_timeout}, {"anchor_timeout", c.anchor_timeout}, {"park_timeout", c.park_timeout}};
}

guard::GuardConfig decode_guard_config(const json& j) {
  guard::GuardConfig c;
  c.comm_timeout = number_or(j, "comm_timeout", c.comm_timeout);
  c.anchor_timeout = number_or(j, "anchor_timeout", c.anchor_timeout);
  c.park_timeout = number_or(j, "park_timeout", c.park_timeout);
  return c;
}

json encode(const agent::UIEvent& e) {
  json j{{"type", agent::event_name(e)}, {"robot", agent::robot_of(e)}};
  if (const auto* d = std::get_if<agent::ev::DragRobot>(&e)) j["target"] = encode(d->target);
  if (const auto* m = std::get_if<agent::ev::MenuSelect>(&e)) j["item"] = agent::to_string(m->item);
  return j;
}

agent::UIEvent decode_ui_event(const json& j) {
  const auto type = get<std::string>(j, "type");
  auto robot = get<std::string>(j, "robot");
  if (type == "ClickOnRobot") return agent::ev::ClickOnRobot{std::move(robot)};
  if (type == "DragRobot") return agent::ev::DragRobot{std::move(robot), decode_geo(member(j, "target"))};
  if (type == "PlaceRobot") return agent::ev::PlaceRobot{std::move(robot)};
  if (type == "MenuSelect") {
    const auto name = get<std::string>(j, "item");
    const auto item = agent::menu_item_from_string(name);
    if (!item) throw CodecError("unknown menu item '" + name + "'");
    return agent::ev::MenuSelect{std::move(robot), *item};
  }
  throw CodecError("unknown event type '" + type + "'");
}

json encode(const agent::InterpreterResponse& r) {
  struct Visitor {
    json operator()(const agent::resp::ContextMenu& m) const {
      json items = json::array();
      for (auto i : m.items) items.push_back(agent::to_string(i));
      return {{"type", "ContextMenu"},
              {"items", items},
              {"scale", m.scale_denominator ? json(*m.scale_denominator) : json(nullptr)}};
    }
    json operator()(const agent::resp::DragStarted& d) const {
      return {{"type", "DragStarted"}, {"target", encode(d.target)}};
    }
    json operator()(const agent::resp::Dispatched& d) const {
      json cmds = json::array();
      for (const auto& c : d.commands) cmds.push_back(encode(c));
      return {{"type", "Dispatched"}, {"commands", cmds}};
    }
    json operator()(const agent::resp::Rejected& r) const {
      return {{"type", "Rejected"}, {"reason", agent::to_string(r.reason)}, {"message", r.message}};
    }
  };
  return std::visit(Visitor{}, r);
}

agent::InterpreterResponse decode_response(const json& j) {
  const auto type = get<std::string>(j, "type");
  if (type == "ContextMenu") {
    agent::resp::ContextMenu m;
    for (const auto& i : member(j, "items")) {
      const auto item = i.is_string() ? agent::menu_item_from_string(i.get<std::string>()) : std::nullopt;
      if (!item) throw CodecError("bad menu item");
      m.items.push_back(*item);
    }
    if (j.contains("scale") && !j["scale"].is_null()) m.scale_denominator = get<std::uint64_t>(j, "scale");
    return m;
  }
  if (type == "DragStarted") return agent::resp::DragStarted{decode_geo(member(j, "target"))};
  if (type == "Dispatched") {
    agent::resp::Dispatched d;
    for (const auto& c : member(j, "commands")) d.commands.push_back(decode_command(c));
    return d;
  }
  if (type == "Rejected") {
    const auto reason = get<std::string>(j, "reason");
    for (auto r : {agent::RejectReason::unknown_robot, agent::RejectReason::invalid_event_sequence,
                   agent::RejectReason::off_map, agent::RejectReason::robot_faulted, agent::RejectReason::no_route,
                   agent::RejectReason::no_candidate, agent::RejectReason::not_acknowledgeable}) {
      if (agent::to_string(r) == reason) return agent::resp::Rejected{r, get<std::string>(j, "message")};
    }
    throw CodecError("unknown reject reason '" + reason + "'");
  }
  throw CodecError("unknown response type '" + type + "'");
}

json encode(const agent::AgentConfig& c) {
  json overrides = json::object();
  for (const auto& [id, v] : c.poller.overrides) overrides[id] = v;
  return {{"poll_interval", c.poller.interval},
          {"poll_overrides", overrides},
          {"guard", encode(c.guard)},
          {"snap_radius_m", c.snap_radius_m},
          {"move_speed_mps", c.move_speed_mps}};
}

agent::AgentConfig decode_agent_config(const json& j) {
  agent::AgentConfig c;
  c.poller.interval = number_or(j, "poll_interval", c.poller.interval);
  if (j.contains("poll_overrides")) {
    const auto& o = j["poll_overrides"];
    if (!o.is_object()) throw CodecError("poll_overrides must be an object");
    for (const auto& [id, v] : o.items()) {
      if (!v.is_number()) throw CodecError("poll override must be a number");
      c.poller.overrides[id] = v.get<double>();
    }
  }
  if (j.contains("guard")) c.guard = decode_guard_config(j["guard"]);
  c.snap_radius_m = number_or(j, "snap_radius_m", c.snap_radius_m);
  c.move_speed_mps = number_or(j, "move_speed_mps", c.move_speed_mps);
  return c;
}

json encode(const agent::RobotSnapshot& s) {
  json j = encode(s.state);
  j["exception"] = encode(s.exception);
  j["navigating"] = s.navigating;
  j["pending_commands"] = s.pending_commands;
  return j;
}

agent::RobotSnapshot decode_snapshot(const json& j) {
  agent::RobotSnapshot s;
  s.state = decode_robot_state(j);
  s.exception = decode_status(member(j, "exception"));
  s.navigating = get<bool>(j, "navigating");
  s.pending_commands = get<std::size_t>(j, "pending_commands");
  return s;
}

json encode(const agent::Registry& r) {
  json arr = json::array();
  for (const auto& [id, s] : r) arr.push_back(encode(s));
  return arr;
}

agent::Registry decode_registry(const json& j) {
  if (!j.is_array()) throw CodecError("registry must be an array");
  agent::Registry r;
  for (const auto& s : j) {
    auto snap = decode_snapshot(s);
    auto id = snap.state.id;
    r.emplace(std::move(id), std::move(snap));
  }
  return r;
}

}  // namespace riverhelm::codec
