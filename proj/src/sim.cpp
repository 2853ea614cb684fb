#include "riverhelm/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace riverhelm::sim {

std::string_view to_string(FailureFlag flag) {
  switch (flag) {
    case FailureFlag::communication: return "communication";
    case FailureFlag::gps: return "gps";
    case FailureFlag::sensor_power: return "sensor_power";
    case FailureFlag::propulsion: return "propulsion";
  }
  return "communication";
}

std::optional<FailureFlag> failure_flag_from_string(std::string_view s) {
  for (auto f : {FailureFlag::communication, FailureFlag::gps, FailureFlag::sensor_power, FailureFlag::propulsion}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

bool FailureFlags::get(FailureFlag f) const {
  switch (f) {
    case FailureFlag::communication: return communication;
    case FailureFlag::gps: return gps;
    case FailureFlag::sensor_power: return sensor_power;
    case FailureFlag::propulsion: return propulsion;
  }
  return false;
}

void FailureFlags::set(FailureFlag f, bool value) {
  switch (f) {
    case FailureFlag::communication: communication = value; break;
    case FailureFlag::gps: gps = value; break;
    case FailureFlag::sensor_power: sensor_power = value; break;
    case FailureFlag::propulsion: propulsion = value; break;
  }
}

std::string_view command_name(const RoboticCommand& c) {
  struct Visitor {
    std::string_view operator()(const cmd::GetCoordinates&) const { return "GetCoordinates"; }
    std::string_view operator()(const cmd::MoveTo&) const { return "MoveTo"; }
    std::string_view operator()(const cmd::Anchor&) const { return "Anchor"; }
    std::string_view operator()(const cmd::ReleaseAnchor&) const { return "ReleaseAnchor"; }
    std::string_view operator()(const cmd::Park&) const { return "Park"; }
    std::string_view operator()(const cmd::Halt&) const { return "Halt"; }
  };
  return std::visit(Visitor{}, c);
}

std::string_view to_string(CommandStatus s) {
  switch (s) {
    case CommandStatus::ok: return "Ok";
    case CommandStatus::comm_timeout: return "CommTimeout";
    case CommandStatus::gps_unavailable: return "GpsUnavailable";
    case CommandStatus::anchor_refused: return "AnchorRefused";
    case CommandStatus::not_at_terminal: return "NotAtTerminal";
    case CommandStatus::immobilized: return "Immobilized";
    case CommandStatus::invalid_command: return "InvalidCommand";
  }
  return "Ok";
}

World::World(std::shared_ptr<const mdl::MapDocument> map, SimConfig config)
    : map_(std::move(map)), config_(config), rng_(config.seed) {
  if (!map_) throw std::invalid_argument("world requires a map");
}

void World::add_robot(const RobotSpec& spec) {
  if (spec.id.empty()) throw std::invalid_argument("robot id must not be empty");
  if (!is_valid(spec.position)) throw std::invalid_argument("robot '" + spec.id + "' has an invalid position");
  if (!(spec.fuel >= 0.0 && spec.fuel <= 1.0)) throw std::invalid_argument("fuel must lie in [0, 1]");
  Robot r;
  r.state.id = spec.id;
  r.state.position = spec.position;
  r.state.fuel = spec.fuel;
  r.anchor_operational = spec.anchor_operational;
  if (!robots_.emplace(spec.id, std::move(r)).second) {
    throw std::invalid_argument("duplicate robot id '" + spec.id + "'");
  }
}

World::Robot& World::find(std::string_view robot_id) {
  auto it = robots_.find(robot_id);
  if (it == robots_.end()) throw UnknownRobot(robot_id);
  return it->second;
}

const World::Robot& World::find(std::string_view robot_id) const {
  auto it = robots_.find(robot_id);
  if (it == robots_.end()) throw UnknownRobot(robot_id);
  return it->second;
}

const RobotState& World::robot(std::string_view robot_id) const { return find(robot_id).state; }

bool World::has_robot(std::string_view robot_id) const { return robots_.find(robot_id) != robots_.end(); }

std::vector<std::string> World::robot_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, r] : robots_) ids.push_back(id);
  return ids;
}

Vec2 World::ambient_flow(const GeoCoordinate& p) const {
  const mdl::FlowSegment* nearest = nullptr;
  mdl::Projection best;
  for (const auto& f : map_->flows) {
    const auto proj = mdl::project_onto_flow(*map_, f.id, p);
    if (nearest == nullptr || proj.distance_m < best.distance_m ||
        (proj.distance_m == best.distance_m && f.id < nearest->id)) {
      nearest = &f;
      best = proj;
    }
  }
  if (nearest == nullptr || best.distance_m > config_.corridor_m) return {};
  return mdl::flow_at(*map_, nearest->id, best.t);
}

void World::step(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("step requires dt > 0");
  for (auto& [id, r] : robots_) {
    auto& s = r.state;
    if (s.anchored || s.parked_at) {
      s.velocity = {};
      continue;
    }
    Vec2 commanded;
    if (r.guidance) {
      const double dist = planar_distance_m(s.position, r.guidance->target);
      if (dist <= config_.arrival_radius_m) {
        r.guidance.reset();
      } else if (!s.failures.propulsion && s.fuel > 0.0) {
        const Vec2 delta = LocalFrame(s.position).to_local(r.guidance->target);
        const double speed = std::min(r.guidance->speed, dist / dt);
        commanded = (speed / norm(delta)) * delta;
        const double burn = config_.fuel_burn_per_m * speed * dt;
        if (burn > s.fuel) {
          commanded = (s.fuel / burn) * commanded;
          s.fuel = 0.0;
        } else {
          s.fuel -= burn;
        }
      }
    }
    s.velocity = commanded + ambient_flow(s.position);
    s.position = displace(s.position, dt * s.velocity);
    s.position.lat = std::clamp(s.position.lat, -90.0, 90.0);
    if (s.position.lon > 180.0) s.position.lon -= 360.0;
    if (s.position.lon < -180.0) s.position.lon += 360.0;
    if (r.guidance && planar_distance_m(s.position, r.guidance->target) <= config_.arrival_radius_m) {
      r.guidance.reset();
    }
  }
  time_ += dt;
}

Telemetry World::telemetry_of(const Robot& r) const {
  return {r.guidance.has_value(), r.state.anchored, r.state.parked_at, r.state.fuel, r.state.velocity,
          r.state.failures};
}

std::optional<Telemetry> World::telemetry(std::string_view robot_id) const {
  const auto& r = find(robot_id);
  if (r.state.failures.communication) return std::nullopt;
  return telemetry_of(r);
}

GeoCoordinate World::noisy(const GeoCoordinate& p) {
  if (config_.gps_noise_m <= 0.0) return p;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double radius = config_.gps_noise_m * std::sqrt(unit(rng_));
  const double angle = 2.0 * std::numbers::pi * unit(rng_);
  return displace(p, {radius * std::cos(angle), radius * std::sin(angle)});
}

CommandReply World::execute_command(std::string_view robot_id, const RoboticCommand& command) {
  auto& r = find(robot_id);
  auto& s = r.state;
  if (s.failures.communication) return {CommandStatus::comm_timeout, std::nullopt, std::nullopt};

  CommandReply reply;
  if (std::holds_alternative<cmd::GetCoordinates>(command)) {
    if (s.failures.gps) {
      reply.status = CommandStatus::gps_unavailable;
    } else {
      reply.fix = GpsFix{s.id, noisy(s.position), time_};
      s.last_fix_time = time_;
    }
  } else if (const auto* move = std::get_if<cmd::MoveTo>(&command)) {
    if (!(move->speed > 0.0 && move->speed <= config_.max_speed_mps) || !is_valid(move->target)) {
      reply.status = CommandStatus::invalid_command;
    } else if (s.anchored || s.parked_at) {
      reply.status = CommandStatus::immobilized;
    } else {
      r.guidance = Guidance{move->target, move->speed};
    }
  } else if (std::holds_alternative<cmd::Anchor>(command)) {
    if (s.parked_at) {
      // Already holding station at a terminal.
    } else if (!r.anchor_operational || s.position.depth > config_.max_anchor_depth_m) {
      reply.status = CommandStatus::anchor_refused;
    } else {
      s.anchored = true;
      s.velocity = {};
      r.guidance.reset();
    }
  } else if (std::holds_alternative<cmd::ReleaseAnchor>(command)) {
    s.anchored = false;
    s.parked_at.reset();
  } else if (const auto* park = std::get_if<cmd::Park>(&command)) {
    const auto* terminal = map_->find_landmark(park->terminal);
    if (terminal == nullptr || (terminal->kind != mdl::LandmarkKind::fuel_rendezvous_terminal &&
                                terminal->kind != mdl::LandmarkKind::parking_area)) {
      reply.status = CommandStatus::invalid_command;
    } else if (s.anchored) {
      reply.status = CommandStatus::immobilized;
    } else if (planar_distance_m(s.position, terminal->position) > config_.arrival_radius_m) {
      reply.status = CommandStatus::not_at_terminal;
    } else {
      s.parked_at = terminal->id;
      s.velocity = {};
      r.guidance.reset();
    }
  } else if (std::holds_alternative<cmd::Halt>(command)) {
    r.guidance.reset();
  }
  reply.telemetry = telemetry_of(r);
  return reply;
}

void World::inject_failure(std::string_view robot_id, FailureFlag flag, bool value) {
  find(robot_id).state.failures.set(flag, value);
}

void World::set_anchor_operational(std::string_view robot_id, bool operational) {
  find(robot_id).anchor_operational = operational;
}

bool World::same_state(const World& other) const {
  return time_ == other.time_ && robots_ == other.robots_ && rng_ == other.rng_ && config_.seed == other.config_.seed;
}

}  // namespace riverhelm::sim
