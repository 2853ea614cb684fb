#pragma once

// Discrete-time river simulator: first-order point-mass submarines that move
// under commanded velocity plus ambient flow drift, with anchoring, parking,
// fuel and injectable failures.
//
// The World is a value type with a single owner. Copies are independent, so a
// caller can snapshot it cheaply for readers on other threads.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "riverhelm/geo.hpp"
#include "riverhelm/mdl.hpp"

namespace riverhelm::sim {

enum class FailureFlag { communication, gps, sensor_power, propulsion };

std::string_view to_string(FailureFlag flag);
std::optional<FailureFlag> failure_flag_from_string(std::string_view s);

struct FailureFlags {
  bool communication = false;
  bool gps = false;
  bool sensor_power = false;
  bool propulsion = false;

  bool any() const { return communication || gps || sensor_power || propulsion; }
  bool get(FailureFlag f) const;
  void set(FailureFlag f, bool value);

  friend bool operator==(const FailureFlags&, const FailureFlags&) = default;
};

struct RobotState {
  std::string id;
  GeoCoordinate position;
  Vec2 velocity;  // total ground velocity over the last step, m/s
  bool anchored = false;
  std::optional<std::string> parked_at;
  double fuel = 1.0;
  FailureFlags failures;
  std::optional<double> last_fix_time;

  friend bool operator==(const RobotState&, const RobotState&) = default;
};

// Bottom layer of the agent communication model.
namespace cmd {
struct GetCoordinates {
  friend bool operator==(const GetCoordinates&, const GetCoordinates&) = default;
};
struct MoveTo {
  GeoCoordinate target;
  double speed = 0.0;
  friend bool operator==(const MoveTo&, const MoveTo&) = default;
};
struct Anchor {
  friend bool operator==(const Anchor&, const Anchor&) = default;
};
struct ReleaseAnchor {
  friend bool operator==(const ReleaseAnchor&, const ReleaseAnchor&) = default;
};
struct Park {
  std::string terminal;
  friend bool operator==(const Park&, const Park&) = default;
};
struct Halt {
  friend bool operator==(const Halt&, const Halt&) = default;
};
}  // namespace cmd

using RoboticCommand =
    std::variant<cmd::GetCoordinates, cmd::MoveTo, cmd::Anchor, cmd::ReleaseAnchor, cmd::Park, cmd::Halt>;

std::string_view command_name(const RoboticCommand& c);

struct GpsFix {
  std::string robot_id;
  GeoCoordinate position;
  double timestamp = 0.0;

  friend bool operator==(const GpsFix&, const GpsFix&) = default;
};

/// What a robot reports about itself alongside any acknowledgement.
struct Telemetry {
  bool navigating = false;
  bool anchored = false;
  std::optional<std::string> parked_at;
  double fuel = 1.0;
  Vec2 velocity;
  FailureFlags failures;

  friend bool operator==(const Telemetry&, const Telemetry&) = default;
};

enum class CommandStatus {
  ok,
  comm_timeout,     // the command never reached the robot
  gps_unavailable,  // GetCoordinates with a failed receiver
  anchor_refused,
  not_at_terminal,
  immobilized,      // MoveTo/Park while anchored or parked
  invalid_command,
};

std::string_view to_string(CommandStatus s);

struct CommandReply {
  CommandStatus status = CommandStatus::ok;
  std::optional<GpsFix> fix;
  std::optional<Telemetry> telemetry;  // absent exactly when status is comm_timeout

  bool acknowledged() const { return status != CommandStatus::comm_timeout; }
};

struct SimConfig {
  double arrival_radius_m = 3.0;
  double max_speed_mps = 2.0;
  double fuel_burn_per_m = 0.001;
  double max_anchor_depth_m = 30.0;
  double corridor_m = mdl::kDefaultCorridorM;  // ambient flow is zero beyond it
  double gps_noise_m = 0.0;                    // uniform disk radius
  std::uint64_t seed = 0;
};

struct RobotSpec {
  std::string id;
  GeoCoordinate position;
  double fuel = 1.0;
  bool anchor_operational = true;
};

class UnknownRobot : public std::out_of_range {
 public:
  explicit UnknownRobot(std::string_view id) : std::out_of_range("unknown robot '" + std::string(id) + "'") {}
};

class World {
 public:
  World(std::shared_ptr<const mdl::MapDocument> map, SimConfig config = {});

  /// Throws std::invalid_argument for a duplicate id or invalid position.
  void add_robot(const RobotSpec& spec);

  /// Advances every robot by dt seconds (dt > 0).
  void step(double dt);

  CommandReply execute_command(std::string_view robot_id, const RoboticCommand& command);

  /// Takes effect on the next command or step.
  void inject_failure(std::string_view robot_id, FailureFlag flag, bool value);
  void set_anchor_operational(std::string_view robot_id, bool operational);

  /// Robot self-report; nullopt while its communication link is down.
  std::optional<Telemetry> telemetry(std::string_view robot_id) const;

  /// Ground truth, for oracles and the operator-free parts of the system.
  const RobotState& robot(std::string_view robot_id) const;
  std::vector<std::string> robot_ids() const;
  bool has_robot(std::string_view robot_id) const;

  /// Flow drift at a point: nearest flow segment, zero beyond the corridor.
  Vec2 ambient_flow(const GeoCoordinate& p) const;

  double time() const { return time_; }
  const mdl::MapDocument& map() const { return *map_; }
  std::shared_ptr<const mdl::MapDocument> map_ptr() const { return map_; }
  const SimConfig& config() const { return config_; }

  /// Bitwise equality of the full simulated state (robots, clock, RNG).
  bool same_state(const World& other) const;

 private:
  struct Guidance {
    GeoCoordinate target;
    double speed = 0.0;
    friend bool operator==(const Guidance&, const Guidance&) = default;
  };
  struct Robot {
    RobotState state;
    std::optional<Guidance> guidance;
    bool anchor_operational = true;
    friend bool operator==(const Robot&, const Robot&) = default;
  };

  Robot& find(std::string_view robot_id);
  const Robot& find(std::string_view robot_id) const;
  Telemetry telemetry_of(const Robot& r) const;
  GeoCoordinate noisy(const GeoCoordinate& p);

  std::shared_ptr<const mdl::MapDocument> map_;
  SimConfig config_;
  std::map<std::string, Robot, std::less<>> robots_;
  std::mt19937_64 rng_;
  double time_ = 0.0;
};

}  // namespace riverhelm::sim
