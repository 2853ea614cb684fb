#pragma once

// Three-layer agent communication model.
//
//   UI event language  (ClickOnRobot, DragRobot, PlaceRobot, MenuSelect)
//        |  interpreter: handle_event
//        v
//   robotic command language (sim::RoboticCommand), executed by per-robot plans
//
// plus the fixed-rate GPS poller and the hand-off to the fault guard. The
// interpreter never touches robot state; its only output is the command list
// in a Dispatched response.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "riverhelm/guard.hpp"
#include "riverhelm/mdl.hpp"
#include "riverhelm/sim.hpp"

namespace riverhelm::agent {

enum class MenuItem { drag_place, park, compute_optimal_flow, anchor, release };

std::string_view to_string(MenuItem item);
std::optional<MenuItem> menu_item_from_string(std::string_view s);

namespace ev {
struct ClickOnRobot {
  std::string robot_id;
  friend bool operator==(const ClickOnRobot&, const ClickOnRobot&) = default;
};
struct DragRobot {
  std::string robot_id;
  GeoCoordinate target;
  friend bool operator==(const DragRobot&, const DragRobot&) = default;
};
struct PlaceRobot {
  std::string robot_id;
  friend bool operator==(const PlaceRobot&, const PlaceRobot&) = default;
};
struct MenuSelect {
  std::string robot_id;
  MenuItem item = MenuItem::park;
  friend bool operator==(const MenuSelect&, const MenuSelect&) = default;
};
}  // namespace ev

using UIEvent = std::variant<ev::ClickOnRobot, ev::DragRobot, ev::PlaceRobot, ev::MenuSelect>;

const std::string& robot_of(const UIEvent& e);
std::string_view event_name(const UIEvent& e);

enum class RejectReason {
  unknown_robot,
  invalid_event_sequence,
  off_map,
  robot_faulted,
  no_route,
  no_candidate,
  not_acknowledgeable,
};

std::string_view to_string(RejectReason r);

namespace resp {
struct ContextMenu {
  std::vector<MenuItem> items;
  std::optional<std::uint64_t> scale_denominator;  // nullopt: robot outside every scale region
  friend bool operator==(const ContextMenu&, const ContextMenu&) = default;
};
struct DragStarted {
  GeoCoordinate target;
  friend bool operator==(const DragStarted&, const DragStarted&) = default;
};
struct Dispatched {
  std::vector<sim::RoboticCommand> commands;
  friend bool operator==(const Dispatched&, const Dispatched&) = default;
};
struct Rejected {
  RejectReason reason = RejectReason::invalid_event_sequence;
  std::string message;
  friend bool operator==(const Rejected&, const Rejected&) = default;
};
}  // namespace resp

using InterpreterResponse = std::variant<resp::ContextMenu, resp::DragStarted, resp::Dispatched, resp::Rejected>;

struct PollerConfig {
  double interval = 15.0;  // seconds between GPS_get_coordinates polls
  std::map<std::string, double, std::less<>> overrides;

  double interval_for(std::string_view robot_id) const;
  void check() const;
};

/// Chooses a positioning target for a robot. Implementations must return an
/// id that resolves in the map.
class OptimizerPlugin {
 public:
  virtual ~OptimizerPlugin() = default;
  virtual std::string suggest_target(const mdl::MapDocument& doc, const sim::RobotState& robot) const = 0;
};

class NoCandidate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nearest parking_area by route cost from the robot's nearest graph node,
/// falling back to straight-line distance when none is routable.
std::string default_optimizer(const mdl::MapDocument& doc, const sim::RobotState& robot);

class DefaultOptimizer final : public OptimizerPlugin {
 public:
  std::string suggest_target(const mdl::MapDocument& doc, const sim::RobotState& robot) const override {
    return default_optimizer(doc, robot);
  }
};

/// Landmark ids that are endpoints of at least one flow, sorted.
std::vector<std::string> graph_nodes(const mdl::MapDocument& doc);

/// Nearest graph node to p (ties: smaller id); nullopt when the map has no flows.
std::optional<std::string> nearest_graph_node(const mdl::MapDocument& doc, const GeoCoordinate& p);

struct AgentConfig {
  PollerConfig poller;
  guard::GuardConfig guard;
  double snap_radius_m = 50.0;
  double move_speed_mps = 2.0;  // speed of dispatched MoveTo commands
};

/// Who issued a command: the operator via the interpreter, the guard, or the poller.
enum class CommandOrigin { operator_, guard, poller };
std::string_view to_string(CommandOrigin o);

/// Last-known view of one robot, as shown on the map.
struct RobotSnapshot {
  sim::RobotState state;  // position = last GPS fix
  guard::ExceptionStatus exception;
  bool navigating = false;
  std::size_t pending_commands = 0;

  friend bool operator==(const RobotSnapshot&, const RobotSnapshot&) = default;
};

using Registry = std::map<std::string, RobotSnapshot, std::less<>>;

/// Single-writer, multi-reader store of immutable registry snapshots.
class SnapshotStore {
 public:
  std::shared_ptr<const Registry> get() const {
    std::lock_guard lock(mu_);
    return current_;
  }
  void publish(std::shared_ptr<const Registry> next) {
    std::lock_guard lock(mu_);
    current_ = std::move(next);
  }

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const Registry> current_ = std::make_shared<const Registry>();
};

/// Receives everything the session does, in order. Default methods ignore it.
class SessionObserver {
 public:
  virtual ~SessionObserver() = default;
  virtual void on_robot_added(const sim::RobotSpec&, double /*poll_interval*/) {}
  virtual void on_ui_event(const UIEvent&, const InterpreterResponse&) {}
  virtual void on_acknowledge(const std::string& /*robot_id*/, const std::string& /*operator_id*/,
                              const std::optional<guard::ExceptionEvent>&) {}
  virtual void on_sim_control(const std::string& /*robot_id*/, std::string_view /*control*/, bool /*value*/) {}
  virtual void on_command(const std::string& /*robot_id*/, const sim::RoboticCommand&, const sim::CommandReply&,
                          CommandOrigin) {}
  virtual void on_gps_fix(const sim::GpsFix&) {}
  virtual void on_exception_event(const guard::ExceptionEvent&) {}
  virtual void on_snapshot(const RobotSnapshot&) {}
};

/// One operator console session over a simulated fleet: interpreter, per-robot
/// agents executing command plans, the poller and the fault guard. Not
/// thread-safe; a single owner drives it and publishes registry snapshots.
class Session {
 public:
  Session(sim::World world, AgentConfig config, std::unique_ptr<OptimizerPlugin> optimizer = nullptr);

  void add_robot(const sim::RobotSpec& spec, std::optional<double> poll_interval = std::nullopt);

  InterpreterResponse handle_event(const UIEvent& event);

  /// Issues GetCoordinates for every robot whose deadline has passed; one
  /// poll per crossed deadline.
  std::vector<sim::GpsFix> poll_loop_tick(double now);

  /// One fixed step: simulator, command plans, poller, guard timers.
  void advance(double dt);

  /// Throws guard::NotAcknowledgeable.
  guard::ExceptionEvent acknowledge(const std::string& robot_id, const std::string& operator_id);

  void inject_failure(const std::string& robot_id, sim::FailureFlag flag, bool value);
  void set_anchor_operational(const std::string& robot_id, bool operational);

  void set_observer(SessionObserver* observer) { observer_ = observer; }

  const sim::World& world() const { return world_; }
  const guard::FaultGuard& guard() const { return guard_; }
  const mdl::MapDocument& map() const { return world_.map(); }
  const AgentConfig& config() const { return config_; }
  double now() const { return world_.time(); }
  std::uint64_t steps() const { return steps_; }

  const Registry& registry() const { return registry_; }
  SnapshotStore& store() { return store_; }

  /// Annotations for every robot on its nearest flow (empty when off-route).
  std::vector<mdl::MdlAnnotation> annotations() const;

  /// Number of GetCoordinates polls issued so far.
  std::uint64_t poll_count() const { return polls_; }

 private:
  struct Plan {
    std::deque<sim::RoboticCommand> commands;
    CommandOrigin origin = CommandOrigin::operator_;
    bool awaiting_arrival = false;
  };
  struct Agent {
    std::optional<GeoCoordinate> pending_drag;
    Plan plan;
    double poll_interval = 15.0;
    double next_poll = 0.0;
  };

  Agent* find_agent(std::string_view robot_id);
  InterpreterResponse interpret(const UIEvent& event);
  InterpreterResponse dispatch(const std::string& robot_id, std::vector<sim::RoboticCommand> commands);
  std::optional<resp::Rejected> place_commands(const std::string& robot_id, const GeoCoordinate& target,
                                               std::optional<std::string> landmark,
                                               std::vector<sim::RoboticCommand>& out) const;
  std::vector<sim::RoboticCommand> route_commands(const RobotSnapshot& robot, const mdl::Route& route) const;

  sim::CommandReply execute(const std::string& robot_id, const sim::RoboticCommand& command, CommandOrigin origin);
  void pump_plans();
  void handle_guard_events(std::vector<guard::ExceptionEvent> events);
  void observe(const std::string& robot_id, guard::Observation o);
  void apply_reply(const std::string& robot_id, const sim::CommandReply& reply);
  void start_auto_park(const std::string& robot_id);
  void refresh_registry();

  sim::World world_;
  AgentConfig config_;
  std::unique_ptr<OptimizerPlugin> optimizer_;
  guard::FaultGuard guard_;
  std::map<std::string, Agent, std::less<>> agents_;
  Registry registry_;
  SnapshotStore store_;
  SessionObserver* observer_ = nullptr;
  std::uint64_t steps_ = 0;
  std::uint64_t polls_ = 0;
};

}  // namespace riverhelm::agent
