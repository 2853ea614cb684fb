#include "riverhelm/agent.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace riverhelm::agent {

std::string_view to_string(MenuItem item) {
  switch (item) {
    case MenuItem::drag_place: return "DragPlace";
    case MenuItem::park: return "Park";
    case MenuItem::compute_optimal_flow: return "ComputeOptimalFlow";
    case MenuItem::anchor: return "Anchor";
    case MenuItem::release: return "Release";
  }
  return "Park";
}

std::optional<MenuItem> menu_item_from_string(std::string_view s) {
  for (auto m : {MenuItem::drag_place, MenuItem::park, MenuItem::compute_optimal_flow, MenuItem::anchor,
                 MenuItem::release}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

const std::string& robot_of(const UIEvent& e) {
  return std::visit([](const auto& v) -> const std::string& { return v.robot_id; }, e);
}

std::string_view event_name(const UIEvent& e) {
  struct Visitor {
    std::string_view operator()(const ev::ClickOnRobot&) const { return "ClickOnRobot"; }
    std::string_view operator()(const ev::DragRobot&) const { return "DragRobot"; }
    std::string_view operator()(const ev::PlaceRobot&) const { return "PlaceRobot"; }
    std::string_view operator()(const ev::MenuSelect&) const { return "MenuSelect"; }
  };
  return std::visit(Visitor{}, e);
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::unknown_robot: return "UnknownRobot";
    case RejectReason::invalid_event_sequence: return "InvalidEventSequence";
    case RejectReason::off_map: return "OffMap";
    case RejectReason::robot_faulted: return "RobotFaulted";
    case RejectReason::no_route: return "NoRoute";
    case RejectReason::no_candidate: return "NoCandidate";
    case RejectReason::not_acknowledgeable: return "NotAcknowledgeable";
  }
  return "InvalidEventSequence";
}

std::string_view to_string(CommandOrigin o) {
  switch (o) {
    case CommandOrigin::operator_: return "operator";
    case CommandOrigin::guard: return "guard";
    case CommandOrigin::poller: return "poller";
  }
  return "operator";
}

double PollerConfig::interval_for(std::string_view robot_id) const {
  const auto it = overrides.find(robot_id);
  return it == overrides.end() ? interval : it->second;
}

void PollerConfig::check() const {
  if (!(interval > 0.0) || !std::isfinite(interval)) throw std::invalid_argument("poll interval must be positive");
  for (const auto& [id, v] : overrides) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("poll interval for " + id + " must be positive");
  }
}

std::vector<std::string> graph_nodes(const mdl::MapDocument& doc) {
  std::set<std::string> nodes;
  for (const auto& f : doc.flows) {
    nodes.insert(f.from_id);
    nodes.insert(f.to_id);
  }
  return {nodes.begin(), nodes.end()};
}

std::optional<std::string> nearest_graph_node(const mdl::MapDocument& doc, const GeoCoordinate& p) {
  std::optional<std::string> best;
  double best_d = 0.0;
  for (const auto& id : graph_nodes(doc)) {
    const auto* l = doc.find_landmark(id);
    if (l == nullptr) continue;
    const double d = planar_distance_m(p, l->position);
    if (!best || d < best_d) {
      best = id;
      best_d = d;
    }
  }
  return best;
}

namespace {

// How to reach a landmark that may sit inside a flow rather than at its ends:
// a graph route, then the waypoints of one more flow up to the landmark.
struct Approach {
  mdl::Route route;
  std::vector<std::string> tail;  // waypoints after route.nodes.back()
  double cost_m = 0.0;
};

std::optional<Approach> approach(const mdl::MapDocument& doc, const std::string& start, const std::string& target) {
  std::optional<Approach> best;
  std::string best_flow;
  try {
    auto r = mdl::plan_route(doc, start, target);
    const double cost = r.cost_m;
    best = Approach{std::move(r), {}, cost};
  } catch (const mdl::NoRoute&) {
  }
  for (const auto& f : doc.flows) {
    const auto& w = f.waypoint_ids;
    const auto k = static_cast<std::size_t>(std::find(w.begin() + 1, w.end() - 1, target) - w.begin());
    if (k + 1 >= w.size()) continue;
    mdl::Route r;
    try {
      r = mdl::plan_route(doc, start, f.from_id);
    } catch (const mdl::NoRoute&) {
      continue;
    }
    Approach a{std::move(r), {}, 0.0};
    a.cost_m = a.route.cost_m;
    for (std::size_t i = 1; i <= k; ++i) {
      a.cost_m += planar_distance_m(doc.find_landmark(w[i - 1])->position, doc.find_landmark(w[i])->position);
      a.tail.push_back(w[i]);
    }
    if (!best || a.cost_m < best->cost_m || (a.cost_m == best->cost_m && !best_flow.empty() && f.id < best_flow)) {
      best = std::move(a);
      best_flow = f.id;
    }
  }
  return best;
}

}  // namespace

std::string default_optimizer(const mdl::MapDocument& doc, const sim::RobotState& robot) {
  std::vector<const mdl::Landmark*> areas;
  for (const auto& l : doc.landmarks) {
    if (l.kind == mdl::LandmarkKind::parking_area) areas.push_back(&l);
  }
  if (areas.empty()) throw NoCandidate("map has no parking_area landmark");

  std::optional<std::pair<double, std::string>> routed;
  if (const auto start = nearest_graph_node(doc, robot.position)) {
    for (const auto* a : areas) {
      const auto r = approach(doc, *start, a->id);
      if (r && (!routed || std::tie(r->cost_m, a->id) < std::tie(routed->first, routed->second))) {
        routed = std::make_pair(r->cost_m, a->id);
      }
    }
  }
  if (routed) return routed->second;

  std::pair<double, std::string> nearest{planar_distance_m(robot.position, areas.front()->position),
                                         areas.front()->id};
  for (const auto* a : areas) {
    const std::pair<double, std::string> cand{planar_distance_m(robot.position, a->position), a->id};
    if (cand < nearest) nearest = cand;
  }
  return nearest.second;
}

// ---------------------------------------------------------------------------
// Session
// ---------------------------------------------------------------------------

Session::Session(sim::World world, AgentConfig config, std::unique_ptr<OptimizerPlugin> optimizer)
    : world_(std::move(world)),
      config_(std::move(config)),
      optimizer_(optimizer ? std::move(optimizer) : std::make_unique<DefaultOptimizer>()),
      guard_(config_.guard) {
  config_.poller.check();
  config_.guard.check(config_.poller.interval);
  if (!(config_.move_speed_mps > 0.0 && config_.move_speed_mps <= world_.config().max_speed_mps)) {
    throw std::invalid_argument("move speed must lie in (0, max_speed]");
  }
  if (!(config_.snap_radius_m >= 0.0)) throw std::invalid_argument("snap radius must be non-negative");
}

void Session::add_robot(const sim::RobotSpec& spec, std::optional<double> poll_interval) {
  const double interval = poll_interval.value_or(config_.poller.interval_for(spec.id));
  if (!(interval > 0.0) || !std::isfinite(interval)) throw std::invalid_argument("poll interval must be positive");
  config_.guard.check(interval);
  world_.add_robot(spec);
  guard_.add_robot(spec.id, now());
  Agent a;
  a.poll_interval = interval;
  a.next_poll = now() + interval;
  agents_.emplace(spec.id, std::move(a));
  if (observer_ != nullptr) observer_->on_robot_added(spec, interval);

  RobotSnapshot snap;
  snap.state = world_.robot(spec.id);
  snap.exception = guard_.status(spec.id);
  registry_[spec.id] = snap;
  refresh_registry();
}

Session::Agent* Session::find_agent(std::string_view robot_id) {
  auto it = agents_.find(robot_id);
  return it == agents_.end() ? nullptr : &it->second;
}

InterpreterResponse Session::handle_event(const UIEvent& event) {
  auto response = interpret(event);
  if (observer_ != nullptr) observer_->on_ui_event(event, response);
  refresh_registry();
  return response;
}

InterpreterResponse Session::interpret(const UIEvent& event) {
  const std::string& id = robot_of(event);
  Agent* agent = find_agent(id);
  if (agent == nullptr) return resp::Rejected{RejectReason::unknown_robot, "unknown robot '" + id + "'"};
  const auto& snap = registry_.at(id);

  const auto* menu = std::get_if<ev::MenuSelect>(&event);
  if (guard_.status(id).state != guard::State::nominal) {
    if (menu != nullptr && menu->item == MenuItem::release) {
      try {
        acknowledge(id, "operator");
      } catch (const guard::NotAcknowledgeable& e) {
        return resp::Rejected{RejectReason::not_acknowledgeable, e.what()};
      }
      return dispatch(id, {sim::cmd::ReleaseAnchor{}});
    }
    return resp::Rejected{RejectReason::robot_faulted,
                          "robot is under exception handling (" +
                              std::string(guard::to_string(guard_.status(id).state)) + ")"};
  }

  if (std::holds_alternative<ev::ClickOnRobot>(event)) {
    resp::ContextMenu menu_resp;
    menu_resp.items = {MenuItem::drag_place, MenuItem::park, MenuItem::compute_optimal_flow, MenuItem::anchor,
                       MenuItem::release};
    try {
      menu_resp.scale_denominator = mdl::query_scale(map(), snap.state.position);
    } catch (const mdl::NoScaleRegion&) {
    }
    return menu_resp;
  }

  if (const auto* drag = std::get_if<ev::DragRobot>(&event)) {
    bool on_map = is_valid(drag->target);
    if (on_map) {
      try {
        mdl::query_scale(map(), drag->target);
      } catch (const mdl::NoScaleRegion&) {
        on_map = false;
      }
    }
    if (!on_map) return resp::Rejected{RejectReason::off_map, "drop point lies outside every scale region"};
    agent->pending_drag = drag->target;
    return resp::DragStarted{drag->target};
  }

  if (std::holds_alternative<ev::PlaceRobot>(event)) {
    if (!agent->pending_drag) {
      return resp::Rejected{RejectReason::invalid_event_sequence, "PlaceRobot requires a pending DragRobot"};
    }
    std::vector<sim::RoboticCommand> commands;
    if (auto rejected = place_commands(id, *agent->pending_drag, std::nullopt, commands)) return *rejected;
    agent->pending_drag.reset();
    return dispatch(id, std::move(commands));
  }

  switch (menu->item) {
    case MenuItem::drag_place:
      return resp::Rejected{RejectReason::invalid_event_sequence, "drag the robot marker to place it"};
    case MenuItem::anchor: return dispatch(id, {sim::cmd::Anchor{}});
    case MenuItem::release: return dispatch(id, {sim::cmd::ReleaseAnchor{}});
    case MenuItem::compute_optimal_flow: {
      std::string target;
      try {
        target = optimizer_->suggest_target(map(), snap.state);
      } catch (const NoCandidate& e) {
        return resp::Rejected{RejectReason::no_candidate, e.what()};
      }
      const auto* l = map().find_landmark(target);
      if (l == nullptr) {
        return resp::Rejected{RejectReason::no_candidate, "optimizer suggested unknown landmark '" + target + "'"};
      }
      std::vector<sim::RoboticCommand> commands;
      if (auto rejected = place_commands(id, l->position, l->id, commands)) return *rejected;
      return dispatch(id, std::move(commands));
    }
    case MenuItem::park: {
      const auto start = nearest_graph_node(map(), snap.state.position);
      std::optional<mdl::Route> best;
      std::string terminal;
      if (start) {
        for (const auto& l : map().landmarks) {
          if (l.kind != mdl::LandmarkKind::fuel_rendezvous_terminal) continue;
          try {
            auto r = mdl::plan_route(map(), *start, l.id);
            if (!best || std::tie(r.cost_m, l.id) < std::tie(best->cost_m, terminal)) {
              best = std::move(r);
              terminal = l.id;
            }
          } catch (const mdl::NoRoute&) {
          }
        }
      }
      if (!best) return resp::Rejected{RejectReason::no_route, "no fuel rendezvous terminal is reachable"};
      std::vector<sim::RoboticCommand> commands;
      if (snap.state.anchored || snap.state.parked_at) commands.emplace_back(sim::cmd::ReleaseAnchor{});
      for (auto& c : route_commands(snap, *best)) commands.push_back(std::move(c));
      commands.emplace_back(sim::cmd::Park{terminal});
      return dispatch(id, std::move(commands));
    }
  }
  return resp::Rejected{RejectReason::invalid_event_sequence, "unhandled event"};
}

InterpreterResponse Session::dispatch(const std::string& robot_id, std::vector<sim::RoboticCommand> commands) {
  auto& plan = agents_.at(robot_id).plan;
  // A new operator plan preempts whatever the robot was doing.
  plan.commands.assign(commands.begin(), commands.end());
  plan.origin = CommandOrigin::operator_;
  plan.awaiting_arrival = false;
  return resp::Dispatched{std::move(commands)};
}

std::vector<sim::RoboticCommand> Session::route_commands(const RobotSnapshot& robot, const mdl::Route& route) const {
  std::vector<sim::RoboticCommand> out;
  const double speed = config_.move_speed_mps;
  const auto* start = map().find_landmark(route.nodes.front());
  if (planar_distance_m(robot.state.position, start->position) > world_.config().arrival_radius_m) {
    out.emplace_back(sim::cmd::MoveTo{start->position, speed});
  }
  for (const auto& leg : route.legs) {
    const auto* flow = map().find_flow(leg.flow_id);
    for (std::size_t i = 1; i < flow->waypoint_ids.size(); ++i) {
      out.emplace_back(sim::cmd::MoveTo{map().find_landmark(flow->waypoint_ids[i])->position, speed});
    }
  }
  return out;
}

std::optional<resp::Rejected> Session::place_commands(const std::string& robot_id, const GeoCoordinate& target,
                                                      std::optional<std::string> landmark,
                                                      std::vector<sim::RoboticCommand>& out) const {
  const auto& snap = registry_.at(robot_id);
  bool synthetic = false;
  if (!landmark) {
    const auto nearest = nearest_graph_node(map(), target);
    if (!nearest) return resp::Rejected{RejectReason::no_route, "map has no flows to navigate"};
    landmark = *nearest;
    synthetic = planar_distance_m(target, map().find_landmark(*nearest)->position) > config_.snap_radius_m;
  }
  const auto start = nearest_graph_node(map(), snap.state.position);
  if (!start) return resp::Rejected{RejectReason::no_route, "map has no flows to navigate"};
  std::optional<Approach> way;
  try {
    way = approach(map(), *start, *landmark);
  } catch (const std::exception& e) {
    return resp::Rejected{RejectReason::no_route, e.what()};
  }
  if (!way) return resp::Rejected{RejectReason::no_route, "no flow leads from " + *start + " to " + *landmark};
  out.clear();
  if (snap.state.anchored || snap.state.parked_at) out.emplace_back(sim::cmd::ReleaseAnchor{});
  for (auto& c : route_commands(snap, way->route)) out.push_back(std::move(c));
  for (const auto& id : way->tail) {
    out.emplace_back(sim::cmd::MoveTo{map().find_landmark(id)->position, config_.move_speed_mps});
  }
  if (synthetic) {
    out.emplace_back(sim::cmd::MoveTo{target, config_.move_speed_mps});
  } else if (std::none_of(out.begin(), out.end(),
                          [](const auto& c) { return std::holds_alternative<sim::cmd::MoveTo>(c); })) {
    out.emplace_back(sim::cmd::MoveTo{map().find_landmark(*landmark)->position, config_.move_speed_mps});
  }
  return std::nullopt;
}

sim::CommandReply Session::execute(const std::string& robot_id, const sim::RoboticCommand& command,
                                   CommandOrigin origin) {
  auto reply = world_.execute_command(robot_id, command);
  if (observer_ != nullptr) observer_->on_command(robot_id, command, reply, origin);
  apply_reply(robot_id, reply);
  return reply;
}

void Session::apply_reply(const std::string& robot_id, const sim::CommandReply& reply) {
  auto& snap = registry_.at(robot_id);
  if (reply.telemetry) {
    const auto& t = *reply.telemetry;
    snap.state.anchored = t.anchored;
    snap.state.parked_at = t.parked_at;
    snap.state.fuel = t.fuel;
    snap.state.velocity = t.velocity;
    snap.state.failures = t.failures;
    snap.navigating = t.navigating;
  }
  if (reply.fix) {
    snap.state.position = reply.fix->position;
    snap.state.last_fix_time = reply.fix->timestamp;
  }
}

void Session::pump_plans() {
  for (auto& [id, agent] : agents_) {
    auto& plan = agent.plan;
    while (!plan.commands.empty()) {
      if (plan.awaiting_arrival) {
        const auto tel = world_.telemetry(id);
        if (!tel || tel->navigating) break;
        registry_.at(id).navigating = false;
        plan.commands.pop_front();
        plan.awaiting_arrival = false;
        continue;
      }
      const auto command = plan.commands.front();
      const auto origin = plan.origin;
      const auto reply = execute(id, command, origin);
      if (reply.status != sim::CommandStatus::ok) {
        plan.commands.clear();
        break;
      }
      if (std::holds_alternative<sim::cmd::MoveTo>(command)) {
        plan.awaiting_arrival = true;
        break;
      }
      plan.commands.pop_front();
      if (std::holds_alternative<sim::cmd::Park>(command) && origin == CommandOrigin::guard) {
        observe(id, guard::Observation::park_confirmed);
      }
    }
  }
}

void Session::observe(const std::string& robot_id, guard::Observation o) {
  handle_guard_events(guard_.observe(robot_id, o, now()));
}

void Session::handle_guard_events(std::vector<guard::ExceptionEvent> events) {
  std::deque<guard::ExceptionEvent> queue(events.begin(), events.end());
  while (!queue.empty()) {
    const auto event = queue.front();
    queue.pop_front();
    if (observer_ != nullptr) observer_->on_exception_event(event);
    const std::string& id = event.robot_id;
    if (event.action == guard::Action::anchor) {
      auto& agent = agents_.at(id);
      agent.plan = Plan{{}, CommandOrigin::guard, false};
      agent.pending_drag.reset();
      const auto reply = execute(id, sim::cmd::Anchor{}, CommandOrigin::guard);
      std::vector<guard::ExceptionEvent> next;
      if (reply.status == sim::CommandStatus::ok) {
        next = guard_.observe(id, guard::Observation::anchor_confirmed, now());
      } else if (reply.status == sim::CommandStatus::anchor_refused) {
        next = guard_.observe(id, guard::Observation::anchor_refused, now());
      }
      queue.insert(queue.end(), next.begin(), next.end());
    } else if (event.action == guard::Action::auto_park) {
      start_auto_park(id);
    }
  }
}

void Session::start_auto_park(const std::string& robot_id) {
  const auto& snap = registry_.at(robot_id);
  std::vector<sim::RoboticCommand> commands{sim::cmd::ReleaseAnchor{}};
  std::optional<mdl::Route> best;
  std::string terminal;
  if (const auto start = nearest_graph_node(map(), snap.state.position)) {
    for (const auto& l : map().landmarks) {
      if (l.kind != mdl::LandmarkKind::fuel_rendezvous_terminal) continue;
      try {
        auto r = mdl::plan_route(map(), *start, l.id);
        if (!best || std::tie(r.cost_m, l.id) < std::tie(best->cost_m, terminal)) {
          best = std::move(r);
          terminal = l.id;
        }
      } catch (const mdl::NoRoute&) {
      }
    }
  }
  if (best) {
    for (auto& c : route_commands(snap, *best)) commands.push_back(std::move(c));
  } else {
    // No flow path to any terminal: head straight for the closest one.
    std::optional<std::pair<double, std::string>> nearest;
    for (const auto& l : map().landmarks) {
      if (l.kind != mdl::LandmarkKind::fuel_rendezvous_terminal) continue;
      const std::pair<double, std::string> cand{planar_distance_m(snap.state.position, l.position), l.id};
      if (!nearest || cand < *nearest) nearest = cand;
    }
    if (!nearest) return;
    terminal = nearest->second;
    commands.emplace_back(sim::cmd::MoveTo{map().find_landmark(terminal)->position, config_.move_speed_mps});
  }
  const auto* terminal_lm = map().find_landmark(terminal);
  if (std::none_of(commands.begin(), commands.end(),
                   [](const auto& c) { return std::holds_alternative<sim::cmd::MoveTo>(c); })) {
    commands.emplace_back(sim::cmd::MoveTo{terminal_lm->position, config_.move_speed_mps});
  }
  commands.emplace_back(sim::cmd::Park{terminal});
  auto& plan = agents_.at(robot_id).plan;
  plan.commands.assign(commands.begin(), commands.end());
  plan.origin = CommandOrigin::guard;
  plan.awaiting_arrival = false;
}

std::vector<sim::GpsFix> Session::poll_loop_tick(double now) {
  std::vector<sim::GpsFix> fixes;
  for (auto& [id, agent] : agents_) {
    while (agent.next_poll <= now) {
      agent.next_poll += agent.poll_interval;
      ++polls_;
      const auto reply = execute(id, sim::cmd::GetCoordinates{}, CommandOrigin::poller);
      if (reply.fix) {
        fixes.push_back(*reply.fix);
        if (observer_ != nullptr) observer_->on_gps_fix(*reply.fix);
      }
      if (!reply.acknowledged()) continue;  // silence: the guard's comm timer handles it
      std::vector<guard::Observation> obs;
      obs.push_back(reply.status == sim::CommandStatus::gps_unavailable ? guard::Observation::gps_failed
                                                                        : guard::Observation::gps_ok);
      const auto& flags = reply.telemetry->failures;
      if (flags.sensor_power) obs.push_back(guard::Observation::sensor_power_failed);
      if (flags.propulsion) obs.push_back(guard::Observation::propulsion_failed);
      if (!flags.any() && reply.status == sim::CommandStatus::ok) obs.push_back(guard::Observation::flags_cleared);
      for (auto o : obs) observe(id, o);
    }
  }
  return fixes;
}

void Session::advance(double dt) {
  world_.step(dt);
  ++steps_;
  pump_plans();
  poll_loop_tick(now());
  handle_guard_events(guard_.tick(now()));
  refresh_registry();
}

guard::ExceptionEvent Session::acknowledge(const std::string& robot_id, const std::string& operator_id) {
  if (find_agent(robot_id) == nullptr) throw sim::UnknownRobot(robot_id);
  std::optional<guard::ExceptionEvent> event;
  try {
    event = guard_.acknowledge(robot_id, operator_id, now());
  } catch (const guard::NotAcknowledgeable&) {
    if (observer_ != nullptr) observer_->on_acknowledge(robot_id, operator_id, std::nullopt);
    throw;
  }
  if (observer_ != nullptr) {
    observer_->on_acknowledge(robot_id, operator_id, event);
    observer_->on_exception_event(*event);
  }
  refresh_registry();
  return *event;
}

void Session::inject_failure(const std::string& robot_id, sim::FailureFlag flag, bool value) {
  world_.inject_failure(robot_id, flag, value);
  if (observer_ != nullptr) observer_->on_sim_control(robot_id, sim::to_string(flag), value);
}

void Session::set_anchor_operational(const std::string& robot_id, bool operational) {
  world_.set_anchor_operational(robot_id, operational);
  if (observer_ != nullptr) observer_->on_sim_control(robot_id, "anchor", !operational);
}

std::vector<mdl::MdlAnnotation> Session::annotations() const {
  std::vector<mdl::MdlAnnotation> out;
  for (const auto& [id, snap] : registry_) {
    const mdl::FlowSegment* nearest = nullptr;
    double best = 0.0;
    for (const auto& f : map().flows) {
      const double d = mdl::project_onto_flow(map(), f.id, snap.state.position).distance_m;
      if (nearest == nullptr || d < best) {
        nearest = &f;
        best = d;
      }
    }
    mdl::MdlAnnotation a;
    a.robot_id = id;
    if (nearest != nullptr) {
      try {
        a = mdl::annotate_for_robot(map(), nearest->id, snap.state.position, world_.config().corridor_m, id);
      } catch (const mdl::OffRoute&) {
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

void Session::refresh_registry() {
  auto published = store_.get();
  bool changed = published->size() != registry_.size();
  for (auto& [id, snap] : registry_) {
    snap.exception = guard_.status(id);
    snap.pending_commands = agents_.at(id).plan.commands.size();
    const auto it = published->find(id);
    if (it == published->end() || !(it->second == snap)) {
      changed = true;
      if (observer_ != nullptr) observer_->on_snapshot(snap);
    }
  }
  if (changed) store_.publish(std::make_shared<const Registry>(registry_));
}

}  // namespace riverhelm::agent
