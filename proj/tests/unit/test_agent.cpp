#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"

using namespace rh_test;
using agent::MenuItem;
using agent::RejectReason;
namespace ev = agent::ev;
namespace resp = agent::resp;

namespace {

struct Counting final : agent::SessionObserver {
  int fixes = 0;
  int gps_unavailable = 0;
  int polls = 0;
  std::vector<guard::ExceptionEvent> exceptions;
  std::vector<std::pair<std::string, sim::RoboticCommand>> commands;

  void on_gps_fix(const sim::GpsFix&) override { ++fixes; }
  void on_command(const std::string& id, const sim::RoboticCommand& c, const sim::CommandReply& r,
                  agent::CommandOrigin origin) override {
    if (origin == agent::CommandOrigin::poller) {
      ++polls;
      if (r.status == sim::CommandStatus::gps_unavailable) ++gps_unavailable;
    }
    commands.emplace_back(id, c);
  }
  void on_exception_event(const guard::ExceptionEvent& e) override { exceptions.push_back(e); }
};

agent::Session session_on(std::shared_ptr<const mdl::MapDocument> map, agent::AgentConfig config = {},
                          sim::SimConfig sim_config = {}) {
  return agent::Session(sim::World(std::move(map), sim_config), std::move(config));
}

GeoCoordinate at(const mdl::MapDocument& doc, const std::string& id) { return doc.find_landmark(id)->position; }

void run_for(agent::Session& s, double seconds) {
  const double end = s.now() + seconds;
  while (s.now() < end - 1e-9) s.advance(1.0);
}

void run_until_idle(agent::Session& s, const std::string& id, double limit = 3600.0) {
  const double end = s.now() + limit;
  while (s.now() < end) {
    const auto& snap = s.registry().at(id);
    if (snap.pending_commands == 0 && !snap.navigating) return;
    s.advance(1.0);
  }
}

std::vector<GeoCoordinate> move_targets(const resp::Dispatched& d) {
  std::vector<GeoCoordinate> out;
  for (const auto& c : d.commands) {
    if (const auto* m = std::get_if<sim::cmd::MoveTo>(&c)) out.push_back(m->target);
  }
  return out;
}

// Landmark id at exactly this position, or empty.
std::string landmark_at(const mdl::MapDocument& doc, const GeoCoordinate& p) {
  for (const auto& l : doc.landmarks) {
    if (l.position == p) return l.id;
  }
  return {};
}

}  // namespace

// --- interpreter -------------------------------------------------------------

TEST(Interpreter, ClickShowsMenuWithScale) {
  auto s = session_on(chain_map().shared());
  s.add_robot({"r1", at(s.map(), "A")});
  const auto r = s.handle_event(ev::ClickOnRobot{"r1"});
  const auto* menu = std::get_if<resp::ContextMenu>(&r);
  ASSERT_NE(menu, nullptr);
  EXPECT_EQ(menu->scale_denominator, 5000u);
  EXPECT_EQ(menu->items.size(), 5u);
}

TEST(Interpreter, ClickOutsideEveryRegionHasNoScale) {
  auto s = session_on(chain_map().shared());
  s.add_robot({"r1", {44.5, 7.0, 1.0}});
  const auto r = s.handle_event(ev::ClickOnRobot{"r1"});
  ASSERT_TRUE(std::holds_alternative<resp::ContextMenu>(r));
  EXPECT_FALSE(std::get<resp::ContextMenu>(r).scale_denominator.has_value());
}

TEST(Interpreter, PlaceAlongChainMovesThroughEachNode) {
  auto s = session_on(chain_map().shared());
  s.add_robot({"r1", at(s.map(), "A")});
  ASSERT_TRUE(std::holds_alternative<resp::DragStarted>(s.handle_event(ev::DragRobot{"r1", at(s.map(), "C")})));
  const auto r = s.handle_event(ev::PlaceRobot{"r1"});
  ASSERT_TRUE(std::holds_alternative<resp::Dispatched>(r));
  const auto& cmds = std::get<resp::Dispatched>(r).commands;
  const std::vector<sim::RoboticCommand> expected{sim::cmd::MoveTo{at(s.map(), "B"), 2.0},
                                                  sim::cmd::MoveTo{at(s.map(), "C"), 2.0}};
  EXPECT_EQ(cmds, expected);
}

TEST(Interpreter, PlaceWithoutDragIsInvalidSequence) {
  auto s = session_on(chain_map().shared());
  s.add_robot({"r1", at(s.map(), "A")});
  const auto r = s.handle_event(ev::PlaceRobot{"r1"});
  ASSERT_TRUE(std::holds_alternative<resp::Rejected>(r));
  EXPECT_EQ(std::get<resp::Rejected>(r).reason, RejectReason::invalid_event_sequence);
  // A completed place consumes the drag.
  s.handle_event(ev::DragRobot{"r1", at(s.map(), "B")});
  ASSERT_TRUE(std::holds_alternative<resp::Dispatched>(s.handle_event(ev::PlaceRobot{"r1"})));
  EXPECT_TRUE(std::holds_alternative<resp::Rejected>(s.handle_event(ev::PlaceRobot{"r1"})));
}

TEST(Interpreter, DragOffMapRejected) {
  auto s = session_on(chain_map().shared());
  s.add_robot({"r1", at(s.map(), "A")});
  const auto r = s.handle_event(ev::DragRobot{"r1", {40.0, 7.0, 0.0}});
  ASSERT_TRUE(std::holds_alternative<resp::Rejected>(r));
  EXPECT_EQ(std::get<resp::Rejected>(r).reason, RejectReason::off_map);
}

TEST(Interpreter, UnknownRobotRejected) {
  auto s = session_on(chain_map().shared());
  const auto r = s.handle_event(ev::ClickOnRobot{"ghost"});
  ASSERT_TRUE(std::holds_alternative<resp::Rejected>(r));
  EXPECT_EQ(std::get<resp::Rejected>(r).reason, RejectReason::unknown_robot);
}

TEST(Interpreter, PlaceAwayFromNodesAppendsFinalLeg) {
  auto s = session_on(chain_map().shared());
  s.add_robot({"r1", at(s.map(), "A")});
  const auto drop = offset(at(s.map(), "C"), 0.0, 120.0);
  s.handle_event(ev::DragRobot{"r1", drop});
  const auto r = s.handle_event(ev::PlaceRobot{"r1"});
  ASSERT_TRUE(std::holds_alternative<resp::Dispatched>(r));
  const auto targets = move_targets(std::get<resp::Dispatched>(r));
  ASSERT_EQ(targets.size(), 3u);
  EXPECT_EQ(targets.back(), drop);
}

TEST(Interpreter, PlaceUnreachableIsNoRoute) {
  auto s = session_on(chain_map().shared());
  s.add_robot({"r1", at(s.map(), "C")});
  s.handle_event(ev::DragRobot{"r1", at(s.map(), "A")});
  const auto r = s.handle_event(ev::PlaceRobot{"r1"});
  ASSERT_TRUE(std::holds_alternative<resp::Rejected>(r));
  EXPECT_EQ(std::get<resp::Rejected>(r).reason, RejectReason::no_route);
}

TEST(Interpreter, PlaceOnFiveNodeFollowsFlowEdges) {
  const auto map = five_node_map();
  for (const auto& target : {"B", "C", "D", "E", "P"}) {
    auto s = session_on(map);
    s.add_robot({"r1", at(*map, "A")});
    s.handle_event(ev::DragRobot{"r1", at(*map, target)});
    const auto r = s.handle_event(ev::PlaceRobot{"r1"});
    ASSERT_TRUE(std::holds_alternative<resp::Dispatched>(r)) << target;
    std::vector<std::string> path{"A"};
    for (const auto& p : move_targets(std::get<resp::Dispatched>(r))) path.push_back(landmark_at(*map, p));
    for (std::size_t i = 1; i < path.size(); ++i) {
      bool edge = false;
      for (const auto& f : map->flows) {
        for (std::size_t k = 1; k < f.waypoint_ids.size(); ++k) {
          edge = edge || (f.waypoint_ids[k - 1] == path[i - 1] && f.waypoint_ids[k] == path[i]);
        }
      }
      EXPECT_TRUE(edge) << target << ": " << path[i - 1] << " -> " << path[i];
    }
  }
}

TEST(Interpreter, FaultedRobotRejectsOperatorCommands) {
  auto s = session_on(chain_map().shared());
  s.add_robot({"r1", at(s.map(), "A")});
  s.inject_failure("r1", sim::FailureFlag::gps, true);
  run_for(s, 15.0);
  ASSERT_EQ(s.guard().status("r1").state, guard::State::anchored);
  auto r = s.handle_event(ev::ClickOnRobot{"r1"});
  ASSERT_TRUE(std::holds_alternative<resp::Rejected>(r));
  EXPECT_EQ(std::get<resp::Rejected>(r).reason, RejectReason::robot_faulted);

  r = s.handle_event(ev::MenuSelect{"r1", MenuItem::release});
  ASSERT_TRUE(std::holds_alternative<resp::Rejected>(r));
  EXPECT_EQ(std::get<resp::Rejected>(r).reason, RejectReason::not_acknowledgeable);

  s.inject_failure("r1", sim::FailureFlag::gps, false);
  run_for(s, 15.0);
  r = s.handle_event(ev::MenuSelect{"r1", MenuItem::release});
  ASSERT_TRUE(std::holds_alternative<resp::Dispatched>(r));
  EXPECT_EQ(std::get<resp::Dispatched>(r).commands, (std::vector<sim::RoboticCommand>{sim::cmd::ReleaseAnchor{}}));
  EXPECT_EQ(s.guard().status("r1").state, guard::State::nominal);
  s.advance(1.0);
  EXPECT_FALSE(s.world().robot("r1").anchored);
}

TEST(Interpreter, NewPlanPreemptsOld) {
  auto s = session_on(chain_map().shared());
  s.add_robot({"r1", at(s.map(), "A")});
  s.handle_event(ev::DragRobot{"r1", at(s.map(), "C")});
  s.handle_event(ev::PlaceRobot{"r1"});
  run_for(s, 20.0);
  s.handle_event(ev::MenuSelect{"r1", MenuItem::anchor});
  s.advance(1.0);
  EXPECT_TRUE(s.world().robot("r1").anchored);
  EXPECT_EQ(s.registry().at("r1").pending_commands, 0u);
}

TEST(Interpreter, ParkMenuGoesToNearestTerminal) {
  auto s = session_on(chain_map().shared());
  s.add_robot({"r1", at(s.map(), "A")});
  const auto r = s.handle_event(ev::MenuSelect{"r1", MenuItem::park});
  ASSERT_TRUE(std::holds_alternative<resp::Dispatched>(r));
  const auto& cmds = std::get<resp::Dispatched>(r).commands;
  EXPECT_EQ(cmds.back(), sim::RoboticCommand(sim::cmd::Park{"F"}));
  run_until_idle(s, "r1");
  EXPECT_EQ(s.world().robot("r1").parked_at, "F");
}

// --- optimizer ------------------------------------------------------------------

namespace {

// P_near is 100 m east by route; P_far is closer in a straight line but 300 m
// away along its flow.
MapBuilder two_parking_map() {
  const GeoCoordinate a{45.0, 7.0, 4.0};
  const double h = std::sqrt(150.0 * 150.0 - 30.0 * 30.0);
  MapBuilder b("two-parking");
  b.region("R", 44.98, 6.98, 45.02, 7.02, 2000)
      .landmark("A", a)
      .landmark("P_near", offset(a, 100.0, 0.0), mdl::LandmarkKind::parking_area)
      .landmark("V", offset(a, -30.0, h))
      .landmark("P_far", offset(a, -60.0, 0.0), mdl::LandmarkKind::parking_area)
      .landmark("F", offset(a, 0.0, -500.0), mdl::LandmarkKind::fuel_rendezvous_terminal)
      .flow("to_near", {"A", "P_near"})
      .flow("to_far", {"A", "V", "P_far"});
  return b;
}

}  // namespace

TEST(Optimizer, PicksCheapestRouteNotNearestPoint) {
  const auto doc = two_parking_map().build();
  EXPECT_NEAR(mdl::plan_route(doc, "A", "P_near").cost_m, 100.0, 0.5);
  EXPECT_NEAR(mdl::plan_route(doc, "A", "P_far").cost_m, 300.0, 0.5);
  sim::RobotState robot;
  robot.position = at(doc, "A");
  EXPECT_EQ(agent::default_optimizer(doc, robot), "P_near");
}

TEST(Optimizer, NoParkingAreaRaisesNoCandidate) {
  const auto doc = chain_map().build();
  sim::RobotState robot;
  robot.position = at(doc, "A");
  EXPECT_THROW(agent::default_optimizer(doc, robot), agent::NoCandidate);

  auto s = session_on(chain_map().shared());
  s.add_robot({"r1", at(s.map(), "A")});
  const auto r = s.handle_event(ev::MenuSelect{"r1", MenuItem::compute_optimal_flow});
  ASSERT_TRUE(std::holds_alternative<resp::Rejected>(r));
  EXPECT_EQ(std::get<resp::Rejected>(r).reason, RejectReason::no_candidate);
}

TEST(Optimizer, MenuDispatchesToSuggestion) {
  auto s = session_on(two_parking_map().shared());
  s.add_robot({"r1", at(s.map(), "A")});
  const auto r = s.handle_event(ev::MenuSelect{"r1", MenuItem::compute_optimal_flow});
  ASSERT_TRUE(std::holds_alternative<resp::Dispatched>(r));
  EXPECT_EQ(move_targets(std::get<resp::Dispatched>(r)).back(), at(s.map(), "P_near"));
}

TEST(Optimizer, ParkingAreaInsideAFlowIsReachedAlongIt) {
  // P is an interior waypoint of F_DC, not an endpoint of any flow.
  auto s = session_on(five_node_map());
  s.add_robot({"r1", at(s.map(), "A")});
  s.add_robot({"r2", at(s.map(), "D")});
  EXPECT_EQ(agent::default_optimizer(s.map(), s.world().robot("r1")), "P");
  auto r = s.handle_event(ev::MenuSelect{"r1", MenuItem::compute_optimal_flow});
  ASSERT_TRUE(std::holds_alternative<resp::Dispatched>(r));
  EXPECT_EQ(move_targets(std::get<resp::Dispatched>(r)), (std::vector{at(s.map(), "D"), at(s.map(), "P")}));
  r = s.handle_event(ev::MenuSelect{"r2", MenuItem::compute_optimal_flow});
  ASSERT_TRUE(std::holds_alternative<resp::Dispatched>(r));
  EXPECT_EQ(move_targets(std::get<resp::Dispatched>(r)), std::vector{at(s.map(), "P")});
  run_until_idle(s, "r1");
  EXPECT_LE(planar_distance_m(s.world().robot("r1").position, at(s.map(), "P")), s.world().config().arrival_radius_m);
}

// --- poller -----------------------------------------------------------------------

TEST(Poller, FourPollsPerMinuteByDefault) {
  auto s = session_on(chain_map().shared());
  Counting obs;
  s.set_observer(&obs);
  s.add_robot({"r1", at(s.map(), "A")});
  run_for(s, 60.0);
  EXPECT_EQ(s.poll_count(), 4u);
  EXPECT_EQ(obs.fixes, 4);
}

TEST(Poller, OverrideChangesTheRate) {
  agent::AgentConfig config;
  config.poller.overrides["fast"] = 5.0;
  auto s = session_on(chain_map().shared(), config);
  Counting obs;
  s.set_observer(&obs);
  s.add_robot({"fast", at(s.map(), "A")});
  run_for(s, 60.0);
  EXPECT_EQ(obs.polls, 12);
}

TEST(Poller, PollsLandOnTheInterval) {
  auto s = session_on(chain_map().shared());
  std::vector<double> times;
  struct : agent::SessionObserver {
    std::vector<double>* times;
    void on_gps_fix(const sim::GpsFix& f) override { times->push_back(f.timestamp); }
  } obs;
  obs.times = &times;
  s.set_observer(&obs);
  s.add_robot({"r1", at(s.map(), "A")});
  run_for(s, 150.0);
  std::vector<double> expected;
  for (int k = 1; k <= 10; ++k) expected.push_back(15.0 * k);
  EXPECT_EQ(times, expected);
}

TEST(Poller, GpsFailedRobotKeepsLastFix) {
  auto s = session_on(chain_map(200.0, {0.5, 0.0}).shared());
  Counting obs;
  s.set_observer(&obs);
  s.add_robot({"r1", offset(at(s.map(), "A"), 20.0, 0.0)});
  s.inject_failure("r1", sim::FailureFlag::gps, true);
  const auto before = s.registry().at("r1").state;
  run_for(s, 60.0);
  const auto& after = s.registry().at("r1").state;
  EXPECT_EQ(after.position, before.position);
  EXPECT_EQ(after.last_fix_time, before.last_fix_time);
  EXPECT_EQ(obs.fixes, 0);
  EXPECT_EQ(obs.polls, 4);
  EXPECT_EQ(obs.gps_unavailable, 4);
}

TEST(Poller, RegistryPositionIsLastFix) {
  auto s = session_on(chain_map(200.0, {0.5, 0.0}).shared());
  std::optional<sim::GpsFix> last;
  struct : agent::SessionObserver {
    std::optional<sim::GpsFix>* last;
    void on_gps_fix(const sim::GpsFix& f) override { *last = f; }
  } obs;
  obs.last = &last;
  s.set_observer(&obs);
  s.add_robot({"r1", offset(at(s.map(), "A"), 20.0, 0.0)});
  run_for(s, 50.0);
  ASSERT_TRUE(last.has_value());
  EXPECT_EQ(s.registry().at("r1").state.position, last->position);
  // Truth has drifted on since the t=45 fix.
  EXPECT_NE(s.world().robot("r1").position, last->position);
}

TEST(Poller, InvalidIntervalsRejected) {
  agent::AgentConfig config;
  config.poller.interval = 0.0;
  EXPECT_THROW(session_on(chain_map().shared(), config), std::invalid_argument);
  auto s = session_on(chain_map().shared());
  EXPECT_THROW(s.add_robot({"r1", at(s.map(), "A")}, 120.0), std::invalid_argument);  // beyond comm_timeout
}

// --- guard integration ----------------------------------------------------------

TEST(Runtime, CommLossAnchorsByCommTimeout) {
  auto s = session_on(chain_map().shared());
  s.add_robot({"r1", at(s.map(), "A")});
  s.inject_failure("r1", sim::FailureFlag::communication, true);
  run_for(s, 44.0);
  EXPECT_EQ(s.guard().status("r1").state, guard::State::nominal);
  run_for(s, 2.0);
  EXPECT_EQ(s.guard().status("r1").state, guard::State::anchoring);
}

TEST(Runtime, GpsLossAnchorsThenAutoParksAtTerminal) {
  const auto map = five_node_map();
  auto s = session_on(map);
  Counting obs;
  s.set_observer(&obs);
  s.add_robot({"r1", at(*map, "A")});
  s.inject_failure("r1", sim::FailureFlag::gps, true);
  run_for(s, 16.0);
  EXPECT_EQ(s.guard().status("r1").state, guard::State::anchored);
  EXPECT_TRUE(s.world().robot("r1").anchored);
  run_for(s, 300.0);
  EXPECT_EQ(s.guard().status("r1").state, guard::State::auto_parking);
  run_for(s, 1500.0);
  EXPECT_EQ(s.guard().status("r1").state, guard::State::parked);
  EXPECT_EQ(s.world().robot("r1").parked_at, "E");
  int anchors = 0;
  for (const auto& [id, c] : obs.commands) anchors += std::holds_alternative<sim::cmd::Anchor>(c) ? 1 : 0;
  EXPECT_EQ(anchors, 1);
}

TEST(Runtime, RefusedAnchorWithPropulsionLossEndsInDistress) {
  auto s = session_on(chain_map().shared());
  s.add_robot({"r1", at(s.map(), "A"), 1.0, false});
  s.inject_failure("r1", sim::FailureFlag::propulsion, true);
  run_for(s, 15.0);
  EXPECT_EQ(s.guard().status("r1").state, guard::State::distress);
}

TEST(Runtime, AcknowledgeRequiresClearedFlags) {
  auto s = session_on(chain_map().shared());
  s.add_robot({"r1", at(s.map(), "A")});
  s.inject_failure("r1", sim::FailureFlag::sensor_power, true);
  run_for(s, 15.0);
  EXPECT_THROW(s.acknowledge("r1", "op"), guard::NotAcknowledgeable);
  s.inject_failure("r1", sim::FailureFlag::sensor_power, false);
  run_for(s, 15.0);
  EXPECT_EQ(s.acknowledge("r1", "op").to, guard::State::nominal);
  EXPECT_THROW(s.acknowledge("ghost", "op"), sim::UnknownRobot);
}

TEST(Runtime, SameInputsSameSession) {
  const auto run = [] {
    sim::SimConfig sc;
    sc.gps_noise_m = 1.5;
    sc.seed = 3;
    auto s = session_on(five_node_map(), {}, sc);
    s.add_robot({"r1", at(s.map(), "A")});
    s.add_robot({"r2", at(s.map(), "D")});
    s.handle_event(ev::DragRobot{"r1", at(s.map(), "C")});
    s.handle_event(ev::PlaceRobot{"r1"});
    run_for(s, 100.0);
    s.inject_failure("r2", sim::FailureFlag::gps, true);
    run_for(s, 400.0);
    return std::make_pair(s.world(), s.registry());
  };
  const auto a = run();
  const auto b = run();
  EXPECT_TRUE(a.first.same_state(b.first));
  EXPECT_EQ(a.second, b.second);
}

TEST(Runtime, AnnotationsFollowTheRobot) {
  auto s = session_on(five_node_map());
  s.add_robot({"r1", offset(at(s.map(), "A"), 30.0, 5.0)});
  s.add_robot({"far", {45.009, 6.992, 1.0}});
  const auto notes = s.annotations();
  ASSERT_EQ(notes.size(), 2u);
  EXPECT_EQ(notes[0].robot_id, "far");
  EXPECT_FALSE(notes[0].active_flow.has_value());
  EXPECT_EQ(notes[1].active_flow, "F_AB");
  EXPECT_EQ(notes[1].lookahead_landmark, "W1");
}

TEST(Runtime, FuzzedSessionsKeepTheSafetyInvariants) {
  const auto map = five_node_map();
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const auto out = run_fuzz_script(map, seed, 400.0);
    ASSERT_TRUE(out.first_violation.empty()) << "seed " << seed << ": " << out.first_violation;
    EXPECT_EQ(out.anchoring_entries, out.guard_anchor_commands) << "seed " << seed;
  }
}
