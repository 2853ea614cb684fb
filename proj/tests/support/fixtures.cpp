#include "fixtures.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#ifndef RIVERHELM_CORPUS_DIR
#error "RIVERHELM_CORPUS_DIR must be defined"
#endif

namespace rh_test {

std::filesystem::path corpus_dir() { return RIVERHELM_CORPUS_DIR; }

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::shared_ptr<const mdl::MapDocument> five_node_map() {
  static const auto map = std::make_shared<const mdl::MapDocument>(
      mdl::parse_mdl(read_text(corpus_dir() / "valid" / "five_node.mdl.xml")).document);
  return map;
}

GeoCoordinate offset(const GeoCoordinate& origin, double east_m, double north_m) {
  return displace(origin, Vec2{east_m, north_m});
}

MapBuilder::MapBuilder(std::string id) {
  doc_.id = std::move(id);
  doc_.name = "fixture";
}

MapBuilder& MapBuilder::region(std::string id, double min_lat, double min_lon, double max_lat, double max_lon,
                               std::uint64_t scale) {
  doc_.scale_regions.push_back({std::move(id), {min_lat, min_lon, max_lat, max_lon}, scale});
  return *this;
}

MapBuilder& MapBuilder::landmark(std::string id, GeoCoordinate p, mdl::LandmarkKind kind) {
  mdl::Landmark l;
  l.id = std::move(id);
  l.kind = kind;
  l.position = p;
  doc_.landmarks.push_back(std::move(l));
  std::sort(doc_.landmarks.begin(), doc_.landmarks.end(),
            [](const mdl::Landmark& a, const mdl::Landmark& b) { return a.id < b.id; });
  return *this;
}

MapBuilder& MapBuilder::flow(std::string id, std::vector<std::string> waypoints, Vec2 v_from, Vec2 v_to) {
  mdl::FlowSegment f;
  f.id = std::move(id);
  f.from_id = waypoints.empty() ? "" : waypoints.front();
  f.to_id = waypoints.empty() ? "" : waypoints.back();
  f.waypoint_ids = std::move(waypoints);
  f.v_from = v_from;
  f.v_to = v_to;
  doc_.flows.push_back(std::move(f));
  return *this;
}

MapBuilder chain_map(double spacing_m, Vec2 flow) {
  const GeoCoordinate a{45.0, 7.0, 5.0};
  MapBuilder b("chain");
  b.region("R", 44.98, 6.98, 45.02, 7.05, 5000)
      .landmark("A", a)
      .landmark("B", offset(a, spacing_m, 0.0))
      .landmark("C", offset(a, 2 * spacing_m, 0.0))
      .landmark("F", offset(a, 2 * spacing_m, -spacing_m), mdl::LandmarkKind::fuel_rendezvous_terminal)
      .flow("AB", {"A", "B"}, flow, flow)
      .flow("BC", {"B", "C"}, flow, flow)
      .flow("CF", {"C", "F"}, flow, flow);
  return b;
}

// ---------------------------------------------------------------------------

EnumeratedRoute enumerate_min_route(const mdl::MapDocument& doc, const std::string& from, const std::string& to) {
  EnumeratedRoute best;
  if (from == to) {
    best.reachable = true;
    best.paths = 1;
    return best;
  }
  std::map<std::string, std::vector<std::pair<std::string, double>>> out;
  for (const auto& f : doc.flows) out[f.from_id].emplace_back(f.to_id, mdl::flow_length_m(doc, f));

  std::set<std::string> on_path{from};
  std::vector<double> legs;
  std::function<void(const std::string&)> dfs = [&](const std::string& node) {
    if (node == to) {
      double cost = 0.0;
      for (double l : legs) cost += l;
      ++best.paths;
      if (!best.reachable || cost < best.cost) {
        best.reachable = true;
        best.cost = cost;
      }
      return;
    }
    const auto it = out.find(node);
    if (it == out.end()) return;
    for (const auto& [next, len] : it->second) {
      if (on_path.count(next) != 0) continue;
      on_path.insert(next);
      legs.push_back(len);
      dfs(next);
      legs.pop_back();
      on_path.erase(next);
    }
  };
  dfs(from);
  return best;
}

mdl::MapDocument random_flow_graph(std::mt19937_64& rng, int nodes) {
  std::uniform_real_distribution<double> coord(-1500.0, 1500.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const GeoCoordinate origin{45.0, 7.0, 0.0};
  MapBuilder b("random");
  b.region("R", 44.9, 6.9, 45.1, 7.1, 10000);
  for (int i = 0; i < nodes; ++i) {
    b.landmark("N" + std::to_string(i), offset(origin, coord(rng), coord(rng)),
               i == 0 ? mdl::LandmarkKind::fuel_rendezvous_terminal : mdl::LandmarkKind::marker);
  }
  int flows = 0;
  int vias = 0;
  const double density = 0.2 + 0.3 * unit(rng);
  for (int i = 0; i < nodes; ++i) {
    for (int j = 0; j < nodes; ++j) {
      if (i == j || unit(rng) > density) continue;
      // Occasionally a parallel flow with a different bend.
      const int copies = unit(rng) < 0.15 ? 2 : 1;
      for (int c = 0; c < copies; ++c) {
        std::vector<std::string> wps{"N" + std::to_string(i)};
        const int extra = static_cast<int>(unit(rng) * 3.0);
        for (int k = 0; k < extra; ++k) {
          const auto id = "V" + std::to_string(vias++);
          b.landmark(id, offset(origin, coord(rng), coord(rng)));
          wps.push_back(id);
        }
        wps.push_back("N" + std::to_string(j));
        b.flow("F" + std::to_string(flows++), std::move(wps), {unit(rng), unit(rng)}, {unit(rng), unit(rng)});
      }
    }
  }
  return b.build();
}

// ---------------------------------------------------------------------------

std::string FlagCombo::describe() const {
  std::string s;
  const auto add = [&s](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += "+";
    s += name;
  };
  add(communication, "communication");
  add(gps, "gps");
  add(sensor_power, "sensor_power");
  add(propulsion, "propulsion");
  return s.empty() ? "none" : s;
}

std::vector<FlagCombo> all_flag_combos() {
  std::vector<FlagCombo> out;
  for (int bits = 0; bits < 16; ++bits) {
    out.push_back({(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0, (bits & 8) != 0});
  }
  return out;
}

guard::State truth_table_oracle(const FlagCombo& flags, bool anchor_confirmed, bool timeout_reached) {
  using guard::State;
  if (!flags.any()) return State::nominal;
  // A silent robot never reports its anchor, so anchoring times out with no
  // link to command a park.
  if (flags.communication) return State::distress;
  if (!anchor_confirmed) return flags.propulsion ? State::distress : State::auto_parking;
  if (timeout_reached && !flags.propulsion) return State::auto_parking;
  return State::anchored;
}

guard::State drive_guard(const FlagCombo& flags, bool anchor_confirmed, bool timeout_reached,
                         const guard::GuardConfig& config) {
  constexpr double kPoll = 15.0;
  guard::FaultGuard g(config);
  g.add_robot("r", 0.0);
  const double escalation = config.comm_timeout + config.anchor_timeout + 2 * kPoll;
  const double horizon = timeout_reached ? kPoll + config.park_timeout + 2 * kPoll
                                         : std::max(escalation, kPoll + config.park_timeout - 2 * kPoll);

  std::function<void(const std::vector<guard::ExceptionEvent>&, double)> handle =
      [&](const std::vector<guard::ExceptionEvent>& events, double now) {
        for (const auto& e : events) {
          if (e.action != guard::Action::anchor || flags.communication) continue;
          handle(g.observe("r", anchor_confirmed ? guard::Observation::anchor_confirmed
                                                 : guard::Observation::anchor_refused,
                           now),
                 now);
        }
      };

  for (double t = kPoll; t <= horizon; t += kPoll) {
    if (!flags.communication) {
      std::vector<guard::Observation> obs;
      obs.push_back(flags.gps ? guard::Observation::gps_failed : guard::Observation::gps_ok);
      if (flags.sensor_power) obs.push_back(guard::Observation::sensor_power_failed);
      if (flags.propulsion) obs.push_back(guard::Observation::propulsion_failed);
      if (!flags.any()) obs.push_back(guard::Observation::flags_cleared);
      for (auto o : obs) handle(g.observe("r", o, t), t);
    }
    handle(g.tick(t), t);
  }
  return g.status("r").state;
}

// ---------------------------------------------------------------------------

namespace {

class FuzzObserver final : public agent::SessionObserver {
 public:
  explicit FuzzObserver(FuzzOutcome& out) : out_(out) {}

  void on_exception_event(const guard::ExceptionEvent& e) override {
    if (e.to == guard::State::auto_parking && e.from != guard::State::auto_parking) {
      ++out_.auto_parking_entries;
      if (e.causes.contains(guard::Cause::communication) || e.causes.contains(guard::Cause::propulsion)) {
        ++out_.unsafe_auto_parking;
        violation("AutoParking entered by " + e.robot_id + " at t=" + std::to_string(e.timestamp) +
                  " with unsafe causes");
      }
    }
    if (e.to == guard::State::anchoring && e.from != guard::State::anchoring) ++out_.anchoring_entries;
    if (e.to == guard::State::parked) ++out_.parked_states;
  }

  void on_command(const std::string&, const sim::RoboticCommand& c, const sim::CommandReply&,
                  agent::CommandOrigin origin) override {
    if (origin == agent::CommandOrigin::guard && std::holds_alternative<sim::cmd::Anchor>(c)) {
      ++out_.guard_anchor_commands;
    }
  }

  void violation(const std::string& what) {
    if (out_.first_violation.empty()) out_.first_violation = what;
  }

 private:
  FuzzOutcome& out_;
};

}  // namespace

FuzzOutcome run_fuzz_script(std::shared_ptr<const mdl::MapDocument> map, std::uint64_t seed, double horizon_s) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto pick = [&](std::size_t n) { return static_cast<std::size_t>(unit(rng) * static_cast<double>(n)) % n; };

  sim::SimConfig sc;
  sc.seed = seed;
  sc.gps_noise_m = unit(rng) < 0.3 ? 2.0 : 0.0;
  agent::AgentConfig ac;
  ac.poller.interval = unit(rng) < 0.5 ? 15.0 : 5.0 + 10.0 * unit(rng);
  ac.guard.comm_timeout = std::max(ac.poller.interval, 20.0 + 40.0 * unit(rng));
  ac.guard.anchor_timeout = 20.0 + 60.0 * unit(rng);
  ac.guard.park_timeout = 30.0 + 270.0 * unit(rng);

  FuzzOutcome out;
  FuzzObserver observer(out);
  agent::Session session(sim::World(map, sc), ac);
  session.set_observer(&observer);

  double lat_lo = 90, lat_hi = -90, lon_lo = 180, lon_hi = -180;
  for (const auto& l : map->landmarks) {
    lat_lo = std::min(lat_lo, l.position.lat);
    lat_hi = std::max(lat_hi, l.position.lat);
    lon_lo = std::min(lon_lo, l.position.lon);
    lon_hi = std::max(lon_hi, l.position.lon);
  }
  const auto random_point = [&] {
    const double pad = 0.002;
    return GeoCoordinate{lat_lo - pad + (lat_hi - lat_lo + 2 * pad) * unit(rng),
                         lon_lo - pad + (lon_hi - lon_lo + 2 * pad) * unit(rng), 40.0 * unit(rng)};
  };

  const std::size_t robots = 1 + pick(3);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < robots; ++i) {
    sim::RobotSpec spec;
    spec.id = "r" + std::to_string(i);
    spec.position = unit(rng) < 0.6 ? map->landmarks[pick(map->landmarks.size())].position : random_point();
    spec.fuel = 0.05 + 0.95 * unit(rng);
    spec.anchor_operational = unit(rng) < 0.75;
    session.add_robot(spec);
    ids.push_back(spec.id);
  }

  const sim::FailureFlag flags[] = {sim::FailureFlag::communication, sim::FailureFlag::gps,
                                    sim::FailureFlag::sensor_power, sim::FailureFlag::propulsion};
  const agent::MenuItem items[] = {agent::MenuItem::park, agent::MenuItem::compute_optimal_flow,
                                   agent::MenuItem::anchor, agent::MenuItem::release, agent::MenuItem::drag_place};

  std::map<std::string, double> last_fuel;
  for (const auto& id : ids) last_fuel[id] = session.world().robot(id).fuel;

  const double dt = 1.0;
  while (session.now() < horizon_s) {
    // Random operator and environment activity between steps.
    if (unit(rng) < 0.08) {
      const auto& id = ids[pick(ids.size())];
      const double r = unit(rng);
      if (r < 0.30) {
        const auto flag = flags[pick(4)];
        const bool current = session.world().robot(id).failures.get(flag);
        // Failures clear more often than they appear, so episodes end.
        session.inject_failure(id, flag, current ? unit(rng) < 0.3 : unit(rng) < 0.6);
      } else if (r < 0.38) {
        session.set_anchor_operational(id, unit(rng) < 0.7);
      } else if (r < 0.55) {
        ++out.ui_events;
        session.handle_event(agent::ev::DragRobot{id, random_point()});
        if (unit(rng) < 0.8) session.handle_event(agent::ev::PlaceRobot{id});
      } else if (r < 0.75) {
        ++out.ui_events;
        session.handle_event(agent::ev::MenuSelect{id, items[pick(5)]});
      } else if (r < 0.82) {
        ++out.ui_events;
        session.handle_event(agent::ev::ClickOnRobot{id});
      } else if (r < 0.90) {
        ++out.ui_events;
        session.handle_event(agent::ev::PlaceRobot{id});
      } else {
        try {
          session.acknowledge(id, "fuzz");
        } catch (const guard::NotAcknowledgeable&) {
        }
      }
    }

    std::map<std::string, std::pair<bool, GeoCoordinate>> before;
    for (const auto& id : ids) {
      const auto& s = session.world().robot(id);
      before[id] = {s.anchored || s.parked_at.has_value(), s.position};
    }
    session.advance(dt);
    ++out.steps;
    for (const auto& id : ids) {
      const auto& s = session.world().robot(id);
      if (before[id].first) {
        ++out.held_robot_steps;
        if (!(s.position == before[id].second)) {
          ++out.moved_while_held;
          observer.violation(id + " moved while anchored/parked at t=" + std::to_string(session.now()));
        }
      }
      if (s.fuel > last_fuel[id] || s.fuel < 0.0) {
        ++out.fuel_violations;
        observer.violation(id + " fuel increased or went negative");
      }
      last_fuel[id] = s.fuel;
    }
  }

  for (const auto& id : ids) {
    const auto& g = session.guard();
    if (!(guard::replay(g.initial_status(id), g.history(id)) == g.status(id))) {
      ++out.replay_mismatches;
      observer.violation("guard history of " + id + " does not replay to its status");
    }
  }
  return out;
}

}  // namespace rh_test
