#pragma once

// Shared test fixtures and oracles. Everything here is written against the
// public interfaces only; the oracles deliberately avoid reusing the code
// paths they check.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "riverhelm/agent.hpp"
#include "riverhelm/guard.hpp"
#include "riverhelm/mdl.hpp"

namespace rh_test {

using namespace riverhelm;

std::filesystem::path corpus_dir();
std::string read_text(const std::filesystem::path& p);

/// The five-node reach from the valid corpus.
std::shared_ptr<const mdl::MapDocument> five_node_map();

/// Point displaced from origin by metres east/north.
GeoCoordinate offset(const GeoCoordinate& origin, double east_m, double north_m);

class MapBuilder {
 public:
  explicit MapBuilder(std::string id = "test-map");

  MapBuilder& region(std::string id, double min_lat, double min_lon, double max_lat, double max_lon,
                     std::uint64_t scale);
  MapBuilder& landmark(std::string id, GeoCoordinate p, mdl::LandmarkKind kind = mdl::LandmarkKind::marker);
  MapBuilder& flow(std::string id, std::vector<std::string> waypoints, Vec2 v_from = {}, Vec2 v_to = {});

  mdl::MapDocument build() const { return doc_; }
  std::shared_ptr<const mdl::MapDocument> shared() const { return std::make_shared<const mdl::MapDocument>(doc_); }

 private:
  mdl::MapDocument doc_;
};

/// A -> B -> C chain heading east, `spacing_m` apart, with a fuel terminal F
/// south of C reachable via C -> F and a 1:5000 region over everything.
MapBuilder chain_map(double spacing_m = 200.0, Vec2 flow = {});

// ---------------------------------------------------------------------------
// Routing oracle
// ---------------------------------------------------------------------------

struct EnumeratedRoute {
  bool reachable = false;
  double cost = 0.0;
  std::size_t paths = 0;  // simple paths enumerated
};

/// Minimum over every simple path from -> to of the forward-summed flow lengths.
EnumeratedRoute enumerate_min_route(const mdl::MapDocument& doc, const std::string& from, const std::string& to);

/// Random directed flow graph over `nodes` graph nodes (plus intermediate
/// waypoint landmarks), valid per the MDL rules.
mdl::MapDocument random_flow_graph(std::mt19937_64& rng, int nodes);

// ---------------------------------------------------------------------------
// Guard truth table
// ---------------------------------------------------------------------------

struct FlagCombo {
  bool communication = false;
  bool gps = false;
  bool sensor_power = false;
  bool propulsion = false;

  bool any() const { return communication || gps || sensor_power || propulsion; }
  std::string describe() const;
};

std::vector<FlagCombo> all_flag_combos();

/// Expected terminal state, written from the escalation rules alone.
guard::State truth_table_oracle(const FlagCombo& flags, bool anchor_confirmed, bool timeout_reached);

/// Drives a FaultGuard the way the runtime would: flags raised at t=0,
/// polls and ticks every 15 s, anchor outcome reported only over a working
/// link. Returns the state at the horizon.
guard::State drive_guard(const FlagCombo& flags, bool anchor_confirmed, bool timeout_reached,
                         const guard::GuardConfig& config = {});

// ---------------------------------------------------------------------------
// Session fuzzing
// ---------------------------------------------------------------------------

struct FuzzOutcome {
  std::size_t steps = 0;
  std::size_t auto_parking_entries = 0;
  std::size_t unsafe_auto_parking = 0;   // entered with communication/propulsion raised
  std::size_t held_robot_steps = 0;      // robot-steps that began anchored or parked
  std::size_t moved_while_held = 0;
  std::size_t anchoring_entries = 0;
  std::size_t guard_anchor_commands = 0;
  std::size_t replay_mismatches = 0;     // guard status != replay(history)
  std::size_t fuel_violations = 0;
  std::size_t ui_events = 0;
  std::size_t parked_states = 0;
  std::string first_violation;
};

FuzzOutcome run_fuzz_script(std::shared_ptr<const mdl::MapDocument> map, std::uint64_t seed,
                            double horizon_s = 600.0);

}  // namespace rh_test
