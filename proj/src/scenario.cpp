#include "riverhelm/scenario.hpp"

#include <cmath>
#include <istream>
#include <optional>

namespace riverhelm::scenario {

std::vector<Step> parse_script(std::istream& in) {
  std::vector<Step> out;
  std::string line;
  std::size_t lineno = 0;
  double last_t = 0.0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    json j;
    try {
      j = codec::parse(line);
    } catch (const codec::CodecError& e) {
      throw ScenarioError(lineno, e.what());
    }
    if (!j.is_object()) throw ScenarioError(lineno, "expected a JSON object");
    if (!j.contains("action") || !j["action"].is_string()) throw ScenarioError(lineno, "missing 'action'");
    Step s;
    s.line = lineno;
    s.action = j["action"].get<std::string>();
    if (j.contains("t")) {
      if (!j["t"].is_number()) throw ScenarioError(lineno, "'t' must be a number");
      s.t = j["t"].get<double>();
    } else {
      s.t = last_t;
    }
    if (!(s.t >= 0.0) || !std::isfinite(s.t)) throw ScenarioError(lineno, "'t' must be a non-negative number");
    if (s.t < last_t) throw ScenarioError(lineno, "timestamps must not decrease");
    last_t = s.t;
    s.body = std::move(j);
    out.push_back(std::move(s));
  }
  return out;
}

json Report::to_json() const {
  json checks_j = json::array();
  for (const auto& c : checks) {
    checks_j.push_back({{"line", c.line}, {"action", c.action}, {"ok", c.ok}, {"message", c.message}});
  }
  return {{"passed", passed},     {"final_time", final_time}, {"steps", steps},
          {"polls", polls},       {"checks", checks_j},       {"registry", codec::encode(registry)}};
}

namespace {

struct Settings {
  sim::SimConfig sim;
  agent::AgentConfig agent;
  double sim_step = 1.0;
};

double num(const Step& s, const char* key) {
  const auto& v = s.body.at(key);
  if (!v.is_number()) throw ScenarioError(s.line, std::string("'") + key + "' must be a number");
  return v.get<double>();
}

std::string str(const Step& s, const char* key) {
  if (!s.body.contains(key) || !s.body[key].is_string()) {
    throw ScenarioError(s.line, std::string("'") + key + "' must be a string");
  }
  return s.body[key].get<std::string>();
}

void apply_config(const Step& s, Settings& cfg) {
  for (const auto& [key, value] : s.body.items()) {
    if (key == "t" || key == "action") continue;
    const char* k = key.c_str();
    if (key == "poll_interval") {
      cfg.agent.poller.interval = num(s, k);
    } else if (key == "comm_timeout") {
      cfg.agent.guard.comm_timeout = num(s, k);
    } else if (key == "anchor_timeout") {
      cfg.agent.guard.anchor_timeout = num(s, k);
    } else if (key == "park_timeout") {
      cfg.agent.guard.park_timeout = num(s, k);
    } else if (key == "sim_step") {
      cfg.sim_step = num(s, k);
    } else if (key == "gps_noise_m") {
      cfg.sim.gps_noise_m = num(s, k);
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) throw ScenarioError(s.line, "'seed' must be a non-negative integer");
      cfg.sim.seed = value.get<std::uint64_t>();
    } else if (key == "snap_radius_m") {
      cfg.agent.snap_radius_m = num(s, k);
    } else if (key == "move_speed_mps") {
      cfg.agent.move_speed_mps = num(s, k);
    } else {
      throw ScenarioError(s.line, "unknown config key '" + key + "'");
    }
  }
  if (!(cfg.sim_step > 0.0) || !std::isfinite(cfg.sim_step)) throw ScenarioError(s.line, "sim_step must be positive");
}

GeoCoordinate resolve_point(const Step& s, const mdl::MapDocument& map, const json& at) {
  if (at.is_string()) {
    const auto* l = map.find_landmark(at.get<std::string>());
    if (l == nullptr) throw ScenarioError(s.line, "unknown landmark '" + at.get<std::string>() + "'");
    return l->position;
  }
  if (at.is_object() && at.contains("landmark")) return resolve_point(s, map, at["landmark"]);
  try {
    return codec::decode_geo(at);
  } catch (const codec::CodecError& e) {
    throw ScenarioError(s.line, e.what());
  }
}

class Runner {
 public:
  Runner(std::shared_ptr<const mdl::MapDocument> map, log::EventLog* log) : map_(std::move(map)), log_(log) {}

  Report run(const std::vector<Step>& steps) {
    for (const auto& s : steps) {
      if (s.action == "config") {
        if (session_) throw ScenarioError(s.line, "config must precede every other action");
        apply_config(s, settings_);
        continue;
      }
      ensure_session(s);
      advance_to(s.t);
      try {
        perform(s);
      } catch (const json::exception& e) {
        throw ScenarioError(s.line, std::string("malformed field: ") + e.what());
      }
    }
    if (!session_) ensure_session(Step{});
    report_.final_time = session_->now();
    report_.steps = session_->steps();
    report_.polls = session_->poll_count();
    report_.registry = session_->registry();
    if (log_ != nullptr) log::record_checkpoint(*log_, *session_);
    return report_;
  }

 private:
  void ensure_session(const Step& s) {
    if (session_) return;
    try {
      session_ = std::make_unique<agent::Session>(sim::World(map_, settings_.sim), settings_.agent);
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(s.line, e.what());
    }
    if (log_ != nullptr) {
      recorder_ = std::make_unique<log::Recorder>(*log_, *session_);
      session_->set_observer(recorder_.get());
      log::record_session(*log_, *session_, settings_.sim_step);
    }
  }

  void advance_to(double t) {
    // Tolerance keeps t = k * sim_step from needing an extra step.
    while (session_->now() < t - 1e-9) session_->advance(settings_.sim_step);
  }

  void check(const Step& s, bool ok, std::string message) {
    report_.checks.push_back({s.line, s.action, ok, std::move(message)});
    if (!ok) report_.passed = false;
  }

  const std::string& robot(const Step& s) {
    robot_ = str(s, "robot");
    if (!session_->world().has_robot(robot_)) throw ScenarioError(s.line, "unknown robot '" + robot_ + "'");
    return robot_;
  }

  void perform(const Step& s) {
    if (s.action == "spawn") {
      spawn(s);
    } else if (s.action == "event") {
      event(s);
    } else if (s.action == "acknowledge") {
      acknowledge(s);
    } else if (s.action == "inject_failure") {
      inject(s);
    } else if (s.action == "assert") {
      assertion(s);
    } else if (s.action == "await") {
      await(s);
    } else if (s.action == "end") {
    } else {
      throw ScenarioError(s.line, "unknown action '" + s.action + "'");
    }
  }

  void spawn(const Step& s) {
    sim::RobotSpec spec;
    spec.id = str(s, "robot");
    if (!s.body.contains("at")) throw ScenarioError(s.line, "spawn needs 'at'");
    spec.position = resolve_point(s, *map_, s.body["at"]);
    if (s.body.contains("fuel")) spec.fuel = num(s, "fuel");
    if (s.body.contains("anchor_operational")) spec.anchor_operational = s.body["anchor_operational"].get<bool>();
    std::optional<double> interval;
    if (s.body.contains("poll_interval")) interval = num(s, "poll_interval");
    try {
      session_->add_robot(spec, interval);
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(s.line, e.what());
    }
  }

  void event(const Step& s) {
    const auto id = robot(s);
    if (!s.body.contains("event") || !s.body["event"].is_object()) throw ScenarioError(s.line, "missing 'event'");
    json ej = s.body["event"];
    ej["robot"] = id;
    // Drag targets may name a landmark instead of spelling out coordinates.
    if (ej.contains("target") && (ej["target"].is_string() || ej["target"].contains("landmark"))) {
      ej["target"] = codec::encode(resolve_point(s, *map_, ej["target"]));
    }
    agent::UIEvent ev;
    try {
      ev = codec::decode_ui_event(ej);
    } catch (const codec::CodecError& e) {
      throw ScenarioError(s.line, e.what());
    }
    const auto response = session_->handle_event(ev);
    if (!s.body.contains("expect")) return;
    const auto expect = str(s, "expect");
    const auto rj = codec::encode(response);
    std::string got = rj["type"].get<std::string>();
    if (got == "Rejected") got += ":" + rj["reason"].get<std::string>();
    const bool ok = got == expect || got.rfind(expect + ":", 0) == 0;
    check(s, ok, "expected " + expect + ", got " + got);
  }

  void acknowledge(const Step& s) {
    const auto id = robot(s);
    const std::string op = s.body.contains("operator") ? str(s, "operator") : "operator";
    bool accepted = true;
    std::string message = "acknowledged";
    try {
      session_->acknowledge(id, op);
    } catch (const guard::NotAcknowledgeable& e) {
      accepted = false;
      message = e.what();
    }
    if (!s.body.contains("expect")) return;
    const auto expect = str(s, "expect");
    if (expect != "accepted" && expect != "rejected") {
      throw ScenarioError(s.line, "acknowledge expects 'accepted' or 'rejected'");
    }
    check(s, accepted == (expect == "accepted"), message);
  }

  // Advances until the robot has no pending commands (or reaches "state"),
  // failing the check after "timeout" simulated seconds.
  void await(const Step& s) {
    const auto id = robot(s);
    const double timeout = s.body.contains("timeout") ? num(s, "timeout") : 3600.0;
    std::optional<std::string> state;
    if (s.body.contains("state")) state = str(s, "state");
    const auto done = [&] {
      if (state) return guard::to_string(session_->guard().status(id).state) == *state;
      const auto& snap = session_->registry().at(id);
      return snap.pending_commands == 0 && !snap.navigating;
    };
    const double deadline = session_->now() + timeout;
    while (!done() && session_->now() < deadline - 1e-9) session_->advance(settings_.sim_step);
    check(s, done(), std::string(done() ? "reached" : "timed out waiting for") + " " +
                         (state ? "state " + *state : std::string("idle")) + " at t=" +
                         std::to_string(session_->now()));
  }

  void inject(const Step& s) {
    const auto id = robot(s);
    const auto flag = str(s, "flag");
    const bool value = s.body.contains("value") ? s.body["value"].get<bool>() : true;
    if (flag == "anchor") {
      session_->set_anchor_operational(id, !value);
    } else if (const auto f = sim::failure_flag_from_string(flag)) {
      session_->inject_failure(id, *f, value);
    } else {
      throw ScenarioError(s.line, "unknown failure flag '" + flag + "'");
    }
  }

  void assertion(const Step& s) {
    if (s.body.contains("polls")) {
      const auto want = s.body["polls"].get<std::uint64_t>();
      check(s, session_->poll_count() == want,
            "polls " + std::to_string(session_->poll_count()) + ", expected " + std::to_string(want));
    }
    if (!s.body.contains("robot")) return;
    const auto id = robot(s);
    const auto& truth = session_->world().robot(id);
    const auto& status = session_->guard().status(id);
    if (s.body.contains("state")) {
      const auto want = str(s, "state");
      const std::string got(guard::to_string(status.state));
      check(s, got == want, "state " + got + ", expected " + want);
    }
    if (s.body.contains("near")) {
      const auto& near = s.body["near"];
      const auto point = resolve_point(s, *map_, near);
      const double radius = near.contains("radius") ? near["radius"].get<double>() : 5.0;
      const double d = planar_distance_m(truth.position, point);
      check(s, d <= radius, "distance " + std::to_string(d) + " m, limit " + std::to_string(radius) + " m");
    }
    if (s.body.contains("anchored")) {
      const bool want = s.body["anchored"].get<bool>();
      check(s, truth.anchored == want, std::string("anchored is ") + (truth.anchored ? "true" : "false"));
    }
    if (s.body.contains("parked_at")) {
      const auto& want = s.body["parked_at"];
      const auto got = truth.parked_at.value_or("");
      const auto expect = want.is_null() ? std::string() : want.get<std::string>();
      check(s, got == expect, "parked_at is '" + got + "'");
    }
    if (s.body.contains("causes")) {
      const auto got = codec::encode(status.causes);
      check(s, got == s.body["causes"], "causes are " + got.dump());
    }
  }

  std::shared_ptr<const mdl::MapDocument> map_;
  log::EventLog* log_;
  Settings settings_;
  std::unique_ptr<agent::Session> session_;
  std::unique_ptr<log::Recorder> recorder_;
  Report report_;
  std::string robot_;
};

}  // namespace

Report run(std::shared_ptr<const mdl::MapDocument> map, const std::vector<Step>& steps, log::EventLog* log) {
  return Runner(std::move(map), log).run(steps);
}

}  // namespace riverhelm::scenario
