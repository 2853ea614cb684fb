#include "riverhelm/event_log.hpp"

#include <cmath>
#include <istream>

namespace riverhelm::log {

json encode(const LogRecord& r) {
  return {{"seq", r.seq}, {"t", r.t}, {"step", r.step}, {"kind", r.kind}, {"payload", r.payload}};
}

LogRecord decode_record(const json& j) {
  try {
    LogRecord r;
    r.seq = j.at("seq").get<std::uint64_t>();
    r.t = j.at("t").get<double>();
    r.step = j.at("step").get<std::uint64_t>();
    r.kind = j.at("kind").get<std::string>();
    r.payload = j.at("payload");
    return r;
  } catch (const json::exception& e) {
    throw codec::CodecError(std::string("malformed log record: ") + e.what());
  }
}

std::vector<LogRecord> read_log(std::istream& in) {
  std::vector<LogRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(decode_record(codec::parse(line)));
    } catch (const codec::CodecError& e) {
      throw codec::CodecError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

EventLog::EventLog(const std::string& path) : file_(std::in_place, path, std::ios::out | std::ios::trunc) {
  if (!*file_) throw std::runtime_error("cannot open log file '" + path + "'");
}

std::uint64_t EventLog::append(std::string kind, double t, std::uint64_t step, json payload) {
  std::uint64_t seq = 0;
  {
    std::lock_guard lock(mu_);
    seq = records_.size() + 1;
    records_.push_back(LogRecord{seq, t, step, std::move(kind), std::move(payload)});
    if (file_) *file_ << encode(records_.back()).dump() << '\n' << std::flush;
  }
  cv_.notify_all();
  return seq;
}

std::vector<LogRecord> EventLog::since(std::uint64_t after) const {
  std::lock_guard lock(mu_);
  if (after >= records_.size()) return {};
  return {records_.begin() + static_cast<std::ptrdiff_t>(after), records_.end()};
}

std::uint64_t EventLog::last_seq() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

bool EventLog::wait_beyond(std::uint64_t after, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || records_.size() > after; });
  return records_.size() > after;
}

void EventLog::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

void Recorder::write(const char* kind, json payload) {
  log_.append(kind, session_.now(), session_.steps(), std::move(payload));
}

void Recorder::on_robot_added(const sim::RobotSpec& spec, double poll_interval) {
  write(kind::robot_added, {{"spec", codec::encode(spec)}, {"poll_interval", poll_interval}});
}

void Recorder::on_ui_event(const agent::UIEvent& e, const agent::InterpreterResponse& r) {
  write(kind::ui_event, {{"event", codec::encode(e)}, {"response", codec::encode(r)}});
}

void Recorder::on_acknowledge(const std::string& robot_id, const std::string& operator_id,
                              const std::optional<guard::ExceptionEvent>& result) {
  write(kind::acknowledge, {{"robot", robot_id}, {"operator", operator_id}, {"accepted", result.has_value()}});
}

void Recorder::on_sim_control(const std::string& robot_id, std::string_view control, bool value) {
  write(kind::sim_control, {{"robot", robot_id}, {"control", control}, {"value", value}});
}

void Recorder::on_command(const std::string& robot_id, const sim::RoboticCommand& c, const sim::CommandReply& r,
                          agent::CommandOrigin origin) {
  write(kind::command, {{"robot", robot_id},
                        {"origin", agent::to_string(origin)},
                        {"command", codec::encode(c)},
                        {"reply", codec::encode(r)}});
}

void Recorder::on_gps_fix(const sim::GpsFix& f) { write(kind::gps_fix, codec::encode(f)); }

void Recorder::on_exception_event(const guard::ExceptionEvent& e) { write(kind::exception_event, codec::encode(e)); }

void Recorder::on_snapshot(const agent::RobotSnapshot& s) { write(kind::robot_snapshot, codec::encode(s)); }

void record_session(EventLog& log, const agent::Session& session, double sim_step) {
  log.append(kind::session, session.now(), session.steps(),
             {{"map_id", session.map().id},
              {"sim", codec::encode(session.world().config())},
              {"agent", codec::encode(session.config())},
              {"sim_step", sim_step}});
}

void record_checkpoint(EventLog& log, const agent::Session& session) {
  log.append(kind::checkpoint, session.now(), session.steps(), {{"registry", codec::encode(session.registry())}});
}

namespace {

bool is_input(const std::string& k) {
  return k == kind::robot_added || k == kind::ui_event || k == kind::acknowledge || k == kind::sim_control;
}

void apply_input(agent::Session& session, const LogRecord& r) {
  const auto& p = r.payload;
  if (r.kind == kind::robot_added) {
    session.add_robot(codec::decode_robot_spec(p.at("spec")), p.at("poll_interval").get<double>());
  } else if (r.kind == kind::ui_event) {
    session.handle_event(codec::decode_ui_event(p.at("event")));
  } else if (r.kind == kind::acknowledge) {
    try {
      session.acknowledge(p.at("robot").get<std::string>(), p.at("operator").get<std::string>());
    } catch (const guard::NotAcknowledgeable&) {
    }
  } else if (r.kind == kind::sim_control) {
    const auto robot = p.at("robot").get<std::string>();
    const auto control = p.at("control").get<std::string>();
    const bool value = p.at("value").get<bool>();
    if (control == "anchor") {
      session.set_anchor_operational(robot, !value);
    } else if (const auto flag = sim::failure_flag_from_string(control)) {
      session.inject_failure(robot, *flag, value);
    } else {
      throw ReplayError("unknown simulation control '" + control + "'");
    }
  }
}

}  // namespace

ReplayResult replay(std::shared_ptr<const mdl::MapDocument> map, const std::vector<LogRecord>& records) {
  const auto header =
      std::find_if(records.begin(), records.end(), [](const LogRecord& r) { return r.kind == kind::session; });
  if (header == records.end()) throw ReplayError("log has no session record");
  const auto& hp = header->payload;
  if (hp.at("map_id").get<std::string>() != map->id) {
    throw ReplayError("log was recorded against map '" + hp.at("map_id").get<std::string>() + "', not '" +
                      map->id + "'");
  }
  const double dt = hp.at("sim_step").get<double>();
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ReplayError("session record has an invalid sim_step");

  agent::Session session(sim::World(map, codec::decode_sim_config(hp.at("sim"))),
                         codec::decode_agent_config(hp.at("agent")));
  EventLog out;
  Recorder recorder(out, session);
  session.set_observer(&recorder);

  ReplayResult result;
  const auto advance_to = [&](std::uint64_t step) {
    while (session.steps() < step) session.advance(dt);
  };
  try {
    for (auto it = std::next(header); it != records.end(); ++it) {
      if (is_input(it->kind)) {
        advance_to(it->step);
        apply_input(session, *it);
        ++result.inputs;
      } else if (it->kind == kind::checkpoint) {
        advance_to(it->step);
        result.checkpoint = codec::decode_registry(it->payload.at("registry"));
        result.registry = session.registry();
      }
    }
    if (!result.checkpoint && !records.empty()) {
      advance_to(records.back().step);
      result.registry = session.registry();
    }
  } catch (const json::exception& e) {
    throw ReplayError(std::string("malformed input record: ") + e.what());
  }

  result.registry_matches = result.checkpoint && *result.checkpoint == result.registry &&
                            codec::encode(*result.checkpoint) == codec::encode(result.registry);

  std::vector<const LogRecord*> expected;
  for (auto it = std::next(header); it != records.end(); ++it) {
    if (it->kind != kind::checkpoint && it->kind != kind::session) expected.push_back(&*it);
  }
  const auto produced = out.records();
  result.outputs_match = true;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const LogRecord* want = expected[i];
    if (i >= produced.size() || produced[i].kind != want->kind || produced[i].step != want->step ||
        produced[i].payload != want->payload) {
      result.outputs_match = false;
      result.divergence = "record seq " + std::to_string(want->seq) + " (" + want->kind + " at step " +
                          std::to_string(want->step) + ") was not reproduced";
      break;
    }
  }
  return result;
}

}  // namespace riverhelm::log
