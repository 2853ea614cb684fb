#include "riverhelm/guard.hpp"

#include <optional>

namespace riverhelm::guard {

std::string_view to_string(State s) {
  switch (s) {
    case State::nominal: return "Nominal";
    case State::anchoring: return "Anchoring";
    case State::anchored: return "Anchored";
    case State::auto_parking: return "AutoParking";
    case State::parked: return "Parked";
    case State::distress: return "Distress";
  }
  return "Nominal";
}

std::string_view to_string(Cause c) {
  switch (c) {
    case Cause::communication: return "communication";
    case Cause::gps: return "gps";
    case Cause::sensor_power: return "sensor_power";
    case Cause::propulsion: return "propulsion";
    case Cause::timeout: return "timeout";
  }
  return "communication";
}

std::string_view to_string(Observation o) {
  switch (o) {
    case Observation::gps_ok: return "gps_ok";
    case Observation::gps_failed: return "gps_failed";
    case Observation::comm_silent: return "comm_silent";
    case Observation::sensor_power_failed: return "sensor_power_failed";
    case Observation::propulsion_failed: return "propulsion_failed";
    case Observation::anchor_confirmed: return "anchor_confirmed";
    case Observation::anchor_refused: return "anchor_refused";
    case Observation::park_confirmed: return "park_confirmed";
    case Observation::flags_cleared: return "flags_cleared";
  }
  return "gps_ok";
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::none: return "none";
    case Action::anchor: return "anchor";
    case Action::auto_park: return "auto_park";
  }
  return "none";
}

std::optional<State> state_from_string(std::string_view s) {
  for (auto v : kAllStates) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<Cause> cause_from_string(std::string_view s) {
  for (auto v : kAllCauses) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<Observation> observation_from_string(std::string_view s) {
  for (auto v : kAllObservations) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::vector<Cause> CauseSet::to_vector() const {
  std::vector<Cause> out;
  for (auto c : kAllCauses) {
    if (contains(c)) out.push_back(c);
  }
  return out;
}

void GuardConfig::check(double poll_interval) const {
  if (!(comm_timeout > 0.0 && anchor_timeout > 0.0 && park_timeout > 0.0)) {
    throw std::invalid_argument("guard timeouts must be positive");
  }
  if (comm_timeout < poll_interval) {
    throw std::invalid_argument("comm_timeout must be at least the poll interval");
  }
}

CauseSet apply_observation(CauseSet causes, Observation o) {
  switch (o) {
    case Observation::gps_ok:
      causes.erase(Cause::gps);
      causes.erase(Cause::communication);
      break;
    case Observation::gps_failed:
      causes.insert(Cause::gps);
      causes.erase(Cause::communication);
      break;
    case Observation::comm_silent: causes.insert(Cause::communication); break;
    case Observation::sensor_power_failed:
      causes.insert(Cause::sensor_power);
      causes.erase(Cause::communication);
      break;
    case Observation::propulsion_failed:
      causes.insert(Cause::propulsion);
      causes.erase(Cause::communication);
      break;
    case Observation::anchor_confirmed:
    case Observation::anchor_refused:
    case Observation::park_confirmed: causes.erase(Cause::communication); break;
    case Observation::flags_cleared: causes.clear(); break;
  }
  return causes;
}

namespace {

bool is_failure(Observation o) {
  return o == Observation::gps_failed || o == Observation::comm_silent || o == Observation::sensor_power_failed ||
         o == Observation::propulsion_failed;
}

}  // namespace

Transition anchor_failed(CauseSet causes) {
  if (!causes.contains(Cause::propulsion) && !causes.contains(Cause::communication)) {
    return {State::auto_parking, Action::auto_park};
  }
  return {State::distress, Action::none};
}

Transition transition(State s, Observation o, CauseSet causes) {
  switch (s) {
    case State::nominal:
      if (is_failure(o)) return {State::anchoring, Action::anchor};
      return {State::nominal, Action::none};
    case State::anchoring:
      if (o == Observation::anchor_confirmed) return {State::anchored, Action::none};
      if (o == Observation::anchor_refused) return anchor_failed(causes);
      return {State::anchoring, Action::none};
    case State::anchored: return {State::anchored, Action::none};
    case State::auto_parking:
      if (o == Observation::park_confirmed) return {State::parked, Action::none};
      if (o == Observation::comm_silent || o == Observation::propulsion_failed) {
        return {State::anchoring, Action::anchor};
      }
      return {State::auto_parking, Action::none};
    case State::parked: return {State::parked, Action::none};
    case State::distress: return {State::distress, Action::none};
  }
  return {s, Action::none};
}

void FaultGuard::add_robot(const std::string& robot_id, double now) {
  Entry e;
  e.status.since = now;
  e.initial = e.status;
  e.last_contact = now;
  if (!robots_.emplace(robot_id, std::move(e)).second) {
    throw std::invalid_argument("robot '" + robot_id + "' already registered");
  }
}

bool FaultGuard::has_robot(std::string_view robot_id) const { return robots_.find(robot_id) != robots_.end(); }

FaultGuard::Entry& FaultGuard::entry(std::string_view robot_id) {
  auto it = robots_.find(robot_id);
  if (it == robots_.end()) throw UnknownRobot(robot_id);
  return it->second;
}

const FaultGuard::Entry& FaultGuard::entry(std::string_view robot_id) const {
  auto it = robots_.find(robot_id);
  if (it == robots_.end()) throw UnknownRobot(robot_id);
  return it->second;
}

const ExceptionStatus& FaultGuard::status(std::string_view robot_id) const { return entry(robot_id).status; }
const ExceptionStatus& FaultGuard::initial_status(std::string_view robot_id) const {
  return entry(robot_id).initial;
}
const std::vector<ExceptionEvent>& FaultGuard::history(std::string_view robot_id) const {
  return entry(robot_id).history;
}

std::vector<ExceptionEvent> FaultGuard::apply(const std::string& robot_id, Entry& e, CauseSet causes, Transition t,
                                              double now) {
  ExceptionStatus next = e.status;
  next.state = t.next;
  next.causes = causes;
  if (e.status.state != State::nominal || t.next != State::nominal) next.episode |= causes;
  if (t.next != e.status.state) next.since = now;
  if (next == e.status && t.action == Action::none) return {};

  ExceptionEvent ev{robot_id, e.status.state, next.state, next.causes, next.episode, now, t.action, {}};
  e.status = next;
  e.history.push_back(ev);
  return {ev};
}

std::vector<ExceptionEvent> FaultGuard::observe(std::string_view robot_id, Observation o, double now) {
  auto it = robots_.find(robot_id);
  if (it == robots_.end()) throw UnknownRobot(robot_id);
  auto& e = it->second;
  if (o != Observation::comm_silent) e.last_contact = now;
  const auto causes = apply_observation(e.status.causes, o);
  return apply(it->first, e, causes, transition(e.status.state, o, causes), now);
}

std::vector<ExceptionEvent> FaultGuard::tick(double now) {
  std::vector<ExceptionEvent> out;
  const auto append = [&out](std::vector<ExceptionEvent> evs) { out.insert(out.end(), evs.begin(), evs.end()); };
  for (auto& [id, e] : robots_) {
    if (!e.status.causes.contains(Cause::communication) && now - e.last_contact >= config_.comm_timeout) {
      const auto causes = apply_observation(e.status.causes, Observation::comm_silent);
      append(apply(id, e, causes, transition(e.status.state, Observation::comm_silent, causes), now));
    }
    if (e.status.state == State::anchoring && now - e.status.since >= config_.anchor_timeout) {
      append(apply(id, e, e.status.causes, anchor_failed(e.status.causes), now));
    } else if (e.status.state == State::anchored && now - e.status.since >= config_.park_timeout &&
               !e.status.causes.contains(Cause::propulsion) && !e.status.causes.contains(Cause::communication)) {
      auto causes = e.status.causes;
      causes.insert(Cause::timeout);
      append(apply(id, e, causes, {State::auto_parking, Action::auto_park}, now));
    }
  }
  return out;
}

bool FaultGuard::acknowledgeable(std::string_view robot_id) const {
  const auto& s = entry(robot_id).status;
  const bool settled = s.state == State::anchored || s.state == State::parked || s.state == State::distress;
  return settled && !s.causes.has_failure_flag();
}

ExceptionEvent FaultGuard::acknowledge(std::string_view robot_id, const std::string& operator_id, double now) {
  auto it = robots_.find(robot_id);
  if (it == robots_.end()) throw UnknownRobot(robot_id);
  if (!acknowledgeable(robot_id)) {
    const auto& s = it->second.status;
    throw NotAcknowledgeable("robot '" + std::string(robot_id) + "' in state " + std::string(to_string(s.state)) +
                             (s.causes.has_failure_flag() ? " still has failure flags raised"
                                                          : " is not in a settled state"));
  }
  auto& e = it->second;
  ExceptionEvent ev{it->first, e.status.state, State::nominal, {}, {}, now, Action::none, operator_id};
  e.status = ExceptionStatus{State::nominal, {}, {}, now};
  e.last_contact = now;
  e.history.push_back(ev);
  return ev;
}

ExceptionStatus replay(ExceptionStatus initial, const std::vector<ExceptionEvent>& events) {
  for (const auto& ev : events) {
    if (ev.from != ev.to) initial.since = ev.timestamp;
    initial.state = ev.to;
    initial.causes = ev.causes;
    initial.episode = ev.episode;
  }
  return initial;
}

}  // namespace riverhelm::guard
