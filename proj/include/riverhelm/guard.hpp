#pragma once

// Per-robot exception handler.
//
//   Nominal --any failure--> Anchoring --anchor_confirmed--> Anchored
//   Anchoring --anchor_refused | anchor_timeout--> AutoParking  (propulsion and link up)
//                                              \-> Distress     (otherwise)
//   Anchored --park_timeout, propulsion and link up--> AutoParking
//   AutoParking --park_confirmed--> Parked
//   AutoParking --comm_silent | propulsion_failed--> Anchoring
//   Anchored | Parked | Distress --acknowledge (no failure flags)--> Nominal
//
// `causes` holds the currently raised causes and drives the escalation
// decisions. `episode` latches every cause seen since leaving Nominal, so
// Nominal holds exactly when `episode` is empty.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace riverhelm::guard {

enum class State { nominal, anchoring, anchored, auto_parking, parked, distress };
enum class Cause { communication, gps, sensor_power, propulsion, timeout };
enum class Observation {
  gps_ok,
  gps_failed,
  comm_silent,
  sensor_power_failed,
  propulsion_failed,
  anchor_confirmed,
  anchor_refused,
  park_confirmed,
  flags_cleared,
};
/// Command the guard asks its owner to carry out for a transition.
enum class Action { none, anchor, auto_park };

inline constexpr State kAllStates[] = {State::nominal,      State::anchoring, State::anchored,
                                       State::auto_parking, State::parked,    State::distress};
inline constexpr Observation kAllObservations[] = {
    Observation::gps_ok,           Observation::gps_failed,     Observation::comm_silent,
    Observation::sensor_power_failed, Observation::propulsion_failed, Observation::anchor_confirmed,
    Observation::anchor_refused,   Observation::park_confirmed, Observation::flags_cleared};
inline constexpr Cause kAllCauses[] = {Cause::communication, Cause::gps, Cause::sensor_power, Cause::propulsion,
                                       Cause::timeout};

std::string_view to_string(State s);
std::string_view to_string(Cause c);
std::string_view to_string(Observation o);
std::string_view to_string(Action a);
std::optional<State> state_from_string(std::string_view s);
std::optional<Cause> cause_from_string(std::string_view s);
std::optional<Observation> observation_from_string(std::string_view s);

class CauseSet {
 public:
  CauseSet() = default;
  CauseSet(std::initializer_list<Cause> causes) {
    for (auto c : causes) insert(c);
  }

  bool contains(Cause c) const { return (bits_ & bit(c)) != 0; }
  void insert(Cause c) { bits_ |= bit(c); }
  void erase(Cause c) { bits_ &= static_cast<std::uint8_t>(~bit(c)); }
  bool empty() const { return bits_ == 0; }
  void clear() { bits_ = 0; }
  CauseSet& operator|=(CauseSet o) {
    bits_ |= o.bits_;
    return *this;
  }
  /// True when any of the four robot failure causes is raised.
  bool has_failure_flag() const {
    return contains(Cause::communication) || contains(Cause::gps) || contains(Cause::sensor_power) ||
           contains(Cause::propulsion);
  }
  std::vector<Cause> to_vector() const;

  friend bool operator==(CauseSet, CauseSet) = default;

 private:
  static std::uint8_t bit(Cause c) { return static_cast<std::uint8_t>(1U << static_cast<unsigned>(c)); }
  std::uint8_t bits_ = 0;
};

struct ExceptionStatus {
  State state = State::nominal;
  CauseSet causes;
  CauseSet episode;
  double since = 0.0;

  friend bool operator==(const ExceptionStatus&, const ExceptionStatus&) = default;
};

struct ExceptionEvent {
  std::string robot_id;
  State from = State::nominal;
  State to = State::nominal;
  CauseSet causes;
  CauseSet episode;
  double timestamp = 0.0;
  Action action = Action::none;
  std::string operator_id;  // set on acknowledgement only

  friend bool operator==(const ExceptionEvent&, const ExceptionEvent&) = default;
};

struct GuardConfig {
  double comm_timeout = 45.0;   // 3 missed polls at the default rate
  double anchor_timeout = 60.0;
  double park_timeout = 300.0;  // time spent Anchored before auto-parking

  /// Throws std::invalid_argument unless all timeouts are positive and
  /// comm_timeout >= poll_interval.
  void check(double poll_interval) const;
};

struct Transition {
  State next = State::nominal;
  Action action = Action::none;
  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Causes after applying one observation (replies imply a working link).
CauseSet apply_observation(CauseSet causes, Observation o);

/// The transition relation for observations; `causes` already includes the
/// observation's effect. Defined for every (state, observation) pair.
Transition transition(State s, Observation o, CauseSet causes);

/// Branch taken when anchoring fails: AutoParking needs propulsion and link.
Transition anchor_failed(CauseSet causes);

class NotAcknowledgeable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownRobot : public std::out_of_range {
 public:
  explicit UnknownRobot(std::string_view id) : std::out_of_range("unknown robot '" + std::string(id) + "'") {}
};

class FaultGuard {
 public:
  explicit FaultGuard(GuardConfig config = {}) : config_(config) {}

  void add_robot(const std::string& robot_id, double now);
  bool has_robot(std::string_view robot_id) const;

  std::vector<ExceptionEvent> observe(std::string_view robot_id, Observation o, double now);

  /// Time-driven transitions; a second call at the same `now` returns nothing.
  std::vector<ExceptionEvent> tick(double now);

  ExceptionEvent acknowledge(std::string_view robot_id, const std::string& operator_id, double now);
  bool acknowledgeable(std::string_view robot_id) const;

  const ExceptionStatus& status(std::string_view robot_id) const;
  const std::vector<ExceptionEvent>& history(std::string_view robot_id) const;
  /// Status at registration, the base for replaying the history.
  const ExceptionStatus& initial_status(std::string_view robot_id) const;
  const GuardConfig& config() const { return config_; }

 private:
  struct Entry {
    ExceptionStatus status;
    ExceptionStatus initial;
    double last_contact = 0.0;
    std::vector<ExceptionEvent> history;
  };

  Entry& entry(std::string_view robot_id);
  const Entry& entry(std::string_view robot_id) const;
  std::vector<ExceptionEvent> apply(const std::string& robot_id, Entry& e, CauseSet causes, Transition t,
                                    double now);

  GuardConfig config_;
  std::map<std::string, Entry, std::less<>> robots_;
};

/// Rebuilds a status from its initial value and an event log.
ExceptionStatus replay(ExceptionStatus initial, const std::vector<ExceptionEvent>& events);

}  // namespace riverhelm::guard
