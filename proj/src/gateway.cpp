#include "riverhelm/gateway.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

namespace riverhelm::gateway {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(std::size_t line, const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(line, "'" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_uint(std::size_t line, const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(line, "'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(std::size_t line, const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw ConfigError(line, "'" + key + "' expects true or false, got '" + v + "'");
}

RobotEntry parse_robot(std::size_t line, const std::string& v) {
  std::istringstream in(v);
  std::vector<std::string> parts;
  for (std::string p; in >> p;) parts.push_back(p);
  RobotEntry r;
  if (parts.size() == 2) {
    r.id = parts[0];
    r.at = parts[1];
  } else if (parts.size() == 3 || parts.size() == 4) {
    r.id = parts[0];
    GeoCoordinate p{to_double(line, "robot", parts[1]), to_double(line, "robot", parts[2]),
                    parts.size() == 4 ? to_double(line, "robot", parts[3]) : 0.0};
    if (!is_valid(p)) throw ConfigError(line, "robot '" + r.id + "' has an invalid position");
    r.at = p;
  } else {
    throw ConfigError(line, "'robot' expects '<id> <landmark>' or '<id> <lat> <lon> [depth]'");
  }
  return r;
}

}  // namespace

ServeConfig parse_serve_config(std::istream& in, const std::filesystem::path& base_dir) {
  ServeConfig c;
  const auto path = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() ? p : base_dir / p;
  };
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const auto text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected 'key = value'");
    const auto key = trim(text.substr(0, eq));
    const auto value = trim(text.substr(eq + 1));
    if (value.empty()) throw ConfigError(line, "'" + key + "' has no value");

    if (key == "listen") {
      const auto colon = value.rfind(':');
      if (colon == std::string::npos) throw ConfigError(line, "'listen' expects host:port");
      c.host = value.substr(0, colon);
      const auto port = to_uint(line, key, value.substr(colon + 1));
      if (port > 65535) throw ConfigError(line, "port out of range");
      c.port = static_cast<int>(port);
    } else if (key == "map") {
      c.map_path = path(value);
    } else if (key == "log") {
      c.log_path = path(value);
    } else if (key == "poll_interval") {
      c.agent.poller.interval = to_double(line, key, value);
    } else if (key == "comm_timeout") {
      c.agent.guard.comm_timeout = to_double(line, key, value);
    } else if (key == "anchor_timeout") {
      c.agent.guard.anchor_timeout = to_double(line, key, value);
    } else if (key == "park_timeout") {
      c.agent.guard.park_timeout = to_double(line, key, value);
    } else if (key == "sim_step") {
      c.sim_step = to_double(line, key, value);
      if (!(c.sim_step > 0.0)) throw ConfigError(line, "'sim_step' must be positive");
    } else if (key == "pacing") {
      c.pacing = to_double(line, key, value);
      if (c.pacing < 0.0) throw ConfigError(line, "'pacing' must not be negative");
    } else if (key == "simulation_controls") {
      c.simulation_controls = to_bool(line, key, value);
    } else if (key == "seed") {
      c.sim.seed = to_uint(line, key, value);
    } else if (key == "gps_noise_m") {
      c.sim.gps_noise_m = to_double(line, key, value);
    } else if (key == "robot") {
      c.robots.push_back(parse_robot(line, value));
    } else {
      throw ConfigError(line, "unknown key '" + key + "'");
    }
  }
  if (c.map_path.empty()) throw ConfigError(0, "config must name a map");
  try {
    c.agent.poller.check();
    c.agent.guard.check(c.agent.poller.interval);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, e.what());
  }
  return c;
}

ServeConfig load_serve_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot read config '" + path.string() + "'");
  return parse_serve_config(in, path.parent_path());
}

Gateway::Gateway(std::shared_ptr<const mdl::MapDocument> map, const ServeConfig& config,
                 std::unique_ptr<log::EventLog> log)
    : map_(std::move(map)), config_(config), log_(log ? std::move(log) : std::make_unique<log::EventLog>()) {
  session_ = std::make_unique<agent::Session>(sim::World(map_, config_.sim), config_.agent);
  recorder_ = std::make_unique<log::Recorder>(*log_, *session_);
  session_->set_observer(recorder_.get());
  log::record_session(*log_, *session_, config_.sim_step);
  for (const auto& r : config_.robots) {
    sim::RobotSpec spec;
    spec.id = r.id;
    spec.fuel = r.fuel;
    if (const auto* lm = std::get_if<std::string>(&r.at)) {
      const auto* l = map_->find_landmark(*lm);
      if (l == nullptr) throw std::invalid_argument("robot '" + r.id + "' placed at unknown landmark '" + *lm + "'");
      spec.position = l->position;
    } else {
      spec.position = std::get<GeoCoordinate>(r.at);
    }
    session_->add_robot(spec);
  }
  thread_ = std::thread([this] { run(); });
}

Gateway::~Gateway() { stop(); }

void Gateway::enqueue(std::function<void()> task) {
  {
    std::lock_guard lock(mu_);
    if (stopping_) throw std::runtime_error("gateway is stopped");
    tasks_.push_back(std::move(task));
  }
  cv_.notify_all();
}

double Gateway::advance(double seconds) {
  if (!manual_clock()) throw std::logic_error("the simulation clock is paced");
  if (!(seconds > 0.0) || !std::isfinite(seconds)) throw std::invalid_argument("seconds must be positive");
  return submit([this, seconds](agent::Session& s) {
    const auto steps = static_cast<std::uint64_t>(std::ceil(seconds / config_.sim_step - 1e-9));
    for (std::uint64_t i = 0; i < steps; ++i) s.advance(config_.sim_step);
    return s.now();
  });
}

void Gateway::run() {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(config_.sim_step * config_.pacing));
  auto deadline = clock::now() + period;
  std::unique_lock lock(mu_);
  while (true) {
    if (manual_clock()) {
      cv_.wait(lock, [&] { return stopping_ || !tasks_.empty(); });
    } else {
      cv_.wait_until(lock, deadline, [&] { return stopping_ || !tasks_.empty(); });
    }
    while (!tasks_.empty()) {
      auto task = std::move(tasks_.front());
      tasks_.pop_front();
      lock.unlock();
      task();
      lock.lock();
    }
    if (stopping_) break;
    if (!manual_clock() && clock::now() >= deadline) {
      lock.unlock();
      session_->advance(config_.sim_step);
      lock.lock();
      deadline += period;
      // After a stall, resume from now instead of replaying the backlog.
      if (clock::now() - deadline > 10 * period) deadline = clock::now() + period;
    }
  }
}

void Gateway::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  log::record_checkpoint(*log_, *session_);
  log_->close();
}

}  // namespace riverhelm::gateway
