#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "fixtures.hpp"
#include "riverhelm/codec.hpp"
#include "riverhelm/gateway.hpp"
#include "riverhelm/http_server.hpp"

using namespace rh_test;
using codec::json;

namespace {

gateway::ServeConfig manual_config(bool controls = true) {
  gateway::ServeConfig c;
  c.pacing = 0.0;
  c.simulation_controls = controls;
  c.robots = {{"r1", std::string("A"), 1.0}, {"r2", std::string("D"), 0.9}};
  c.sim.gps_noise_m = 2.0;
  c.sim.seed = 21;
  return c;
}

/// Gateway plus HTTP server on an ephemeral port.
struct Served {
  explicit Served(gateway::ServeConfig config = manual_config())
      : gw(five_node_map(), config), http(gw), port(http.bind("127.0.0.1", 0)), client("127.0.0.1", port) {
    http.start();
    client.set_read_timeout(5, 0);
  }
  ~Served() {
    http.stop();
    gw.stop();
  }

  httplib::Result post(const std::string& path, const json& body) {
    return client.Post(path, body.dump(), "application/json");
  }
  json get_json(const std::string& path) {
    auto r = client.Get(path);
    EXPECT_TRUE(r);
    EXPECT_EQ(r->status, 200) << path << ": " << r->body;
    return json::parse(r->body);
  }
  void advance(double seconds) {
    auto r = post("/api/sim/advance", {{"seconds", seconds}});
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << r->body;
  }

  gateway::Gateway gw;
  gateway::HttpServer http;
  int port;
  httplib::Client client;
};

}  // namespace

TEST(Http, HealthAndMap) {
  Served s;
  const auto health = s.get_json("/api/health");
  EXPECT_EQ(health["robots"], 2);
  EXPECT_EQ(health["now"], 0.0);
  auto r = s.client.Get("/api/map");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const auto parsed = mdl::parse_mdl(r->body);
  EXPECT_EQ(parsed.document, *five_node_map());
  EXPECT_EQ(parsed.annotations.size(), 2u);
  EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST(Http, RobotsReportTheLastGpsFix) {
  Served s;
  s.advance(95.0);
  const auto robots = s.get_json("/api/robots");
  ASSERT_EQ(robots.size(), 2u);
  // Independent view of the fixes: the persisted log.
  std::map<std::string, json> last_fix;
  for (const auto& r : s.gw.log().records()) {
    if (r.kind == log::kind::gps_fix) last_fix[r.payload["robot"]] = r.payload["position"];
  }
  ASSERT_EQ(last_fix.size(), 2u);
  for (const auto& robot : robots) {
    const auto id = robot["id"].get<std::string>();
    EXPECT_EQ(robot["position"], last_fix.at(id)) << id;
    EXPECT_EQ(robot["last_fix_time"], 90.0);
  }
  const auto one = s.get_json("/api/robots/r2");
  EXPECT_EQ(one["id"], "r2");
  EXPECT_EQ(one["position"], last_fix.at("r2"));
}

TEST(Http, UnknownRobotIs404) {
  Served s;
  auto r = s.client.Get("/api/robots/ghost");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 404);
  EXPECT_EQ(json::parse(r->body)["error"], "UnknownRobot");
  r = s.post("/api/robots/ghost/events", {{"type", "ClickOnRobot"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 404);
  r = s.post("/api/robots/ghost/acknowledge", {{"operator", "op"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 404);
  r = s.client.Get("/api/robots/ghost/exceptions");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 404);
}

TEST(Http, EventsDispatchOrReject) {
  Served s;
  auto r = s.post("/api/robots/r1/events", {{"type", "ClickOnRobot"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body)["type"], "ContextMenu");
  EXPECT_EQ(json::parse(r->body)["scale"], 1000);

  r = s.post("/api/robots/r1/events", {{"type", "PlaceRobot"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 409);
  EXPECT_EQ(json::parse(r->body)["reason"], "InvalidEventSequence");

  r = s.post("/api/robots/r1/events", {{"type", "DragRobot"}, {"target", {{"lat", 45.002}, {"lon", 7.006}}}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  r = s.post("/api/robots/r1/events", {{"type", "PlaceRobot"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body)["type"], "Dispatched");

  r = s.client.Post("/api/robots/r1/events", "{oops", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);
  r = s.post("/api/robots/r1/events", {{"type", "ClickOnRobot"}, {"robot", "r2"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);
}

TEST(Http, ExceptionsAndAcknowledge) {
  Served s;
  auto r = s.post("/api/sim/failures/r1", {{"flag", "sensor_power"}});
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  s.advance(15.0);
  auto ex = s.get_json("/api/robots/r1/exceptions");
  EXPECT_EQ(ex["status"]["state"], "Anchored");
  EXPECT_EQ(ex["acknowledgeable"], false);
  EXPECT_EQ(ex["history"].size(), 2u);

  r = s.post("/api/robots/r1/acknowledge", {{"operator", "kai"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 409);
  r = s.post("/api/robots/r1/acknowledge", json::object());
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);

  s.post("/api/sim/failures/r1", {{"flag", "sensor_power"}, {"value", false}});
  s.advance(15.0);
  r = s.post("/api/robots/r1/acknowledge", {{"operator", "kai"}});
  ASSERT_TRUE(r);
  ASSERT_EQ(r->status, 200);
  const auto event = json::parse(r->body);
  EXPECT_EQ(event["to"], "Nominal");
  EXPECT_EQ(event["operator"], "kai");
  EXPECT_EQ(s.get_json("/api/robots/r1")["exception"]["state"], "Nominal");
}

TEST(Http, SimulationControlsAreGated) {
  Served s(manual_config(false));
  auto r = s.post("/api/sim/failures/r1", {{"flag", "gps"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 403);
  r = s.post("/api/sim/advance", {{"seconds", 1}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 403);

  auto paced = manual_config(true);
  paced.pacing = 1.0;
  Served p(paced);
  r = p.post("/api/sim/advance", {{"seconds", 1}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 409);
  r = p.post("/api/sim/failures/r1", {{"flag", "warp_drive"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);
}

TEST(Http, StreamFromStartMatchesPersistedLog) {
  Served s;
  std::mutex mu;
  std::string received;
  std::atomic<std::uint64_t> target{0};
  std::atomic<std::uint64_t> seen{0};
  std::atomic<bool> connected{false};

  std::thread reader([&] {
    httplib::Client c("127.0.0.1", s.port);
    c.set_read_timeout(10, 0);
    c.Get("/api/stream?since=0", [&](const char* data, std::size_t n) {
      connected = true;
      std::lock_guard lock(mu);
      received.append(data, n);
      // Track the highest id seen so far.
      for (auto pos = received.find("id: "); pos != std::string::npos; pos = received.find("id: ", pos + 1)) {
        seen = std::max<std::uint64_t>(seen, std::stoull(received.substr(pos + 4)));
      }
      return target == 0 || seen < target;
    });
  });
  while (!connected) std::this_thread::sleep_for(std::chrono::milliseconds(5));

  s.post("/api/robots/r1/events", {{"type", "DragRobot"}, {"target", {{"lat", 45.002}, {"lon", 7.006}}}});
  s.post("/api/robots/r1/events", {{"type", "PlaceRobot"}});
  s.post("/api/sim/failures/r2", {{"flag", "gps"}});
  s.advance(120.0);

  std::uint64_t last = 0;
  std::string expected;
  for (const auto& r : s.gw.log().records()) {
    if (r.kind != log::kind::gps_fix && r.kind != log::kind::exception_event && r.kind != log::kind::robot_snapshot) {
      continue;
    }
    last = r.seq;
    expected += "id: " + std::to_string(r.seq) + "\nevent: " + r.kind + "\ndata: " +
                json{{"t", r.t}, {"payload", r.payload}}.dump() + "\n\n";
  }
  ASSERT_GT(last, 0u);
  target = last;
  reader.join();

  // Drop keepalive comments and anything after the last expected frame.
  std::string frames;
  for (std::size_t start = 0; start < received.size();) {
    const auto end = received.find("\n\n", start);
    if (end == std::string::npos) break;
    const auto frame = received.substr(start, end + 2 - start);
    start = end + 2;
    if (frame.rfind(":", 0) == 0) continue;
    frames += frame;
  }
  EXPECT_EQ(frames.substr(0, expected.size()), expected);
  EXPECT_EQ(frames.size(), expected.size());
}

TEST(Http, LogEndpointResumesFromSequence) {
  Served s;
  s.advance(30.0);
  auto all = s.client.Get("/api/log");
  ASSERT_TRUE(all);
  std::istringstream in(all->body);
  const auto records = log::read_log(in);
  EXPECT_EQ(records, s.gw.log().records());
  auto tail = s.client.Get("/api/log?since=" + std::to_string(records[records.size() - 3].seq));
  ASSERT_TRUE(tail);
  std::istringstream tin(tail->body);
  EXPECT_EQ(log::read_log(tin).size(), 2u);
  auto bad = s.client.Get("/api/log?since=abc");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
}

TEST(Http, IdenticalRequestsOnIdenticalWorldsGetIdenticalResponses) {
  const std::vector<std::pair<std::string, json>> requests{
      {"/api/robots/r1/events", {{"type", "ClickOnRobot"}}},
      {"/api/robots/r1/events", {{"type", "DragRobot"}, {"target", {{"lat", 45.0024}, {"lon", 7.0035}}}}},
      {"/api/robots/r1/events", {{"type", "PlaceRobot"}}},
      {"/api/sim/advance", {{"seconds", 45}}},
      {"/api/robots/r2/events", {{"type", "MenuSelect"}, {"item", "ComputeOptimalFlow"}}},
      {"/api/sim/failures/r2", {{"flag", "propulsion"}}},
      {"/api/sim/advance", {{"seconds", 30}}},
      {"/api/robots/r2/events", {{"type", "MenuSelect"}, {"item", "Park"}}},
      {"/api/robots/r2/acknowledge", {{"operator", "op"}}},
  };
  const auto run = [&] {
    Served s;
    std::vector<std::pair<int, std::string>> out;
    for (const auto& [path, body] : requests) {
      auto r = s.post(path, body);
      EXPECT_TRUE(r);
      out.emplace_back(r->status, r->body);
    }
    auto robots = s.client.Get("/api/robots");
    out.emplace_back(robots->status, robots->body);
    return out;
  };
  const auto a = run();
  const auto b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]) << "request " << i;
}

TEST(Http, CheckpointIsReplayable) {
  Served s;
  s.post("/api/robots/r1/events", {{"type", "MenuSelect"}, {"item", "Park"}});
  s.advance(200.0);
  const auto cp = s.post("/api/checkpoint", json::object());
  ASSERT_TRUE(cp);
  EXPECT_EQ(cp->status, 200);
  const auto result = log::replay(five_node_map(), s.gw.log().records());
  EXPECT_TRUE(result.registry_matches);
  EXPECT_TRUE(result.outputs_match) << result.divergence;
}
