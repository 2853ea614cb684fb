#include "riverhelm/http_server.hpp"

#include <atomic>
#include <charconv>
#include <thread>

#include <httplib.h>

#include "riverhelm/codec.hpp"

namespace riverhelm::gateway {

using codec::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error", code}, {"message", message}});
}

std::uint64_t since_param(const httplib::Request& req) {
  std::string text;
  if (req.has_param("since")) {
    text = req.get_param_value("since");
  } else if (req.has_header("Last-Event-ID")) {
    text = req.get_header_value("Last-Event-ID");
  } else {
    return 0;
  }
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw codec::CodecError("'since' must be an integer");
  return v;
}

json body_json(const httplib::Request& req) {
  auto j = codec::parse(req.body.empty() ? "{}" : req.body);
  if (!j.is_object()) throw codec::CodecError("request body must be a JSON object");
  return j;
}

bool streamed(const std::string& kind) {
  return kind == log::kind::gps_fix || kind == log::kind::exception_event || kind == log::kind::robot_snapshot;
}

}  // namespace

struct HttpServer::Impl {
  explicit Impl(Gateway& g) : gateway(g) {}

  Gateway& gateway;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};
  bool bound = false;

  bool known(const std::string& id) const { return gateway.registry()->count(id) != 0; }

  void routes();
};

void HttpServer::Impl::routes() {
  auto& g = gateway;
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-ID");
    res.status = 204;
  });

  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const codec::CodecError& e) {
      send_error(res, 400, "BadRequest", e.what());
    } catch (const sim::UnknownRobot& e) {
      send_error(res, 404, "UnknownRobot", e.what());
    } catch (const guard::UnknownRobot& e) {
      send_error(res, 404, "UnknownRobot", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "InternalError", e.what());
    }
  });

  server.Get("/api/health", [&g](const httplib::Request&, httplib::Response& res) {
    const auto status = g.submit([](agent::Session& s) {
      return json{{"now", s.now()}, {"steps", s.steps()}, {"robots", s.registry().size()}, {"polls", s.poll_count()}};
    });
    send_json(res, 200, status);
  });

  server.Get("/api/map", [&g](const httplib::Request&, httplib::Response& res) {
    const auto annotations = g.submit([](agent::Session& s) { return s.annotations(); });
    res.set_content(mdl::serialize_mdl(g.map(), annotations), "application/xml");
  });

  server.Get("/api/robots", [&g](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, codec::encode(*g.registry()));
  });

  server.Get(R"(/api/robots/([^/]+))", [&g](const httplib::Request& req, httplib::Response& res) {
    const auto registry = g.registry();
    const auto it = registry->find(req.matches[1].str());
    if (it == registry->end()) return send_error(res, 404, "UnknownRobot", "unknown robot '" + req.matches[1].str() + "'");
    send_json(res, 200, codec::encode(it->second));
  });

  server.Post(R"(/api/robots/([^/]+)/events)", [this, &g](const httplib::Request& req, httplib::Response& res) {
    const auto id = req.matches[1].str();
    auto body = body_json(req);
    if (body.contains("robot") && body["robot"] != id) throw codec::CodecError("robot in body does not match path");
    body["robot"] = id;
    const auto event = codec::decode_ui_event(body);
    if (!known(id)) return send_error(res, 404, "UnknownRobot", "unknown robot '" + id + "'");
    const auto response = g.submit([&event](agent::Session& s) { return s.handle_event(event); });
    int status = 200;
    if (const auto* r = std::get_if<agent::resp::Rejected>(&response)) {
      status = r->reason == agent::RejectReason::unknown_robot ? 404 : 409;
    }
    send_json(res, status, codec::encode(response));
  });

  server.Get(R"(/api/robots/([^/]+)/exceptions)", [&g](const httplib::Request& req, httplib::Response& res) {
    const auto id = req.matches[1].str();
    const auto body = g.submit([&id](agent::Session& s) {
      json history = json::array();
      for (const auto& e : s.guard().history(id)) history.push_back(codec::encode(e));
      return json{{"robot", id},
                  {"status", codec::encode(s.guard().status(id))},
                  {"acknowledgeable", s.guard().acknowledgeable(id)},
                  {"history", history}};
    });
    send_json(res, 200, body);
  });

  server.Post(R"(/api/robots/([^/]+)/acknowledge)", [this, &g](const httplib::Request& req, httplib::Response& res) {
    const auto id = req.matches[1].str();
    const auto body = body_json(req);
    if (!body.contains("operator") || !body["operator"].is_string() || body["operator"].get<std::string>().empty()) {
      throw codec::CodecError("acknowledge requires a non-empty 'operator'");
    }
    const auto op = body["operator"].get<std::string>();
    if (!known(id)) return send_error(res, 404, "UnknownRobot", "unknown robot '" + id + "'");
    try {
      const auto event = g.submit([&](agent::Session& s) { return s.acknowledge(id, op); });
      send_json(res, 200, codec::encode(event));
    } catch (const guard::NotAcknowledgeable& e) {
      send_error(res, 409, "NotAcknowledgeable", e.what());
    }
  });

  server.Get("/api/stream", [this, &g](const httplib::Request& req, httplib::Response& res) {
    const auto start = since_param(req);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [this, &g, cursor = start](std::size_t, httplib::DataSink& sink) mutable {
          if (stopping) {
            sink.done();
            return true;
          }
          if (!g.log().wait_beyond(cursor, std::chrono::milliseconds(200))) {
            // Comment frame keeps idle connections alive and detects closed ones.
            return sink.write(":\n\n", 3);
          }
          std::string frames;
          for (const auto& r : g.log().since(cursor)) {
            cursor = r.seq;
            if (!streamed(r.kind)) continue;
            frames += "id: " + std::to_string(r.seq) + "\nevent: " + r.kind + "\ndata: " +
                      json{{"t", r.t}, {"payload", r.payload}}.dump() + "\n\n";
          }
          return frames.empty() || sink.write(frames.data(), frames.size());
        });
  });

  server.Get("/api/log", [&g](const httplib::Request& req, httplib::Response& res) {
    std::string out;
    for (const auto& r : g.log().since(since_param(req))) out += log::encode(r).dump() + "\n";
    res.set_content(out, "application/x-ndjson");
  });

  server.Post("/api/checkpoint", [&g](const httplib::Request&, httplib::Response& res) {
    const auto seq = g.submit([&g](agent::Session& s) {
      log::record_checkpoint(g.log(), s);
      return g.log().last_seq();
    });
    send_json(res, 200, {{"seq", seq}});
  });

  server.Post(R"(/api/sim/failures/([^/]+))", [this, &g](const httplib::Request& req, httplib::Response& res) {
    if (!g.config().simulation_controls) {
      return send_error(res, 403, "Forbidden", "simulation controls are disabled");
    }
    const auto id = req.matches[1].str();
    const auto body = body_json(req);
    if (!body.contains("flag") || !body["flag"].is_string()) throw codec::CodecError("missing 'flag'");
    if (body.contains("value") && !body["value"].is_boolean()) throw codec::CodecError("'value' must be boolean");
    const auto flag = body["flag"].get<std::string>();
    const bool value = body.value("value", true);
    const auto parsed = sim::failure_flag_from_string(flag);
    if (!parsed && flag != "anchor") throw codec::CodecError("unknown failure flag '" + flag + "'");
    if (!known(id)) return send_error(res, 404, "UnknownRobot", "unknown robot '" + id + "'");
    g.submit([&](agent::Session& s) {
      if (parsed) {
        s.inject_failure(id, *parsed, value);
      } else {
        s.set_anchor_operational(id, !value);
      }
      return 0;
    });
    send_json(res, 200, {{"robot", id}, {"flag", flag}, {"value", value}});
  });

  server.Post("/api/sim/advance", [&g](const httplib::Request& req, httplib::Response& res) {
    if (!g.config().simulation_controls) {
      return send_error(res, 403, "Forbidden", "simulation controls are disabled");
    }
    if (!g.manual_clock()) return send_error(res, 409, "PacedClock", "the simulation clock advances on its own");
    const auto body = body_json(req);
    if (!body.contains("seconds") || !body["seconds"].is_number() || !(body["seconds"].get<double>() > 0.0)) {
      throw codec::CodecError("'seconds' must be a positive number");
    }
    send_json(res, 200, {{"now", g.advance(body["seconds"].get<double>())}});
  });
}

HttpServer::HttpServer(Gateway& gateway) : impl_(std::make_unique<Impl>(gateway)) { impl_->routes(); }

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : impl_->server.bind_to_port(host, port)
                                                                            ? port
                                                                            : -1;
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  impl_->bound = true;
  return bound;
}

void HttpServer::listen() {
  if (!impl_->bound) throw std::logic_error("bind() must precede listen()");
  impl_->server.listen_after_bind();
}

void HttpServer::start() {
  if (!impl_->bound) throw std::logic_error("bind() must precede start()");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace riverhelm::gateway
