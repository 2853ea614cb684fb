#pragma once

// HTTP/JSON front end of the gateway.
//
//   GET  /api/health
//   GET  /api/map                         annotated MDL document
//   GET  /api/robots                      registry snapshot
//   GET  /api/robots/{id}
//   POST /api/robots/{id}/events          {"type": ..., "target": {...}, "item": ...}
//   GET  /api/robots/{id}/exceptions      current status and history
//   POST /api/robots/{id}/acknowledge     {"operator": ...}
//   GET  /api/stream?since=N              server-sent events
//   GET  /api/log?since=N                 JSONL log records
//   POST /api/checkpoint
//   POST /api/sim/failures/{id}           {"flag": ..., "value": bool}   (simulation controls)
//   POST /api/sim/advance                 {"seconds": s}                 (simulation controls, manual clock)

#include <memory>
#include <string>

#include "riverhelm/gateway.hpp"

namespace riverhelm::gateway {

class HttpServer {
 public:
  explicit HttpServer(Gateway& gateway);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); requires bind().
  void listen();
  /// listen() on a background thread.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace riverhelm::gateway
