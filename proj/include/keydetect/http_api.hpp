#pragma once

#include <memory>
#include <string>

#include "keydetect/service.hpp"

namespace keydetect {

// JSON-over-HTTP front end for VerificationService:
//   POST /api/users/{id}/enroll  {nonce, events:[{key, kind, t_ms}]} -> {attempts}
//   POST /api/users/{id}/train   {detector?}                          -> {threshold, detector}
//   POST /api/users/{id}/verify  {events:[...]}                       -> {score, threshold, accepted, detector}
//   GET  /api/users                                                   -> [{id, attempts, trained}]
// Failures return {error_code, message} with 400 (bad_request), 404
// (unknown_user), 409 (not_trained, insufficient_enrollment), 422
// (malformed_trace) or 500.
// Parses {"events":[{key, kind:"down"|"up", t_ms}, ...]} (other members are
// ignored). Throws BadRequest for invalid JSON or a missing events array and
// MalformedTrace for a bad event.
EventTrace parse_trace_json(std::string_view text);

class HttpApi {
 public:
  explicit HttpApi(VerificationService& service);
  ~HttpApi();
  HttpApi(const HttpApi&) = delete;
  HttpApi& operator=(const HttpApi&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws Error when the
  // address cannot be bound.
  int bind(const std::string& host, int port);
  // Blocks serving requests until stop() is called.
  void serve();
  // Blocks until serve() is accepting connections.
  void wait_until_ready() const;
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace keydetect
