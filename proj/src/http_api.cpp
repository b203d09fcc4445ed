#include "keydetect/http_api.hpp"

#include <cmath>

#include "keydetect/errors.hpp"

// After Eigen: <resolv.h> (pulled in by httplib) defines a _res macro.
#include <httplib.h>
#include <json.hpp>

namespace keydetect {

using nlohmann::json;

namespace {

int status_for(std::string_view code) {
  if (code == "bad_request") return 400;
  if (code == "unknown_user") return 404;
  if (code == "not_trained" || code == "insufficient_enrollment") return 409;
  if (code == "malformed_trace") return 422;
  return 500;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, std::string_view code, const std::string& message) {
  send_json(res, status_for(code), json{{"error_code", code}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body, nullptr, /*allow_exceptions=*/false);
  if (body.is_discarded()) throw BadRequest("request body is not valid JSON");
  if (!body.is_object()) throw BadRequest("request body must be a JSON object");
  return body;
}

EventTrace parse_events(const json& body) {
  const auto it = body.find("events");
  if (it == body.end()) throw BadRequest("missing 'events'");
  if (!it->is_array()) throw BadRequest("'events' must be an array");
  EventTrace trace;
  for (const auto& e : *it) {
    if (!e.is_object()) throw MalformedTrace("every event must be an object");
    const auto key = e.find("key");
    const auto kind = e.find("kind");
    const auto t = e.find("t_ms");
    if (key == e.end() || !key->is_string()) throw MalformedTrace("event without a string 'key'");
    if (kind == e.end() || !kind->is_string()) throw MalformedTrace("event without a string 'kind'");
    if (t == e.end() || !t->is_number()) throw MalformedTrace("event without a numeric 't_ms'");
    KeyEvent ev;
    ev.key = key->get<std::string>();
    const auto k = kind->get<std::string>();
    if (k == "down") {
      ev.action = KeyAction::down;
    } else if (k == "up") {
      ev.action = KeyAction::up;
    } else {
      throw MalformedTrace("event kind must be 'down' or 'up', got '" + k + "'");
    }
    if (t->is_number_integer()) {
      ev.t_ms = t->get<std::int64_t>();
    } else {
      const double v = t->get<double>();
      if (!std::isfinite(v) || v != std::floor(v) || std::abs(v) > 9e15) {
        throw MalformedTrace("t_ms must be an integer number of milliseconds");
      }
      ev.t_ms = static_cast<std::int64_t>(v);
    }
    trace.push_back(std::move(ev));
  }
  return trace;
}

// Runs a handler, mapping library errors onto the error body.
template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    send_error(res, e.code(), e.what());
  } catch (const json::exception& e) {
    send_error(res, "bad_request", e.what());
  } catch (const std::exception& e) {
    send_error(res, "internal", e.what());
  }
}

}  // namespace

EventTrace parse_trace_json(std::string_view text) {
  json body = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (body.is_discarded() || !body.is_object()) throw BadRequest("trace must be a JSON object");
  return parse_events(body);
}

struct HttpApi::Impl {
  VerificationService& service;
  httplib::Server server;

  explicit Impl(VerificationService& s) : service(s) {
    // The library default adds SO_REUSEPORT, which lets a second server share
    // an occupied port silently; keep only SO_REUSEADDR.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    server.Post(R"(/api/users/([^/]+)/enroll)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = parse_body(req);
        const auto nonce = body.find("nonce");
        if (nonce == body.end() || !nonce->is_string()) throw BadRequest("missing string 'nonce'");
        const auto count = service.enroll(req.matches[1], nonce->get<std::string>(), parse_events(body));
        send_json(res, 200, json{{"attempts", count}});
      });
    });
    server.Post(R"(/api/users/([^/]+)/train)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = parse_body(req);
        std::optional<DetectorKind> kind;
        if (const auto d = body.find("detector"); d != body.end() && !d->is_null()) {
          if (!d->is_string()) throw BadRequest("'detector' must be a string");
          try {
            kind = parse_detector_kind(d->get<std::string>());
          } catch (const ValueError& e) {
            throw BadRequest(e.what());
          }
        }
        const double threshold = service.train(req.matches[1], kind);
        send_json(res, 200,
                  json{{"threshold", threshold},
                       {"detector", to_string(kind.value_or(service.config().default_detector))}});
      });
    });
    server.Post(R"(/api/users/([^/]+)/verify)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = parse_body(req);
        const auto d = service.verify(req.matches[1], parse_events(body));
        send_json(res, 200,
                  json{{"score", d.score},
                       {"threshold", d.threshold},
                       {"accepted", d.accepted},
                       {"detector", to_string(d.detector)}});
      });
    });
    server.Get("/api/users", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        json list = json::array();
        for (const auto& u : service.list_users()) {
          list.push_back({{"id", u.id}, {"attempts", u.attempts}, {"trained", u.trained}});
        }
        send_json(res, 200, list);
      });
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        res.set_content(json{{"error_code", res.status == 404 ? "not_found" : "http_error"},
                             {"message", "no such route"}}
                            .dump(),
                        "application/json");
      }
    });
  }
};

HttpApi::HttpApi(VerificationService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpApi::~HttpApi() { stop(); }

int HttpApi::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port) + " (address in use?)");
  }
  return port;
}

void HttpApi::serve() { impl_->server.listen_after_bind(); }
void HttpApi::wait_until_ready() const { impl_->server.wait_until_ready(); }
void HttpApi::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}
bool HttpApi::running() const { return impl_->server.is_running(); }

}  // namespace keydetect
