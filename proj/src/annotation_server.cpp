#include <iostream>

#include "httplib.h"
#include "sre/annotation.hpp"
#include "sre/error.hpp"

namespace sre {

struct AnnotationServer::Impl {
  httplib::Server server;
};

namespace {

void reply(httplib::Response& res, const AnnotationResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

}  // namespace

AnnotationServer::AnnotationServer(AnnotationService& service, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>()) {
  auto& s = impl_->server;
  s.Get("/api/health", [&service](const httplib::Request&, httplib::Response& res) { reply(res, service.health()); });
  s.Get("/api/tasks/next", [&service](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.next_task(req.get_param_value("annotator")));
  });
  s.Post("/api/votes", [&service](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.submit_vote(req.body));
  });
  s.Get("/api/results", [&service](const httplib::Request&, httplib::Response& res) { reply(res, service.results()); });
  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(Json{{"error", what}}.dump(), "application/json");
  });
  if (static_dir && !s.set_mount_point("/", static_dir->string())) {
    throw IoError("static directory not found: " + static_dir->string());
  }
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start(const std::string& host, int port) {
  auto& s = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = s.bind_to_any_port(host);
  } else if (!s.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void AnnotationServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void AnnotationServer::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace sre
