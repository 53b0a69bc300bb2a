#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "ragsc/service.hpp"

namespace test {

// In-process HTTP server on an ephemeral loopback port. Handlers may be
// replaced while it runs; each path keeps a request counter and last body.
class FakeServer {
 public:
  using Handler = httplib::Server::Handler;

  FakeServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    server_.Get(".*", [this](const httplib::Request& req, httplib::Response& res) { dispatch(req, res); });
    server_.Post(".*", [this](const httplib::Request& req, httplib::Response& res) { dispatch(req, res); });
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  FakeServer(const FakeServer&) = delete;
  FakeServer& operator=(const FakeServer&) = delete;

  void on(const std::string& path, Handler h) {
    std::lock_guard lock(mutex_);
    handlers_[path] = std::move(h);
  }
  // Replies with a JSON body and status.
  void reply(const std::string& path, const nlohmann::json& body, int status = 200) {
    const std::string text = body.dump();
    on(path, [text, status](const httplib::Request&, httplib::Response& res) {
      res.status = status;
      res.set_content(text, "application/json");
    });
  }

  int calls(const std::string& path) const {
    std::lock_guard lock(mutex_);
    const auto it = calls_.find(path);
    return it == calls_.end() ? 0 : it->second;
  }
  nlohmann::json last_body(const std::string& path) const {
    std::lock_guard lock(mutex_);
    return nlohmann::json::parse(last_.at(path));
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  ragsc::ServiceEndpoint endpoint(std::chrono::milliseconds timeout = std::chrono::milliseconds(5000)) const {
    return ragsc::ServiceEndpoint{url(), timeout};
  }

 private:
  void dispatch(const httplib::Request& req, httplib::Response& res) {
    Handler h;
    {
      std::lock_guard lock(mutex_);
      ++calls_[req.path];
      last_[req.path] = req.body;
      const auto it = handlers_.find(req.path);
      if (it != handlers_.end()) h = it->second;
    }
    if (h) {
      h(req, res);
    } else {
      res.status = 404;
      res.set_content(R"({"error":"no handler"})", "application/json");
    }
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mutex_;
  std::map<std::string, Handler> handlers_;
  std::map<std::string, int> calls_;
  std::map<std::string, std::string> last_;
};

}  // namespace test
