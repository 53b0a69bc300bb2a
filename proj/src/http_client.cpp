#include "http_client.hpp"

#include <httplib.h>

#include "ragsc/error.hpp"

namespace ragsc::detail {

namespace {

httplib::Client make_client(const ServiceEndpoint& endpoint) {
  httplib::Client client(endpoint.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  return client;
}

nlohmann::json handle(const ServiceEndpoint& endpoint, std::string_view path, const httplib::Result& res,
                      std::chrono::steady_clock::time_point start) {
  const std::string where = endpoint.base_url + std::string(path);
  if (!res) {
    const auto err = res.error();
    const auto elapsed = std::chrono::steady_clock::now() - start;
    if (err == httplib::Error::ConnectionTimeout ||
        (err == httplib::Error::Read && elapsed >= endpoint.timeout * 9 / 10)) {
      fail(ErrorCode::ServiceTimeout, where + ": timed out");
    }
    fail(ErrorCode::ServiceUnavailable, where + ": " + httplib::to_string(err));
  }
  if (res->status >= 500) {
    std::string msg = where + ": HTTP " + std::to_string(res->status);
    const auto body = nlohmann::json::parse(res->body, nullptr, false);
    if (body.is_object() && body.contains("error") && body["error"].is_string()) {
      msg += ": " + body["error"].get<std::string>();
    }
    fail(ErrorCode::ServiceUnavailable, msg);
  }
  if (res->status != 200) fail(ErrorCode::MalformedResponse, where + ": HTTP " + std::to_string(res->status));
  auto body = nlohmann::json::parse(res->body, nullptr, false);
  if (!body.is_object()) fail(ErrorCode::MalformedResponse, where + ": body is not a JSON object");
  return body;
}

}  // namespace

nlohmann::json post_json(const ServiceEndpoint& endpoint, std::string_view path, const nlohmann::json& body) {
  auto client = make_client(endpoint);
  const auto start = std::chrono::steady_clock::now();
  const auto res = client.Post(std::string(path), body.dump(), "application/json");
  return handle(endpoint, path, res, start);
}

nlohmann::json get_json(const ServiceEndpoint& endpoint, std::string_view path) {
  auto client = make_client(endpoint);
  const auto start = std::chrono::steady_clock::now();
  const auto res = client.Get(std::string(path));
  return handle(endpoint, path, res, start);
}

const nlohmann::json& require(const nlohmann::json& obj, std::string_view key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorCode::MalformedResponse, "response lacks \"" + std::string(key) + "\"");
  return *it;
}

}  // namespace ragsc::detail
