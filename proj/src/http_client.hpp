#pragma once

#include <string_view>

#include <nlohmann/json.hpp>

#include "ragsc/service.hpp"

namespace ragsc::detail {

// POST a JSON body and parse the JSON reply. Connection failures and 5xx map
// to ServiceUnavailable, expired timeouts to ServiceTimeout, anything that is
// not a 200 with a JSON object body to MalformedResponse.
nlohmann::json post_json(const ServiceEndpoint& endpoint, std::string_view path, const nlohmann::json& body);
nlohmann::json get_json(const ServiceEndpoint& endpoint, std::string_view path);

// Typed field access that throws MalformedResponse.
const nlohmann::json& require(const nlohmann::json& obj, std::string_view key);

}  // namespace ragsc::detail
