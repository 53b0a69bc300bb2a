#pragma once

#include <chrono>
#include <string>

namespace ragsc {

// Location of the model server, e.g. "http://127.0.0.1:8700".
struct ServiceEndpoint {
  std::string base_url;
  std::chrono::milliseconds timeout{120000};
};

}  // namespace ragsc
