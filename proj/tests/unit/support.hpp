#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include <doctest.h>

#include <nlohmann/json.hpp>

#include "ragsc/codec.hpp"
#include "ragsc/edgemap.hpp"
#include "ragsc/error.hpp"
#include "ragsc/image.hpp"

namespace test {

inline std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(RAGSC_FIXTURES) / rel; }

inline nlohmann::json read_json(const std::filesystem::path& p) {
  const auto bytes = ragsc::read_file(p);
  return nlohmann::json::parse(bytes.begin(), bytes.end());
}

inline ragsc::EdgeMap random_edges(std::mt19937_64& rng, std::uint32_t w, std::uint32_t h, double density) {
  ragsc::EdgeMap e(w, h);
  std::bernoulli_distribution bit(density);
  for (std::size_t i = 0; i < e.size(); ++i) e.set(i, bit(rng));
  return e;
}

inline ragsc::Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  ragsc::Bytes out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

inline ragsc::ErrorCode code_of(const auto& fn) {
  try {
    fn();
  } catch (const ragsc::Error& e) {
    return e.code();
  }
  FAIL("expected a ragsc::Error");
  return ragsc::ErrorCode::InvalidArgument;
}

// Fresh per-process scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ragsc_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace test
