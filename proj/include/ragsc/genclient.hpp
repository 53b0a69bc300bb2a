#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ragsc/edgemap.hpp"
#include "ragsc/image.hpp"
#include "ragsc/service.hpp"

namespace ragsc {

struct GenerationRequest {
  std::string text_prompt;
  EdgeMap edge_map;
  std::vector<RasterImage> reference_images;  // best first
  std::uint32_t output_width = 0;
  std::uint32_t output_height = 0;
  std::uint64_t seed = 0;
  int steps = 30;

  void validate() const;
  friend bool operator==(const GenerationRequest&, const GenerationRequest&) = default;
};

struct ReconstructionResult {
  RasterImage image;
  std::string generator_id;
  double latency_ms = 0.0;
  bool degraded = false;
};

enum class GeneratorBackend : std::uint8_t { SERVICE, STUB };

std::string_view to_string(GeneratorBackend backend);
GeneratorBackend parse_generator_backend(std::string_view name);

class Generator {
 public:
  virtual ~Generator() = default;
  virtual ReconstructionResult generate(const GenerationRequest& request) = 0;
};

// Returns the top reference resized by nearest neighbour, or without
// references the edge map rendered white-on-black. Pure and thread-safe.
class StubGenerator final : public Generator {
 public:
  static constexpr std::string_view kId = "stub";
  ReconstructionResult generate(const GenerationRequest& request) override;
};

// POST /generate on the model server.
class ServiceGenerator final : public Generator {
 public:
  explicit ServiceGenerator(ServiceEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
  ReconstructionResult generate(const GenerationRequest& request) override;

 private:
  ServiceEndpoint endpoint_;
};

// Wire format of /generate. Requests carry the edge map as a white-on-black
// RGB PNG at edge map resolution and the references as RGB PNGs.
std::string encode_generation_request(const GenerationRequest& request);
GenerationRequest decode_generation_request(std::string_view json_body);
std::string encode_generation_response(const RasterImage& image, std::string_view generator_id);
// Throws MalformedResponse on bad JSON, bad base64/PNG, or a size other than
// expected_width x expected_height.
ReconstructionResult decode_generation_response(std::string_view json_body, std::uint32_t expected_width,
                                                std::uint32_t expected_height);

}  // namespace ragsc
