#include "ragsc/genclient.hpp"

#include <chrono>

#include <nlohmann/json.hpp>

#include "http_client.hpp"
#include "ragsc/error.hpp"

namespace ragsc {

using nlohmann::json;

void GenerationRequest::validate() const {
  if (output_width == 0 || output_height == 0) fail(ErrorCode::InvalidArgument, "output size must be positive");
  if (edge_map.size() == 0) fail(ErrorCode::InvalidArgument, "request has no edge map");
  if (steps < 1) fail(ErrorCode::InvalidArgument, "steps must be positive");
  for (const auto& ref : reference_images) {
    if (ref.empty()) fail(ErrorCode::InvalidArgument, "empty reference image");
  }
}

std::string_view to_string(GeneratorBackend backend) {
  return backend == GeneratorBackend::SERVICE ? "SERVICE" : "STUB";
}

GeneratorBackend parse_generator_backend(std::string_view name) {
  if (name == "SERVICE" || name == "service") return GeneratorBackend::SERVICE;
  if (name == "STUB" || name == "stub") return GeneratorBackend::STUB;
  fail(ErrorCode::InvalidArgument, "unknown generator backend: " + std::string(name));
}

ReconstructionResult StubGenerator::generate(const GenerationRequest& request) {
  request.validate();
  const auto start = std::chrono::steady_clock::now();
  ReconstructionResult out;
  out.generator_id = kId;
  if (!request.reference_images.empty()) {
    out.image = resize_nearest(request.reference_images.front(), request.output_width, request.output_height);
  } else {
    out.image = render_edges(request.edge_map, request.output_width, request.output_height);
  }
  out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

ReconstructionResult ServiceGenerator::generate(const GenerationRequest& request) {
  request.validate();
  const auto start = std::chrono::steady_clock::now();
  const json body = detail::post_json(endpoint_, "/generate", json::parse(encode_generation_request(request)));
  ReconstructionResult out = decode_generation_response(body.dump(), request.output_width, request.output_height);
  out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::string encode_generation_request(const GenerationRequest& request) {
  const EdgeMap& e = request.edge_map;
  json refs = json::array();
  for (const auto& ref : request.reference_images) refs.push_back(base64_encode(encode_png(to_rgb(ref))));
  const json body{{"prompt", request.text_prompt},
                  {"edge_map_png_b64", base64_encode(encode_png(render_edges(e, e.width(), e.height())))},
                  {"reference_png_b64", refs},
                  {"width", request.output_width},
                  {"height", request.output_height},
                  {"seed", request.seed},
                  {"steps", request.steps}};
  return body.dump();
}

namespace {

RasterImage decode_b64_png(const json& value, ErrorCode code) {
  if (!value.is_string()) fail(code, "PNG payload is not a string");
  try {
    return decode_png(base64_decode(value.get<std::string>()));
  } catch (const Error& e) {
    fail(code, std::string("bad PNG payload: ") + e.what());
  }
}

}  // namespace

GenerationRequest decode_generation_request(std::string_view json_body) {
  const json body = json::parse(json_body, nullptr, false);
  if (!body.is_object()) fail(ErrorCode::MalformedStream, "request is not a JSON object");
  try {
    GenerationRequest req;
    req.text_prompt = body.at("prompt").get<std::string>();
    const RasterImage edges = decode_b64_png(body.at("edge_map_png_b64"), ErrorCode::MalformedStream);
    req.edge_map = EdgeMap(edges.width(), edges.height());
    for (std::uint32_t y = 0; y < edges.height(); ++y) {
      for (std::uint32_t x = 0; x < edges.width(); ++x) req.edge_map.set(x, y, edges.at(x, y, 0) >= 128);
    }
    for (const auto& ref : body.at("reference_png_b64")) {
      req.reference_images.push_back(decode_b64_png(ref, ErrorCode::MalformedStream));
    }
    req.output_width = body.at("width").get<std::uint32_t>();
    req.output_height = body.at("height").get<std::uint32_t>();
    req.seed = body.at("seed").get<std::uint64_t>();
    req.steps = body.at("steps").get<int>();
    return req;
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedStream, std::string("bad request field: ") + e.what());
  }
}

std::string encode_generation_response(const RasterImage& image, std::string_view generator_id) {
  return json{{"image_png_b64", base64_encode(encode_png(to_rgb(image)))}, {"generator_id", generator_id}}.dump();
}

ReconstructionResult decode_generation_response(std::string_view json_body, std::uint32_t expected_width,
                                                std::uint32_t expected_height) {
  const json body = json::parse(json_body, nullptr, false);
  if (!body.is_object()) fail(ErrorCode::MalformedResponse, "response is not a JSON object");
  ReconstructionResult out;
  out.image = decode_b64_png(detail::require(body, "image_png_b64"), ErrorCode::MalformedResponse);
  const json& id = detail::require(body, "generator_id");
  if (!id.is_string()) fail(ErrorCode::MalformedResponse, "generator_id is not a string");
  out.generator_id = id.get<std::string>();
  if (out.image.width() != expected_width || out.image.height() != expected_height) {
    fail(ErrorCode::MalformedResponse, "generated image is " + std::to_string(out.image.width()) + "x" +
                                           std::to_string(out.image.height()) + ", expected " +
                                           std::to_string(expected_width) + "x" + std::to_string(expected_height));
  }
  return out;
}

}  // namespace ragsc
