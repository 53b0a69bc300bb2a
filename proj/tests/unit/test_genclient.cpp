#include <doctest.h>

#include <fstream>

#include "fake_server.hpp"
#include "ragsc/genclient.hpp"
#include "ragsc/metrics.hpp"
#include "support.hpp"

using namespace ragsc;
using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& p) {
  const Bytes b = read_file(p);
  return std::string(b.begin(), b.end());
}

EdgeMap fixture_edges() {
  std::ifstream in(test::fixture("protocol/edge_bits.txt"));
  std::vector<std::string> rows;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) rows.push_back(line);
  }
  EdgeMap e(static_cast<std::uint32_t>(rows.front().size()), static_cast<std::uint32_t>(rows.size()));
  for (std::uint32_t y = 0; y < e.height(); ++y) {
    for (std::uint32_t x = 0; x < e.width(); ++x) e.set(x, y, rows[y][x] == '1');
  }
  return e;
}

RasterImage fixture_response_pixels() {
  const json p = test::read_json(test::fixture("protocol/generate_response_pixels.json"));
  RasterImage img(p["width"].get<std::uint32_t>(), p["height"].get<std::uint32_t>(), 3);
  const auto rgb = p["rgb"].get<std::vector<int>>();
  REQUIRE(rgb.size() == img.data().size());
  for (std::size_t i = 0; i < rgb.size(); ++i) img.data()[i] = static_cast<std::uint8_t>(rgb[i]);
  return img;
}

GenerationRequest fixture_request() {
  GenerationRequest r;
  r.text_prompt = "a lake Context: stone bridge with pedestrians; ";
  r.edge_map = fixture_edges();
  r.reference_images.push_back(read_image(test::fixture("protocol/reference.png")));
  r.output_width = 8;
  r.output_height = 6;
  r.seed = 1234;
  r.steps = 30;
  return r;
}

}  // namespace

TEST_SUITE("genclient") {
  TEST_CASE("stub renders edges without references") {
    std::mt19937_64 rng(1);
    GenerationRequest r;
    r.edge_map = test::random_edges(rng, 64, 64, 0.2);
    r.output_width = 64;
    r.output_height = 64;
    StubGenerator stub;
    const auto out = stub.generate(r);
    CHECK(out.generator_id == "stub");
    CHECK_FALSE(out.degraded);
    REQUIRE(out.image.width() == 64);
    REQUIRE(out.image.height() == 64);
    bool all = true;
    for (std::uint32_t y = 0; y < 64; ++y) {
      for (std::uint32_t x = 0; x < 64; ++x) {
        for (std::uint32_t c = 0; c < out.image.channels(); ++c) {
          all = all && (out.image.at(x, y, c) == (r.edge_map.get(x, y) ? 255 : 0));
        }
      }
    }
    CHECK(all);
    CHECK(stub.generate(r).image == out.image);

    r.output_width = 32;
    r.output_height = 100;
    const auto scaled = stub.generate(r);
    CHECK(scaled.image.width() == 32);
    CHECK(scaled.image.height() == 100);
  }

  TEST_CASE("stub returns the top reference") {
    const RasterImage source = read_image(test::fixture("images/camera_256.png"));
    GenerationRequest r;
    r.edge_map = EdgeMap(256, 256);
    r.reference_images = {source, RasterImage(10, 10, 3, 7)};
    r.output_width = 256;
    r.output_height = 256;
    StubGenerator stub;
    const auto out = stub.generate(r);
    CHECK(out.image == source);
    CHECK(ms_ssim(out.image, source) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(stub.generate(r).image == out.image);

    r.output_width = 128;
    r.output_height = 64;
    CHECK(stub.generate(r).image == resize_nearest(source, 128, 64));
  }

  TEST_CASE("request validation") {
    StubGenerator stub;
    GenerationRequest r;
    r.edge_map = EdgeMap(4, 4);
    CHECK(test::code_of([&] { stub.generate(r); }) == ErrorCode::InvalidArgument);
    r.output_width = 4;
    r.output_height = 4;
    r.steps = 0;
    CHECK(test::code_of([&] { stub.generate(r); }) == ErrorCode::InvalidArgument);
    r.steps = 1;
    CHECK_NOTHROW(stub.generate(r));
    CHECK(parse_generator_backend("service") == GeneratorBackend::SERVICE);
    CHECK(parse_generator_backend("STUB") == GeneratorBackend::STUB);
    CHECK(test::code_of([] { parse_generator_backend("gpu"); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("recorded request fixture") {
    const std::string recorded = read_text(test::fixture("protocol/generate_request.json"));
    const GenerationRequest decoded = decode_generation_request(recorded);
    const GenerationRequest expect = fixture_request();
    CHECK(decoded.text_prompt == expect.text_prompt);
    CHECK(decoded.edge_map == expect.edge_map);
    REQUIRE(decoded.reference_images.size() == 1);
    CHECK(decoded.reference_images[0] == expect.reference_images[0]);
    CHECK(decoded.output_width == 8);
    CHECK(decoded.output_height == 6);
    CHECK(decoded.seed == 1234);
    CHECK(decoded.steps == 30);
    CHECK(decoded == expect);

    // Our encoding carries the same fields, and its PNGs decode to the recorded pixels.
    const json ours = json::parse(encode_generation_request(expect));
    const json theirs = json::parse(recorded);
    for (const auto& [key, value] : theirs.items()) CHECK(ours.contains(key));
    CHECK(ours.size() == theirs.size());
    for (const char* key : {"prompt", "width", "height", "seed", "steps"}) CHECK(ours[key] == theirs[key]);
    const auto edge_png = [](const json& j) {
      return decode_png(base64_decode(j["edge_map_png_b64"].get<std::string>()));
    };
    CHECK(edge_png(ours) == edge_png(theirs));
    CHECK(edge_png(ours).channels() == 3);
    CHECK(decode_generation_request(ours.dump()) == expect);
  }

  TEST_CASE("recorded response fixture") {
    const std::string recorded = read_text(test::fixture("protocol/generate_response.json"));
    const auto out = decode_generation_response(recorded, 8, 6);
    CHECK(out.generator_id == "sdxl-controlnet-canny");
    CHECK(out.image == fixture_response_pixels());
    CHECK(decode_generation_response(encode_generation_response(out.image, out.generator_id), 8, 6).image ==
          out.image);
    CHECK(test::code_of([&] { decode_generation_response(recorded, 8, 7); }) == ErrorCode::MalformedResponse);
  }

  TEST_CASE("malformed wire messages") {
    CHECK(test::code_of([] { decode_generation_request("[]"); }) == ErrorCode::MalformedStream);
    CHECK(test::code_of([] { decode_generation_request("{\"prompt\": 1}"); }) == ErrorCode::MalformedStream);
    json req = json::parse(read_text(test::fixture("protocol/generate_request.json")));
    req["edge_map_png_b64"] = "AAAA";
    CHECK(test::code_of([&] { decode_generation_request(req.dump()); }) == ErrorCode::MalformedStream);

    CHECK(test::code_of([] { decode_generation_response("nope", 1, 1); }) == ErrorCode::MalformedResponse);
    CHECK(test::code_of([] { decode_generation_response("{\"generator_id\":\"g\"}", 1, 1); }) ==
          ErrorCode::MalformedResponse);
    CHECK(test::code_of([] { decode_generation_response("{\"image_png_b64\":\"!!\",\"generator_id\":\"g\"}", 1, 1); }) ==
          ErrorCode::MalformedResponse);
    json resp = json::parse(encode_generation_response(RasterImage(1, 1, 3), "g"));
    resp["generator_id"] = 3;
    CHECK(test::code_of([&] { decode_generation_response(resp.dump(), 1, 1); }) == ErrorCode::MalformedResponse);
  }

  TEST_CASE("service generator over HTTP") {
    test::FakeServer s;
    const std::string response = read_text(test::fixture("protocol/generate_response.json"));
    GenerationRequest seen;
    s.on("/generate", [&](const httplib::Request& req, httplib::Response& res) {
      seen = decode_generation_request(req.body);
      res.set_content(response, "application/json");
    });
    ServiceGenerator gen(s.endpoint());
    const auto out = gen.generate(fixture_request());
    CHECK(seen == fixture_request());
    CHECK(out.image == fixture_response_pixels());
    CHECK(out.generator_id == "sdxl-controlnet-canny");
    CHECK_FALSE(out.degraded);
    CHECK(out.latency_ms >= 0.0);

    GenerationRequest wrong_size = fixture_request();
    wrong_size.output_width = 16;
    CHECK(test::code_of([&] { gen.generate(wrong_size); }) == ErrorCode::MalformedResponse);

    s.reply("/generate", {{"error", "CUDA out of memory"}}, 503);
    CHECK(test::code_of([&] { gen.generate(fixture_request()); }) == ErrorCode::ServiceUnavailable);

    s.on("/generate", [](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(800));
      res.set_content("{}", "application/json");
    });
    ServiceGenerator impatient(s.endpoint(std::chrono::milliseconds(200)));
    CHECK(test::code_of([&] { impatient.generate(fixture_request()); }) == ErrorCode::ServiceTimeout);
  }
}
