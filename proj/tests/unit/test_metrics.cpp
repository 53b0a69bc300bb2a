#include <doctest.h>

#include <cmath>

#include "ragsc/metrics.hpp"
#include "support.hpp"

using namespace ragsc;

namespace {

RasterImage noisy(const RasterImage& img, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  RasterImage out = img;
  for (auto& v : out.data()) v = static_cast<std::uint8_t>(std::clamp(std::lround(v + n(rng)), 0L, 255L));
  return out;
}

RasterImage inverted(const RasterImage& img) {
  RasterImage out = img;
  for (auto& v : out.data()) v = static_cast<std::uint8_t>(255 - v);
  return out;
}

std::vector<RasterImage> reference_images() {
  const auto ref = test::read_json(test::fixture("msssim/reference.json"));
  std::vector<RasterImage> out;
  for (const auto& c : ref["cases"]) out.push_back(read_image(test::fixture("msssim/" + c["reference"].get<std::string>())));
  return out;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("matches the recorded reference implementation") {
    const auto ref = test::read_json(test::fixture("msssim/reference.json"));
    const double tol = ref["tolerance"].get<double>();
    CHECK(tol == doctest::Approx(1e-3));
    REQUIRE(ref["cases"].size() == 10);
    for (const auto& c : ref["cases"]) {
      const RasterImage a = read_image(test::fixture("msssim/" + c["reference"].get<std::string>()));
      const RasterImage b = read_image(test::fixture("msssim/" + c["distorted"].get<std::string>()));
      const double got = ms_ssim(a, b);
      INFO(c["name"].get<std::string>(), " got ", got);
      CHECK(std::abs(got - c["ms_ssim"].get<double>()) <= tol);
    }
  }

  TEST_CASE("self similarity, symmetry and bounds") {
    for (const auto& img : reference_images()) {
      CHECK(std::abs(ms_ssim(img, img) - 1.0) <= 1e-6);
      const RasterImage n = noisy(img, 15.0, img.width());
      const double ab = ms_ssim(img, n), ba = ms_ssim(n, img);
      CHECK(std::abs(ab - ba) < 1e-9);
      CHECK(ab >= 0.0);
      CHECK(ab <= 1.0);
    }
  }

  TEST_CASE("inverted natural image scores low") {
    const RasterImage camera = read_image(test::fixture("images/camera_256.png"));
    CHECK(ms_ssim(camera, inverted(camera)) < 0.2);
  }

  TEST_CASE("stronger noise scores lower") {
    int seed = 0;
    for (const auto& img : reference_images()) {
      ++seed;
      CHECK(ms_ssim(img, noisy(img, 5.0, seed)) > ms_ssim(img, noisy(img, 25.0, seed)));
    }
  }

  TEST_CASE("scale count and small inputs") {
    CHECK(ms_ssim_scale_count(512, 512) == 5);
    CHECK(ms_ssim_scale_count(176, 300) == 5);
    CHECK(ms_ssim_scale_count(175, 300) == 5);  // halves 88, 44, 22, 11
    CHECK(ms_ssim_scale_count(160, 160) == 4);  // halves 80, 40, 20, 10
    CHECK(ms_ssim_scale_count(64, 64) == 3);
    CHECK(ms_ssim_scale_count(11, 11) == 1);
    CHECK(ms_ssim_scale_count(4, 4) == 1);
    CHECK(ms_ssim_scale_count(512, 512, {.scales = 2}) == 2);

    std::mt19937_64 rng(2);
    RasterImage small(7, 5, 1);
    for (auto& v : small.data()) v = static_cast<std::uint8_t>(rng());
    CHECK(ms_ssim(small, small) == doctest::Approx(1.0).epsilon(1e-9));
    const double s = ms_ssim(small, noisy(small, 40.0, 3));
    CHECK(s >= 0.0);
    CHECK(s < 1.0);
  }

  TEST_CASE("argument checks and channel handling") {
    CHECK(test::code_of([] { ms_ssim(RasterImage(16, 16, 1), RasterImage(16, 15, 1)); }) ==
          ErrorCode::DimensionMismatch);
    CHECK(test::code_of([] { ms_ssim(RasterImage(16, 16, 1), RasterImage(16, 16, 1), {.window = 0}); }) ==
          ErrorCode::InvalidArgument);
    const RasterImage rgb = read_image(test::fixture("images/coffee_256.png"));
    REQUIRE(rgb.channels() == 3);
    const RasterImage gray = to_grayscale(rgb);
    CHECK(ms_ssim(rgb, gray) == doctest::Approx(ms_ssim(gray, gray)).epsilon(1e-12));
  }

  TEST_CASE("clip similarity") {
    const Embedding a{{1, 0, 0}, true};
    CHECK(clip_similarity(a, a) == doctest::Approx(1.0));
    CHECK(clip_similarity(a, Embedding{{-1, 0, 0}, true}) == doctest::Approx(-1.0));
    CHECK(clip_similarity(a, Embedding{{0.6f, 0.8f, 0}, true}) == doctest::Approx(0.6).epsilon(1e-7));
    CHECK(clip_similarity(Embedding{{3, 4, 0}}, Embedding{{0.6f, 0.8f, 0}}) ==
          doctest::Approx(clip_similarity(Embedding{{30, 40, 0}}, Embedding{{6, 8, 0}})));
    CHECK(test::code_of([&] { clip_similarity(a, Embedding{{1, 0}}); }) == ErrorCode::DimensionMismatch);
  }

  TEST_CASE("measured ber and compression ratio") {
    const Bytes zeros(100, 0x00), ones(100, 0xff);
    CHECK(measured_ber(zeros, zeros) == 0.0);
    CHECK(measured_ber(zeros, ones) == 1.0);
    CHECK(measured_ber(Bytes{0x0f}, Bytes{0x00}) == 0.5);
    CHECK(measured_ber(Bytes{}, Bytes{}) == 0.0);
    CHECK(test::code_of([&] { measured_ber(zeros, Bytes(99)); }) == ErrorCode::LengthMismatch);

    std::mt19937_64 rng(4);
    std::bernoulli_distribution flip(1e-2);
    Bytes sent = test::random_bytes(rng, 125000), recv = sent;
    for (std::size_t i = 0; i < recv.size() * 8; ++i) {
      if (flip(rng)) recv[i / 8] ^= static_cast<std::uint8_t>(1u << (i % 8));
    }
    const double sigma = std::sqrt(1e-2 * (1 - 1e-2) / 1e6);
    CHECK(std::abs(measured_ber(sent, recv) - 1e-2) <= 3 * sigma);

    CHECK(compression_ratio(100, 100) == 1.0);
    CHECK(compression_ratio(1000, 100) == 10.0);
    CHECK(test::code_of([] { compression_ratio(1, 0); }) == ErrorCode::InvalidArgument);
  }
}
