#include <doctest.h>

#include <cmath>
#include <queue>

#include "ragsc/edgemap.hpp"
#include "support.hpp"

using namespace ragsc;

namespace {

RasterImage rect_image(std::uint32_t w, std::uint32_t h, std::uint32_t x0, std::uint32_t y0, std::uint32_t x1,
                       std::uint32_t y1) {
  RasterImage img(w, h, 1, 0);
  for (std::uint32_t y = y0; y < y1; ++y) {
    for (std::uint32_t x = x0; x < x1; ++x) img.at(x, y) = 255;
  }
  return img;
}

// Chebyshev distance from pixel (x, y) to the ring of rectangle pixels that
// touch the outside.
int ring_distance(int x, int y, int x0, int y0, int x1, int y1) {
  int best = 1 << 20;
  for (int yy = y0; yy < y1; ++yy) {
    for (int xx = x0; xx < x1; ++xx) {
      if (xx != x0 && xx != x1 - 1 && yy != y0 && yy != y1 - 1) continue;
      best = std::min(best, std::max(std::abs(xx - x), std::abs(yy - y)));
    }
  }
  return best;
}

// True when the non-edge pixels reachable from (sx, sy) by 4-connected steps
// never include (tx, ty).
bool separated(const EdgeMap& e, std::uint32_t sx, std::uint32_t sy, std::uint32_t tx, std::uint32_t ty) {
  std::vector<std::uint8_t> seen(e.size(), 0);
  std::queue<std::pair<std::uint32_t, std::uint32_t>> q;
  q.emplace(sx, sy);
  seen[std::size_t{sy} * e.width() + sx] = 1;
  while (!q.empty()) {
    const auto [x, y] = q.front();
    q.pop();
    if (x == tx && y == ty) return false;
    const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = static_cast<int>(x) + dx[k], ny = static_cast<int>(y) + dy[k];
      if (nx < 0 || ny < 0 || nx >= static_cast<int>(e.width()) || ny >= static_cast<int>(e.height())) continue;
      const std::size_t i = static_cast<std::size_t>(ny) * e.width() + static_cast<std::size_t>(nx);
      if (seen[i] || e.get(i)) continue;
      seen[i] = 1;
      q.emplace(nx, ny);
    }
  }
  return true;
}

void check_rectangle(std::uint32_t w, std::uint32_t h, int x0, int y0, int x1, int y1) {
  const EdgeMap e = canny(rect_image(w, h, x0, y0, x1, y1));
  REQUIRE(e.count() > 0);
  std::size_t far_pixels = 0, far_edges = 0;
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      const int d = ring_distance(static_cast<int>(x), static_cast<int>(y), x0, y0, x1, y1);
      if (e.get(x, y)) CHECK_MESSAGE(d <= 1, "edge at " << x << "," << y);
      if (d > 1) {
        ++far_pixels;
        far_edges += e.get(x, y) ? 1 : 0;
      }
    }
  }
  CHECK(static_cast<double>(far_edges) / static_cast<double>(far_pixels) < 0.01);
  CHECK(separated(e, 0, 0, static_cast<std::uint32_t>((x0 + x1) / 2), static_cast<std::uint32_t>((y0 + y1) / 2)));
}

}  // namespace

TEST_SUITE("edgemap") {
  TEST_CASE("grayscale weights") {
    RasterImage px(3, 1, 3, 0);
    px.at(0, 0, 0) = px.at(0, 0, 1) = px.at(0, 0, 2) = 255;
    px.at(2, 0, 0) = 255;
    const RasterImage g = to_grayscale(px);
    CHECK(g.channels() == 1);
    CHECK(g.at(0, 0) == 255);
    CHECK(g.at(1, 0) == 0);
    CHECK(g.at(2, 0) == static_cast<int>(std::lround(0.299 * 255)));
    const RasterImage gray(4, 4, 1, 9);
    CHECK(to_grayscale(gray) == gray);
  }

  TEST_CASE("uniform image has no edges") {
    for (const std::uint8_t v : {0, 128, 255}) CHECK(canny(RasterImage(40, 30, 1, v)).count() == 0);
  }

  TEST_CASE("centered square gives a closed contour on its boundary") { check_rectangle(64, 64, 16, 16, 48, 48); }

  TEST_CASE("axis aligned rectangle edges stay within one pixel") { check_rectangle(80, 50, 7, 12, 61, 35); }

  TEST_CASE("deterministic") {
    const RasterImage img = to_grayscale(read_image(test::fixture("images/camera_256.png")));
    CHECK(canny(img) == canny(img));
  }

  TEST_CASE("constant offset leaves edges unchanged") {
    const RasterImage src = to_grayscale(read_image(test::fixture("images/camera_256.png")));
    RasterImage a = src, b = src;
    for (std::size_t i = 0; i < src.byte_size(); ++i) {
      const int v = 10 + src.data()[i] * 225 / 255;  // [10, 235]
      a.data()[i] = static_cast<std::uint8_t>(v);
      b.data()[i] = static_cast<std::uint8_t>(v + 10);
    }
    const EdgeMap ea = canny(a);
    CHECK(ea.count() > 100);
    CHECK(ea == canny(b));
  }

  TEST_CASE("parameter validation") {
    const RasterImage img(8, 8, 1, 0);
    CHECK(test::code_of([&] { canny(img, {200, 100, 1.4}); }) == ErrorCode::InvalidThresholds);
    CHECK(test::code_of([&] { canny(img, {100, 100, 1.4}); }) == ErrorCode::InvalidThresholds);
    CHECK(test::code_of([&] { canny(img, {100, 200, 0.0}); }) == ErrorCode::InvalidArgument);
    CHECK(test::code_of([&] { canny(RasterImage(8, 8, 3), {}); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("tiny images") {
    CHECK(canny(RasterImage(1, 1, 1, 200)).count() == 0);
    CHECK_NOTHROW(canny(rect_image(3, 2, 1, 0, 2, 1)));
  }

  TEST_CASE("edge density") {
    CHECK(edge_density(EdgeMap(10, 10)) == 0.0);
    CHECK(edge_density(EdgeMap(4, 4, std::vector<std::uint8_t>(16, 1))) == 1.0);
    EdgeMap e(10, 10);
    for (std::size_t i = 0; i < 25; ++i) e.set(i * 4, true);
    CHECK(edge_density(e) == doctest::Approx(0.25).epsilon(1e-12));
  }

  TEST_CASE("render is white exactly on edge bits") {
    std::mt19937_64 rng(3);
    const EdgeMap e = test::random_edges(rng, 64, 64, 0.2);
    const RasterImage img = render_edges(e, 64, 64);
    REQUIRE(img.channels() == 3);
    bool ok = true;
    for (std::uint32_t y = 0; y < 64; ++y) {
      for (std::uint32_t x = 0; x < 64; ++x) {
        for (std::uint32_t c = 0; c < 3; ++c) ok = ok && (img.at(x, y, c) == (e.get(x, y) ? 255 : 0));
      }
    }
    CHECK(ok);
    const RasterImage big = render_edges(e, 128, 32);
    CHECK(big.width() == 128);
    CHECK(big.at(2 * 5, 7, 0) == (e.get(5, 14) ? 255 : 0));
  }
}
