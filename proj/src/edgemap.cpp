#include "ragsc/edgemap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ragsc/error.hpp"

namespace ragsc {

EdgeMap::EdgeMap(std::uint32_t width, std::uint32_t height)
    : width_(width), height_(height), bits_(std::size_t{width} * height, 0) {
  if (width == 0 || height == 0) fail(ErrorCode::InvalidArgument, "edge map dimensions must be >= 1");
}

EdgeMap::EdgeMap(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width == 0 || height == 0) fail(ErrorCode::InvalidArgument, "edge map dimensions must be >= 1");
  if (bits_.size() != std::size_t{width} * height) {
    fail(ErrorCode::InvalidArgument, "edge map bit count does not match width*height");
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t EdgeMap::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

RasterImage to_grayscale(const RasterImage& img) {
  if (img.channels() == 1) return img;
  RasterImage out(img.width(), img.height(), 1);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const std::uint32_t r = src[3 * i], g = src[3 * i + 1], b = src[3 * i + 2];
    // Round half up of (299 R + 587 G + 114 B) / 1000.
    dst[i] = static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
  }
  return out;
}

namespace {

// Normalized Gaussian taps quantized to a common integer denominator.
std::vector<std::int64_t> gaussian_taps(double sigma, int radius) {
  std::vector<double> g(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) g[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  const double total = std::accumulate(g.begin(), g.end(), 0.0);
  std::vector<std::int64_t> taps(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) taps[i] = std::llround(g[i] / total * 1024.0);
  if (std::accumulate(taps.begin(), taps.end(), std::int64_t{0}) == 0) taps[radius] = 1;
  return taps;
}

}  // namespace

EdgeMap canny(const RasterImage& gray, const CannyParams& params) {
  if (gray.channels() != 1) fail(ErrorCode::InvalidArgument, "canny expects a 1-channel image");
  if (!(params.low < params.high)) fail(ErrorCode::InvalidThresholds, "low threshold must be below high");
  if (!(params.sigma > 0.0)) fail(ErrorCode::InvalidArgument, "sigma must be positive");

  const int w = static_cast<int>(gray.width());
  const int h = static_cast<int>(gray.height());
  const auto n = static_cast<std::size_t>(w) * h;
  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  auto cx = [w](int x) { return std::clamp(x, 0, w - 1); };
  auto cy = [h](int y) { return std::clamp(y, 0, h - 1); };

  // 1. Separable Gaussian blur, edge-replicated, kept at scale K^2.
  const int radius = static_cast<int>(std::ceil(3.0 * params.sigma));
  const auto taps = gaussian_taps(params.sigma, radius);
  const std::int64_t k_sum = std::accumulate(taps.begin(), taps.end(), std::int64_t{0});
  const std::int64_t scale = k_sum * k_sum;

  std::vector<std::int64_t> tmp(n), blurred(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::int64_t acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += taps[i + radius] * gray.at(cx(x + i), y);
      tmp[idx(x, y)] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::int64_t acc = 0;
      for (int i = -radius; i <= radius; ++i) acc += taps[i + radius] * tmp[idx(x, cy(y + i))];
      blurred[idx(x, y)] = acc;
    }
  }

  // 2. Sobel 3x3 with edge replication.
  std::vector<std::int64_t> gx(n), gy(n), mag2(n);
  auto b = [&](int x, int y) { return blurred[idx(cx(x), cy(y))]; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int64_t dx = (b(x + 1, y - 1) + 2 * b(x + 1, y) + b(x + 1, y + 1)) -
                              (b(x - 1, y - 1) + 2 * b(x - 1, y) + b(x - 1, y + 1));
      const std::int64_t dy = (b(x - 1, y + 1) + 2 * b(x, y + 1) + b(x + 1, y + 1)) -
                              (b(x - 1, y - 1) + 2 * b(x, y - 1) + b(x + 1, y - 1));
      gx[idx(x, y)] = dx;
      gy[idx(x, y)] = dy;
      mag2[idx(x, y)] = dx * dx + dy * dy;
    }
  }

  // 3. Non-maximum suppression along the gradient quantized to 0/45/90/135 degrees.
  constexpr double kTan22 = 0.41421356237309503;
  constexpr double kTan67 = 2.4142135623730950;
  auto mag_at = [&](int x, int y) -> std::int64_t {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0;
    return mag2[idx(x, y)];
  };
  std::vector<std::uint8_t> thin(n, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int64_t m = mag2[idx(x, y)];
      if (m == 0) continue;
      const double ax = std::fabs(static_cast<double>(gx[idx(x, y)]));
      const double ay = std::fabs(static_cast<double>(gy[idx(x, y)]));
      int ox, oy;
      if (ay <= ax * kTan22) {
        ox = 1, oy = 0;
      } else if (ay >= ax * kTan67) {
        ox = 0, oy = 1;
      } else if ((gx[idx(x, y)] > 0) == (gy[idx(x, y)] > 0)) {
        ox = 1, oy = 1;
      } else {
        ox = 1, oy = -1;
      }
      // Strict on one side, non-strict on the other keeps plateaus one pixel wide.
      if (m > mag_at(x - ox, y - oy) && m >= mag_at(x + ox, y + oy)) thin[idx(x, y)] = 1;
    }
  }

  // 4. Double threshold with 8-connected hysteresis.
  const long double hi = static_cast<long double>(params.high) * scale;
  const long double lo = static_cast<long double>(params.low) * scale;
  const long double hi2 = hi * hi;
  const long double lo2 = params.low > 0 ? lo * lo : 0.0L;
  EdgeMap out(gray.width(), gray.height());
  std::vector<std::size_t> stack;
  std::vector<std::uint8_t> weak(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!thin[i]) continue;
    const auto m = static_cast<long double>(mag2[i]);
    if (m >= hi2) {
      out.set(i, true);
      stack.push_back(i);
    } else if (m >= lo2) {
      weak[i] = 1;
    }
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const int x = static_cast<int>(i % w);
    const int y = static_cast<int>(i / w);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t j = idx(nx, ny);
        if (weak[j]) {
          weak[j] = 0;
          out.set(j, true);
          stack.push_back(j);
        }
      }
    }
  }
  return out;
}

double edge_density(const EdgeMap& edges) {
  if (edges.size() == 0) return 0.0;
  return static_cast<double>(edges.count()) / static_cast<double>(edges.size());
}

RasterImage render_edges(const EdgeMap& edges, std::uint32_t width, std::uint32_t height) {
  RasterImage out(width, height, 3);
  for (std::uint32_t y = 0; y < height; ++y) {
    const auto sy = static_cast<std::uint32_t>(std::uint64_t{y} * edges.height() / height);
    for (std::uint32_t x = 0; x < width; ++x) {
      const auto sx = static_cast<std::uint32_t>(std::uint64_t{x} * edges.width() / width);
      if (edges.get(sx, sy)) out.at(x, y, 0) = out.at(x, y, 1) = out.at(x, y, 2) = 255;
    }
  }
  return out;
}

}  // namespace ragsc
