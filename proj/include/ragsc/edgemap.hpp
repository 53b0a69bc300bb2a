#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ragsc/image.hpp"

namespace ragsc {

// Binary structural prompt: one flag per pixel, row-major, 1 = edge.
class EdgeMap {
 public:
  EdgeMap() = default;
  EdgeMap(std::uint32_t width, std::uint32_t height);
  EdgeMap(std::uint32_t width, std::uint32_t height, std::vector<std::uint8_t> bits);

  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool get(std::size_t index) const { return bits_[index] != 0; }
  bool get(std::uint32_t x, std::uint32_t y) const { return bits_[std::size_t{y} * width_ + x] != 0; }
  void set(std::size_t index, bool value) { bits_[index] = value ? 1 : 0; }
  void set(std::uint32_t x, std::uint32_t y, bool value) { set(std::size_t{y} * width_ + x, value); }

  std::size_t count() const noexcept;
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  friend bool operator==(const EdgeMap&, const EdgeMap&) = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct CannyParams {
  double low = 100.0;
  double high = 200.0;
  double sigma = 1.4;
};

// gray = round(0.299 R + 0.587 G + 0.114 B); 1-channel input is returned as is.
RasterImage to_grayscale(const RasterImage& img);

// Four-stage Canny on a 1-channel image. Thresholds apply to the L2 magnitude
// of the unnormalized 3x3 Sobel response on the 0-255 intensity scale.
// Blur and gradients run in exact integer arithmetic, so the result is
// bit-identical under a constant intensity offset.
EdgeMap canny(const RasterImage& gray, const CannyParams& params = {});

double edge_density(const EdgeMap& edges);

// White-on-black RGB rendering scaled (nearest neighbour) to width x height.
RasterImage render_edges(const EdgeMap& edges, std::uint32_t width, std::uint32_t height);

}  // namespace ragsc
