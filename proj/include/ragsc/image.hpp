#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ragsc {

// 8-bit raster, row-major with interleaved channels (1 = gray, 3 = RGB).
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(std::uint32_t width, std::uint32_t height, std::uint32_t channels,
              std::uint8_t fill = 0);
  RasterImage(std::uint32_t width, std::uint32_t height, std::uint32_t channels,
              std::vector<std::uint8_t> data);

  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t height() const noexcept { return height_; }
  std::uint32_t channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept { return std::size_t{width_} * height_; }
  std::size_t byte_size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t at(std::uint32_t x, std::uint32_t y, std::uint32_t c = 0) const {
    return data_[(std::size_t{y} * width_ + x) * channels_ + c];
  }
  std::uint8_t& at(std::uint32_t x, std::uint32_t y, std::uint32_t c = 0) {
    return data_[(std::size_t{y} * width_ + x) * channels_ + c];
  }

  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<std::uint8_t> data() noexcept { return data_; }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::uint32_t channels_ = 0;
  std::vector<std::uint8_t> data_;
};

RasterImage resize_nearest(const RasterImage& img, std::uint32_t width, std::uint32_t height);
RasterImage to_rgb(const RasterImage& img);

// PNG (8-bit gray/RGB; palette, alpha and 16-bit inputs are converted) and
// binary PNM (P5/P6, maxval 255).
std::vector<std::uint8_t> encode_png(const RasterImage& img);
RasterImage decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const RasterImage& img);
RasterImage decode_pnm(std::span<const std::uint8_t> bytes);

// Format is sniffed from the content on read and chosen by extension on write
// (.png, .pgm, .ppm, .pnm).
RasterImage read_image(const std::filesystem::path& path);
void write_image(const RasterImage& img, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace ragsc
