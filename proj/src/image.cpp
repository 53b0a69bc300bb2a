#include "ragsc/image.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ragsc/error.hpp"

namespace ragsc {

namespace {

void check_shape(std::uint32_t width, std::uint32_t height, std::uint32_t channels) {
  if (width == 0 || height == 0) fail(ErrorCode::InvalidArgument, "image dimensions must be >= 1");
  if (channels != 1 && channels != 3) fail(ErrorCode::InvalidArgument, "image must have 1 or 3 channels");
}

}  // namespace

RasterImage::RasterImage(std::uint32_t width, std::uint32_t height, std::uint32_t channels,
                         std::uint8_t fill)
    : width_(width), height_(height), channels_(channels) {
  check_shape(width, height, channels);
  data_.assign(std::size_t{width} * height * channels, fill);
}

RasterImage::RasterImage(std::uint32_t width, std::uint32_t height, std::uint32_t channels,
                         std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  check_shape(width, height, channels);
  if (data_.size() != std::size_t{width} * height * channels) {
    fail(ErrorCode::InvalidArgument, "image data length does not match width*height*channels");
  }
}

RasterImage resize_nearest(const RasterImage& img, std::uint32_t width, std::uint32_t height) {
  if (img.width() == width && img.height() == height) return img;
  RasterImage out(width, height, img.channels());
  for (std::uint32_t y = 0; y < height; ++y) {
    const auto sy = static_cast<std::uint32_t>(std::uint64_t{y} * img.height() / height);
    for (std::uint32_t x = 0; x < width; ++x) {
      const auto sx = static_cast<std::uint32_t>(std::uint64_t{x} * img.width() / width);
      for (std::uint32_t c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

RasterImage to_rgb(const RasterImage& img) {
  if (img.channels() == 3) return img;
  RasterImage out(img.width(), img.height(), 3);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[3 * i] = dst[3 * i + 1] = dst[3 * i + 2] = src[i];
  return out;
}

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = img.width();
  image.height = img.height();
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.data().data(), 0, nullptr)) {
    fail(ErrorCode::Io, std::string("png encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data().data(), 0, nullptr)) {
    fail(ErrorCode::Io, std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    fail(ErrorCode::MalformedStream, std::string("png decode failed: ") + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::uint32_t channels = color ? 3 : 1;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
  // Alpha, if any, is composited onto black.
  png_color background{0, 0, 0};
  if (!png_image_finish_read(&image, &background, data.data(), 0, nullptr)) {
    png_image_free(&image);
    fail(ErrorCode::MalformedStream, std::string("png decode failed: ") + image.message);
  }
  return RasterImage(image.width, image.height, channels, std::move(data));
}

std::vector<std::uint8_t> encode_pnm(const RasterImage& img) {
  const std::string header = std::string(img.channels() == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(img.width()) + " " + std::to_string(img.height()) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data().begin(), img.data().end());
  return out;
}

RasterImage decode_pnm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> std::uint32_t {
    skip_space();
    std::uint64_t v = 0;
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 0xFFFFFFFFull) fail(ErrorCode::MalformedStream, "pnm header value too large");
    }
    if (pos == start) fail(ErrorCode::MalformedStream, "pnm header truncated");
    return static_cast<std::uint32_t>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    fail(ErrorCode::MalformedStream, "not a binary PGM/PPM file");
  }
  const std::uint32_t channels = bytes[1] == '6' ? 3 : 1;
  pos = 2;
  const auto width = read_uint();
  const auto height = read_uint();
  const auto maxval = read_uint();
  if (maxval != 255) fail(ErrorCode::MalformedStream, "only maxval 255 is supported");
  ++pos;  // single whitespace byte before the raster
  const std::size_t need = std::size_t{width} * height * channels;
  if (pos > bytes.size() || bytes.size() - pos < need) fail(ErrorCode::MalformedStream, "pnm raster truncated");
  return RasterImage(width, height, channels,
                     std::vector<std::uint8_t>(bytes.begin() + pos, bytes.begin() + pos + need));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

RasterImage read_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G') {
    return decode_png(bytes);
  }
  return decode_pnm(bytes);
}

void write_image(const RasterImage& img, const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    write_file(path, encode_pnm(img));
  } else {
    write_file(path, encode_png(img));
  }
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) fail(ErrorCode::MalformedStream, "base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) fail(ErrorCode::MalformedStream, "invalid base64");
  std::size_t padding = 0;
  if (!text.empty() && text.back() == '=') ++padding;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

}  // namespace ragsc
