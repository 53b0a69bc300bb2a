#include <doctest.h>

#include "ragsc/image.hpp"
#include "support.hpp"

using namespace ragsc;

TEST_SUITE("image") {
  TEST_CASE("raster constructor validates shape") {
    CHECK(test::code_of([] { RasterImage(0, 4, 1); }) == ErrorCode::InvalidArgument);
    CHECK(test::code_of([] { RasterImage(4, 4, 2); }) == ErrorCode::InvalidArgument);
    CHECK(test::code_of([] { RasterImage(2, 2, 1, std::vector<std::uint8_t>(3)); }) == ErrorCode::InvalidArgument);
    const RasterImage img(3, 2, 3, 7);
    CHECK(img.byte_size() == 18);
    CHECK(img.at(2, 1, 2) == 7);
  }

  TEST_CASE("png round trip for gray and rgb") {
    std::mt19937_64 rng(5);
    for (const std::uint32_t c : {1u, 3u}) {
      RasterImage img(17, 9, c);
      for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng());
      CHECK(decode_png(encode_png(img)) == img);
    }
  }

  TEST_CASE("pnm round trip") {
    std::mt19937_64 rng(6);
    for (const std::uint32_t c : {1u, 3u}) {
      RasterImage img(5, 11, c);
      for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng());
      CHECK(decode_pnm(encode_pnm(img)) == img);
    }
    const std::string header = "P5\n# comment\n2 1\n255\n";
    Bytes bytes(header.begin(), header.end());
    bytes.push_back(9);
    bytes.push_back(200);
    const RasterImage img = decode_pnm(bytes);
    CHECK(img.width() == 2);
    CHECK(img.at(1, 0) == 200);
  }

  TEST_CASE("png decode rejects garbage") {
    const Bytes junk{1, 2, 3, 4, 5};
    CHECK_THROWS_AS(decode_png(junk), Error);
  }

  TEST_CASE("file io sniffs format") {
    const auto dir = test::scratch_dir("image_io");
    RasterImage img(4, 3, 3, 99);
    img.at(1, 1, 0) = 3;
    write_image(img, dir / "a.png");
    write_image(img, dir / "a.ppm");
    CHECK(read_image(dir / "a.png") == img);
    CHECK(read_image(dir / "a.ppm") == img);
    CHECK(test::code_of([&] { read_image(dir / "missing.png"); }) == ErrorCode::Io);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("base64 matches the standard alphabet") {
    const std::string text = "foobar";
    const Bytes bytes(text.begin(), text.end());
    CHECK(base64_encode(bytes) == "Zm9vYmFy");
    CHECK(base64_encode(Bytes(bytes.begin(), bytes.begin() + 4)) == "Zm9vYg==");
    CHECK(base64_decode("Zm9vYg==") == Bytes(bytes.begin(), bytes.begin() + 4));
    CHECK(base64_decode("Zm9vYmE=") == Bytes(bytes.begin(), bytes.begin() + 5));
    CHECK(base64_decode("").empty());
    CHECK_THROWS_AS(base64_decode("@@@@"), Error);
  }

  TEST_CASE("nearest resize and rgb promotion") {
    RasterImage img(2, 2, 1);
    img.at(0, 0) = 10;
    img.at(1, 0) = 20;
    img.at(0, 1) = 30;
    img.at(1, 1) = 40;
    const RasterImage big = resize_nearest(img, 4, 4);
    CHECK(big.at(0, 0) == 10);
    CHECK(big.at(3, 0) == 20);
    CHECK(big.at(1, 3) == 30);
    CHECK(big.at(3, 3) == 40);
    CHECK(resize_nearest(img, 2, 2) == img);
    const RasterImage rgb = to_rgb(img);
    CHECK(rgb.channels() == 3);
    CHECK(rgb.at(1, 1, 2) == 40);
  }
}
