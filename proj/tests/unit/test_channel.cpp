#include <doctest.h>

#include <bit>
#include <cmath>
#include <string>

#include "ragsc/channel.hpp"
#include "support.hpp"

using namespace ragsc;

namespace {

// Bitwise reflected CRC-32, independent of the zlib-backed implementation.
std::uint32_t crc32_oracle(ByteView bytes) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (const std::uint8_t b : bytes) {
    crc ^= b;
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return crc ^ 0xFFFFFFFFu;
}

std::size_t hamming(ByteView a, ByteView b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += static_cast<std::size_t>(std::popcount(unsigned(a[i] ^ b[i])));
  return n;
}

Bytes from_hex(const std::string& hex) {
  Bytes out;
  for (std::size_t i = 0; i < hex.size(); i += 2) out.push_back(static_cast<std::uint8_t>(std::stoul(hex.substr(i, 2), nullptr, 16)));
  return out;
}

// |observed - p| <= 3 sigma of a binomial proportion over n trials.
void check_binomial(double observed, double p, double n) {
  const double sigma = std::sqrt(p * (1.0 - p) / n);
  CHECK_MESSAGE(std::abs(observed - p) <= 3.0 * sigma, "observed " << observed << " expected " << p << " sigma " << sigma);
}

std::vector<std::uint8_t> bits_of(const std::string& s) {
  std::vector<std::uint8_t> out;
  for (const char c : s) out.push_back(c == '1');
  return out;
}

}  // namespace

TEST_SUITE("channel") {
  TEST_CASE("splitmix64 matches recorded vectors") {
    const auto doc = test::read_json(test::fixture("prng/splitmix64_vectors.json"));
    for (const auto& v : doc["vectors"]) {
      const std::uint64_t seed = std::stoull(v["seed"].get<std::string>(), nullptr, 0);
      std::uint64_t i = 0;
      for (const auto& out : v["outputs"]) {
        CHECK(SplitMix64::at(seed, i) == std::stoull(out.get<std::string>(), nullptr, 16));
        ++i;
      }
    }
    const auto& bsc = doc["bsc"];
    const Bytes in = from_hex(bsc["input_hex"]);
    CHECK(apply_bsc(in, bsc["p"].get<double>(), bsc["seed"].get<std::uint64_t>()) ==
          from_hex(bsc["output_hex"]));
  }

  TEST_CASE("crc32 check values and oracle agreement") {
    const auto doc = test::read_json(test::fixture("prng/splitmix64_vectors.json"));
    for (const auto& [text, hex] : doc["crc32"].items()) {
      const Bytes bytes(text.begin(), text.end());
      CHECK(crc32(bytes) == std::stoul(hex.get<std::string>(), nullptr, 16));
    }
    const std::string check = "123456789";
    CHECK(crc32(Bytes(check.begin(), check.end())) == 0xCBF43926u);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
      const Bytes b = test::random_bytes(rng, static_cast<std::size_t>(rng() % 3000));
      CHECK(crc32(b) == crc32_oracle(b));
    }
  }

  TEST_CASE("bsc identity, determinism and involution") {
    std::mt19937_64 rng(2);
    const Bytes data = test::random_bytes(rng, 4096);
    CHECK(apply_bsc(data, 0.0, 123) == data);
    const Bytes once = apply_bsc(data, 0.05, 99);
    CHECK(once == apply_bsc(data, 0.05, 99));
    CHECK(once != apply_bsc(data, 0.05, 100));
    CHECK(apply_bsc(once, 0.05, 99) == data);
    CHECK(test::code_of([&] { apply_bsc(data, 0.6, 1); }) == ErrorCode::InvalidArgument);
    CHECK(test::code_of([&] { apply_bsc(data, -0.1, 1); }) == ErrorCode::InvalidArgument);
  }

  TEST_CASE("bsc flip rate at p = 0.5 over 1e6 bits") {
    const Bytes zeros(125000, 0);
    const double rate = static_cast<double>(hamming(zeros, apply_bsc(zeros, 0.5, 17))) / 1e6;
    CHECK(rate >= 0.4985);
    CHECK(rate <= 0.5015);
  }

  TEST_CASE("bsc flip rates within 3 sigma over 1e7 bits") {
    const Bytes zeros(1250000, 0);
    for (const double p : {1e-3, 1e-2, 1e-1}) {
      check_binomial(static_cast<double>(hamming(zeros, apply_bsc(zeros, p, 2024))) / 1e7, p, 1e7);
    }
  }

  TEST_CASE("bit packing") {
    const Bytes bytes{0xA5, 0x01};
    const auto bits = unpack_bits(bytes);
    CHECK(bits == bits_of("1010010100000001"));
    CHECK(pack_bits(bits) == bytes);
    CHECK(pack_bits(bits_of("101")) == Bytes{0xA0});
  }

  TEST_CASE("repetition3 examples") {
    CHECK(repetition3_encode(bits_of("101")) == bits_of("111000111"));
    CHECK(repetition3_decode(bits_of("110000111")) == bits_of("101"));
    CHECK(repetition3_decode(bits_of("001110100")) == bits_of("010"));
    CHECK(test::code_of([] { repetition3_decode(bits_of("1101")); }) == ErrorCode::LengthNotMultipleOf3);
  }

  TEST_CASE("repetition3 residual error matches the closed form") {
    const Bytes zeros(1250000, 0);
    for (const double p : {1e-2, 1e-1}) {
      const Bytes out = corrupt_payload(zeros, p, Fec::REPETITION3, 555);
      REQUIRE(out.size() == zeros.size());
      const double residual = 3 * p * p * (1 - p) + p * p * p;
      check_binomial(static_cast<double>(hamming(zeros, out)) / 1e7, residual, 1e7);
    }
    CHECK(corrupt_payload(zeros, 0.0, Fec::REPETITION3, 1) == zeros);
  }

  TEST_CASE("frame layout is byte exact") {
    const TransmissionFrame f{EdgeMeta{0x0102, 3, EdgeScheme::SPARSE}, Bytes{0xde, 0xad}};
    const Bytes b = frame_encode(f);
    REQUIRE(b.size() == frame_header_size(FrameKind::EDGE) + 2);
    CHECK(std::string(b.begin(), b.begin() + 4) == "RSEM");
    CHECK(b[4] == 1);
    CHECK(b[5] == 1);
    CHECK(Bytes(b.begin() + 6, b.begin() + 10) == Bytes{2, 0, 0, 0});
    CHECK(Bytes(b.begin() + 10, b.begin() + 14) == Bytes{0x02, 0x01, 0, 0});
    CHECK(Bytes(b.begin() + 14, b.begin() + 18) == Bytes{3, 0, 0, 0});
    CHECK(b[18] == 1);
    const std::uint32_t crc = crc32_oracle(Bytes{0xde, 0xad});
    CHECK(Bytes(b.begin() + 19, b.begin() + 23) ==
          Bytes{std::uint8_t(crc), std::uint8_t(crc >> 8), std::uint8_t(crc >> 16), std::uint8_t(crc >> 24)});
    CHECK(Bytes(b.begin() + 23, b.end()) == Bytes{0xde, 0xad});

    const TransmissionFrame t{TextMeta{TextCodec::GENERAL, 70000}, Bytes{}};
    const Bytes tb = frame_encode(t);
    REQUIRE(tb.size() == frame_header_size(FrameKind::TEXT));
    CHECK(tb[5] == 0);
    CHECK(tb[10] == 1);
    CHECK(Bytes(tb.begin() + 11, tb.begin() + 15) == Bytes{0x70, 0x11, 0x01, 0x00});
    CHECK(Bytes(tb.begin() + 15, tb.begin() + 19) == Bytes{0, 0, 0, 0});
  }

  TEST_CASE("frame round trip and corruption detection") {
    std::mt19937_64 rng(4);
    const EdgeMap e = test::random_edges(rng, 40, 30, 0.1);
    const TransmissionFrame f = make_frame(select_encoding(e));
    const Bytes b = frame_encode(f);
    const DecodedFrame d = frame_decode(b);
    CHECK(d.integrity);
    CHECK(d.consumed == b.size());
    CHECK(d.frame == f);
    CHECK(decode_edges(edges_from_frame(d.frame)) == e);

    Bytes flipped = b;
    flipped.back() ^= 0x10;
    const DecodedFrame bad = frame_decode(flipped);
    CHECK_FALSE(bad.integrity);
    CHECK(bad.frame.payload.size() == f.payload.size());
    CHECK(bad.frame.payload != f.payload);

    Bytes magic = b;
    magic[0] = 'X';
    CHECK_FALSE(frame_decode(magic).integrity);
    Bytes version = b;
    version[4] = 2;
    CHECK_FALSE(frame_decode(version).integrity);

    CHECK(test::code_of([&] { frame_decode(ByteView(b.data(), 3)); }) == ErrorCode::TruncatedFrame);
    CHECK(test::code_of([&] { frame_decode(ByteView(b.data(), b.size() - 1)); }) == ErrorCode::TruncatedFrame);
    CHECK(test::code_of([&] { frame_decode(ByteView(b.data(), 15)); }) == ErrorCode::TruncatedFrame);
    Bytes kind = b;
    kind[5] = 7;
    CHECK(test::code_of([&] { frame_decode(kind); }) == ErrorCode::MalformedStream);
  }

  TEST_CASE("text frames and frame streams") {
    const CompressedText text = compress_text(std::string_view("a lake under a stone bridge"));
    const Bytes tb = frame_encode(make_frame(text));
    std::mt19937_64 rng(8);
    const Bytes eb = frame_encode(make_frame(select_encoding(test::random_edges(rng, 8, 8, 0.3))));
    Bytes stream = tb;
    stream.insert(stream.end(), eb.begin(), eb.end());
    const auto frames = decode_frame_stream(stream);
    REQUIRE(frames.size() == 2);
    CHECK(frames[0].frame.kind() == FrameKind::TEXT);
    CHECK(frames[1].frame.kind() == FrameKind::EDGE);
    CHECK(text_from_frame(frames[0].frame) == text);
    CHECK_THROWS_AS(edges_from_frame(frames[0].frame), Error);
  }

  TEST_CASE("transmit corrupts payload only and honours protect_text") {
    std::mt19937_64 rng(10);
    const Bytes eb = frame_encode(make_frame(encode_edges(test::random_edges(rng, 64, 64, 0.5), EdgeScheme::RAW)));
    const Bytes tb = frame_encode(make_frame(compress_text(test::random_bytes(rng, 300))));
    ChannelConfig cfg{0.2, 42, true, Fec::NONE};
    const Bytes e_out = transmit_frame(eb, cfg, 1);
    const std::size_t header = frame_header_size(FrameKind::EDGE);
    CHECK(Bytes(e_out.begin(), e_out.begin() + header) == Bytes(eb.begin(), eb.begin() + header));
    CHECK(e_out != eb);
    CHECK(transmit_frame(tb, cfg, 0) == tb);
    CHECK(e_out == transmit_frame(eb, cfg, 1));
    CHECK(e_out != transmit_frame(eb, cfg, 2));
    const ByteView payload(eb.data() + header, eb.size() - header);
    CHECK(Bytes(e_out.begin() + header, e_out.end()) == apply_bsc(payload, 0.2, 42 ^ 1));
    cfg.protect_text = false;
    CHECK(transmit_frame(tb, cfg, 0) != tb);
    cfg.ber = 0.0;
    CHECK(transmit_frame(eb, cfg, 1) == eb);
  }

  TEST_CASE("channel config validation and fec names") {
    CHECK_NOTHROW(ChannelConfig{0.5, 0, true, Fec::NONE}.validate());
    CHECK(test::code_of([] { ChannelConfig{0.51, 0, true, Fec::NONE}.validate(); }) == ErrorCode::InvalidArgument);
    CHECK(parse_fec(to_string(Fec::REPETITION3)) == Fec::REPETITION3);
    CHECK(parse_fec("none") == Fec::NONE);
    CHECK_THROWS_AS(parse_fec("ldpc"), Error);
  }
}
