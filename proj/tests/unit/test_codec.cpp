#include <doctest.h>

#include <string>

#include "ragsc/codec.hpp"
#include "support.hpp"

using namespace ragsc;

namespace {

EdgeMap from_string(const std::string& bits, std::uint32_t w, std::uint32_t h) {
  EdgeMap e(w, h);
  for (std::size_t i = 0; i < bits.size(); ++i) e.set(i, bits[i] == '1');
  return e;
}

Bytes varints(std::initializer_list<std::uint64_t> values) {
  Bytes out;
  for (const auto v : values) put_varint(out, v);
  return out;
}

std::vector<std::uint64_t> read_varints(ByteView body) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos < body.size()) out.push_back(get_varint(body, pos));
  return out;
}

}  // namespace

TEST_SUITE("codec") {
  TEST_CASE("varint encoding") {
    CHECK(varints({0}) == Bytes{0x00});
    CHECK(varints({127}) == Bytes{0x7f});
    CHECK(varints({128}) == Bytes{0x80, 0x01});
    CHECK(varints({300}) == Bytes{0xac, 0x02});
    CHECK(varints({4096}) == Bytes{0x80, 0x20});
    const Bytes max = varints({~std::uint64_t{0}});
    CHECK(max.size() == 10);
    std::size_t pos = 0;
    CHECK(get_varint(max, pos) == ~std::uint64_t{0});
    pos = 0;
    const Bytes truncated{0x80};
    CHECK(test::code_of([&] { get_varint(truncated, pos); }) == ErrorCode::MalformedStream);
    pos = 0;
    const Bytes too_wide{0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0x7f};
    CHECK(test::code_of([&] { get_varint(too_wide, pos); }) == ErrorCode::MalformedStream);
  }

  TEST_CASE("rle examples") {
    CHECK(read_varints(rle_encode(from_string("0000", 4, 1))) == std::vector<std::uint64_t>{4});
    CHECK(read_varints(rle_encode(from_string("1111", 4, 1))) == std::vector<std::uint64_t>{0, 4});
    CHECK(read_varints(rle_encode(from_string("00110100", 8, 1))) ==
          std::vector<std::uint64_t>{2, 2, 1, 1, 2});
    CHECK(rle_decode(varints({4}), 4, 1) == from_string("0000", 4, 1));
    CHECK(rle_decode(varints({0, 4}), 4, 1) == from_string("1111", 4, 1));
    CHECK(rle_decode(varints({2, 2, 1, 1, 2}), 8, 1) == from_string("00110100", 8, 1));
    CHECK(rle_decode(varints({2, 2, 1, 1, 1, 1}), 8, 1) == from_string("00110101", 8, 1));
  }

  TEST_CASE("rle decode errors") {
    CHECK(test::code_of([] { rle_decode(Bytes{0x84}, 4, 1); }) == ErrorCode::MalformedStream);
    CHECK(test::code_of([] { rle_decode(varints({3}), 4, 1); }) == ErrorCode::LengthMismatch);
    CHECK(test::code_of([] { rle_decode(varints({3, 3}), 4, 1); }) == ErrorCode::LengthMismatch);
    CHECK(test::code_of([] { rle_decode(Bytes{}, 4, 1); }) == ErrorCode::LengthMismatch);
  }

  TEST_CASE("sparse examples") {
    CHECK(sparse_encode(EdgeMap(4, 4)) == Bytes{0});
    EdgeMap e(4, 4);
    e.set(3, true);
    e.set(7, true);
    e.set(8, true);
    CHECK(read_varints(sparse_encode(e)) == std::vector<std::uint64_t>{3, 3, 4, 1});
    CHECK(sparse_decode(varints({3, 3, 4, 1}), 4, 4) == e);
    const EdgeMap full(4, 4, std::vector<std::uint8_t>(16, 1));
    std::vector<std::uint64_t> expect{16, 0};
    for (int i = 1; i < 16; ++i) expect.push_back(1);
    CHECK(read_varints(sparse_encode(full)) == expect);
    CHECK(sparse_decode(sparse_encode(full), 4, 4) == full);
    CHECK(sparse_decode(Bytes{0}, 4, 4) == EdgeMap(4, 4));
  }

  TEST_CASE("sparse decode errors") {
    CHECK(test::code_of([] { sparse_decode(varints({2, 3, 0}), 4, 4); }) == ErrorCode::MalformedStream);
    CHECK(test::code_of([] { sparse_decode(varints({1, 16}), 4, 4); }) == ErrorCode::IndexOutOfRange);
    CHECK(test::code_of([] { sparse_decode(varints({2, 10, 6}), 4, 4); }) == ErrorCode::IndexOutOfRange);
    CHECK(test::code_of([] { sparse_decode(varints({17}), 4, 4); }) == ErrorCode::IndexOutOfRange);
    CHECK(test::code_of([] { sparse_decode(varints({2, 1}), 4, 4); }) == ErrorCode::MalformedStream);
    CHECK(test::code_of([] { sparse_decode(varints({1, 1, 5}), 4, 4); }) == ErrorCode::MalformedStream);
    CHECK(test::code_of([] { sparse_decode(Bytes{}, 4, 4); }) == ErrorCode::MalformedStream);
  }

  TEST_CASE("raw packs msb first") {
    const EdgeMap e = from_string("1000000001", 10, 1);
    CHECK(raw_encode(e) == Bytes{0x80, 0x40});
    CHECK(raw_decode(Bytes{0x80, 0x40}, 10, 1) == e);
    CHECK(test::code_of([] { raw_decode(Bytes{0x80}, 10, 1); }) == ErrorCode::LengthMismatch);
    CHECK(test::code_of([] { raw_decode(Bytes{0, 0, 0}, 10, 1); }) == ErrorCode::LengthMismatch);
  }

  TEST_CASE("all schemes round trip on 1000 random maps") {
    std::mt19937_64 rng(20240501);
    const double densities[] = {0.001, 0.01, 0.1, 0.5, 0.9};
    std::uniform_int_distribution<std::uint32_t> side(1, 96);
    int failures = 0;
    for (int i = 0; i < 1000; ++i) {
      const EdgeMap e = test::random_edges(rng, side(rng), side(rng), densities[i % 5]);
      for (const auto scheme : {EdgeScheme::RLE, EdgeScheme::SPARSE, EdgeScheme::RAW}) {
        if (decode_edges(encode_edges(e, scheme)) != e) ++failures;
      }
      const EncodedEdgeMap best = select_encoding(e);
      if (decode_edges(best) != e) ++failures;
      if (best.body.size() > raw_encode(e).size()) ++failures;
    }
    CHECK(failures == 0);
  }

  TEST_CASE("select picks the argmin with tie order rle, sparse, raw") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
      const EdgeMap e = test::random_edges(rng, 32, 32, (i % 10) / 10.0 + 0.01);
      const auto rle = rle_encode(e).size(), sparse = sparse_encode(e).size(), raw = raw_encode(e).size();
      EdgeScheme expect = EdgeScheme::RLE;
      std::size_t best = rle;
      if (sparse < best) {
        expect = EdgeScheme::SPARSE;
        best = sparse;
      }
      if (raw < best) expect = EdgeScheme::RAW;
      CHECK(select_encoding(e).scheme == expect);
    }
    // 64x64 all zero: RLE is varint(4096), two bytes; SPARSE is one byte.
    const EncodedEdgeMap zero = select_encoding(EdgeMap(64, 64));
    CHECK(zero.scheme == EdgeScheme::SPARSE);
    CHECK(zero.body == Bytes{0});
    // 4x1 all zero: RLE [4] and SPARSE [0] are both one byte; RLE wins the tie.
    CHECK(select_encoding(EdgeMap(4, 1)).scheme == EdgeScheme::RLE);
  }

  TEST_CASE("sparse body grows when bits are added") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> pick(0, 48 * 48 - 1);
    for (int trial = 0; trial < 50; ++trial) {
      EdgeMap e(48, 48);
      std::size_t previous = sparse_encode(e).size();
      for (int step = 0; step < 200; ++step) {
        e.set(pick(rng), true);
        const std::size_t now = sparse_encode(e).size();
        CHECK(now >= previous);
        previous = now;
      }
    }
  }

  TEST_CASE("text compression") {
    const CompressedText empty = compress_text(std::string_view{});
    CHECK(empty.codec == TextCodec::IDENTITY);
    CHECK(empty.body.empty());
    CHECK(decompress_text(empty).empty());

    std::string fox;
    while (fox.size() < 10240) fox += "the quick brown fox ";
    fox.resize(10240);
    const CompressedText c = compress_text(fox);
    CHECK(c.codec == TextCodec::GENERAL);
    CHECK(c.original_len == 10240);
    CHECK(c.body.size() < 200);
    const Bytes back = decompress_text(c);
    CHECK(std::string(back.begin(), back.end()) == fox);

    std::mt19937_64 rng(9);
    const Bytes noise = test::random_bytes(rng, 1024);
    const CompressedText n = compress_text(noise);
    CHECK(n.codec == TextCodec::IDENTITY);
    CHECK(n.body == noise);
    CHECK(decompress_text(n) == noise);
  }

  TEST_CASE("general body interoperates with the reference encoder") {
    const auto meta = test::read_json(test::fixture("codec/fox_10k.json"));
    const Bytes reference = read_file(test::fixture("codec/fox_10k.br"));
    REQUIRE(reference.size() == meta["reference_encoder_len"].get<std::size_t>());
    CompressedText ref{TextCodec::GENERAL, meta["original_len"].get<std::uint32_t>(), reference};
    const Bytes plain = decompress_text(ref);
    CHECK(plain.size() == ref.original_len);
    const CompressedText ours = compress_text(plain);
    CHECK(ours.codec == TextCodec::GENERAL);
    CHECK(ours.body.size() <= reference.size() + 8);
    CHECK(decompress_text(ours) == plain);
  }

  TEST_CASE("text round trip over arbitrary bytes") {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 50; ++i) {
      Bytes data = test::random_bytes(rng, i * 37);
      for (std::size_t j = 0; j < data.size(); j += 3) data[j] = 0;
      for (std::size_t j = 1; j < data.size(); j += 2) data[j] = static_cast<std::uint8_t>('a' + j % 3);
      CHECK(decompress_text(compress_text(data)) == data);
    }
  }

  TEST_CASE("corrupted general body is malformed") {
    std::string text;
    for (int i = 0; i < 200; ++i) text += "stone bridge over a quiet lake " + std::to_string(i) + " ";
    CompressedText c = compress_text(text);
    REQUIRE(c.codec == TextCodec::GENERAL);
    int malformed = 0;
    for (std::size_t i = 0; i < c.body.size(); ++i) {
      CompressedText bad = c;
      bad.body[i] ^= 0x5a;
      try {
        const Bytes out = decompress_text(bad);
        if (out != Bytes(text.begin(), text.end())) ++malformed;
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MalformedStream);
        ++malformed;
      }
    }
    CHECK(malformed > 0);
    CompressedText truncated = c;
    truncated.body.resize(c.body.size() / 2);
    CHECK(test::code_of([&] { decompress_text(truncated); }) == ErrorCode::MalformedStream);
    CompressedText wrong_len = c;
    wrong_len.original_len += 1;
    CHECK(test::code_of([&] { decompress_text(wrong_len); }) == ErrorCode::MalformedStream);
  }
}
