#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ragsc/edgemap.hpp"

namespace ragsc {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Unsigned LEB128.
void put_varint(Bytes& out, std::uint64_t value);
// Throws MalformedStream on truncation or on a value wider than 64 bits.
std::uint64_t get_varint(ByteView in, std::size_t& pos);

enum class EdgeScheme : std::uint8_t { RLE = 0, SPARSE = 1, RAW = 2 };

std::string_view to_string(EdgeScheme scheme);

struct EncodedEdgeMap {
  EdgeScheme scheme = EdgeScheme::RAW;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  Bytes body;

  friend bool operator==(const EncodedEdgeMap&, const EncodedEdgeMap&) = default;
};

// Alternating run lengths, starting with a (possibly empty) run of zeros.
Bytes rle_encode(const EdgeMap& edges);
EdgeMap rle_decode(ByteView body, std::uint32_t width, std::uint32_t height);

// Set-bit count, then the first linear index and the gaps between successive ones.
Bytes sparse_encode(const EdgeMap& edges);
EdgeMap sparse_decode(ByteView body, std::uint32_t width, std::uint32_t height);

// Bits packed MSB-first, ceil(w*h/8) bytes, zero padding.
Bytes raw_encode(const EdgeMap& edges);
EdgeMap raw_decode(ByteView body, std::uint32_t width, std::uint32_t height);

EncodedEdgeMap encode_edges(const EdgeMap& edges, EdgeScheme scheme);
EdgeMap decode_edges(const EncodedEdgeMap& encoded);

// Shortest of the three bodies; ties resolve RLE, then SPARSE, then RAW.
EncodedEdgeMap select_encoding(const EdgeMap& edges);

enum class TextCodec : std::uint8_t { IDENTITY = 0, GENERAL = 1 };

struct CompressedText {
  TextCodec codec = TextCodec::IDENTITY;
  std::uint32_t original_len = 0;
  Bytes body;

  friend bool operator==(const CompressedText&, const CompressedText&) = default;
};

// GENERAL bodies are plain RFC 7932 (Brotli) streams. Falls back to IDENTITY
// whenever compression would not shrink the input.
CompressedText compress_text(ByteView text);
CompressedText compress_text(std::string_view text);
Bytes decompress_text(const CompressedText& compressed);

}  // namespace ragsc
