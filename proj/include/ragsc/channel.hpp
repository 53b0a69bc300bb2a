#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "ragsc/codec.hpp"

namespace ragsc {

// Counter-based SplitMix64: the i-th output for a seed is the SplitMix64
// finalizer applied to seed + (i + 1) * 0x9E3779B97F4A7C15, i.e. the i-th
// value of the classic sequential generator. Random access makes corruption
// independent of iteration order and trivially reproducible in any language.
struct SplitMix64 {
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  static constexpr std::uint64_t at(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix(seed + (index + 1) * kGolden);
  }
  // Uniform in [0, 1) with 53 bits of resolution.
  static constexpr double uniform(std::uint64_t seed, std::uint64_t index) noexcept {
    return static_cast<double>(at(seed, index) >> 11) * 0x1.0p-53;
  }
};

// Bit i (byte i / 8, MSB first) flips iff SplitMix64::uniform(seed, i) < p.
Bytes apply_bsc(ByteView bytes, double p, std::uint64_t seed);

// One element per bit (0/1), MSB first within each byte.
std::vector<std::uint8_t> unpack_bits(ByteView bytes);
Bytes pack_bits(std::span<const std::uint8_t> bits);

std::vector<std::uint8_t> repetition3_encode(std::span<const std::uint8_t> bits);
// Majority vote per triple; throws LengthNotMultipleOf3.
std::vector<std::uint8_t> repetition3_decode(std::span<const std::uint8_t> bits);

// CRC-32/ISO-HDLC (reflected 0xEDB88320, init and final XOR 0xFFFFFFFF).
std::uint32_t crc32(ByteView bytes);

enum class FrameKind : std::uint8_t { TEXT = 0, EDGE = 1 };

struct EdgeMeta {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  EdgeScheme scheme = EdgeScheme::RAW;
  friend bool operator==(const EdgeMeta&, const EdgeMeta&) = default;
};

struct TextMeta {
  TextCodec codec = TextCodec::IDENTITY;
  std::uint32_t original_len = 0;
  friend bool operator==(const TextMeta&, const TextMeta&) = default;
};

// Wire layout, all integers little-endian:
//   0  "RSEM"          4  version (1)     5  kind
//   6  payload_len u32
//   10 EDGE: width u32, height u32, scheme u8 | TEXT: codec u8, original_len u32
//   .. crc32 u32 over payload, then payload
struct TransmissionFrame {
  std::variant<TextMeta, EdgeMeta> meta;
  Bytes payload;

  FrameKind kind() const noexcept {
    return std::holds_alternative<EdgeMeta>(meta) ? FrameKind::EDGE : FrameKind::TEXT;
  }
  friend bool operator==(const TransmissionFrame&, const TransmissionFrame&) = default;
};

inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kFramePrefix = 10;

std::size_t frame_header_size(FrameKind kind);
Bytes frame_encode(const TransmissionFrame& frame);

struct DecodedFrame {
  TransmissionFrame frame;
  bool integrity = false;
  std::size_t consumed = 0;
};

// Corrupted payloads come back with integrity=false rather than an error.
// Throws TruncatedFrame when fewer bytes than declared are present.
DecodedFrame frame_decode(ByteView bytes);
std::vector<DecodedFrame> decode_frame_stream(ByteView bytes);

TransmissionFrame make_frame(const EncodedEdgeMap& edges);
TransmissionFrame make_frame(const CompressedText& text);
EncodedEdgeMap edges_from_frame(const TransmissionFrame& frame);
CompressedText text_from_frame(const TransmissionFrame& frame);

enum class Fec : std::uint8_t { NONE = 0, REPETITION3 = 1 };

std::string_view to_string(Fec fec);
Fec parse_fec(std::string_view name);

struct ChannelConfig {
  double ber = 0.0;
  std::uint64_t seed = 0;
  bool protect_text = true;
  Fec fec = Fec::NONE;

  void validate() const;
};

// Payload bits as delivered to the receiver: optional repetition coding, the
// BSC, then majority decoding.
Bytes corrupt_payload(ByteView payload, double p, Fec fec, std::uint64_t seed);

// Sends one encoded frame. Header and CRC are delivered intact; the payload is
// corrupted with seed (cfg.seed XOR frame_index) unless it is a TEXT frame and
// protect_text is set.
Bytes transmit_frame(ByteView frame_bytes, const ChannelConfig& cfg, std::uint64_t frame_index);

}  // namespace ragsc
