#include "ragsc/channel.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>

#include "ragsc/error.hpp"

namespace ragsc {

Bytes apply_bsc(ByteView bytes, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 0.5)) fail(ErrorCode::InvalidArgument, "bit error rate must lie in [0, 0.5]");
  Bytes out(bytes.begin(), bytes.end());
  if (p == 0.0) return out;
  std::uint64_t bit = 0;
  for (auto& byte : out) {
    std::uint8_t mask = 0;
    for (int k = 0; k < 8; ++k, ++bit) {
      if (SplitMix64::uniform(seed, bit) < p) mask |= static_cast<std::uint8_t>(0x80u >> k);
    }
    byte ^= mask;
  }
  return out;
}

std::vector<std::uint8_t> unpack_bits(ByteView bytes) {
  std::vector<std::uint8_t> bits(bytes.size() * 8);
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = (bytes[i / 8] >> (7 - i % 8)) & 1u;
  return bits;
}

Bytes pack_bits(std::span<const std::uint8_t> bits) {
  Bytes out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return out;
}

std::vector<std::uint8_t> repetition3_encode(std::span<const std::uint8_t> bits) {
  std::vector<std::uint8_t> out;
  out.reserve(bits.size() * 3);
  for (const auto b : bits) {
    const std::uint8_t v = b ? 1 : 0;
    out.insert(out.end(), {v, v, v});
  }
  return out;
}

std::vector<std::uint8_t> repetition3_decode(std::span<const std::uint8_t> bits) {
  if (bits.size() % 3 != 0) fail(ErrorCode::LengthNotMultipleOf3, "repetition-3 input length");
  std::vector<std::uint8_t> out(bits.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int votes = (bits[3 * i] ? 1 : 0) + (bits[3 * i + 1] ? 1 : 0) + (bits[3 * i + 2] ? 1 : 0);
    out[i] = votes >= 2 ? 1 : 0;
  }
  return out;
}

std::uint32_t crc32(ByteView bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = ::crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(ByteView in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[pos + i]} << (8 * i);
  return v;
}

constexpr std::uint8_t kMagic[4] = {'R', 'S', 'E', 'M'};

}  // namespace

std::size_t frame_header_size(FrameKind kind) {
  return kFramePrefix + (kind == FrameKind::EDGE ? 9 : 5) + 4;
}

Bytes frame_encode(const TransmissionFrame& frame) {
  if (frame.payload.size() > 0xFFFFFFFFull) fail(ErrorCode::InvalidArgument, "payload exceeds 2^32 bytes");
  Bytes out;
  out.reserve(frame_header_size(frame.kind()) + frame.payload.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kFrameVersion);
  out.push_back(static_cast<std::uint8_t>(frame.kind()));
  put_u32(out, static_cast<std::uint32_t>(frame.payload.size()));
  if (const auto* edge = std::get_if<EdgeMeta>(&frame.meta)) {
    put_u32(out, edge->width);
    put_u32(out, edge->height);
    out.push_back(static_cast<std::uint8_t>(edge->scheme));
  } else {
    const auto& text = std::get<TextMeta>(frame.meta);
    out.push_back(static_cast<std::uint8_t>(text.codec));
    put_u32(out, text.original_len);
  }
  put_u32(out, crc32(frame.payload));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

DecodedFrame frame_decode(ByteView bytes) {
  if (bytes.size() < kFramePrefix) fail(ErrorCode::TruncatedFrame, "frame shorter than its fixed prefix");
  bool header_ok = std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()) && bytes[4] == kFrameVersion;
  const std::uint8_t kind_byte = bytes[5];
  if (kind_byte > 1) fail(ErrorCode::MalformedStream, "unknown frame kind");
  const auto kind = static_cast<FrameKind>(kind_byte);
  const std::uint32_t payload_len = get_u32(bytes, 6);
  const std::size_t header = frame_header_size(kind);
  if (bytes.size() < header || bytes.size() - header < payload_len) {
    fail(ErrorCode::TruncatedFrame, "frame shorter than declared payload");
  }

  DecodedFrame out;
  std::size_t pos = kFramePrefix;
  if (kind == FrameKind::EDGE) {
    EdgeMeta meta{get_u32(bytes, pos), get_u32(bytes, pos + 4), static_cast<EdgeScheme>(bytes[pos + 8])};
    if (bytes[pos + 8] > 2) header_ok = false;
    out.frame.meta = meta;
    pos += 9;
  } else {
    TextMeta meta{static_cast<TextCodec>(bytes[pos]), get_u32(bytes, pos + 1)};
    if (bytes[pos] > 1) header_ok = false;
    out.frame.meta = meta;
    pos += 5;
  }
  const std::uint32_t stored_crc = get_u32(bytes, pos);
  pos += 4;
  out.frame.payload.assign(bytes.begin() + pos, bytes.begin() + pos + payload_len);
  out.integrity = header_ok && crc32(out.frame.payload) == stored_crc;
  out.consumed = pos + payload_len;
  return out;
}

std::vector<DecodedFrame> decode_frame_stream(ByteView bytes) {
  std::vector<DecodedFrame> frames;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    auto decoded = frame_decode(bytes.subspan(pos));
    pos += decoded.consumed;
    frames.push_back(std::move(decoded));
  }
  return frames;
}

TransmissionFrame make_frame(const EncodedEdgeMap& edges) {
  return TransmissionFrame{EdgeMeta{edges.width, edges.height, edges.scheme}, edges.body};
}

TransmissionFrame make_frame(const CompressedText& text) {
  return TransmissionFrame{TextMeta{text.codec, text.original_len}, text.body};
}

EncodedEdgeMap edges_from_frame(const TransmissionFrame& frame) {
  const auto* meta = std::get_if<EdgeMeta>(&frame.meta);
  if (!meta) fail(ErrorCode::InvalidArgument, "not an EDGE frame");
  return EncodedEdgeMap{meta->scheme, meta->width, meta->height, frame.payload};
}

CompressedText text_from_frame(const TransmissionFrame& frame) {
  const auto* meta = std::get_if<TextMeta>(&frame.meta);
  if (!meta) fail(ErrorCode::InvalidArgument, "not a TEXT frame");
  return CompressedText{meta->codec, meta->original_len, frame.payload};
}

std::string_view to_string(Fec fec) { return fec == Fec::REPETITION3 ? "REPETITION3" : "NONE"; }

Fec parse_fec(std::string_view name) {
  if (name == "none" || name == "NONE") return Fec::NONE;
  if (name == "repetition3" || name == "REPETITION3" || name == "rep3") return Fec::REPETITION3;
  fail(ErrorCode::InvalidArgument, "unknown fec '" + std::string(name) + "'");
}

void ChannelConfig::validate() const {
  if (!(ber >= 0.0 && ber <= 0.5)) fail(ErrorCode::InvalidArgument, "ber must lie in [0, 0.5]");
}

Bytes corrupt_payload(ByteView payload, double p, Fec fec, std::uint64_t seed) {
  if (fec == Fec::NONE) return apply_bsc(payload, p, seed);
  const auto coded = pack_bits(repetition3_encode(unpack_bits(payload)));
  const auto received = apply_bsc(coded, p, seed);
  return pack_bits(repetition3_decode(unpack_bits(received)));
}

Bytes transmit_frame(ByteView frame_bytes, const ChannelConfig& cfg, std::uint64_t frame_index) {
  cfg.validate();
  auto decoded = frame_decode(frame_bytes);
  if (decoded.frame.kind() == FrameKind::TEXT && cfg.protect_text) {
    return Bytes(frame_bytes.begin(), frame_bytes.begin() + decoded.consumed);
  }
  const std::size_t header = frame_header_size(decoded.frame.kind());
  Bytes out(frame_bytes.begin(), frame_bytes.begin() + header);
  const auto payload = corrupt_payload(decoded.frame.payload, cfg.ber, cfg.fec, cfg.seed ^ frame_index);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

}  // namespace ragsc
