#include "ragsc/codec.hpp"

#include <brotli/decode.h>
#include <brotli/encode.h>

#include "ragsc/error.hpp"

namespace ragsc {

void put_varint(Bytes& out, std::uint64_t value) {
  while (value >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(value | 0x80));
    value >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(value));
}

std::uint64_t get_varint(ByteView in, std::size_t& pos) {
  std::uint64_t value = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    if (pos >= in.size()) fail(ErrorCode::MalformedStream, "truncated varint");
    const std::uint8_t byte = in[pos++];
    if (shift == 63 && (byte & 0x7E) != 0) fail(ErrorCode::MalformedStream, "varint overflows 64 bits");
    value |= std::uint64_t{byte & 0x7Fu} << shift;
    if ((byte & 0x80) == 0) return value;
  }
  fail(ErrorCode::MalformedStream, "varint longer than 10 bytes");
}

std::string_view to_string(EdgeScheme scheme) {
  switch (scheme) {
    case EdgeScheme::RLE: return "RLE";
    case EdgeScheme::SPARSE: return "SPARSE";
    case EdgeScheme::RAW: return "RAW";
  }
  return "UNKNOWN";
}

Bytes rle_encode(const EdgeMap& edges) {
  Bytes out;
  const auto bits = edges.bits();
  std::uint8_t current = 0;
  std::uint64_t run = 0;
  for (const auto bit : bits) {
    if (bit == current) {
      ++run;
    } else {
      put_varint(out, run);
      current = bit;
      run = 1;
    }
  }
  put_varint(out, run);
  return out;
}

EdgeMap rle_decode(ByteView body, std::uint32_t width, std::uint32_t height) {
  EdgeMap out(width, height);
  const std::uint64_t total = out.size();
  std::uint64_t filled = 0;
  std::size_t pos = 0;
  bool value = false;
  while (pos < body.size()) {
    const std::uint64_t run = get_varint(body, pos);
    if (run > total - filled) fail(ErrorCode::LengthMismatch, "runs exceed width*height");
    if (value) {
      for (std::uint64_t i = 0; i < run; ++i) out.set(static_cast<std::size_t>(filled + i), true);
    }
    filled += run;
    value = !value;
  }
  if (filled != total) fail(ErrorCode::LengthMismatch, "runs do not cover width*height");
  return out;
}

Bytes sparse_encode(const EdgeMap& edges) {
  Bytes out;
  put_varint(out, edges.count());
  std::uint64_t previous = 0;
  bool first = true;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!edges.get(i)) continue;
    put_varint(out, first ? i : i - previous);
    previous = i;
    first = false;
  }
  return out;
}

EdgeMap sparse_decode(ByteView body, std::uint32_t width, std::uint32_t height) {
  EdgeMap out(width, height);
  std::size_t pos = 0;
  const std::uint64_t count = get_varint(body, pos);
  if (count > out.size()) fail(ErrorCode::IndexOutOfRange, "more indices than pixels");
  std::uint64_t index = 0;
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t step = get_varint(body, pos);
    if (k > 0 && step == 0) fail(ErrorCode::MalformedStream, "zero gap between indices");
    if (step >= out.size() || index + step >= out.size()) fail(ErrorCode::IndexOutOfRange, "index beyond width*height");
    index = (k == 0) ? step : index + step;
    out.set(static_cast<std::size_t>(index), true);
  }
  if (pos != body.size()) fail(ErrorCode::MalformedStream, "trailing bytes after index list");
  return out;
}

Bytes raw_encode(const EdgeMap& edges) {
  Bytes out((edges.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges.get(i)) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return out;
}

EdgeMap raw_decode(ByteView body, std::uint32_t width, std::uint32_t height) {
  EdgeMap out(width, height);
  if (body.size() != (out.size() + 7) / 8) fail(ErrorCode::LengthMismatch, "raw body length mismatch");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (body[i / 8] & (0x80u >> (i % 8))) out.set(i, true);
  }
  return out;
}

EncodedEdgeMap encode_edges(const EdgeMap& edges, EdgeScheme scheme) {
  EncodedEdgeMap enc{scheme, edges.width(), edges.height(), {}};
  switch (scheme) {
    case EdgeScheme::RLE: enc.body = rle_encode(edges); break;
    case EdgeScheme::SPARSE: enc.body = sparse_encode(edges); break;
    case EdgeScheme::RAW: enc.body = raw_encode(edges); break;
  }
  return enc;
}

EdgeMap decode_edges(const EncodedEdgeMap& encoded) {
  switch (encoded.scheme) {
    case EdgeScheme::RLE: return rle_decode(encoded.body, encoded.width, encoded.height);
    case EdgeScheme::SPARSE: return sparse_decode(encoded.body, encoded.width, encoded.height);
    case EdgeScheme::RAW: return raw_decode(encoded.body, encoded.width, encoded.height);
  }
  fail(ErrorCode::MalformedStream, "unknown edge scheme");
}

EncodedEdgeMap select_encoding(const EdgeMap& edges) {
  EncodedEdgeMap best = encode_edges(edges, EdgeScheme::RLE);
  for (const auto scheme : {EdgeScheme::SPARSE, EdgeScheme::RAW}) {
    auto candidate = encode_edges(edges, scheme);
    if (candidate.body.size() < best.body.size()) best = std::move(candidate);
  }
  return best;
}

CompressedText compress_text(ByteView text) {
  CompressedText out{TextCodec::IDENTITY, static_cast<std::uint32_t>(text.size()), {}};
  if (text.size() > 0xFFFFFFFFull) fail(ErrorCode::InvalidArgument, "text longer than 4 GiB");
  if (!text.empty()) {
    std::size_t size = BrotliEncoderMaxCompressedSize(text.size());
    Bytes body(size);
    const bool ok = BrotliEncoderCompress(BROTLI_DEFAULT_QUALITY, BROTLI_DEFAULT_WINDOW, BROTLI_MODE_TEXT,
                                          text.size(), text.data(), &size, body.data()) == BROTLI_TRUE;
    if (ok && size < text.size()) {
      body.resize(size);
      out.codec = TextCodec::GENERAL;
      out.body = std::move(body);
      return out;
    }
  }
  out.body.assign(text.begin(), text.end());
  return out;
}

CompressedText compress_text(std::string_view text) {
  return compress_text(ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Bytes decompress_text(const CompressedText& compressed) {
  if (compressed.codec == TextCodec::IDENTITY) {
    if (compressed.body.size() != compressed.original_len) {
      fail(ErrorCode::LengthMismatch, "identity text body length differs from original_len");
    }
    return compressed.body;
  }
  if (compressed.codec != TextCodec::GENERAL) fail(ErrorCode::MalformedStream, "unknown text codec");
  // One spare byte so an over-long stream is detected instead of silently truncated.
  Bytes out(std::size_t{compressed.original_len} + 1);
  std::size_t size = out.size();
  const auto result =
      BrotliDecoderDecompress(compressed.body.size(), compressed.body.data(), &size, out.data());
  if (result != BROTLI_DECODER_RESULT_SUCCESS || size != compressed.original_len) {
    fail(ErrorCode::MalformedStream, "corrupted brotli stream");
  }
  out.resize(size);
  return out;
}

}  // namespace ragsc
