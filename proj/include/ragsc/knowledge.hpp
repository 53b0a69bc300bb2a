#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ragsc/codec.hpp"
#include "ragsc/edgemap.hpp"
#include "ragsc/embedding.hpp"
#include "ragsc/image.hpp"
#include "ragsc/metrics.hpp"

namespace ragsc {

enum class Modality : std::uint8_t { DOCUMENT = 0, IMAGE = 1 };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view name);

struct KnowledgeEntry {
  std::string id;
  Modality modality = Modality::DOCUMENT;
  std::optional<std::string> text;  // document body or image caption
  std::optional<std::filesystem::path> image_path;
  std::optional<Embedding> text_embedding;
  std::optional<Embedding> image_embedding;
  std::vector<std::string> tags;
  std::int64_t inserted_at = 0;  // unix milliseconds

  friend bool operator==(const KnowledgeEntry&, const KnowledgeEntry&) = default;
};

using ContentHash = std::array<std::uint8_t, 32>;

std::string to_hex(const ContentHash& hash);
ContentHash content_hash_from_hex(std::string_view hex);

// SHA-256 over the caption bytes followed by the RAW-packed edge bits.
ContentHash content_hash(std::string_view caption, const EdgeMap& edges);

ContentHash sha256(ByteView bytes);

struct CacheRecord {
  ContentHash content_hash{};
  std::vector<Bytes> frames;
  std::optional<std::filesystem::path> reconstruction_path;
  std::optional<RasterImage> reconstruction;
  std::optional<MetricsReport> metrics;

  friend bool operator==(const CacheRecord&, const CacheRecord&) = default;
};

// In-memory store with directory persistence:
//
//   <dir>/manifest.jsonl   line 1: header {format, version, text_dim, image_dim,
//                          entry_count, cache_count, embedding_floats, checksum};
//                          then one JSON object per entry ("record":"entry")
//                          or cache record ("record":"cache")
//   <dir>/embeddings.f32   little-endian float32 rows; entries point at rows
//                          by float offset, dimension from the header
//   <dir>/images/          reference images copied in on persist
//   <dir>/cache/           cached reconstructions (PNG)
//
// checksum is the SHA-256 hex of every manifest line after the header (each
// with its trailing '\n') followed by the raw embeddings.f32 bytes.
//
// Single writer, many readers: concurrent const access is safe, mutation is not.
class KnowledgeBase {
 public:
  // A zero dimension is fixed by the first embedding of that kind.
  explicit KnowledgeBase(std::size_t text_dim = 0, std::size_t image_dim = 0);

  // Replaces an entry with the same id. Throws DimensionMismatch, or
  // InvalidArgument when the modality invariants do not hold.
  const std::string& insert(KnowledgeEntry entry);
  const KnowledgeEntry* get(std::string_view id) const;
  bool erase(std::string_view id);

  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, KnowledgeEntry, std::less<>>& entries() const noexcept { return entries_; }
  std::size_t text_dim() const noexcept { return text_dim_; }
  std::size_t image_dim() const noexcept { return image_dim_; }

  // Directory that relative image paths resolve against.
  const std::filesystem::path& root() const noexcept { return root_; }
  void set_root(std::filesystem::path root) { root_ = std::move(root); }
  std::filesystem::path resolve(const std::filesystem::path& p) const;

  void cache_put(CacheRecord record);
  std::optional<CacheRecord> cache_lookup(const ContentHash& hash) const;
  std::size_t cache_size() const noexcept { return cache_.size(); }
  const std::map<ContentHash, CacheRecord>& cache() const noexcept { return cache_; }

  void persist(const std::filesystem::path& dir) const;
  // Throws CorruptStore on any checksum, schema, or file error.
  static KnowledgeBase load(const std::filesystem::path& dir);

 private:
  void check_dims(const KnowledgeEntry& entry);

  std::size_t text_dim_;
  std::size_t image_dim_;
  std::filesystem::path root_;
  std::map<std::string, KnowledgeEntry, std::less<>> entries_;
  std::map<ContentHash, CacheRecord> cache_;
};

}  // namespace ragsc
