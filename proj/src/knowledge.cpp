#include "ragsc/knowledge.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ragsc/error.hpp"

namespace ragsc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Modality m) { return m == Modality::IMAGE ? "IMAGE" : "DOCUMENT"; }

Modality parse_modality(std::string_view name) {
  if (name == "DOCUMENT" || name == "document") return Modality::DOCUMENT;
  if (name == "IMAGE" || name == "image") return Modality::IMAGE;
  fail(ErrorCode::InvalidArgument, "unknown modality '" + std::string(name) + "'");
}

ContentHash sha256(ByteView bytes) {
  ContentHash out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32) {
    fail(ErrorCode::Io, "sha256 failed");
  }
  return out;
}

ContentHash content_hash(std::string_view caption, const EdgeMap& edges) {
  Bytes buf(caption.begin(), caption.end());
  const auto raw = raw_encode(edges);
  buf.insert(buf.end(), raw.begin(), raw.end());
  return sha256(buf);
}

std::string to_hex(const ContentHash& hash) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (const auto b : hash) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 15]);
  }
  return out;
}

ContentHash content_hash_from_hex(std::string_view hex) {
  if (hex.size() != 64) fail(ErrorCode::InvalidArgument, "content hash must be 64 hex digits");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    fail(ErrorCode::InvalidArgument, "invalid hex digit");
  };
  ContentHash out{};
  for (std::size_t i = 0; i < 32; ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return out;
}

KnowledgeBase::KnowledgeBase(std::size_t text_dim, std::size_t image_dim)
    : text_dim_(text_dim), image_dim_(image_dim) {}

void KnowledgeBase::check_dims(const KnowledgeEntry& entry) {
  auto check = [](const std::optional<Embedding>& e, std::size_t& dim, const char* what) {
    if (!e) return;
    if (e->dim() == 0) fail(ErrorCode::DimensionMismatch, std::string(what) + " embedding is empty");
    if (dim != 0 && e->dim() != dim) {
      fail(ErrorCode::DimensionMismatch, std::string(what) + " embedding has dim " + std::to_string(e->dim()) +
                                             ", store expects " + std::to_string(dim));
    }
    if (e->normalized && std::fabs(l2_norm(*e) - 1.0) >= 1e-4) {
      fail(ErrorCode::InvalidArgument, std::string(what) + " embedding flagged normalized but is not unit length");
    }
  };
  check(entry.text_embedding, text_dim_, "text");
  check(entry.image_embedding, image_dim_, "image");
}

const std::string& KnowledgeBase::insert(KnowledgeEntry entry) {
  if (entry.id.empty()) fail(ErrorCode::InvalidArgument, "entry id must not be empty");
  if (entry.modality == Modality::DOCUMENT && !entry.text) {
    fail(ErrorCode::InvalidArgument, "DOCUMENT entry '" + entry.id + "' has no text");
  }
  if (entry.modality == Modality::IMAGE && !entry.image_path) {
    fail(ErrorCode::InvalidArgument, "IMAGE entry '" + entry.id + "' has no image_path");
  }
  check_dims(entry);
  if (entry.text_embedding && text_dim_ == 0) text_dim_ = entry.text_embedding->dim();
  if (entry.image_embedding && image_dim_ == 0) image_dim_ = entry.image_embedding->dim();
  auto id = entry.id;
  auto [it, inserted] = entries_.insert_or_assign(std::move(id), std::move(entry));
  return it->first;
}

const KnowledgeEntry* KnowledgeBase::get(std::string_view id) const {
  const auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

bool KnowledgeBase::erase(std::string_view id) {
  const auto it = entries_.find(id);
  if (it == entries_.end()) return false;
  entries_.erase(it);
  return true;
}

fs::path KnowledgeBase::resolve(const fs::path& p) const {
  if (p.is_absolute() || root_.empty()) return p;
  return root_ / p;
}

void KnowledgeBase::cache_put(CacheRecord record) {
  const auto hash = record.content_hash;
  cache_.insert_or_assign(hash, std::move(record));
}

std::optional<CacheRecord> KnowledgeBase::cache_lookup(const ContentHash& hash) const {
  const auto it = cache_.find(hash);
  if (it == cache_.end()) return std::nullopt;
  auto record = it->second;
  if (!record.reconstruction && record.reconstruction_path) {
    record.reconstruction = read_image(resolve(*record.reconstruction_path));
  }
  return record;
}

namespace {

constexpr const char* kFormat = "ragsc-kb";
constexpr int kVersion = 1;

json metrics_json(const MetricsReport& m) {
  json j{{"ms_ssim", m.ms_ssim},
         {"clip_similarity", m.clip_similarity},
         {"measured_ber", m.measured_ber},
         {"compression_ratio", m.compression_ratio}};
  if (m.clip_text_similarity) j["clip_text_similarity"] = *m.clip_text_similarity;
  if (m.lpips) j["lpips"] = *m.lpips;
  if (m.pieapp) j["pieapp"] = *m.pieapp;
  return j;
}

MetricsReport metrics_from_json(const json& j) {
  MetricsReport m;
  m.ms_ssim = j.at("ms_ssim").get<double>();
  m.clip_similarity = j.at("clip_similarity").get<double>();
  m.measured_ber = j.at("measured_ber").get<double>();
  m.compression_ratio = j.at("compression_ratio").get<double>();
  if (j.contains("clip_text_similarity")) m.clip_text_similarity = j["clip_text_similarity"].get<double>();
  if (j.contains("lpips")) m.lpips = j["lpips"].get<double>();
  if (j.contains("pieapp")) m.pieapp = j["pieapp"].get<double>();
  return m;
}

std::string sanitize(std::string_view id) {
  std::string out;
  for (const char c : id) {
    out.push_back((std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_');
  }
  return out;
}

void append_floats(Bytes& out, const std::vector<float>& values) {
  for (float v : values) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
}

std::vector<float> read_floats(const Bytes& blob, std::uint64_t offset, std::uint64_t dim) {
  if (offset > blob.size() / 4 || dim > blob.size() / 4 - offset) {
    fail(ErrorCode::CorruptStore, "embedding row outside embeddings.f32");
  }
  std::vector<float> out(dim);
  for (std::uint64_t i = 0; i < dim; ++i) {
    const std::size_t p = (offset + i) * 4;
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= std::uint32_t{blob[p + k]} << (8 * k);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

std::string dump_line(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

}  // namespace

void KnowledgeBase::persist(const fs::path& dir) const {
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "cache", ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());

  Bytes blob;
  std::string body;
  auto put_embedding = [&](json& j, const char* key, const std::optional<Embedding>& e) {
    if (!e) return;
    j[key] = {{"offset", blob.size() / 4}, {"dim", e->dim()}, {"normalized", e->normalized}};
    append_floats(blob, e->values);
  };

  for (const auto& [id, entry] : entries_) {
    json j{{"record", "entry"}, {"id", id}, {"modality", to_string(entry.modality)},
           {"tags", entry.tags}, {"inserted_at", entry.inserted_at}};
    if (entry.text) j["text"] = *entry.text;
    if (entry.image_path) {
      fs::path stored = *entry.image_path;
      const auto source = resolve(*entry.image_path);
      if (fs::is_regular_file(source)) {
        const auto target_name = fs::path("images") / (sanitize(id) + source.extension().string());
        const auto target = dir / target_name;
        if (!fs::exists(target) || !fs::equivalent(source, target)) {
          fs::copy_file(source, target, fs::copy_options::overwrite_existing, ec);
          if (ec) fail(ErrorCode::Io, "cannot copy " + source.string() + ": " + ec.message());
        }
        stored = target_name;
      }
      j["image_path"] = stored.generic_string();
    }
    put_embedding(j, "text_embedding", entry.text_embedding);
    put_embedding(j, "image_embedding", entry.image_embedding);
    body += dump_line(j);
  }

  for (const auto& [hash, record] : cache_) {
    const auto hex = to_hex(hash);
    json j{{"record", "cache"}, {"content_hash", hex}};
    json frames = json::array();
    for (const auto& f : record.frames) frames.push_back(base64_encode(f));
    j["frames"] = std::move(frames);
    if (record.reconstruction) {
      const auto rel = fs::path("cache") / (hex + ".png");
      write_image(*record.reconstruction, dir / rel);
      j["reconstruction_path"] = rel.generic_string();
    } else if (record.reconstruction_path) {
      const auto source = resolve(*record.reconstruction_path);
      const auto rel = fs::path("cache") / (hex + source.extension().string());
      if (fs::is_regular_file(source) && !(fs::exists(dir / rel) && fs::equivalent(source, dir / rel))) {
        fs::copy_file(source, dir / rel, fs::copy_options::overwrite_existing, ec);
      }
      j["reconstruction_path"] = rel.generic_string();
    }
    if (record.metrics) j["metrics"] = metrics_json(*record.metrics);
    body += dump_line(j);
  }

  Bytes checked(body.begin(), body.end());
  checked.insert(checked.end(), blob.begin(), blob.end());
  const json header{{"format", kFormat},
                    {"version", kVersion},
                    {"text_dim", text_dim_},
                    {"image_dim", image_dim_},
                    {"entry_count", entries_.size()},
                    {"cache_count", cache_.size()},
                    {"embedding_floats", blob.size() / 4},
                    {"checksum", to_hex(sha256(checked))}};

  write_file(dir / "embeddings.f32", blob);
  const std::string manifest = dump_line(header) + body;
  write_file(dir / "manifest.jsonl", ByteView(reinterpret_cast<const std::uint8_t*>(manifest.data()), manifest.size()));
}

KnowledgeBase KnowledgeBase::load(const fs::path& dir) {
  try {
    const auto manifest_bytes = read_file(dir / "manifest.jsonl");
    const auto blob = read_file(dir / "embeddings.f32");
    const std::string manifest(manifest_bytes.begin(), manifest_bytes.end());
    const auto first_nl = manifest.find('\n');
    if (first_nl == std::string::npos) fail(ErrorCode::CorruptStore, "manifest has no header line");
    const json header = json::parse(manifest.substr(0, first_nl));
    if (header.at("format").get<std::string>() != kFormat || header.at("version").get<int>() != kVersion) {
      fail(ErrorCode::CorruptStore, "unsupported store format");
    }
    const std::string body = manifest.substr(first_nl + 1);
    Bytes checked(body.begin(), body.end());
    checked.insert(checked.end(), blob.begin(), blob.end());
    if (to_hex(sha256(checked)) != header.at("checksum").get<std::string>()) {
      fail(ErrorCode::CorruptStore, "checksum mismatch");
    }
    if (blob.size() != 4 * header.at("embedding_floats").get<std::size_t>()) {
      fail(ErrorCode::CorruptStore, "embeddings.f32 size mismatch");
    }

    KnowledgeBase kb(header.at("text_dim").get<std::size_t>(), header.at("image_dim").get<std::size_t>());
    kb.set_root(dir);
    auto get_embedding = [&](const json& j, const char* key) -> std::optional<Embedding> {
      if (!j.contains(key)) return std::nullopt;
      const auto& e = j[key];
      return Embedding{read_floats(blob, e.at("offset").get<std::uint64_t>(), e.at("dim").get<std::uint64_t>()),
                       e.at("normalized").get<bool>()};
    };

    std::istringstream lines(body);
    std::string line;
    std::size_t entry_count = 0, cache_count = 0;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      const auto record = j.at("record").get<std::string>();
      if (record == "entry") {
        KnowledgeEntry entry;
        entry.id = j.at("id").get<std::string>();
        entry.modality = parse_modality(j.at("modality").get<std::string>());
        if (j.contains("text")) entry.text = j["text"].get<std::string>();
        if (j.contains("image_path")) entry.image_path = fs::path(j["image_path"].get<std::string>());
        entry.text_embedding = get_embedding(j, "text_embedding");
        entry.image_embedding = get_embedding(j, "image_embedding");
        entry.tags = j.at("tags").get<std::vector<std::string>>();
        entry.inserted_at = j.at("inserted_at").get<std::int64_t>();
        kb.insert(std::move(entry));
        ++entry_count;
      } else if (record == "cache") {
        CacheRecord rec;
        rec.content_hash = content_hash_from_hex(j.at("content_hash").get<std::string>());
        for (const auto& f : j.at("frames")) rec.frames.push_back(base64_decode(f.get<std::string>()));
        if (j.contains("reconstruction_path")) {
          rec.reconstruction_path = fs::path(j["reconstruction_path"].get<std::string>());
          const auto p = dir / *rec.reconstruction_path;
          if (fs::is_regular_file(p)) rec.reconstruction = read_image(p);
        }
        if (j.contains("metrics")) rec.metrics = metrics_from_json(j["metrics"]);
        kb.cache_put(std::move(rec));
        ++cache_count;
      } else {
        fail(ErrorCode::CorruptStore, "unknown record type '" + record + "'");
      }
    }
    if (entry_count != header.at("entry_count").get<std::size_t>() ||
        cache_count != header.at("cache_count").get<std::size_t>()) {
      fail(ErrorCode::CorruptStore, "record counts disagree with header");
    }
    return kb;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptStore) throw;
    fail(ErrorCode::CorruptStore, e.what());
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptStore, e.what());
  }
}

}  // namespace ragsc
