#include "ragsc/providers.hpp"

#include <cmath>

#include "http_client.hpp"
#include "ragsc/edgemap.hpp"
#include "ragsc/error.hpp"

namespace ragsc {

Embedding histogram_embedding(const RasterImage& image) {
  const RasterImage gray = to_grayscale(image);
  std::vector<float> bins(kMockEmbeddingDim, 0.0f);
  for (const std::uint8_t v : gray.data()) bins[v >> 2] += 1.0f;
  return Embedding::unit(std::move(bins));
}

Embedding hashed_text_embedding(std::string_view text, std::size_t dim) {
  if (dim == 0) fail(ErrorCode::InvalidArgument, "embedding dim must be positive");
  std::vector<float> buckets(dim, 0.0f);
  for (const auto& token : tokenize(text)) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : token) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    buckets[h % dim] += 1.0f;
  }
  return Embedding::unit(std::move(buckets));
}

MockEmbeddingProvider::MockEmbeddingProvider(const KnowledgeBase& kb) {
  for (const auto& [id, entry] : kb.entries()) {
    if (entry.modality == Modality::IMAGE && entry.text && entry.image_embedding) {
      pairs_.emplace(*entry.text, *entry.image_embedding);
    }
  }
}

void MockEmbeddingProvider::register_caption(std::string caption, Embedding image_embedding) {
  pairs_.insert_or_assign(std::move(caption), std::move(image_embedding));
}

Embedding MockEmbeddingProvider::embed_text(std::string_view text) {
  const auto it = pairs_.find(text);
  if (it != pairs_.end()) return it->second;
  return hashed_text_embedding(text, kMockEmbeddingDim);
}

Embedding MockEmbeddingProvider::embed_image(const RasterImage& image) { return histogram_embedding(image); }

MockCaptioner::MockCaptioner(const KnowledgeBase& kb, double min_similarity, std::string fallback)
    : kb_(kb), min_similarity_(min_similarity), fallback_(std::move(fallback)) {}

std::string MockCaptioner::caption(const RasterImage& image) {
  const Embedding query = histogram_embedding(image);
  const auto hits = dense_search(kb_, query, EmbeddingField::IMAGE, Modality::IMAGE, kb_.size());
  for (const auto& hit : hits) {
    if (hit.score < min_similarity_) break;
    const KnowledgeEntry* entry = kb_.get(hit.entry_id);
    if (entry->text && !entry->text->empty()) return *entry->text;
  }
  return fallback_;
}

namespace {

using nlohmann::json;

std::string png_b64(const RasterImage& image) { return base64_encode(encode_png(to_rgb(image))); }

Embedding parse_embedding(const json& body, std::size_t expected_dim) {
  const json& values = detail::require(body, "embedding");
  if (!values.is_array() || values.empty()) fail(ErrorCode::MalformedResponse, "embedding is not a list");
  std::vector<float> out;
  out.reserve(values.size());
  for (const auto& v : values) {
    if (!v.is_number()) fail(ErrorCode::MalformedResponse, "embedding holds a non-number");
    out.push_back(v.get<float>());
  }
  if (expected_dim != 0 && out.size() != expected_dim) {
    fail(ErrorCode::MalformedResponse,
         "embedding length " + std::to_string(out.size()) + " != advertised " + std::to_string(expected_dim));
  }
  Embedding e{std::move(out), true};
  if (std::abs(l2_norm(e) - 1.0) > 1e-3) fail(ErrorCode::MalformedResponse, "embedding is not unit norm");
  return e;
}

std::string require_string(const json& body, std::string_view key) {
  const json& v = detail::require(body, key);
  if (!v.is_string()) fail(ErrorCode::MalformedResponse, std::string(key) + " is not a string");
  return v.get<std::string>();
}

}  // namespace

ModelServerClient::ModelServerClient(ServiceEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

const ServiceInfo& ModelServerClient::info() const {
  std::lock_guard lock(info_mutex_);
  if (!info_) {
    const json body = detail::get_json(endpoint_, "/info");
    const json& dim = detail::require(body, "embedding_dim");
    if (!dim.is_number_unsigned() || dim.get<std::size_t>() == 0) {
      fail(ErrorCode::MalformedResponse, "embedding_dim must be a positive integer");
    }
    ServiceInfo info;
    info.embedding_dim = dim.get<std::size_t>();
    info.generator_id = require_string(body, "generator_id");
    info.caption_model_id = require_string(body, "caption_model_id");
    info_ = std::move(info);
  }
  return *info_;
}

std::size_t ModelServerClient::dim() const { return info().embedding_dim; }

std::string ModelServerClient::caption(const RasterImage& image) {
  const json body = detail::post_json(endpoint_, "/caption", json{{"image_png_b64", png_b64(image)}});
  std::string text = require_string(body, "caption");
  if (text.empty()) fail(ErrorCode::MalformedResponse, "empty caption");
  return text;
}

Embedding ModelServerClient::embed_text(std::string_view text) {
  if (text.empty()) fail(ErrorCode::InvalidArgument, "cannot embed empty text");
  return parse_embedding(detail::post_json(endpoint_, "/embed_text", json{{"text", std::string(text)}}), dim());
}

Embedding ModelServerClient::embed_image(const RasterImage& image) {
  return parse_embedding(detail::post_json(endpoint_, "/embed_image", json{{"image_png_b64", png_b64(image)}}),
                         dim());
}

std::string ModelServerClient::rewrite(std::string_view prompt, const std::vector<std::string>& documents,
                                       std::size_t char_budget) {
  const json body = detail::post_json(
      endpoint_, "/rewrite", json{{"prompt", std::string(prompt)}, {"documents", documents}, {"budget", char_budget}});
  std::string text = require_string(body, "prompt");
  if (text.empty() || text.size() > char_budget) fail(ErrorCode::MalformedResponse, "rewrite outside budget");
  return text;
}

std::vector<std::string> ModelServerClient::review(std::string_view query,
                                                    const std::vector<ReviewCandidate>& candidates) {
  json docs = json::array();
  for (const auto& c : candidates) docs.push_back(json{{"id", c.id}, {"text", c.text}, {"score", c.score}});
  try {
    const json body = detail::post_json(endpoint_, "/review", json{{"query", std::string(query)}, {"documents", docs}});
    const json& keep = detail::require(body, "keep");
    if (!keep.is_array()) fail(ErrorCode::MalformedResponse, "keep is not a list");
    std::vector<std::string> ids;
    for (const auto& id : keep) {
      if (!id.is_string()) fail(ErrorCode::MalformedResponse, "keep holds a non-string");
      ids.push_back(id.get<std::string>());
    }
    return ids;
  } catch (const Error& e) {
    fail(ErrorCode::ReviewerUnavailable, e.what());
  }
}

}  // namespace ragsc
