#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ragsc/embedding.hpp"
#include "ragsc/image.hpp"
#include "ragsc/knowledge.hpp"
#include "ragsc/prompter.hpp"
#include "ragsc/retriever.hpp"
#include "ragsc/service.hpp"

namespace ragsc {

class Captioner {
 public:
  virtual ~Captioner() = default;
  virtual std::string caption(const RasterImage& image) = 0;
};

// Joint text/image embedding space.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual Embedding embed_text(std::string_view text) = 0;
  virtual Embedding embed_image(const RasterImage& image) = 0;
};

inline constexpr std::size_t kMockEmbeddingDim = 64;

// 64-bin grayscale histogram (bin = gray >> 2), L2-normalized.
Embedding histogram_embedding(const RasterImage& image);

// Bag of tokens hashed (FNV-1a) into `dim` buckets, L2-normalized. Zero vector
// for text without tokens.
Embedding hashed_text_embedding(std::string_view text, std::size_t dim = kMockEmbeddingDim);

// Offline stand-in for a CLIP-like model. Images embed as their histogram.
// Text that exactly matches a registered caption embeds as that caption's
// image embedding, which gives captions and their images one shared point;
// any other text falls back to the hashed bag of tokens.
class MockEmbeddingProvider final : public EmbeddingProvider {
 public:
  MockEmbeddingProvider() = default;
  // Registers the caption of every IMAGE entry carrying an image embedding.
  explicit MockEmbeddingProvider(const KnowledgeBase& kb);

  void register_caption(std::string caption, Embedding image_embedding);

  std::size_t dim() const override { return kMockEmbeddingDim; }
  Embedding embed_text(std::string_view text) override;
  Embedding embed_image(const RasterImage& image) override;

 private:
  std::map<std::string, Embedding, std::less<>> pairs_;
};

// Returns the caption of the most similar KB image (histogram cosine) when it
// clears `min_similarity`, else the fallback text.
class MockCaptioner final : public Captioner {
 public:
  explicit MockCaptioner(const KnowledgeBase& kb, double min_similarity = 0.9,
                         std::string fallback = "a photograph");
  std::string caption(const RasterImage& image) override;

 private:
  const KnowledgeBase& kb_;
  double min_similarity_;
  std::string fallback_;
};

struct ServiceInfo {
  std::size_t embedding_dim = 0;
  std::string generator_id;
  std::string caption_model_id;
};

// Client for the model server's auxiliary endpoints:
//   GET  /info         -> {embedding_dim, generator_id, caption_model_id}
//   POST /caption      {image_png_b64}             -> {caption}
//   POST /embed_text   {text}                      -> {embedding: [float]}
//   POST /embed_image  {image_png_b64}             -> {embedding: [float]}
//   POST /rewrite      {prompt, documents, budget} -> {prompt}
//   POST /review       {query, documents: [{id, text, score}]} -> {keep: [id]}
// Embeddings are checked against the advertised dimension and unit norm (1e-3).
class ModelServerClient final : public Captioner, public EmbeddingProvider, public Reviewer, public Rewriter {
 public:
  explicit ModelServerClient(ServiceEndpoint endpoint);

  // Fetched once, then cached.
  const ServiceInfo& info() const;

  std::string caption(const RasterImage& image) override;
  std::size_t dim() const override;
  Embedding embed_text(std::string_view text) override;
  Embedding embed_image(const RasterImage& image) override;
  std::string rewrite(std::string_view prompt, const std::vector<std::string>& documents,
                      std::size_t char_budget) override;
  // Service failures surface as ReviewerUnavailable.
  std::vector<std::string> review(std::string_view query, const std::vector<ReviewCandidate>& candidates) override;

  const ServiceEndpoint& endpoint() const noexcept { return endpoint_; }

 private:
  ServiceEndpoint endpoint_;
  mutable std::mutex info_mutex_;
  mutable std::optional<ServiceInfo> info_;
};

}  // namespace ragsc
