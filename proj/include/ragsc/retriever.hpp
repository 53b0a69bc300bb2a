#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ragsc/embedding.hpp"
#include "ragsc/knowledge.hpp"

namespace ragsc {

// Lowercase ASCII; any non-alphanumeric byte separates tokens. No stemming.
std::vector<std::string> tokenize(std::string_view text);

struct Posting {
  std::string doc_id;
  std::uint32_t tf = 0;
  friend bool operator==(const Posting&, const Posting&) = default;
};

class InvertedIndex {
 public:
  InvertedIndex() = default;

  static InvertedIndex build(const std::map<std::string, std::string, std::less<>>& corpus);
  // Indexes the text of every DOCUMENT entry.
  static InvertedIndex build(const KnowledgeBase& kb);

  // Postings sorted by doc id; nullptr for unknown terms.
  const std::vector<Posting>* postings(std::string_view term) const;
  const std::map<std::string, std::vector<Posting>, std::less<>>& terms() const noexcept { return terms_; }
  const std::map<std::string, std::size_t, std::less<>>& doc_lengths() const noexcept { return doc_lengths_; }

  std::size_t doc_count() const noexcept { return doc_lengths_.size(); }
  double avg_doc_length() const noexcept { return avg_doc_length_; }
  bool empty() const noexcept { return doc_lengths_.empty(); }

  // ln((N + 1) / (df + 1)) + 1
  double tfidf_idf(std::size_t df) const;
  // L2 norm of the document's tf-idf vector.
  double tfidf_norm(std::string_view doc_id) const;

 private:
  std::map<std::string, std::vector<Posting>, std::less<>> terms_;
  std::map<std::string, std::size_t, std::less<>> doc_lengths_;
  std::map<std::string, double, std::less<>> tfidf_norms_;
  double avg_doc_length_ = 0.0;
};

enum class ScoreKind : std::uint8_t { TFIDF_COSINE, BM25, COSINE };

std::string_view to_string(ScoreKind kind);

struct ScoredHit {
  std::string entry_id;
  double score = 0.0;
  ScoreKind score_kind = ScoreKind::COSINE;
  friend bool operator==(const ScoredHit&, const ScoredHit&) = default;
};

// Descending score, ties by ascending id.
void sort_hits(std::vector<ScoredHit>& hits);

// Cosine of tf-idf vectors (raw tf, smoothed idf, L2-normalized). Query terms
// outside the vocabulary are ignored; only documents sharing a term are returned.
std::vector<ScoredHit> tfidf_search(const InvertedIndex& index, std::string_view query, std::size_t k);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

// Okapi BM25 over the distinct query terms, idf = max(0, ln(1 + (N - df + 0.5) / (df + 0.5))).
std::vector<ScoredHit> bm25_search(const InvertedIndex& index, std::string_view query, std::size_t k,
                                   const Bm25Params& params = {});

enum class EmbeddingField : std::uint8_t { TEXT, IMAGE };

// Exact cosine top-k over entries carrying the requested embedding.
std::vector<ScoredHit> dense_search(const KnowledgeBase& kb, const Embedding& query, EmbeddingField field,
                                    std::optional<Modality> modality, std::size_t k);

// Text embedding against the image embeddings of IMAGE entries (joint space).
std::vector<ScoredHit> cross_modal_search(const KnowledgeBase& kb, const Embedding& text_embedding, std::size_t k);

enum class QueryMode : std::uint8_t { SPARSE, DENSE_TEXT, CROSS_MODAL };
enum class SparseScorer : std::uint8_t { BM25, TFIDF };

struct Query {
  std::optional<std::string> text;
  std::optional<Embedding> text_embedding;
  std::optional<Embedding> image_embedding;
  std::size_t k = 5;
  QueryMode mode = QueryMode::SPARSE;

  void validate() const;
};

struct ReviewCandidate {
  std::string id;
  std::string text;
  double score = 0.0;
};

// External keep/drop decision maker (e.g. an LLM behind the model server).
// Returns the ids to keep; throws Error(ReviewerUnavailable) when it cannot answer.
class Reviewer {
 public:
  virtual ~Reviewer() = default;
  virtual std::vector<std::string> review(std::string_view query, const std::vector<ReviewCandidate>& candidates) = 0;
};

struct ReviewOptions {
  std::size_t max_keep = std::numeric_limits<std::size_t>::max();
  double min_score = 0.0;
  double duplicate_threshold = 0.95;
};

struct ReviewOutcome {
  std::vector<ScoredHit> hits;
  bool reviewer_degraded = false;
};

// Drops hits below min_score and near-duplicates (embedding cosine above the
// threshold, or identical text when the entries carry no embedding), keeping
// the higher-scored one, then truncates to max_keep. A configured reviewer
// gets the survivors; if it is unavailable the heuristic result stands.
ReviewOutcome review_filter(const KnowledgeBase& kb, const std::vector<ScoredHit>& hits, EmbeddingField field,
                            std::string_view query, const ReviewOptions& options, Reviewer* reviewer = nullptr);

struct RetrievalBundle {
  std::vector<ScoredHit> documents;
  std::vector<ScoredHit> images;
  int rounds_used = 0;
  bool stopped_early = false;
  bool reviewer_degraded = false;
};

struct StopExplorationOptions {
  int rounds_max = 3;
  double epsilon = 0.1;
  std::size_t k_per_round = 2;
  ReviewOptions review;
};

class Retriever {
 public:
  explicit Retriever(const KnowledgeBase& kb, SparseScorer scorer = SparseScorer::BM25, Bm25Params bm25 = {});

  std::vector<ScoredHit> search(const Query& query) const;

  // Round r searches with k = r * k_per_round, reviews the result, and admits
  // up to k_per_round hits not admitted before. The round's gain is the score
  // mass of those hits; exploration stops once gain < epsilon or at rounds_max.
  // CROSS_MODAL results land in `images`, everything else in `documents`.
  RetrievalBundle retrieve(const Query& query, const StopExplorationOptions& options,
                           Reviewer* reviewer = nullptr) const;

  const InvertedIndex& index() const noexcept { return index_; }

 private:
  const KnowledgeBase& kb_;
  InvertedIndex index_;
  SparseScorer scorer_;
  Bm25Params bm25_;
};

RetrievalBundle retrieve_with_stop_exploration(const KnowledgeBase& kb, const Query& query,
                                               const StopExplorationOptions& options, Reviewer* reviewer = nullptr);

}  // namespace ragsc
