#include "ragsc/retriever.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "ragsc/error.hpp"

namespace ragsc {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

InvertedIndex InvertedIndex::build(const std::map<std::string, std::string, std::less<>>& corpus) {
  InvertedIndex index;
  std::size_t total_len = 0;
  for (const auto& [id, text] : corpus) {
    const auto tokens = tokenize(text);
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [term, count] : tf) index.terms_[term].push_back(Posting{id, count});
    index.doc_lengths_[id] = tokens.size();
    total_len += tokens.size();
  }
  // Corpus iteration is id-ordered, so every posting list is already sorted.
  if (!corpus.empty()) index.avg_doc_length_ = static_cast<double>(total_len) / static_cast<double>(corpus.size());

  std::map<std::string, double, std::less<>> sq;
  for (const auto& [term, postings] : index.terms_) {
    const double idf = index.tfidf_idf(postings.size());
    for (const auto& p : postings) sq[p.doc_id] += (p.tf * idf) * (p.tf * idf);
  }
  for (const auto& [id, len] : index.doc_lengths_) {
    const auto it = sq.find(id);
    index.tfidf_norms_[id] = it == sq.end() ? 0.0 : std::sqrt(it->second);
  }
  return index;
}

InvertedIndex InvertedIndex::build(const KnowledgeBase& kb) {
  std::map<std::string, std::string, std::less<>> corpus;
  for (const auto& [id, entry] : kb.entries()) {
    if (entry.modality == Modality::DOCUMENT && entry.text) corpus.emplace(id, *entry.text);
  }
  return build(corpus);
}

const std::vector<Posting>* InvertedIndex::postings(std::string_view term) const {
  const auto it = terms_.find(term);
  return it == terms_.end() ? nullptr : &it->second;
}

double InvertedIndex::tfidf_idf(std::size_t df) const {
  return std::log((static_cast<double>(doc_count()) + 1.0) / (static_cast<double>(df) + 1.0)) + 1.0;
}

double InvertedIndex::tfidf_norm(std::string_view doc_id) const {
  const auto it = tfidf_norms_.find(doc_id);
  return it == tfidf_norms_.end() ? 0.0 : it->second;
}

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::TFIDF_COSINE: return "TFIDF_COSINE";
    case ScoreKind::BM25: return "BM25";
    case ScoreKind::COSINE: return "COSINE";
  }
  return "UNKNOWN";
}

void sort_hits(std::vector<ScoredHit>& hits) {
  std::sort(hits.begin(), hits.end(), [](const ScoredHit& a, const ScoredHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entry_id < b.entry_id;
  });
}

namespace {

std::map<std::string, std::uint32_t> term_counts(std::string_view text) {
  std::map<std::string, std::uint32_t> counts;
  for (auto& t : tokenize(text)) ++counts[std::move(t)];
  return counts;
}

std::vector<ScoredHit> top_k(std::map<std::string, double>& scores, ScoreKind kind, std::size_t k) {
  std::vector<ScoredHit> hits;
  hits.reserve(scores.size());
  for (auto& [id, s] : scores) hits.push_back(ScoredHit{id, s, kind});
  sort_hits(hits);
  if (hits.size() > k) hits.resize(k);
  return hits;
}

}  // namespace

std::vector<ScoredHit> tfidf_search(const InvertedIndex& index, std::string_view query, std::size_t k) {
  std::map<std::string, double> dot;
  double q_sq = 0.0;
  for (const auto& [term, count] : term_counts(query)) {
    const auto* postings = index.postings(term);
    if (!postings) continue;
    const double idf = index.tfidf_idf(postings->size());
    const double qw = count * idf;
    q_sq += qw * qw;
    for (const auto& p : *postings) dot[p.doc_id] += qw * (p.tf * idf);
  }
  if (dot.empty()) return {};
  const double q_norm = std::sqrt(q_sq);
  for (auto& [id, d] : dot) d /= q_norm * index.tfidf_norm(id);
  return top_k(dot, ScoreKind::TFIDF_COSINE, k);
}

std::vector<ScoredHit> bm25_search(const InvertedIndex& index, std::string_view query, std::size_t k,
                                   const Bm25Params& params) {
  std::map<std::string, double> scores;
  const double n = static_cast<double>(index.doc_count());
  const double avgdl = index.avg_doc_length() > 0.0 ? index.avg_doc_length() : 1.0;
  for (const auto& [term, count] : term_counts(query)) {
    const auto* postings = index.postings(term);
    if (!postings) continue;
    const double df = static_cast<double>(postings->size());
    const double idf = std::max(0.0, std::log(1.0 + (n - df + 0.5) / (df + 0.5)));
    for (const auto& p : *postings) {
      const double dl = static_cast<double>(index.doc_lengths().find(p.doc_id)->second);
      const double tf = p.tf;
      scores[p.doc_id] += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl));
    }
  }
  return top_k(scores, ScoreKind::BM25, k);
}

namespace {

const std::optional<Embedding>& field_of(const KnowledgeEntry& e, EmbeddingField field) {
  return field == EmbeddingField::TEXT ? e.text_embedding : e.image_embedding;
}

}  // namespace

std::vector<ScoredHit> dense_search(const KnowledgeBase& kb, const Embedding& query, EmbeddingField field,
                                    std::optional<Modality> modality, std::size_t k) {
  const std::size_t dim = field == EmbeddingField::TEXT ? kb.text_dim() : kb.image_dim();
  if (dim != 0 && query.dim() != dim) {
    fail(ErrorCode::DimensionMismatch,
         "query dim " + std::to_string(query.dim()) + ", store dim " + std::to_string(dim));
  }
  std::map<std::string, double> scores;
  for (const auto& [id, entry] : kb.entries()) {
    if (modality && entry.modality != *modality) continue;
    const auto& e = field_of(entry, field);
    if (!e) continue;
    scores[id] = cosine(query, *e);
  }
  return top_k(scores, ScoreKind::COSINE, k);
}

std::vector<ScoredHit> cross_modal_search(const KnowledgeBase& kb, const Embedding& text_embedding, std::size_t k) {
  return dense_search(kb, text_embedding, EmbeddingField::IMAGE, Modality::IMAGE, k);
}

void Query::validate() const {
  switch (mode) {
    case QueryMode::SPARSE:
      if (!text) fail(ErrorCode::InvalidArgument, "SPARSE query needs text");
      break;
    case QueryMode::DENSE_TEXT:
      if (!text_embedding) fail(ErrorCode::InvalidArgument, "DENSE_TEXT query needs a text embedding");
      break;
    case QueryMode::CROSS_MODAL:
      if (!text_embedding && !image_embedding) fail(ErrorCode::InvalidArgument, "CROSS_MODAL query needs an embedding");
      break;
  }
}

ReviewOutcome review_filter(const KnowledgeBase& kb, const std::vector<ScoredHit>& hits, EmbeddingField field,
                            std::string_view query, const ReviewOptions& options, Reviewer* reviewer) {
  std::vector<ScoredHit> ordered = hits;
  sort_hits(ordered);
  ReviewOutcome out;
  std::vector<const KnowledgeEntry*> kept_entries;
  std::set<std::string_view> seen;
  for (const auto& hit : ordered) {
    if (out.hits.size() >= options.max_keep) break;
    if (hit.score < options.min_score) continue;
    if (!seen.insert(hit.entry_id).second) continue;
    const KnowledgeEntry* entry = kb.get(hit.entry_id);
    bool duplicate = false;
    if (entry) {
      for (const auto* other : kept_entries) {
        const auto& a = field_of(*entry, field);
        const auto& b = field_of(*other, field);
        if (a && b && a->dim() == b->dim()) {
          if (cosine(*a, *b) > options.duplicate_threshold) duplicate = true;
        } else if (!a && !b && entry->text && other->text && *entry->text == *other->text) {
          duplicate = true;
        }
        if (duplicate) break;
      }
    }
    if (duplicate) continue;
    out.hits.push_back(hit);
    kept_entries.push_back(entry);
  }

  if (reviewer && !out.hits.empty()) {
    std::vector<ReviewCandidate> candidates;
    for (std::size_t i = 0; i < out.hits.size(); ++i) {
      const auto* e = kept_entries[i];
      candidates.push_back(ReviewCandidate{out.hits[i].entry_id, e && e->text ? *e->text : std::string(),
                                           out.hits[i].score});
    }
    try {
      const auto keep = reviewer->review(query, candidates);
      const std::set<std::string_view> keep_set(keep.begin(), keep.end());
      std::erase_if(out.hits, [&](const ScoredHit& h) { return !keep_set.contains(h.entry_id); });
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ReviewerUnavailable) throw;
      out.reviewer_degraded = true;
    }
  }
  return out;
}

Retriever::Retriever(const KnowledgeBase& kb, SparseScorer scorer, Bm25Params bm25)
    : kb_(kb), index_(InvertedIndex::build(kb)), scorer_(scorer), bm25_(bm25) {}

std::vector<ScoredHit> Retriever::search(const Query& query) const {
  query.validate();
  switch (query.mode) {
    case QueryMode::SPARSE:
      return scorer_ == SparseScorer::BM25 ? bm25_search(index_, *query.text, query.k, bm25_)
                                           : tfidf_search(index_, *query.text, query.k);
    case QueryMode::DENSE_TEXT:
      return dense_search(kb_, *query.text_embedding, EmbeddingField::TEXT, Modality::DOCUMENT, query.k);
    case QueryMode::CROSS_MODAL: {
      if (!query.image_embedding) return cross_modal_search(kb_, *query.text_embedding, query.k);
      // Both views present: an image scores by its better match.
      const std::size_t all = kb_.size();
      auto by_image = dense_search(kb_, *query.image_embedding, EmbeddingField::IMAGE, Modality::IMAGE, all);
      std::map<std::string, double> best;
      for (const auto& h : by_image) best[h.entry_id] = h.score;
      if (query.text_embedding) {
        for (const auto& h : cross_modal_search(kb_, *query.text_embedding, all)) {
          auto [it, inserted] = best.emplace(h.entry_id, h.score);
          if (!inserted) it->second = std::max(it->second, h.score);
        }
      }
      return top_k(best, ScoreKind::COSINE, query.k);
    }
  }
  return {};
}

RetrievalBundle Retriever::retrieve(const Query& query, const StopExplorationOptions& options,
                                    Reviewer* reviewer) const {
  query.validate();
  if (options.rounds_max < 1) fail(ErrorCode::InvalidArgument, "rounds_max must be >= 1");
  if (options.k_per_round < 1) fail(ErrorCode::InvalidArgument, "k_per_round must be >= 1");
  const bool images = query.mode == QueryMode::CROSS_MODAL;
  const EmbeddingField field = images ? EmbeddingField::IMAGE : EmbeddingField::TEXT;
  const std::string_view query_text = query.text ? std::string_view(*query.text) : std::string_view();

  RetrievalBundle bundle;
  std::vector<ScoredHit>& admitted = images ? bundle.images : bundle.documents;
  std::set<std::string> admitted_ids;
  for (int round = 1; round <= options.rounds_max; ++round) {
    Query q = query;
    q.k = static_cast<std::size_t>(round) * options.k_per_round;
    auto reviewed = review_filter(kb_, search(q), field, query_text, options.review, reviewer);
    bundle.reviewer_degraded = bundle.reviewer_degraded || reviewed.reviewer_degraded;

    double gain = 0.0;
    std::size_t added = 0;
    for (const auto& hit : reviewed.hits) {
      if (added == options.k_per_round) break;
      if (admitted_ids.contains(hit.entry_id)) continue;
      admitted_ids.insert(hit.entry_id);
      admitted.push_back(hit);
      gain += hit.score;
      ++added;
    }
    bundle.rounds_used = round;
    if (gain < options.epsilon) {
      bundle.stopped_early = round < options.rounds_max;
      break;
    }
  }
  sort_hits(admitted);
  return bundle;
}

RetrievalBundle retrieve_with_stop_exploration(const KnowledgeBase& kb, const Query& query,
                                               const StopExplorationOptions& options, Reviewer* reviewer) {
  return Retriever(kb).retrieve(query, options, reviewer);
}

}  // namespace ragsc
