#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ragsc/providers.hpp"
#include "ragsc/retriever.hpp"
#include "support.hpp"

using namespace ragsc;

namespace {

using Corpus = std::map<std::string, std::string, std::less<>>;

const std::vector<std::string> kVocab = {"bridge", "stone", "lake",  "river", "tree",   "sky",   "cloud", "car",
                                         "road",  "city",  "night", "sun",   "snow",   "grass", "dog",   "cat",
                                         "boat",  "sea",   "hill",  "tower", "window", "door",  "red",   "blue"};

Corpus random_corpus(std::mt19937_64& rng, std::size_t docs) {
  Corpus c;
  std::uniform_int_distribution<std::size_t> len(1, 14), word(0, kVocab.size() - 1);
  const char* seps[] = {" ", ", ", "-", "! ", "  "};
  for (std::size_t d = 0; d < docs; ++d) {
    std::string text;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) {
      std::string w = kVocab[word(rng)];
      if (rng() % 4 == 0) w[0] = static_cast<char>(std::toupper(w[0]));
      text += w;
      text += seps[rng() % 5];
    }
    c.emplace("doc" + std::to_string(1000 + d), text);
  }
  return c;
}

std::string random_query(std::mt19937_64& rng) {
  std::string q;
  const std::size_t n = 1 + rng() % 4;
  for (std::size_t i = 0; i < n; ++i) q += kVocab[rng() % kVocab.size()] + " ";
  if (rng() % 5 == 0) q += "unknownterm";
  return q;
}

// Independent tokenizer: replace separators by spaces and split.
std::vector<std::string> split_words(std::string text) {
  for (auto& ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    ch = (c < 0x80 && std::isalnum(c)) ? static_cast<char>(std::tolower(c)) : ' ';
  }
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::map<std::string, double> counts(const std::vector<std::string>& words) {
  std::map<std::string, double> m;
  for (const auto& w : words) m[w] += 1.0;
  return m;
}

using OracleHits = std::vector<std::pair<std::string, double>>;

OracleHits rank(std::map<std::string, double> scores, std::size_t k) {
  OracleHits v(scores.begin(), scores.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (v.size() > k) v.resize(k);
  return v;
}

OracleHits tfidf_oracle(const Corpus& corpus, const std::string& query, std::size_t k) {
  const double n = static_cast<double>(corpus.size());
  std::map<std::string, std::map<std::string, double>> tf;
  std::map<std::string, double> df;
  for (const auto& [id, text] : corpus) {
    tf[id] = counts(split_words(text));
    for (const auto& [term, c] : tf[id]) df[term] += 1.0;
  }
  auto idf = [&](const std::string& t) { return std::log((n + 1.0) / (df[t] + 1.0)) + 1.0; };
  std::map<std::string, double> qv;
  for (const auto& [t, c] : counts(split_words(query))) {
    if (df.contains(t)) qv[t] = c * idf(t);
  }
  double qn = 0.0;
  for (const auto& [t, w] : qv) qn += w * w;
  qn = std::sqrt(qn);
  std::map<std::string, double> scores;
  for (const auto& [id, terms] : tf) {
    double dot = 0.0, dn = 0.0;
    bool shares = false;
    for (const auto& [t, c] : terms) {
      const double w = c * idf(t);
      dn += w * w;
      if (qv.contains(t)) {
        dot += w * qv[t];
        shares = true;
      }
    }
    if (shares) scores[id] = dot / (qn * std::sqrt(dn));
  }
  return rank(scores, k);
}

OracleHits bm25_oracle(const Corpus& corpus, const std::string& query, std::size_t k, double k1, double b) {
  const double n = static_cast<double>(corpus.size());
  std::map<std::string, std::map<std::string, double>> tf;
  std::map<std::string, double> len, df;
  double total = 0.0;
  for (const auto& [id, text] : corpus) {
    const auto words = split_words(text);
    tf[id] = counts(words);
    len[id] = static_cast<double>(words.size());
    total += len[id];
    for (const auto& [t, c] : tf[id]) df[t] += 1.0;
  }
  const double avgdl = total / n;
  std::set<std::string> terms;
  for (const auto& w : split_words(query)) terms.insert(w);
  std::map<std::string, double> scores;
  for (const auto& [id, doc] : tf) {
    double s = 0.0;
    bool matched = false;
    for (const auto& t : terms) {
      const auto it = doc.find(t);
      if (it == doc.end()) continue;
      matched = true;
      const double idf = std::max(0.0, std::log(1.0 + (n - df[t] + 0.5) / (df[t] + 0.5)));
      s += idf * it->second * (k1 + 1.0) / (it->second + k1 * (1.0 - b + b * len[id] / avgdl));
    }
    if (matched) scores[id] = s;
  }
  return rank(scores, k);
}

void check_against(const std::vector<ScoredHit>& got, const OracleHits& expect) {
  REQUIRE(got.size() == expect.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].entry_id == expect[i].first);
    CHECK(got[i].score == doctest::Approx(expect[i].second).epsilon(1e-9));
  }
}

Embedding random_vec(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<float> n;
  std::vector<float> v(dim);
  for (auto& x : v) x = n(rng);
  return Embedding::unit(std::move(v));
}

KnowledgeEntry doc_entry(std::string id, std::string text, std::optional<Embedding> e = std::nullopt) {
  KnowledgeEntry k{std::move(id), Modality::DOCUMENT, std::move(text)};
  k.text_embedding = std::move(e);
  return k;
}

bool sorted_and_bounded(const std::vector<ScoredHit>& hits, std::size_t k) {
  for (std::size_t i = 1; i < hits.size(); ++i) {
    const auto& a = hits[i - 1];
    const auto& b = hits[i];
    if (a.score < b.score || (a.score == b.score && a.entry_id >= b.entry_id)) return false;
  }
  return hits.size() <= k;
}

class FakeReviewer final : public Reviewer {
 public:
  std::function<std::vector<std::string>(const std::vector<ReviewCandidate>&)> decide;
  int calls = 0;
  std::vector<ReviewCandidate> last;

  std::vector<std::string> review(std::string_view, const std::vector<ReviewCandidate>& c) override {
    ++calls;
    last = c;
    return decide(c);
  }
};

// Unit embedding with cosine `s` to e0, its remainder on axis `axis`.
Embedding along(double s, std::size_t axis, std::size_t dim = 8) {
  std::vector<float> v(dim, 0.0f);
  v[0] = static_cast<float>(s);
  v[axis] = static_cast<float>(std::sqrt(1.0 - s * s));
  return Embedding::unit(std::move(v));
}

Embedding axis0(std::size_t dim = 8) {
  std::vector<float> v(dim, 0.0f);
  v[0] = 1.0f;
  return Embedding::unit(std::move(v));
}

}  // namespace

TEST_SUITE("retriever") {
  TEST_CASE("tokenize") {
    CHECK(tokenize("The quick-brown Fox!") == std::vector<std::string>{"the", "quick", "brown", "fox"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("a1 b2") == std::vector<std::string>{"a1", "b2"});
    CHECK(tokenize("  --  ").empty());
    CHECK(tokenize("caf\xc3\xa9 au") == std::vector<std::string>{"caf", "au"});
  }

  TEST_CASE("inverted index") {
    const auto one = InvertedIndex::build(Corpus{{"d", "a a b"}});
    REQUIRE(one.postings("a"));
    CHECK(*one.postings("a") == std::vector<Posting>{{"d", 2}});
    CHECK(*one.postings("b") == std::vector<Posting>{{"d", 1}});
    CHECK(one.postings("c") == nullptr);
    CHECK(one.doc_lengths().at("d") == 3);
    CHECK(one.avg_doc_length() == 3.0);

    const auto empty = InvertedIndex::build(Corpus{});
    CHECK(empty.empty());
    CHECK(empty.terms().empty());
    CHECK(bm25_search(empty, "a", 5).empty());
    CHECK(tfidf_search(empty, "a", 5).empty());

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const Corpus corpus = random_corpus(rng, 20);
      const auto index = InvertedIndex::build(corpus);
      std::map<std::pair<std::string, std::string>, std::uint32_t> expect;
      double total = 0.0;
      for (const auto& [id, text] : corpus) {
        const auto words = split_words(text);
        total += static_cast<double>(words.size());
        for (const auto& w : words) ++expect[{w, id}];
        CHECK(index.doc_lengths().at(id) == words.size());
      }
      std::map<std::pair<std::string, std::string>, std::uint32_t> got;
      for (const auto& [term, postings] : index.terms()) {
        for (std::size_t i = 0; i < postings.size(); ++i) {
          if (i > 0) CHECK(postings[i - 1].doc_id < postings[i].doc_id);
          CHECK(got.emplace(std::pair{term, postings[i].doc_id}, postings[i].tf).second);
        }
      }
      CHECK(got == expect);
      CHECK(index.avg_doc_length() == doctest::Approx(total / 20.0).epsilon(1e-12));
    }
  }

  TEST_CASE("tfidf examples and oracle") {
    const auto single = InvertedIndex::build(Corpus{{"d", "stone bridge over the lake"}});
    const auto hits = tfidf_search(single, "stone bridge over the lake", 5);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(hits[0].score_kind == ScoreKind::TFIDF_COSINE);
    CHECK(tfidf_search(single, "zebra", 5).empty());

    std::mt19937_64 rng(11);
    for (int q = 0; q < 100; ++q) {
      const Corpus corpus = random_corpus(rng, 20 + rng() % 31);
      const auto index = InvertedIndex::build(corpus);
      const std::string query = random_query(rng);
      const std::size_t k = 1 + rng() % 10;
      const auto got = tfidf_search(index, query, k);
      CHECK(sorted_and_bounded(got, k));
      check_against(got, tfidf_oracle(corpus, query, k));
    }
  }

  TEST_CASE("bm25 examples and oracle") {
    const auto one = InvertedIndex::build(Corpus{{"d", "a b"}});
    const auto hits = bm25_search(one, "a", 5);
    REQUIRE(hits.size() == 1);
    // idf = ln(1 + 0.5 / 1.5); tf part = 2.2 / 2.2 at |d| = avgdl.
    CHECK(hits[0].score == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-12));
    CHECK(hits[0].score_kind == ScoreKind::BM25);

    const auto pair = InvertedIndex::build(Corpus{{"all", "red boat sea"}, {"some", "red boat hill"}, {"x", "cat"}});
    const auto ranked = bm25_search(pair, "red boat sea", 5);
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].entry_id == "all");
    CHECK(ranked[0].score > ranked[1].score);

    // A term in every document of a large corpus gets idf ln(1 + 0.5 / (N + 0.5)) > 0.
    Corpus common;
    for (int i = 0; i < 10; ++i) common.emplace("d" + std::to_string(i), "the");
    CHECK(bm25_search(InvertedIndex::build(common), "the", 3)[0].score > 0.0);

    std::mt19937_64 rng(13);
    for (int q = 0; q < 100; ++q) {
      const Corpus corpus = random_corpus(rng, 20 + rng() % 31);
      const auto index = InvertedIndex::build(corpus);
      const std::string query = random_query(rng);
      const std::size_t k = 1 + rng() % 10;
      const double k1 = q % 2 ? 1.2 : 0.5 + (rng() % 100) / 50.0;
      const double b = q % 2 ? 0.75 : (rng() % 101) / 100.0;
      const auto got = bm25_search(index, query, k, {k1, b});
      CHECK(sorted_and_bounded(got, k));
      check_against(got, bm25_oracle(corpus, query, k, k1, b));
    }
  }

  TEST_CASE("dense search") {
    std::mt19937_64 rng(17);
    KnowledgeBase kb;
    std::vector<Embedding> stored;
    for (int i = 0; i < 1000; ++i) {
      stored.push_back(random_vec(rng, 16));
      kb.insert(doc_entry("e" + std::to_string(i), "t", stored.back()));
    }
    const auto self = dense_search(kb, stored[42], EmbeddingField::TEXT, Modality::DOCUMENT, 10);
    REQUIRE(!self.empty());
    CHECK(self[0].entry_id == "e42");
    CHECK(self[0].score == doctest::Approx(1.0).epsilon(1e-6));

    for (int q = 0; q < 20; ++q) {
      const Embedding query = random_vec(rng, 16);
      std::map<std::string, double> all;
      for (int i = 0; i < 1000; ++i) {
        double dot = 0.0;
        for (std::size_t d = 0; d < 16; ++d) dot += double(query.values[d]) * double(stored[i].values[d]);
        all["e" + std::to_string(i)] = dot / (l2_norm(query) * l2_norm(stored[i]));
      }
      const auto got = dense_search(kb, query, EmbeddingField::TEXT, std::nullopt, 10);
      CHECK(sorted_and_bounded(got, 10));
      check_against(got, rank(all, 10));
    }

    KnowledgeBase ortho;
    ortho.insert(doc_entry("a", "t", Embedding::unit({1, 0})));
    const auto zero = dense_search(ortho, Embedding::unit({0, 1}), EmbeddingField::TEXT, std::nullopt, 5);
    REQUIRE(zero.size() == 1);
    CHECK(zero[0].score == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(test::code_of([&] { dense_search(ortho, Embedding::unit({1, 0, 0}), EmbeddingField::TEXT, {}, 5); }) ==
          ErrorCode::DimensionMismatch);
  }

  TEST_CASE("ties break by ascending id") {
    KnowledgeBase kb;
    for (const char* id : {"c", "a", "b"}) kb.insert(doc_entry(id, "same", Embedding::unit({1, 0})));
    const auto hits = dense_search(kb, Embedding::unit({1, 0}), EmbeddingField::TEXT, std::nullopt, 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].entry_id == "a");
    CHECK(hits[1].entry_id == "b");
    CHECK(hits[2].entry_id == "c");
  }

  TEST_CASE("scaling stored embeddings keeps the ranking") {
    std::mt19937_64 rng(19);
    KnowledgeBase unit_kb, scaled_kb;
    for (int i = 0; i < 50; ++i) {
      const Embedding e = random_vec(rng, 12);
      unit_kb.insert(doc_entry("e" + std::to_string(i), "t", e));
      Embedding s{e.values, false};
      const float c = 0.1f + static_cast<float>(rng() % 1000) / 10.0f;
      for (auto& x : s.values) x *= c;
      scaled_kb.insert(doc_entry("e" + std::to_string(i), "t", s));
    }
    for (int q = 0; q < 10; ++q) {
      const Embedding query = random_vec(rng, 12);
      const auto a = dense_search(unit_kb, query, EmbeddingField::TEXT, std::nullopt, 50);
      const auto b = dense_search(scaled_kb, query, EmbeddingField::TEXT, std::nullopt, 50);
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].entry_id == b[i].entry_id);
    }
  }

  TEST_CASE("cross-modal search in a shared space") {
    std::mt19937_64 rng(23);
    KnowledgeBase kb;
    MockEmbeddingProvider mock;
    for (int i = 0; i < 5; ++i) {
      RasterImage img(8, 8, 3);
      for (auto& p : img.data()) p = static_cast<std::uint8_t>(rng());
      KnowledgeEntry e{"img" + std::to_string(i), Modality::IMAGE, "caption number " + std::to_string(i),
                       std::filesystem::path("x.png")};
      e.image_embedding = mock.embed_image(img);
      mock.register_caption(*e.text, *e.image_embedding);
      kb.insert(e);
    }
    kb.insert(doc_entry("doc", "caption number 3", mock.embed_text("caption number 3")));
    const auto hits = cross_modal_search(kb, mock.embed_text("caption number 3"), 3);
    REQUIRE(!hits.empty());
    CHECK(hits[0].entry_id == "img3");
    CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-6));
    for (const auto& h : hits) CHECK(kb.get(h.entry_id)->modality == Modality::IMAGE);

    KnowledgeBase ortho;
    KnowledgeEntry e{"i", Modality::IMAGE, std::string("c"), std::filesystem::path("x.png")};
    e.image_embedding = Embedding::unit({1, 0});
    ortho.insert(e);
    CHECK(cross_modal_search(ortho, Embedding::unit({0, 1}), 1)[0].score == doctest::Approx(0.0));
  }

  TEST_CASE("query validation and search modes") {
    KnowledgeBase kb;
    kb.insert(doc_entry("d1", "stone bridge", Embedding::unit({1, 0})));
    KnowledgeEntry img{"i1", Modality::IMAGE, std::string("bridge photo"), std::filesystem::path("x.png")};
    img.image_embedding = Embedding::unit({0.6f, 0.8f});
    kb.insert(img);
    const Retriever r(kb);
    CHECK(test::code_of([&] { r.search(Query{}); }) == ErrorCode::InvalidArgument);
    CHECK(test::code_of([&] { r.search(Query{.mode = QueryMode::DENSE_TEXT}); }) == ErrorCode::InvalidArgument);
    CHECK(test::code_of([&] { r.search(Query{.mode = QueryMode::CROSS_MODAL}); }) == ErrorCode::InvalidArgument);

    const auto sparse = r.search(Query{.text = "bridge", .k = 5});
    REQUIRE(sparse.size() == 1);
    CHECK(sparse[0].entry_id == "d1");
    CHECK(Retriever(kb, SparseScorer::TFIDF).search(Query{.text = "bridge"})[0].score_kind ==
          ScoreKind::TFIDF_COSINE);

    const auto dense = r.search(Query{.text_embedding = Embedding::unit({1, 0}), .mode = QueryMode::DENSE_TEXT});
    REQUIRE(dense.size() == 1);
    CHECK(dense[0].entry_id == "d1");

    // With both views the image scores by its better match.
    const auto both = r.search(Query{.text_embedding = Embedding::unit({1, 0}),
                                     .image_embedding = Embedding::unit({0, 1}),
                                     .mode = QueryMode::CROSS_MODAL});
    REQUIRE(both.size() == 1);
    CHECK(both[0].score == doctest::Approx(0.8).epsilon(1e-6));
  }

  TEST_CASE("review filter") {
    KnowledgeBase kb;
    kb.insert(doc_entry("a", "x", Embedding::unit({1, 0, 0})));
    kb.insert(doc_entry("b", "y", Embedding::unit({1, 0, 0})));
    kb.insert(doc_entry("c", "z", Embedding::unit({0, 1, 0})));
    const std::vector<ScoredHit> hits{{"a", 0.5}, {"b", 0.7}, {"c", 0.2}};

    CHECK(review_filter(kb, hits, EmbeddingField::TEXT, "q", {.min_score = 0.9}).hits.empty());
    const auto dedup = review_filter(kb, hits, EmbeddingField::TEXT, "q", {});
    REQUIRE(dedup.hits.size() == 2);
    CHECK(dedup.hits[0].entry_id == "b");
    CHECK(dedup.hits[1].entry_id == "c");

    // Entries without embeddings fall back to exact text equality.
    KnowledgeBase plain;
    plain.insert(doc_entry("p", "same text"));
    plain.insert(doc_entry("q", "same text"));
    plain.insert(doc_entry("r", "other"));
    const auto text_dedup =
        review_filter(plain, {{"p", 1.0}, {"q", 0.9}, {"r", 0.8}}, EmbeddingField::TEXT, "q", {});
    REQUIRE(text_dedup.hits.size() == 2);
    CHECK(text_dedup.hits[1].entry_id == "r");
  }

  TEST_CASE("review filter matches a direct re-implementation") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 50; ++trial) {
      KnowledgeBase kb;
      std::vector<ScoredHit> hits;
      std::vector<Embedding> base;
      for (int i = 0; i < 10; ++i) {
        Embedding e = random_vec(rng, 6);
        if (!base.empty() && rng() % 3 == 0) {
          // Small perturbation of an earlier vector: a near-duplicate.
          std::vector<float> v = base[rng() % base.size()].values;
          for (auto& x : v) x += 0.02f * static_cast<float>(static_cast<int>(rng() % 21) - 10) / 10.0f;
          e = Embedding::unit(v);
        }
        base.push_back(e);
        const std::string id = "h" + std::to_string(i);
        kb.insert(doc_entry(id, "t" + std::to_string(i), e));
        hits.push_back({id, static_cast<double>(rng() % 1000) / 1000.0, ScoreKind::COSINE});
      }
      const ReviewOptions opts{.max_keep = 3, .min_score = 0.2};

      std::vector<ScoredHit> sorted = hits;
      std::sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) {
        return x.score != y.score ? x.score > y.score : x.entry_id < y.entry_id;
      });
      std::vector<ScoredHit> expect;
      for (const auto& h : sorted) {
        if (h.score < opts.min_score) continue;
        bool dup = false;
        for (const auto& k : expect) {
          if (cosine(*kb.get(h.entry_id)->text_embedding, *kb.get(k.entry_id)->text_embedding) > 0.95) dup = true;
        }
        if (!dup) expect.push_back(h);
      }
      if (expect.size() > 3) expect.resize(3);
      CHECK(review_filter(kb, hits, EmbeddingField::TEXT, "q", opts).hits == expect);
    }
  }

  TEST_CASE("external reviewer") {
    KnowledgeBase kb;
    for (int i = 0; i < 4; ++i) kb.insert(doc_entry("d" + std::to_string(i), "text " + std::to_string(i)));
    const std::vector<ScoredHit> hits{{"d0", 0.9}, {"d1", 0.8}, {"d2", 0.7}, {"d3", 0.6}};

    FakeReviewer keep_odd;
    keep_odd.decide = [](const std::vector<ReviewCandidate>&) { return std::vector<std::string>{"d3", "d1"}; };
    const auto kept = review_filter(kb, hits, EmbeddingField::TEXT, "query", {}, &keep_odd);
    CHECK(keep_odd.calls == 1);
    REQUIRE(keep_odd.last.size() == 4);
    CHECK(keep_odd.last[0].text == "text 0");
    CHECK(keep_odd.last[0].score == 0.9);
    REQUIRE(kept.hits.size() == 2);
    CHECK(kept.hits[0].entry_id == "d1");
    CHECK(kept.hits[1].entry_id == "d3");
    CHECK_FALSE(kept.reviewer_degraded);

    FakeReviewer down;
    down.decide = [](const std::vector<ReviewCandidate>&) -> std::vector<std::string> {
      fail(ErrorCode::ReviewerUnavailable, "offline");
    };
    const auto fallback = review_filter(kb, hits, EmbeddingField::TEXT, "query", {.max_keep = 2}, &down);
    CHECK(fallback.reviewer_degraded);
    REQUIRE(fallback.hits.size() == 2);
    CHECK(fallback.hits[0].entry_id == "d0");

    FakeReviewer broken;
    broken.decide = [](const std::vector<ReviewCandidate>&) -> std::vector<std::string> {
      fail(ErrorCode::InvalidArgument, "bug");
    };
    CHECK(test::code_of([&] { review_filter(kb, hits, EmbeddingField::TEXT, "q", {}, &broken); }) ==
          ErrorCode::InvalidArgument);

    const auto bundle = Retriever(kb).retrieve(Query{.text = "text"}, {.epsilon = 0.0}, &down);
    CHECK(bundle.reviewer_degraded);
  }

  TEST_CASE("stop exploration rounds") {
    std::mt19937_64 rng(31);
    KnowledgeBase kb;
    for (int i = 0; i < 30; ++i) kb.insert(doc_entry("e" + std::to_string(i), "t" + std::to_string(i), random_vec(rng, 8)));
    const Query q{.text_embedding = random_vec(rng, 8), .mode = QueryMode::DENSE_TEXT};

    const auto once = retrieve_with_stop_exploration(kb, q, {.epsilon = std::numeric_limits<double>::infinity()});
    CHECK(once.rounds_used == 1);
    CHECK(once.stopped_early);
    CHECK(once.documents.size() <= 2);

    const auto all = retrieve_with_stop_exploration(kb, q, {.rounds_max = 3, .epsilon = 0.0});
    CHECK(all.rounds_used == 3);
    CHECK_FALSE(all.stopped_early);
    std::set<std::string> ids;
    for (const auto& h : all.documents) CHECK(ids.insert(h.entry_id).second);
    CHECK(sorted_and_bounded(all.documents, 6));
    CHECK(all.images.empty());

    CHECK(test::code_of([&] { retrieve_with_stop_exploration(kb, q, {.rounds_max = 0}); }) ==
          ErrorCode::InvalidArgument);
    CHECK(test::code_of([&] { retrieve_with_stop_exploration(kb, q, {.k_per_round = 0}); }) ==
          ErrorCode::InvalidArgument);
  }

  TEST_CASE("one strong hit among noise stops at round two") {
    KnowledgeBase kb;
    kb.insert(doc_entry("strong", "s", along(0.9, 1)));
    const double noise[] = {0.03, 0.02, 0.015, 0.01, 0.005, 0.001};
    for (std::size_t i = 0; i < 6; ++i) kb.insert(doc_entry("noise" + std::to_string(i), "n", along(noise[i], 2 + i)));
    const Query q{.text_embedding = axis0(), .mode = QueryMode::DENSE_TEXT};

    // Round 1 admits strong + noise0 (gain 0.93); round 2 admits noise1 + noise2 (gain 0.035).
    const auto bundle = retrieve_with_stop_exploration(kb, q, {.rounds_max = 3, .epsilon = 0.1, .k_per_round = 2});
    CHECK(bundle.rounds_used == 2);
    CHECK(bundle.stopped_early);
    REQUIRE(bundle.documents.size() == 4);
    CHECK(bundle.documents[0].entry_id == "strong");
    CHECK(bundle.documents[0].score == doctest::Approx(0.9).epsilon(1e-6));
    CHECK(bundle.documents[3].entry_id == "noise2");
  }

  TEST_CASE("lowering epsilon never reduces rounds") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 30; ++trial) {
      KnowledgeBase kb;
      for (int i = 0; i < 12; ++i) kb.insert(doc_entry("e" + std::to_string(i), "t" + std::to_string(i), random_vec(rng, 6)));
      const Query q{.text_embedding = random_vec(rng, 6), .mode = QueryMode::DENSE_TEXT};
      int previous = std::numeric_limits<int>::max();
      for (const double eps : {-1.0, 0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 10.0}) {
        const auto b = retrieve_with_stop_exploration(kb, q, {.rounds_max = 4, .epsilon = eps});
        CHECK(b.rounds_used >= 1);
        CHECK(b.rounds_used <= 4);
        CHECK(b.rounds_used <= previous);
        previous = b.rounds_used;
      }
    }
  }

  TEST_CASE("cross-modal retrieval fills images") {
    KnowledgeBase kb;
    for (int i = 0; i < 3; ++i) {
      KnowledgeEntry e{"img" + std::to_string(i), Modality::IMAGE, std::string("c"), std::filesystem::path("x.png")};
      e.image_embedding = along(0.3 + 0.2 * i, 1 + i);
      kb.insert(e);
    }
    const auto b = Retriever(kb).retrieve(Query{.text_embedding = axis0(), .mode = QueryMode::CROSS_MODAL},
                                          {.rounds_max = 1, .k_per_round = 1});
    CHECK(b.documents.empty());
    REQUIRE(b.images.size() == 1);
    CHECK(b.images[0].entry_id == "img2");
  }
}
