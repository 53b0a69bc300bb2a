#include <doctest.h>

#include "ragsc/prompter.hpp"
#include "support.hpp"

using namespace ragsc;

namespace {

KnowledgeBase docs_kb(const std::vector<std::string>& texts) {
  KnowledgeBase kb;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    kb.insert({"d" + std::to_string(i), Modality::DOCUMENT, texts[i]});
  }
  return kb;
}

RetrievalBundle bundle_of(std::size_t n, double top = 1.0) {
  RetrievalBundle b;
  for (std::size_t i = 0; i < n; ++i) b.documents.push_back({"d" + std::to_string(i), top - 0.1 * i, ScoreKind::BM25});
  b.rounds_used = 1;
  return b;
}

class FakeRewriter final : public Rewriter {
 public:
  std::string reply;
  bool throws = false;
  std::string seen_prompt;
  std::vector<std::string> seen_docs;
  std::size_t seen_budget = 0;
  int calls = 0;

  std::string rewrite(std::string_view prompt, const std::vector<std::string>& documents,
                      std::size_t budget) override {
    ++calls;
    seen_prompt = prompt;
    seen_docs = documents;
    seen_budget = budget;
    if (throws) fail(ErrorCode::ServiceUnavailable, "down");
    return reply;
  }
};

}  // namespace

TEST_SUITE("prompter") {
  TEST_CASE("template examples") {
    const KnowledgeBase empty;
    const auto none = enhance_prompt("a lake", RetrievalBundle{}, empty, {.char_budget = 200});
    CHECK(none.text_prompt == "a lake");
    CHECK_FALSE(none.truncated);
    CHECK(none.reference_image_ids.empty());
    CHECK(none.char_budget == 200);

    const auto kb = docs_kb({"stone bridge with pedestrians"});
    const auto one = enhance_prompt("a lake", bundle_of(1), kb, {.char_budget = 200});
    CHECK(one.text_prompt == "a lake Context: stone bridge with pedestrians; ");
    CHECK_FALSE(one.truncated);
    CHECK_FALSE(one.rewritten);
  }

  TEST_CASE("five long documents in a 250 byte budget") {
    std::vector<std::string> texts;
    for (int i = 0; i < 5; ++i) texts.push_back(std::string(100, static_cast<char>('a' + i)));
    const auto kb = docs_kb(texts);
    const std::string original(20, 'o');
    const auto p = enhance_prompt(original, bundle_of(5), kb, {.char_budget = 250});
    // 20 + 10 + 2 * (100 + 2) = 234 <= 250 < 336.
    CHECK(p.text_prompt.size() == 234);
    CHECK(p.text_prompt == original + " Context: " + texts[0] + "; " + texts[1] + "; ");
    CHECK(p.truncated);
  }

  TEST_CASE("budget must cover the original plus overhead") {
    const KnowledgeBase kb;
    CHECK(test::code_of([&] { enhance_prompt(std::string(20, 'x'), {}, kb, {.char_budget = 35}); }) ==
          ErrorCode::BudgetTooSmall);
    CHECK_NOTHROW(enhance_prompt(std::string(20, 'x'), {}, kb, {.char_budget = 36}));
  }

  TEST_CASE("documents follow score order") {
    const auto kb = docs_kb({"low", "high", "mid"});
    RetrievalBundle b;
    b.documents = {{"d0", 0.1}, {"d1", 0.9}, {"d2", 0.5}};
    CHECK(enhance_prompt("q", b, kb, {.char_budget = 100}).text_prompt == "q Context: high; mid; low; ");
  }

  TEST_CASE("length oracle and suffix-only dropping") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 500; ++trial) {
      const std::size_t n = rng() % 8;
      std::vector<std::string> texts;
      for (std::size_t i = 0; i < n; ++i) texts.push_back(std::string(1 + rng() % 80, 'a' + static_cast<char>(i)));
      const auto kb = docs_kb(texts);
      const std::string original(rng() % 40, 'o');
      const std::size_t budget = original.size() + 16 + rng() % 300;
      const auto p = enhance_prompt(original, bundle_of(n), kb, {.char_budget = budget});

      std::string expect = original;
      std::size_t included = 0;
      for (const auto& t : texts) {
        const std::string piece = (included == 0 ? std::string(" Context: ") : std::string()) + t + "; ";
        if (expect.size() + piece.size() > budget) break;
        expect += piece;
        ++included;
      }
      CHECK(p.text_prompt == expect);
      CHECK(p.text_prompt.size() <= budget);
      CHECK(p.truncated == (included < n));
    }
  }

  TEST_CASE("reference images are capped") {
    const KnowledgeBase kb;
    RetrievalBundle b;
    b.images = {{"i2", 0.3}, {"i1", 0.8}, {"i3", 0.8}};
    CHECK(enhance_prompt("a", b, kb, {.char_budget = 64}).reference_image_ids == std::vector<std::string>{"i1"});
    CHECK(enhance_prompt("a", b, kb, {.char_budget = 64, .max_reference_images = 2}).reference_image_ids ==
          std::vector<std::string>{"i1", "i3"});
    CHECK(enhance_prompt("a", b, kb, {.char_budget = 64, .max_reference_images = 0}).reference_image_ids.empty());
  }

  TEST_CASE("rewriter") {
    const auto kb = docs_kb({"stone bridge"});
    FakeRewriter r;
    r.reply = "a calm lake under a stone bridge";
    const auto p = enhance_prompt("a lake", bundle_of(1), kb, {.char_budget = 100}, &r);
    CHECK(r.calls == 1);
    CHECK(r.seen_prompt == "a lake Context: stone bridge; ");
    CHECK(r.seen_docs == std::vector<std::string>{"stone bridge"});
    CHECK(r.seen_budget == 100);
    CHECK(p.text_prompt == r.reply);
    CHECK(p.rewritten);

    r.reply = std::string(101, 'x');
    const auto too_long = enhance_prompt("a lake", bundle_of(1), kb, {.char_budget = 100}, &r);
    CHECK(too_long.text_prompt == "a lake Context: stone bridge; ");
    CHECK_FALSE(too_long.rewritten);

    r.throws = true;
    const auto failed = enhance_prompt("a lake", bundle_of(1), kb, {.char_budget = 100}, &r);
    CHECK(failed.text_prompt == "a lake Context: stone bridge; ");
    CHECK_FALSE(failed.rewritten);

    FakeRewriter unused;
    CHECK(enhance_prompt("a lake", {}, kb, {.char_budget = 100}, &unused).text_prompt == "a lake");
    CHECK(unused.calls == 0);
  }
}
