#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ragsc/knowledge.hpp"
#include "ragsc/retriever.hpp"

namespace ragsc {

struct PromptBundle {
  std::string text_prompt;
  std::vector<std::string> reference_image_ids;
  std::size_t char_budget = 0;
  bool truncated = false;
  bool rewritten = false;

  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

// Optional fluent rewrite of the templated prompt. Any thrown ragsc::Error
// leaves the template output in place.
class Rewriter {
 public:
  virtual ~Rewriter() = default;
  // `documents` are the texts already folded into `prompt`.
  virtual std::string rewrite(std::string_view prompt, const std::vector<std::string>& documents,
                              std::size_t char_budget) = 0;
};

inline constexpr std::string_view kContextSeparator = " Context: ";
inline constexpr std::string_view kDocumentTerminator = "; ";

struct PromptOptions {
  std::size_t char_budget = 512;  // bytes of UTF-8
  std::size_t max_reference_images = 1;
};

// original + " Context: " + doc1 + "; " + doc2 + "; " ... with documents in
// descending score order. The first document that would overflow the budget
// and everything after it are dropped. Throws BudgetTooSmall when the budget
// is below |original| + 16.
PromptBundle enhance_prompt(std::string_view original, const RetrievalBundle& bundle, const KnowledgeBase& kb,
                            const PromptOptions& options = {}, Rewriter* rewriter = nullptr);

}  // namespace ragsc
