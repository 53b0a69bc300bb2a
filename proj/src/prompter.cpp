#include "ragsc/prompter.hpp"

#include "ragsc/error.hpp"

namespace ragsc {

PromptBundle enhance_prompt(std::string_view original, const RetrievalBundle& bundle, const KnowledgeBase& kb,
                            const PromptOptions& options, Rewriter* rewriter) {
  if (options.char_budget < original.size() + 16) {
    fail(ErrorCode::BudgetTooSmall, "budget " + std::to_string(options.char_budget) + " below " +
                                        std::to_string(original.size() + 16));
  }
  PromptBundle out;
  out.char_budget = options.char_budget;
  out.text_prompt = original;

  std::vector<ScoredHit> docs = bundle.documents;
  sort_hits(docs);
  std::vector<std::string> included_texts;
  for (const auto& hit : docs) {
    const KnowledgeEntry* entry = kb.get(hit.entry_id);
    if (!entry || !entry->text || entry->text->empty()) continue;
    const std::size_t prefix = included_texts.empty() ? kContextSeparator.size() : 0;
    const std::size_t needed = prefix + entry->text->size() + kDocumentTerminator.size();
    if (out.text_prompt.size() + needed > options.char_budget) {
      out.truncated = true;
      break;
    }
    if (included_texts.empty()) out.text_prompt += kContextSeparator;
    out.text_prompt += *entry->text;
    out.text_prompt += kDocumentTerminator;
    included_texts.push_back(*entry->text);
  }

  std::vector<ScoredHit> images = bundle.images;
  sort_hits(images);
  for (const auto& hit : images) {
    if (out.reference_image_ids.size() >= options.max_reference_images) break;
    out.reference_image_ids.push_back(hit.entry_id);
  }

  if (rewriter && !included_texts.empty()) {
    try {
      std::string text = rewriter->rewrite(out.text_prompt, included_texts, options.char_budget);
      if (!text.empty() && text.size() <= options.char_budget) {
        out.text_prompt = std::move(text);
        out.rewritten = true;
      }
    } catch (const Error&) {
    }
  }
  return out;
}

}  // namespace ragsc
