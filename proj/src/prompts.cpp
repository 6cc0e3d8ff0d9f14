#include "mutadelta/prompts.hpp"

#include <algorithm>

namespace mutadelta::text {

namespace {

const std::string kSystemText = "protein assistant .";
const std::string kFunctionQuery = "describe the protein function .";
const std::string kEffectQuery = "describe the mutation effect .";
const std::string kEngineerQuery = "suggest a mutation :";

PromptSpan token_span(std::vector<int32_t> ids, bool supervised) {
  PromptSpan s;
  s.tokens = std::move(ids);
  s.supervised = supervised;
  return s;
}

PromptSpan special_span(int32_t id) { return token_span({id}, false); }

PromptSpan latent_span(LatentRole role, int64_t rows, const char* what) {
  if (rows < 1)
    throw template_error(std::string("assemble_prompt: ") + what + " requires at least one row");
  PromptSpan s;
  s.is_latent = true;
  s.role = role;
  s.length = rows;
  return s;
}

PromptSpan supervised_span(std::vector<int32_t> ids) {
  ids.push_back(kEos);
  return token_span(std::move(ids), true);
}

void append_wildtype_features(std::vector<PromptSpan>& spans, const PromptInputs& in) {
  spans.push_back(special_span(kBop));
  spans.push_back(latent_span(LatentRole::kWildtype, in.k_latent, "the wild-type feature span"));
  spans.push_back(special_span(kEop));
}

void append_soft_summary(std::vector<PromptSpan>& spans, const PromptInputs& in) {
  spans.push_back(special_span(kBom));
  spans.push_back(latent_span(LatentRole::kSoft, in.k_soft, "the soft summary span"));
  spans.push_back(special_span(kEom));
}

PromptLayout finalize(std::vector<PromptSpan> spans) {
  PromptLayout out;
  std::vector<int32_t> ids;
  std::vector<char> supervised;
  for (auto& s : spans) {
    s.begin = static_cast<int64_t>(ids.size());
    if (s.is_latent) {
      if (s.role == LatentRole::kSoft) {
        if (out.soft_begin >= 0)
          throw template_error("assemble_prompt: duplicate soft summary span");
        out.soft_begin = s.begin;
        out.soft_rows = s.length;
      }
      ids.insert(ids.end(), static_cast<size_t>(s.length), -1);
      supervised.insert(supervised.end(), static_cast<size_t>(s.length), 0);
    } else {
      s.length = static_cast<int64_t>(s.tokens.size());
      ids.insert(ids.end(), s.tokens.begin(), s.tokens.end());
      supervised.insert(supervised.end(), s.tokens.size(), s.supervised ? 1 : 0);
    }
  }
  out.length = static_cast<int64_t>(ids.size());
  if (out.length < 1) throw template_error("assemble_prompt: empty layout");
  out.next_targets.assign(static_cast<size_t>(out.length), -1);
  for (int64_t p = 0; p + 1 < out.length; ++p) {
    if (supervised[static_cast<size_t>(p + 1)]) {
      out.next_targets[static_cast<size_t>(p)] = ids[static_cast<size_t>(p + 1)];
      ++out.supervised_count;
    }
  }
  spans.erase(std::remove_if(spans.begin(), spans.end(),
                             [](const PromptSpan& s) { return s.length == 0; }),
              spans.end());
  out.spans = std::move(spans);
  return out;
}

}  // namespace

bool PromptLayout::has_latent(LatentRole role) const {
  for (const auto& s : spans)
    if (s.is_latent && s.role == role) return true;
  return false;
}

int64_t PromptLayout::prefix_length() const {
  for (const auto& s : spans)
    if (!s.is_latent && s.supervised) return s.begin;
  return length;
}

PromptLayout assemble_prompt(TemplateId id, const PromptInputs& in, const Vocabulary& v) {
  std::vector<PromptSpan> spans;
  switch (id) {
    case TemplateId::kPretrainP2T:
      append_wildtype_features(spans, in);
      spans.push_back(supervised_span(in.text));
      break;
    case TemplateId::kPretrainT2P:
      spans.push_back(token_span(in.text, false));
      append_soft_summary(spans, in);
      break;
    case TemplateId::kFunctionPrediction:
      spans.push_back(token_span(v.encode(kSystemText), false));
      append_wildtype_features(spans, in);
      spans.push_back(token_span(v.encode(kFunctionQuery), false));
      if (!in.function_text.empty()) spans.push_back(supervised_span(in.function_text));
      break;
    case TemplateId::kMutationExplanation:
      spans.push_back(token_span(v.encode(kSystemText), false));
      append_wildtype_features(spans, in);
      spans.push_back(token_span(v.encode(kFunctionQuery), false));
      spans.push_back(token_span(in.function_text, false));
      spans.push_back(token_span(v.encode(kEffectQuery), false));
      spans.push_back(special_span(kBom));
      spans.push_back(latent_span(LatentRole::kDelta, in.k_latent, "the delta feature span"));
      spans.push_back(special_span(kEom));
      if (!in.effect_text.empty()) spans.push_back(supervised_span(in.effect_text));
      break;
    case TemplateId::kMutationEngineering:
      spans.push_back(token_span(v.encode(kSystemText), false));
      append_wildtype_features(spans, in);
      spans.push_back(token_span(v.encode(kFunctionQuery), false));
      spans.push_back(token_span(in.function_text, false));
      spans.push_back(token_span(v.encode(kEngineerQuery), false));
      spans.push_back(token_span(in.instruction, false));
      append_soft_summary(spans, in);
      break;
    default:
      throw template_error("assemble_prompt: unknown template id");
  }
  return finalize(std::move(spans));
}

const std::vector<std::string>& template_strings() {
  static const std::vector<std::string> strings{kSystemText, kFunctionQuery, kEffectQuery,
                                                kEngineerQuery};
  return strings;
}

}  // namespace mutadelta::text
