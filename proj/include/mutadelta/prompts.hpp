#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mutadelta/errors.hpp"
#include "mutadelta/vocab.hpp"

namespace mutadelta::text {

// Rows spliced into the decoder input stream in place of word embeddings.
enum class LatentRole { kWildtype, kDelta, kSoft };

enum class TemplateId {
  kPretrainP2T,
  kPretrainT2P,
  kFunctionPrediction,
  kMutationExplanation,
  kMutationEngineering,
};

struct PromptSpan {
  bool is_latent = false;
  LatentRole role = LatentRole::kWildtype;
  std::vector<int32_t> tokens;
  bool supervised = false;
  int64_t begin = 0;
  int64_t length = 0;
};

// Fully resolved decoder input plan: ordered spans, shifted next-token
// targets (-1 where no loss applies), and the soft-summary span location.
struct PromptLayout {
  std::vector<PromptSpan> spans;
  int64_t length = 0;
  std::vector<int32_t> next_targets;
  int64_t supervised_count = 0;
  int64_t soft_begin = -1;
  int64_t soft_rows = 0;

  bool has_latent(LatentRole role) const;
  // Positions before the first supervised token; the generation prefix.
  int64_t prefix_length() const;
};

struct PromptInputs {
  std::vector<int32_t> text;          // pre-training free text
  std::vector<int32_t> function_text; // round-1 answer
  std::vector<int32_t> effect_text;   // round-2 explanation answer
  std::vector<int32_t> instruction;   // engineering request text
  int64_t k_latent = 0;               // rows per wild-type/delta feature span
  int64_t k_soft = 0;                 // rows of the soft summary span
};

// Lays out one decoder input.  Token spans hold vocabulary ids, feature
// spans are placeholders filled at embedding time.  Supervised spans get
// <eos> appended; every prompt token carries no loss.
PromptLayout assemble_prompt(TemplateId id, const PromptInputs& in, const Vocabulary& v);

// Every fixed instruction string, for vocabulary construction.
const std::vector<std::string>& template_strings();

}  // namespace mutadelta::text
