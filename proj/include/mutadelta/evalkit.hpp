#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mutadelta/errors.hpp"

namespace mutadelta::evalkit {

// Lowercases and splits into alphanumeric runs plus single punctuation
// tokens; the same tokenizer feeds vocabulary building and text metrics.
std::vector<std::string> tokenize(const std::string& text);

struct PrfScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Sentence BLEU-n on token sequences, scaled to [0, 100]: geometric mean of
// clipped 1..n-gram precisions times the brevity penalty.  Zero when the
// candidate is empty or any order has zero matches (unless add-one smoothing
// is enabled).
double bleu_n(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
              int n, bool smoothing = false);

// Corpus-level variant: pools n-gram and length counts over all pairs first.
double corpus_bleu_n(const std::vector<std::vector<std::string>>& candidates,
                     const std::vector<std::vector<std::string>>& references, int n,
                     bool smoothing = false);

// ROUGE-n with clipped n-gram overlap counts; scores in [0, 100].
PrfScore rouge_n(const std::vector<std::string>& candidate,
                 const std::vector<std::string>& reference, int n);

// ROUGE-L from the longest common subsequence; scores in [0, 100].
PrfScore rouge_l(const std::vector<std::string>& candidate,
                 const std::vector<std::string>& reference);

struct MetricReport {
  struct Subset {
    int64_t count = 0;
    std::map<std::string, double> metrics;
  };
  std::map<std::string, Subset> subsets;
  Subset overall;

  nlohmann::json to_json() const;
  // Aligned text table: metric rows, subset columns, sample-weighted average
  // last.  Sentence-level metrics are labeled as means over samples.
  std::string format_table() const;
};

struct ExplanationItem {
  std::string subset;
  std::string candidate_text;
  std::string reference_text;
};

// Mean sentence-level BLEU-2/BLEU-4 and ROUGE-1/2/L F1 per subset.
MetricReport evaluate_explanations(const std::vector<ExplanationItem>& items);

struct EngineeringItem {
  std::string subset;
  int64_t rank_of_truth = 0;  // 1-based rank among all candidate mutations
  int64_t n_candidates = 0;
};

// Top-1 accuracy and recall@k of the true mutation's rank per subset.
MetricReport evaluate_engineering(const std::vector<EngineeringItem>& items, int64_t k = 50);

// Accuracy plus per-(true, predicted) counts for external category labels.
struct ConfusionSummary {
  double accuracy = 0;
  std::map<std::string, std::map<std::string, int64_t>> counts;
};
ConfusionSummary confusion_summary(
    const std::vector<std::pair<std::string, std::string>>& true_pred_pairs);

}  // namespace mutadelta::evalkit
