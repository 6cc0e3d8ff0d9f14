#include "mutadelta/evalkit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace mutadelta::evalkit {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (std::isalnum(c)) {
      size_t j = i;
      std::string tok;
      while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) {
        tok.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[j]))));
        ++j;
      }
      out.push_back(std::move(tok));
      i = j;
    } else {
      out.push_back(std::string(1, text[i]));
      ++i;
    }
  }
  return out;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, int64_t>;

NgramCounts ngram_counts(const std::vector<std::string>& toks, int n) {
  NgramCounts counts;
  if (static_cast<int>(toks.size()) < n) return counts;
  for (size_t i = 0; i + static_cast<size_t>(n) <= toks.size(); ++i)
    counts[std::vector<std::string>(toks.begin() + static_cast<long>(i),
                                    toks.begin() + static_cast<long>(i) + n)] += 1;
  return counts;
}

struct BleuTally {
  std::vector<int64_t> matched;  // per order 1..n
  std::vector<int64_t> total;
  int64_t cand_len = 0;
  int64_t ref_len = 0;
};

void tally_pair(const std::vector<std::string>& cand, const std::vector<std::string>& ref, int n,
                BleuTally& t) {
  t.cand_len += static_cast<int64_t>(cand.size());
  t.ref_len += static_cast<int64_t>(ref.size());
  for (int k = 1; k <= n; ++k) {
    const NgramCounts cc = ngram_counts(cand, k);
    const NgramCounts rc = ngram_counts(ref, k);
    for (const auto& [gram, count] : cc) {
      auto it = rc.find(gram);
      if (it != rc.end())
        t.matched[static_cast<size_t>(k - 1)] += std::min(count, it->second);
      t.total[static_cast<size_t>(k - 1)] += count;
    }
  }
}

double bleu_from_tally(const BleuTally& t, int n, bool smoothing) {
  if (t.cand_len == 0) return 0.0;
  double log_p_sum = 0;
  for (int k = 1; k <= n; ++k) {
    const double add = smoothing ? 1.0 : 0.0;
    const double num = static_cast<double>(t.matched[static_cast<size_t>(k - 1)]) + add;
    const double den = static_cast<double>(t.total[static_cast<size_t>(k - 1)]) + add;
    if (num <= 0.0 || den <= 0.0) return 0.0;
    log_p_sum += std::log(num / den);
  }
  const double bp = t.cand_len < t.ref_len
                        ? std::exp(1.0 - static_cast<double>(t.ref_len) /
                                             static_cast<double>(t.cand_len))
                        : 1.0;
  return 100.0 * bp * std::exp(log_p_sum / n);
}

}  // namespace

double bleu_n(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
              int n, bool smoothing) {
  if (n < 1) throw contract_error("bleu_n: order must be >= 1");
  BleuTally t;
  t.matched.assign(static_cast<size_t>(n), 0);
  t.total.assign(static_cast<size_t>(n), 0);
  tally_pair(candidate, reference, n, t);
  return bleu_from_tally(t, n, smoothing);
}

double corpus_bleu_n(const std::vector<std::vector<std::string>>& candidates,
                     const std::vector<std::vector<std::string>>& references, int n,
                     bool smoothing) {
  if (n < 1) throw contract_error("corpus_bleu_n: order must be >= 1");
  if (candidates.size() != references.size())
    throw contract_error("corpus_bleu_n: candidate/reference count mismatch");
  BleuTally t;
  t.matched.assign(static_cast<size_t>(n), 0);
  t.total.assign(static_cast<size_t>(n), 0);
  for (size_t i = 0; i < candidates.size(); ++i) tally_pair(candidates[i], references[i], n, t);
  return bleu_from_tally(t, n, smoothing);
}

namespace {

PrfScore prf_from_counts(double matches, double cand_total, double ref_total) {
  PrfScore s;
  if (cand_total > 0) s.precision = 100.0 * matches / cand_total;
  if (ref_total > 0) s.recall = 100.0 * matches / ref_total;
  if (s.precision + s.recall > 0)
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

}  // namespace

PrfScore rouge_n(const std::vector<std::string>& candidate,
                 const std::vector<std::string>& reference, int n) {
  if (n < 1) throw contract_error("rouge_n: order must be >= 1");
  const NgramCounts cc = ngram_counts(candidate, n);
  const NgramCounts rc = ngram_counts(reference, n);
  int64_t matches = 0, cand_total = 0, ref_total = 0;
  for (const auto& [gram, count] : cc) {
    cand_total += count;
    auto it = rc.find(gram);
    if (it != rc.end()) matches += std::min(count, it->second);
  }
  for (const auto& [gram, count] : rc) ref_total += count;
  return prf_from_counts(static_cast<double>(matches), static_cast<double>(cand_total),
                         static_cast<double>(ref_total));
}

PrfScore rouge_l(const std::vector<std::string>& candidate,
                 const std::vector<std::string>& reference) {
  const size_t n = candidate.size(), m = reference.size();
  std::vector<int64_t> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      if (candidate[i - 1] == reference[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[m]);
  return prf_from_counts(lcs, static_cast<double>(n), static_cast<double>(m));
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  for (const auto& [name, sub] : subsets) {
    j["subsets"][name]["count"] = sub.count;
    j["subsets"][name]["metrics"] = sub.metrics;
  }
  j["overall"]["count"] = overall.count;
  j["overall"]["metrics"] = overall.metrics;
  return j;
}

namespace {

std::vector<std::string> ordered_subset_names(const MetricReport& r) {
  std::vector<std::string> names;
  for (const char* pref : {"test_easy", "test_medium", "test_hard"})
    if (r.subsets.count(pref)) names.push_back(pref);
  for (const auto& [name, sub] : r.subsets)
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
  return names;
}

}  // namespace

std::string MetricReport::format_table() const {
  const std::vector<std::string> names = ordered_subset_names(*this);
  std::vector<std::string> metric_names;
  for (const auto& [k, v] : overall.metrics) metric_names.push_back(k);

  const int label_w = 28, col_w = 13;
  std::ostringstream os;
  auto cell = [&](const std::string& s, int w) {
    std::string out = s;
    if (static_cast<int>(out.size()) < w) out += std::string(static_cast<size_t>(w) - out.size(), ' ');
    return out;
  };
  os << cell("metric (mean per sample)", label_w);
  for (const auto& n : names) os << cell(n, col_w);
  os << cell("average", col_w) << "\n";
  os << cell("samples", label_w);
  for (const auto& n : names) os << cell(std::to_string(subsets.at(n).count), col_w);
  os << cell(std::to_string(overall.count), col_w) << "\n";
  for (const auto& m : metric_names) {
    os << cell(m, label_w);
    for (const auto& n : names) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.2f", subsets.at(n).metrics.at(m));
      os << cell(buf, col_w);
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", overall.metrics.at(m));
    os << cell(buf, col_w) << "\n";
  }
  return os.str();
}

namespace {

class ReportBuilder {
 public:
  void add(const std::string& subset, const std::map<std::string, double>& values) {
    accumulate(sums_[subset], counts_[subset], values);
    accumulate(overall_sum_, overall_count_, values);
  }

  MetricReport finalize() const {
    MetricReport r;
    for (const auto& [name, sums] : sums_) {
      MetricReport::Subset s;
      s.count = counts_.at(name);
      for (const auto& [k, v] : sums) s.metrics[k] = v / static_cast<double>(s.count);
      r.subsets[name] = std::move(s);
    }
    r.overall.count = overall_count_;
    for (const auto& [k, v] : overall_sum_)
      r.overall.metrics[k] = v / static_cast<double>(overall_count_);
    return r;
  }

 private:
  static void accumulate(std::map<std::string, double>& sums, int64_t& count,
                         const std::map<std::string, double>& values) {
    for (const auto& [k, v] : values) sums[k] += v;
    count += 1;
  }

  std::map<std::string, std::map<std::string, double>> sums_;
  std::map<std::string, int64_t> counts_;
  std::map<std::string, double> overall_sum_;
  int64_t overall_count_ = 0;
};

}  // namespace

MetricReport evaluate_explanations(const std::vector<ExplanationItem>& items) {
  if (items.empty()) throw contract_error("evaluate_explanations: no items");
  ReportBuilder b;
  for (const auto& it : items) {
    const auto cand = tokenize(it.candidate_text);
    const auto ref = tokenize(it.reference_text);
    b.add(it.subset, {{"bleu2", bleu_n(cand, ref, 2)},
                      {"bleu4", bleu_n(cand, ref, 4)},
                      {"rouge1_f", rouge_n(cand, ref, 1).f1},
                      {"rouge2_f", rouge_n(cand, ref, 2).f1},
                      {"rougeL_f", rouge_l(cand, ref).f1}});
  }
  return b.finalize();
}

MetricReport evaluate_engineering(const std::vector<EngineeringItem>& items, int64_t k) {
  if (items.empty()) throw contract_error("evaluate_engineering: no items");
  if (k < 1) throw contract_error("evaluate_engineering: k must be >= 1");
  ReportBuilder b;
  for (const auto& it : items) {
    if (it.rank_of_truth < 1 || it.rank_of_truth > it.n_candidates)
      throw contract_error("evaluate_engineering: rank outside candidate count");
    b.add(it.subset, {{"accuracy", it.rank_of_truth == 1 ? 100.0 : 0.0},
                      {"recall_at_" + std::to_string(k), it.rank_of_truth <= k ? 100.0 : 0.0}});
  }
  return b.finalize();
}

ConfusionSummary confusion_summary(
    const std::vector<std::pair<std::string, std::string>>& true_pred_pairs) {
  if (true_pred_pairs.empty()) throw contract_error("confusion_summary: no pairs");
  ConfusionSummary s;
  int64_t hits = 0;
  for (const auto& [t, p] : true_pred_pairs) {
    s.counts[t][p] += 1;
    if (t == p) ++hits;
  }
  s.accuracy = 100.0 * static_cast<double>(hits) / static_cast<double>(true_pred_pairs.size());
  return s;
}

}  // namespace mutadelta::evalkit
