#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mutadelta/errors.hpp"

namespace mutadelta::mutadata {

// Canonical residue alphabet in index order.
inline constexpr char kAlphabet[] = "ACDEFGHIKLMNPQRSTVWY";
inline constexpr int kAlphabetSize = 20;

bool is_residue(char c);
int residue_index(char c);
void validate_sequence(const std::string& seq);

// Hydrophobicity buckets used by the synthetic-corpus rules: 2 hydrophobic,
// 1 neutral, 0 polar/charged.
int hydrophobicity_rank(char residue);

// Full residue names, one word each, indexed like kAlphabet.
const std::string& residue_name(char residue);

struct Mutation {
  int position = 0;  // 1-based
  char from = 0;
  char to = 0;

  bool operator==(const Mutation& o) const {
    return position == o.position && from == o.from && to == o.to;
  }
};

// Parses codes like "A205D": from-residue, 1-based position, to-residue.
Mutation parse_mutation(const std::string& code);
std::string format_mutation(const Mutation& m);

std::string apply_mutation(const std::string& wt, const Mutation& m);

int hamming(const std::string& a, const std::string& b);

// Global alignment identity: Needleman-Wunsch with match +1, mismatch 0,
// gap -1; among score-optimal alignments the one with the most matches is
// used, and identity = matches / alignment_columns.
double sequence_identity(const std::string& a, const std::string& b);

enum class Polarity { kMalignant, kBenign, kNotSignificant, kUnknown };

std::string polarity_to_string(Polarity p);
Polarity polarity_from_string(const std::string& s);

struct MutationRecord {
  std::string id;
  std::string wt;
  Mutation mutation;
  std::string function_text;
  std::string effect_text;
  Polarity polarity = Polarity::kUnknown;
  std::string date;  // ISO yyyy-mm-dd, empty when unknown
  nlohmann::json extra = nlohmann::json::object();
};

struct PretrainPair {
  std::string id;
  std::string protein;
  std::string text;
};

MutationRecord record_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const MutationRecord& r);

std::vector<MutationRecord> load_records(const std::string& path);
void save_records(const std::string& path, const std::vector<MutationRecord>& records);

std::vector<PretrainPair> load_pairs(const std::string& path);
void save_pairs(const std::string& path, const std::vector<PretrainPair>& pairs);

// Antonym lexicon: symmetric word-level substitutions applied to effect
// texts when a sample is reversed.
class Lexicon {
 public:
  static Lexicon load(const std::string& path);
  static Lexicon builtin();

  void add_pair(const std::string& a, const std::string& b);
  // Swaps every lexicon word in the text (case of the first letter is
  // preserved); returns nullopt when nothing matched.
  std::optional<std::string> flip(const std::string& text) const;
  size_t size() const { return map_.size(); }

 private:
  std::unordered_map<std::string, std::string> map_;
};

// Inverts the mutation, flips the effect wording through the lexicon and
// flips the polarity.  Returns nullopt for records that are not clearly
// directional (polarity not malignant/benign) or whose text has no lexicon
// term.
std::optional<MutationRecord> reverse_sample(const MutationRecord& r, const Lexicon& lexicon);

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

// Subset labels: "train", "valid", "test_easy", "test_medium", "test_hard",
// "test_temporal".
struct SplitAssignment {
  std::map<std::string, std::string> subset_of;  // record id -> subset

  nlohmann::json to_json() const;
  static SplitAssignment from_json(const nlohmann::json& j);
  static SplitAssignment load(const std::string& path);
  void save(const std::string& path) const;
};

// Protein-level random partition; test records are stratified by their
// maximum identity against any train wild type: easy [0.95, 1], medium
// [0.5, 0.95), hard [0, 0.5).
SplitAssignment split_by_homology(const std::vector<MutationRecord>& records, uint64_t seed,
                                  const SplitFractions& fractions);

// Records dated before cutoff_year go to train/valid (valid sampled per
// record); records from cutoff_year on go to test_temporal; dateless records
// always train.
SplitAssignment split_temporal(const std::vector<MutationRecord>& records, int cutoff_year,
                               double valid_fraction, uint64_t seed);

struct SyntheticCorpus {
  std::vector<MutationRecord> records;
  std::vector<PretrainPair> pairs;
};

// Seeded toy corpus whose texts deterministically encode the protein family
// (function sentence) and the mutation (residue names plus a polarity verb
// derived from hydrophobicity ranks), so toy models can learn the mapping.
SyntheticCorpus generate_synthetic_corpus(uint64_t seed, int n_proteins, int muts_per_protein,
                                          int min_len = 8, int max_len = 64);

// The polarity verb the generator uses for a from->to substitution; exposed
// so tests can re-derive texts from the rule.
std::string effect_verb(char from, char to);
Polarity effect_polarity(char from, char to);

struct DatasetStats {
  int64_t n_records = 0;
  int64_t n_proteins = 0;
  double mean_seq_len = 0;
  double mean_effect_tokens = 0;
  std::map<std::string, int64_t> polarity_counts;

  nlohmann::json to_json() const;
};

DatasetStats dataset_stats(const std::vector<MutationRecord>& records);

}  // namespace mutadelta::mutadata
