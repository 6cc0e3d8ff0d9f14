#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mutadelta/errors.hpp"

namespace mutadelta::text {

// Fixed special-token indices; regular words start after <unk>.
inline constexpr int32_t kBos = 0;
inline constexpr int32_t kEos = 1;
inline constexpr int32_t kPad = 2;
inline constexpr int32_t kBop = 3;
inline constexpr int32_t kEop = 4;
inline constexpr int32_t kBom = 5;
inline constexpr int32_t kEom = 6;
inline constexpr int32_t kUnk = 7;
inline constexpr int32_t kNumReserved = 8;

// Closed word-level vocabulary.  The tokenizer only emits lowercase
// alphanumeric runs and punctuation singles, so the bracketed special
// names can never collide with corpus words.
class Vocabulary {
 public:
  Vocabulary();

  // Tokenizes every text, keeps words seen at least min_count times, in
  // first-appearance order after the reserved entries.
  static Vocabulary build(const std::vector<std::string>& texts, int64_t min_count = 1);

  int64_t size() const { return static_cast<int64_t>(tokens_.size()); }
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  int32_t id_of(const std::string& token) const;  // <unk> id when absent
  const std::string& token_of(int32_t id) const;

  std::vector<int32_t> encode(const std::string& sentence) const;
  // Joins word tokens with spaces; reserved ids are skipped.
  std::string decode(const std::vector<int32_t>& ids) const;

  // One token per line, index = line number; reserved entries lead.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int32_t> index_;
};

}  // namespace mutadelta::text
