#include "mutadelta/vocab.hpp"

#include <fstream>
#include <map>

#include "mutadelta/evalkit.hpp"

namespace mutadelta::text {

namespace {

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> names{"<bos>", "<eos>", "<pad>", "<bop>",
                                              "<eop>", "<bom>", "<eom>", "<unk>"};
  return names;
}

}  // namespace

Vocabulary::Vocabulary() {
  for (const auto& name : reserved_tokens()) add(name);
}

void Vocabulary::add(const std::string& token) {
  if (index_.count(token))
    throw consistency_error("vocabulary: duplicate token '" + token + "'");
  index_.emplace(token, static_cast<int32_t>(tokens_.size()));
  tokens_.push_back(token);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts, int64_t min_count) {
  if (min_count < 1) throw contract_error("vocabulary: min_count must be >= 1");
  Vocabulary v;
  std::map<std::string, int64_t> counts;
  std::vector<std::string> order;
  for (const auto& t : texts) {
    for (auto& tok : evalkit::tokenize(t)) {
      if (counts[tok]++ == 0) order.push_back(tok);
    }
  }
  for (const auto& tok : order)
    if (counts[tok] >= min_count) v.add(tok);
  return v;
}

int32_t Vocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int32_t id) const {
  if (id < 0 || id >= size())
    throw index_error("vocabulary: id " + std::to_string(id) + " outside " +
                      std::to_string(size()) + " tokens");
  return tokens_[static_cast<size_t>(id)];
}

std::vector<int32_t> Vocabulary::encode(const std::string& sentence) const {
  std::vector<int32_t> ids;
  for (const auto& tok : evalkit::tokenize(sentence)) ids.push_back(id_of(tok));
  return ids;
}

std::string Vocabulary::decode(const std::vector<int32_t>& ids) const {
  std::string out;
  for (int32_t id : ids) {
    if (id < kNumReserved) {
      token_of(id);
      continue;
    }
    if (!out.empty()) out += ' ';
    out += token_of(id);
  }
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw config_error("vocabulary: cannot write " + path);
  for (const auto& tok : tokens_) os << tok << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw config_error("vocabulary: cannot read " + path);
  Vocabulary v;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    if (line_no < kNumReserved) {
      if (line != reserved_tokens()[static_cast<size_t>(line_no)])
        throw format_error("vocabulary: line " + std::to_string(line_no) +
                           " must be the reserved token '" +
                           reserved_tokens()[static_cast<size_t>(line_no)] + "', got '" + line +
                           "'");
    } else {
      if (line.empty()) throw format_error("vocabulary: empty token line");
      v.add(line);
    }
    ++line_no;
  }
  if (line_no < kNumReserved) throw format_error("vocabulary: missing reserved tokens");
  return v;
}

}  // namespace mutadelta::text
