#include "mutadelta/mutadata.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mutadelta/rng.hpp"

namespace mutadelta::mutadata {

using numkit::Rng;

bool is_residue(char c) {
  for (char a : kAlphabet)
    if (a == c && a != 0) return true;
  return false;
}

int residue_index(char c) {
  for (int i = 0; i < kAlphabetSize; ++i)
    if (kAlphabet[i] == c) return i;
  throw alphabet_error(std::string("not a canonical residue: '") + c + "'");
}

void validate_sequence(const std::string& seq) {
  if (seq.empty()) throw alphabet_error("empty protein sequence");
  for (char c : seq)
    if (!is_residue(c))
      throw alphabet_error(std::string("invalid residue '") + c + "' in sequence");
}

int hydrophobicity_rank(char residue) {
  switch (residue) {
    case 'A': case 'C': case 'F': case 'I': case 'L': case 'M': case 'V': case 'W':
      return 2;
    case 'G': case 'H': case 'P': case 'S': case 'T': case 'Y':
      return 1;
    case 'D': case 'E': case 'K': case 'N': case 'Q': case 'R':
      return 0;
    default:
      throw alphabet_error(std::string("not a canonical residue: '") + residue + "'");
  }
}

const std::string& residue_name(char residue) {
  static const std::array<std::string, 20> names = {
      "alanine",    "cysteine",   "aspartate", "glutamate",  "phenylalanine",
      "glycine",    "histidine",  "isoleucine", "lysine",    "leucine",
      "methionine", "asparagine", "proline",   "glutamine",  "arginine",
      "serine",     "threonine",  "valine",    "tryptophan", "tyrosine"};
  return names[static_cast<size_t>(residue_index(residue))];
}

Mutation parse_mutation(const std::string& code) {
  if (code.size() < 3)
    throw parse_error("mutation code too short: '" + code + "'");
  const char from = code.front();
  const char to = code.back();
  const std::string digits = code.substr(1, code.size() - 2);
  if (!std::isupper(static_cast<unsigned char>(from)) ||
      !std::isupper(static_cast<unsigned char>(to)))
    throw parse_error("mutation code must be LETTER digits LETTER: '" + code + "'");
  if (!is_residue(from))
    throw alphabet_error(std::string("unknown wild-type residue '") + from + "' in '" + code + "'");
  if (!is_residue(to))
    throw alphabet_error(std::string("unknown target residue '") + to + "' in '" + code + "'");
  for (char c : digits)
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw parse_error("mutation position must be numeric: '" + code + "'");
  long pos = 0;
  try {
    pos = std::stol(digits);
  } catch (const std::exception&) {
    throw parse_error("mutation position out of range: '" + code + "'");
  }
  if (pos < 1) throw parse_error("mutation position must be >= 1: '" + code + "'");
  if (from == to) throw parse_error("mutation must change the residue: '" + code + "'");
  return Mutation{static_cast<int>(pos), from, to};
}

std::string format_mutation(const Mutation& m) {
  return std::string(1, m.from) + std::to_string(m.position) + std::string(1, m.to);
}

std::string apply_mutation(const std::string& wt, const Mutation& m) {
  validate_sequence(wt);
  if (m.position < 1 || static_cast<size_t>(m.position) > wt.size())
    throw index_error("mutation position " + std::to_string(m.position) +
                      " outside sequence of length " + std::to_string(wt.size()));
  if (wt[static_cast<size_t>(m.position - 1)] != m.from)
    throw consistency_error("wild type has '" +
                            std::string(1, wt[static_cast<size_t>(m.position - 1)]) +
                            "' at position " + std::to_string(m.position) + ", mutation says '" +
                            std::string(1, m.from) + "'");
  if (!is_residue(m.to)) throw alphabet_error("mutation target is not a residue");
  std::string mt = wt;
  mt[static_cast<size_t>(m.position - 1)] = m.to;
  return mt;
}

int hamming(const std::string& a, const std::string& b) {
  if (a.size() != b.size())
    throw contract_error("hamming: lengths differ (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  int d = 0;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) ++d;
  return d;
}

double sequence_identity(const std::string& a, const std::string& b) {
  validate_sequence(a);
  validate_sequence(b);
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  // dp over (score, matches), lexicographic max.
  struct Cell {
    int score;
    int matches;
  };
  auto better = [](Cell x, Cell y) {
    if (x.score != y.score) return x.score > y.score;
    return x.matches > y.matches;
  };
  std::vector<Cell> prev(static_cast<size_t>(m + 1)), cur(static_cast<size_t>(m + 1));
  for (int j = 0; j <= m; ++j) prev[static_cast<size_t>(j)] = {-j, 0};
  for (int i = 1; i <= n; ++i) {
    cur[0] = {-i, 0};
    for (int j = 1; j <= m; ++j) {
      const bool match = a[static_cast<size_t>(i - 1)] == b[static_cast<size_t>(j - 1)];
      Cell best = {prev[static_cast<size_t>(j - 1)].score + (match ? 1 : 0),
                   prev[static_cast<size_t>(j - 1)].matches + (match ? 1 : 0)};
      Cell up = {prev[static_cast<size_t>(j)].score - 1, prev[static_cast<size_t>(j)].matches};
      Cell left = {cur[static_cast<size_t>(j - 1)].score - 1, cur[static_cast<size_t>(j - 1)].matches};
      if (better(up, best)) best = up;
      if (better(left, best)) best = left;
      cur[static_cast<size_t>(j)] = best;
    }
    std::swap(prev, cur);
  }
  const Cell fin = prev[static_cast<size_t>(m)];
  // columns = (n + m + matches - score) / 2; see the alignment accounting:
  // score = matches - gaps and n + m = 2*(matches + mismatches) + gaps.
  const double columns = (n + m + fin.matches - fin.score) / 2.0;
  if (columns <= 0) throw numeric_error("sequence_identity: degenerate alignment");
  return static_cast<double>(fin.matches) / columns;
}

std::string polarity_to_string(Polarity p) {
  switch (p) {
    case Polarity::kMalignant: return "malignant";
    case Polarity::kBenign: return "benign";
    case Polarity::kNotSignificant: return "not_significant";
    case Polarity::kUnknown: return "unknown";
  }
  throw contract_error("bad polarity enum");
}

Polarity polarity_from_string(const std::string& s) {
  if (s == "malignant") return Polarity::kMalignant;
  if (s == "benign") return Polarity::kBenign;
  if (s == "not_significant") return Polarity::kNotSignificant;
  if (s == "unknown") return Polarity::kUnknown;
  throw parse_error("unknown polarity: '" + s + "'");
}

MutationRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw parse_error("record must be a JSON object");
  MutationRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.wt = j.at("wt").get<std::string>();
    r.mutation = parse_mutation(j.at("mutation").get<std::string>());
    r.function_text = j.at("function").get<std::string>();
    r.effect_text = j.at("effect").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("record missing required field: ") + e.what());
  }
  if (j.contains("polarity")) r.polarity = polarity_from_string(j.at("polarity").get<std::string>());
  if (j.contains("date") && !j.at("date").is_null()) r.date = j.at("date").get<std::string>();
  validate_sequence(r.wt);
  if (r.effect_text.empty()) throw consistency_error("record " + r.id + ": empty effect text");
  if (static_cast<size_t>(r.mutation.position) > r.wt.size())
    throw consistency_error("record " + r.id + ": mutation position outside sequence");
  if (r.wt[static_cast<size_t>(r.mutation.position - 1)] != r.mutation.from)
    throw consistency_error("record " + r.id + ": wild type disagrees with mutation code");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k != "id" && k != "wt" && k != "mutation" && k != "function" && k != "effect" &&
        k != "polarity" && k != "date")
      r.extra[k] = it.value();
  }
  return r;
}

nlohmann::json record_to_json(const MutationRecord& r) {
  nlohmann::json j = r.extra;
  j["id"] = r.id;
  j["wt"] = r.wt;
  j["mutation"] = format_mutation(r.mutation);
  j["function"] = r.function_text;
  j["effect"] = r.effect_text;
  j["polarity"] = polarity_to_string(r.polarity);
  if (!r.date.empty()) j["date"] = r.date;
  return j;
}

std::vector<MutationRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open dataset: " + path);
  std::vector<MutationRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw parse_error(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
  }
  return out;
}

void save_records(const std::string& path, const std::vector<MutationRecord>& records) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write dataset: " + path);
  for (const auto& r : records) out << record_to_json(r).dump() << "\n";
}

std::vector<PretrainPair> load_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open pretrain pairs: " + path);
  std::vector<PretrainPair> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      PretrainPair p;
      p.id = j.at("id").get<std::string>();
      p.protein = j.at("protein").get<std::string>();
      p.text = j.at("text").get<std::string>();
      validate_sequence(p.protein);
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw parse_error(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
  }
  return out;
}

void save_pairs(const std::string& path, const std::vector<PretrainPair>& pairs) {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write pretrain pairs: " + path);
  for (const auto& p : pairs) {
    nlohmann::json j{{"id", p.id}, {"protein", p.protein}, {"text", p.text}};
    out << j.dump() << "\n";
  }
}

namespace {

std::string lowercase(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

Lexicon Lexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open lexicon: " + path);
  Lexicon lx;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string a, b, rest;
    if (!(ss >> a >> b) || (ss >> rest))
      throw parse_error(path + ":" + std::to_string(lineno) + ": expected two words per line");
    lx.add_pair(a, b);
  }
  if (lx.size() == 0) throw parse_error(path + ": empty lexicon");
  return lx;
}

Lexicon Lexicon::builtin() {
  Lexicon lx;
  lx.add_pair("increased", "decreased");
  lx.add_pair("increases", "decreases");
  lx.add_pair("increase", "decrease");
  lx.add_pair("enhanced", "reduced");
  lx.add_pair("enhances", "reduces");
  lx.add_pair("improved", "impaired");
  lx.add_pair("improves", "impairs");
  lx.add_pair("gain", "loss");
  lx.add_pair("higher", "lower");
  lx.add_pair("stabilizes", "destabilizes");
  lx.add_pair("stabilized", "destabilized");
  lx.add_pair("strengthens", "weakens");
  lx.add_pair("activates", "inhibits");
  lx.add_pair("activated", "inhibited");
  lx.add_pair("promotes", "suppresses");
  lx.add_pair("abolishes", "restores");
  return lx;
}

void Lexicon::add_pair(const std::string& a, const std::string& b) {
  const std::string la = lowercase(a), lb = lowercase(b);
  if (la == lb) throw contract_error("lexicon pair maps a word to itself: " + a);
  map_[la] = lb;
  map_[lb] = la;
}

std::optional<std::string> Lexicon::flip(const std::string& text) const {
  std::string out;
  out.reserve(text.size());
  bool any = false;
  size_t i = 0;
  while (i < text.size()) {
    if (!std::isalpha(static_cast<unsigned char>(text[i]))) {
      out.push_back(text[i]);
      ++i;
      continue;
    }
    size_t j = i;
    while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
    const std::string word = text.substr(i, j - i);
    auto it = map_.find(lowercase(word));
    if (it == map_.end()) {
      out += word;
    } else {
      std::string repl = it->second;
      if (std::isupper(static_cast<unsigned char>(word[0])))
        repl[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(repl[0])));
      out += repl;
      any = true;
    }
    i = j;
  }
  if (!any) return std::nullopt;
  return out;
}

std::optional<MutationRecord> reverse_sample(const MutationRecord& r, const Lexicon& lexicon) {
  if (r.polarity != Polarity::kMalignant && r.polarity != Polarity::kBenign) return std::nullopt;
  auto flipped = lexicon.flip(r.effect_text);
  if (!flipped) return std::nullopt;
  MutationRecord rev = r;
  rev.id = r.id + "_rev";
  rev.wt = apply_mutation(r.wt, r.mutation);
  rev.mutation = Mutation{r.mutation.position, r.mutation.to, r.mutation.from};
  rev.effect_text = *flipped;
  rev.polarity = r.polarity == Polarity::kMalignant ? Polarity::kBenign : Polarity::kMalignant;
  return rev;
}

nlohmann::json SplitAssignment::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [id, subset] : subset_of) j[id] = subset;
  return j;
}

SplitAssignment SplitAssignment::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw parse_error("split file must be a JSON object");
  SplitAssignment a;
  for (auto it = j.begin(); it != j.end(); ++it)
    a.subset_of[it.key()] = it.value().get<std::string>();
  return a;
}

SplitAssignment SplitAssignment::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open split file: " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

void SplitAssignment::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write split file: " + path);
  out << to_json().dump(2) << "\n";
}

SplitAssignment split_by_homology(const std::vector<MutationRecord>& records, uint64_t seed,
                                  const SplitFractions& fractions) {
  if (records.empty()) throw contract_error("split_by_homology: empty dataset");
  if (fractions.train < 0 || fractions.valid < 0 || fractions.test < 0 ||
      std::abs(fractions.train + fractions.valid + fractions.test - 1.0) > 1e-9)
    throw contract_error("split fractions must be non-negative and sum to 1");

  std::vector<std::string> proteins;
  std::map<std::string, std::vector<size_t>> by_protein;
  for (size_t i = 0; i < records.size(); ++i) {
    auto [it, inserted] = by_protein.try_emplace(records[i].wt);
    if (inserted) proteins.push_back(records[i].wt);
    it->second.push_back(i);
  }
  std::sort(proteins.begin(), proteins.end());
  Rng rng = Rng::seeded(seed).split("homology_split");
  for (size_t i = proteins.size(); i > 1; --i)
    std::swap(proteins[i - 1], proteins[rng.uniform_int(i)]);

  const size_t n = proteins.size();
  const size_t n_train = static_cast<size_t>(std::llround(fractions.train * static_cast<double>(n)));
  const size_t n_valid = static_cast<size_t>(std::llround(fractions.valid * static_cast<double>(n)));
  std::vector<std::string> train_proteins(proteins.begin(),
                                          proteins.begin() + static_cast<long>(std::min(n_train, n)));
  if (train_proteins.empty() && fractions.train > 0)
    train_proteins.push_back(proteins.front());

  SplitAssignment out;
  for (size_t pi = 0; pi < n; ++pi) {
    const std::string& wt = proteins[pi];
    std::string subset;
    if (pi < std::min(n_train, n))
      subset = "train";
    else if (pi < std::min(n_train + n_valid, n))
      subset = "valid";
    else {
      double best = 0.0;
      for (const auto& tp : train_proteins) best = std::max(best, sequence_identity(wt, tp));
      if (best >= 0.95)
        subset = "test_easy";
      else if (best >= 0.5)
        subset = "test_medium";
      else
        subset = "test_hard";
    }
    for (size_t ri : by_protein[wt]) out.subset_of[records[ri].id] = subset;
  }
  return out;
}

namespace {

int year_of(const std::string& iso_date) {
  if (iso_date.size() < 4) throw parse_error("bad ISO date: '" + iso_date + "'");
  for (int i = 0; i < 4; ++i)
    if (!std::isdigit(static_cast<unsigned char>(iso_date[static_cast<size_t>(i)])))
      throw parse_error("bad ISO date: '" + iso_date + "'");
  return std::stoi(iso_date.substr(0, 4));
}

}  // namespace

SplitAssignment split_temporal(const std::vector<MutationRecord>& records, int cutoff_year,
                               double valid_fraction, uint64_t seed) {
  if (records.empty()) throw contract_error("split_temporal: empty dataset");
  if (valid_fraction < 0 || valid_fraction >= 1)
    throw contract_error("split_temporal: valid fraction must be in [0, 1)");
  Rng rng = Rng::seeded(seed).split("temporal_split");
  SplitAssignment out;
  for (const auto& r : records) {
    if (r.date.empty()) {
      out.subset_of[r.id] = "train";
    } else if (year_of(r.date) >= cutoff_year) {
      out.subset_of[r.id] = "test_temporal";
    } else {
      out.subset_of[r.id] = rng.uniform01() < valid_fraction ? "valid" : "train";
    }
  }
  return out;
}

std::string effect_verb(char from, char to) {
  const int df = hydrophobicity_rank(to) - hydrophobicity_rank(from);
  if (df > 0) return "increases";
  if (df < 0) return "decreases";
  return "does not change";
}

Polarity effect_polarity(char from, char to) {
  const int df = hydrophobicity_rank(to) - hydrophobicity_rank(from);
  if (df > 0) return Polarity::kBenign;
  if (df < 0) return Polarity::kMalignant;
  return Polarity::kNotSignificant;
}

namespace {

struct Family {
  const char* name;
  const char* property;
  const char* role;
};

constexpr Family kFamilies[] = {
    {"kinase", "catalytic activity", "phosphorylates its substrates"},
    {"protease", "substrate cleavage", "cleaves peptide bonds"},
    {"transporter", "transport efficiency", "moves solutes across the membrane"},
    {"receptor", "ligand binding affinity", "senses extracellular signals"},
    {"ligase", "ubiquitination activity", "attaches ubiquitin to targets"},
    {"isomerase", "folding stability", "rearranges molecular bonds"},
};
constexpr int kNumFamilies = 6;

}  // namespace

SyntheticCorpus generate_synthetic_corpus(uint64_t seed, int n_proteins, int muts_per_protein,
                                          int min_len, int max_len) {
  if (n_proteins < 1 || muts_per_protein < 1)
    throw contract_error("generate_synthetic_corpus: counts must be positive");
  if (min_len < 2 || max_len < min_len)
    throw contract_error("generate_synthetic_corpus: need 2 <= min_len <= max_len");
  SyntheticCorpus cc;
  Rng root = Rng::seeded(seed).split("synthetic_corpus");
  for (int pi = 0; pi < n_proteins; ++pi) {
    Rng prng = root.split(static_cast<uint64_t>(pi));
    const int len = min_len + static_cast<int>(prng.uniform_int(static_cast<uint64_t>(max_len - min_len + 1)));
    std::string wt(static_cast<size_t>(len), 'A');
    for (auto& c : wt) c = kAlphabet[prng.uniform_int(kAlphabetSize)];
    const Family& fam = kFamilies[prng.uniform_int(kNumFamilies)];
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "p%04d", pi);
    const std::string pid = idbuf;

    const std::string function_text = std::string("this protein is a ") + fam.name + " that " +
                                      fam.role + " and controls " + fam.property + " .";
    cc.pairs.push_back(PretrainPair{pid, wt, function_text});

    for (int mi = 0; mi < muts_per_protein; ++mi) {
      const int pos = 1 + static_cast<int>(prng.uniform_int(static_cast<uint64_t>(len)));
      const char from = wt[static_cast<size_t>(pos - 1)];
      char to = from;
      while (to == from) to = kAlphabet[prng.uniform_int(kAlphabetSize)];
      MutationRecord r;
      r.id = pid + "m" + std::to_string(mi);
      r.wt = wt;
      r.mutation = Mutation{pos, from, to};
      r.function_text = function_text;
      r.effect_text = "replacing " + residue_name(from) + " with " + residue_name(to) + " " +
                      effect_verb(from, to) + " the " + fam.property + " of this " + fam.name +
                      " protein .";
      r.polarity = effect_polarity(from, to);
      if (prng.uniform_int(8) != 0) {
        const int year = 2016 + static_cast<int>(prng.uniform_int(8));
        const int month = 1 + static_cast<int>(prng.uniform_int(12));
        const int day = 1 + static_cast<int>(prng.uniform_int(28));
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
        r.date = buf;
      }
      cc.records.push_back(std::move(r));
    }
  }
  return cc;
}

nlohmann::json DatasetStats::to_json() const {
  nlohmann::json j;
  j["n_records"] = n_records;
  j["n_proteins"] = n_proteins;
  j["mean_seq_len"] = mean_seq_len;
  j["mean_effect_tokens"] = mean_effect_tokens;
  j["polarity_counts"] = polarity_counts;
  return j;
}

DatasetStats dataset_stats(const std::vector<MutationRecord>& records) {
  DatasetStats s;
  s.n_records = static_cast<int64_t>(records.size());
  std::map<std::string, bool> proteins;
  double len_sum = 0, tok_sum = 0;
  for (const auto& r : records) {
    proteins[r.wt] = true;
    len_sum += static_cast<double>(r.wt.size());
    std::istringstream ss(r.effect_text);
    std::string w;
    int toks = 0;
    while (ss >> w) ++toks;
    tok_sum += toks;
    s.polarity_counts[polarity_to_string(r.polarity)] += 1;
  }
  s.n_proteins = static_cast<int64_t>(proteins.size());
  if (!records.empty()) {
    s.mean_seq_len = len_sum / static_cast<double>(records.size());
    s.mean_effect_tokens = tok_sum / static_cast<double>(records.size());
  }
  return s;
}

}  // namespace mutadelta::mutadata
