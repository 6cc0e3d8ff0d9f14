#include "mutadelta/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace mutadelta::cli {

namespace {

struct Binder {
  const nlohmann::json& j;
  std::set<std::string> seen;

  template <class T>
  void operator()(const char* key, T& field) {
    seen.insert(key);
    if (!j.contains(key)) return;
    try {
      field = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw parse_error(std::string("config key '") + key + "': " + e.what());
    }
  }
};


void require(bool ok, const std::string& message) {
  if (!ok) throw config_error("config: " + message);
}

}  // namespace

void Config::validate() const {
  for (auto [name, v] : {std::pair<const char*, int64_t>{"d_plm", d_plm},
                         {"d_llm", d_llm},
                         {"plm_layers", plm_layers},
                         {"llm_layers", llm_layers},
                         {"heads", heads},
                         {"k", k},
                         {"ff_mult", ff_mult},
                         {"max_protein_len", max_protein_len},
                         {"max_context_len", max_context_len},
                         {"batch", batch},
                         {"steps", steps},
                         {"warmup", warmup},
                         {"max_new_tokens", max_new_tokens},
                         {"log_every", log_every},
                         {"beams", beams},
                         {"rounds", rounds},
                         {"runs", runs},
                         {"recall_k", recall_k},
                         {"top", top},
                         {"n_proteins", n_proteins},
                         {"muts_per_protein", muts_per_protein},
                         {"min_len", min_len},
                         {"max_len", max_len}})
    require(v > 0, std::string(name) + " must be positive");
  require(d_plm % heads == 0 && d_llm % heads == 0, "head count must divide both widths");
  require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  require(oracle_pairs >= 0, "oracle_pairs must be >= 0");
  require(lambda > 0, "lambda must be positive");
  require(mask_rate > 0 && mask_rate <= 1, "mask_rate must be in (0, 1]");
  require(floor_lr > 0 && peak_lr >= floor_lr, "need 0 < floor_lr <= peak_lr");
  require(warmup < steps, "warmup must be below steps");
  require(min_len <= max_len, "min_len must not exceed max_len");
  require(split_mode == "homology" || split_mode == "temporal",
          "split_mode must be homology or temporal");
  require(frac_train > 0 && frac_valid >= 0 && frac_test >= 0, "split fractions must be valid");
  require(std::abs(frac_train + frac_valid + frac_test - 1.0) < 1e-9,
          "split fractions must sum to 1");
  require(!out.empty(), "out directory must be set");
}

nlohmann::json Config::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for_each_field(*this, [&](const char* key, const auto& field) { j[key] = field; });
  return j;
}

Config Config::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw parse_error("config: top level must be a JSON object");
  Config c;
  Binder bind{j, {}};
  for_each_field(c, [&](const char* key, auto& field) { bind(key, field); });
  for (const auto& [key, value] : j.items())
    if (!bind.seen.count(key)) throw config_error("config: unknown key '" + key + "'");
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error("config: " + path + ": " + e.what());
  }
  return from_json(j);
}

void Config::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw config_error("config: cannot write " + path);
  os << to_json().dump(2) << '\n';
}

model::DeltaNetConfig Config::model_config() const {
  model::DeltaNetConfig m;
  m.plm.d = d_plm;
  m.plm.n_layers = plm_layers;
  m.plm.n_heads = heads;
  m.plm.d_ff = ff_mult * d_plm;
  m.plm.max_len = max_protein_len;
  m.llm.d = d_llm;
  m.llm.n_layers = llm_layers;
  m.llm.n_heads = heads;
  m.llm.d_ff = ff_mult * d_llm;
  m.llm.max_len = max_context_len;
  m.k = k;
  return m;
}

numkit::Schedule Config::schedule() const {
  numkit::Schedule s;
  s.peak_lr = peak_lr;
  s.floor_lr = floor_lr;
  s.warmup_steps = warmup;
  s.total_steps = steps;
  return s;
}

train::ObjectiveConfig Config::objective_config() const {
  train::ObjectiveConfig o;
  o.lambda = lambda;
  o.mask_rate = mask_rate;
  o.literal_round1 = !teacher_round1;
  o.max_new_tokens = max_new_tokens;
  return o;
}

}  // namespace mutadelta::cli
