#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "mutadelta/delta_net.hpp"
#include "mutadelta/objectives.hpp"
#include "mutadelta/optim.hpp"

namespace mutadelta::cli {

// Flat run configuration: one JSON object, every key also a command-line
// flag of the same name.
struct Config {
  // model
  int64_t d_plm = 32;
  int64_t d_llm = 32;
  int64_t plm_layers = 2;
  int64_t llm_layers = 2;
  int64_t heads = 2;
  int64_t k = 4;
  int64_t ff_mult = 4;
  int64_t max_protein_len = 128;
  int64_t max_context_len = 256;

  // training
  int64_t batch = 4;
  int64_t steps = 1000;
  double peak_lr = 1e-3;
  double floor_lr = 1e-5;
  int64_t warmup = 100;
  uint64_t seed = 42;
  double lambda = 50.0;
  double mask_rate = 0.15;
  int64_t max_new_tokens = 24;
  int64_t log_every = 10;
  int64_t checkpoint_every = 0;  // 0: save only at the end

  // modes
  bool teacher_round1 = true;  // false: condition round 2 on generated text
  bool deterministic_beam = false;
  bool raw_residue_scores = false;
  bool resume = false;  // ckpt carries optimizer/rng/step, not just weights

  // engineering and optimization
  int64_t beams = 20;
  int64_t rounds = 10;
  int64_t runs = 20;
  int64_t recall_k = 50;
  int64_t oracle_pairs = 2;
  int64_t top = 10;

  // synthetic data generation and splitting
  int64_t n_proteins = 8;
  int64_t muts_per_protein = 8;
  int64_t min_len = 12;
  int64_t max_len = 48;
  std::string split_mode = "homology";
  double frac_train = 0.8;
  double frac_valid = 0.1;
  double frac_test = 0.1;
  int64_t cutoff_year = 2020;

  // paths
  std::string records;
  std::string pairs;
  std::string split;
  std::string vocab;
  std::string ckpt;  // restore source; saves always go to the out directory
  std::string out = "out";

  void validate() const;

  nlohmann::json to_json() const;
  static Config from_json(const nlohmann::json& j);
  static Config load(const std::string& path);
  void save(const std::string& path) const;

  model::DeltaNetConfig model_config() const;
  numkit::Schedule schedule() const;
  train::ObjectiveConfig objective_config() const;
};

// Visits every config field as (key, reference); the single source of truth
// for the key set shared by JSON I/O and command-line flag binding.
template <class C, class Fn>
void for_each_field(C& c, Fn&& fn) {
  fn("d_plm", c.d_plm);
  fn("d_llm", c.d_llm);
  fn("plm_layers", c.plm_layers);
  fn("llm_layers", c.llm_layers);
  fn("heads", c.heads);
  fn("k", c.k);
  fn("ff_mult", c.ff_mult);
  fn("max_protein_len", c.max_protein_len);
  fn("max_context_len", c.max_context_len);
  fn("batch", c.batch);
  fn("steps", c.steps);
  fn("peak_lr", c.peak_lr);
  fn("floor_lr", c.floor_lr);
  fn("warmup", c.warmup);
  fn("seed", c.seed);
  fn("lambda", c.lambda);
  fn("mask_rate", c.mask_rate);
  fn("max_new_tokens", c.max_new_tokens);
  fn("log_every", c.log_every);
  fn("checkpoint_every", c.checkpoint_every);
  fn("teacher_round1", c.teacher_round1);
  fn("deterministic_beam", c.deterministic_beam);
  fn("raw_residue_scores", c.raw_residue_scores);
  fn("resume", c.resume);
  fn("beams", c.beams);
  fn("rounds", c.rounds);
  fn("runs", c.runs);
  fn("recall_k", c.recall_k);
  fn("oracle_pairs", c.oracle_pairs);
  fn("top", c.top);
  fn("n_proteins", c.n_proteins);
  fn("muts_per_protein", c.muts_per_protein);
  fn("min_len", c.min_len);
  fn("max_len", c.max_len);
  fn("split_mode", c.split_mode);
  fn("frac_train", c.frac_train);
  fn("frac_valid", c.frac_valid);
  fn("frac_test", c.frac_test);
  fn("cutoff_year", c.cutoff_year);
  fn("records", c.records);
  fn("pairs", c.pairs);
  fn("split", c.split);
  fn("vocab", c.vocab);
  fn("ckpt", c.ckpt);
  fn("out", c.out);
}

}  // namespace mutadelta::cli
