#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mutadelta/delta_net.hpp"
#include "mutadelta/mutadata.hpp"
#include "mutadelta/vocab.hpp"

namespace mutadelta::engineer {

using numkit::ParamSet;
using numkit::Rng;
using numkit::Tensor;

// Scores for every single-site substitution of one sequence.  Entries at a
// position's own wild-type residue are excluded from ranking, leaving
// exactly 19 rankable entries per position.
struct ScoreMatrix {
  Tensor<double> scores;  // L x 20
  std::vector<int> wt;    // residue index per position

  int64_t length() const { return static_cast<int64_t>(wt.size()); }
  bool rankable(int64_t pos, int64_t residue) const {
    return wt[static_cast<size_t>(pos)] != static_cast<int>(residue);
  }
};

struct RankedMutation {
  mutadata::Mutation mutation;
  double score = 0;
};

struct ScorerConfig {
  std::string instruction;
  std::string function_text;        // empty: generate the round-1 answer
  bool raw_residue_scores = false;  // residue logits instead of log-softmax
  int64_t max_new_tokens = 24;
};

// Position-head logit plus residue-head log-softmax (or raw logit) after
// running the two-round engineering dialog for one sequence.
ScoreMatrix score_mutations(const model::DeltaNetwork<double>& net, const ParamSet<double>& ps,
                            const text::Vocabulary& vocab, const std::string& x_wt,
                            const ScorerConfig& cfg);

using Scorer = std::function<ScoreMatrix(const std::string&)>;

Scorer make_model_scorer(const model::DeltaNetwork<double>& net, const ParamSet<double>& ps,
                         const text::Vocabulary& vocab, ScorerConfig cfg);

// Descending score; ties broken by position then residue index, both
// ascending.
std::vector<RankedMutation> rank_candidates(const ScoreMatrix& sm);

// 1-based rank of the mutation in an ordered candidate list.
int64_t rank_of(const std::vector<RankedMutation>& ranked, const mutadata::Mutation& truth);

int recall_at_k(const std::vector<RankedMutation>& ranked, const mutadata::Mutation& truth,
                int64_t k);

// 1 iff the argmax over the 19 non-wild-type residues at the mutated
// position is the desired residue.
int accuracy_at_position(const ScoreMatrix& sm, const mutadata::Mutation& truth);

struct EpistasisPair {
  int64_t a = 0;  // 0-based positions, a < b
  int64_t b = 0;
  Tensor<double> table;  // 20 x 20, indexed by the residues at a and b
};

// Synthetic additive-plus-epistatic landscape standing in for an external
// fitness predictor.
class FitnessOracle {
 public:
  FitnessOracle(Tensor<double> weights, std::vector<EpistasisPair> pairs);
  static FitnessOracle random(int64_t length, int64_t n_pairs, uint64_t seed);

  double fitness(const std::string& x) const;
  int64_t length() const { return weights_.rows(); }
  const Tensor<double>& weights() const { return weights_; }
  const std::vector<EpistasisPair>& pairs() const { return pairs_; }

 private:
  Tensor<double> weights_;  // L x 20
  std::vector<EpistasisPair> pairs_;
};

// Exact fitness gain of each substitution; the reference scorer for
// optimization tests.  The oracle must outlive the returned callable.
Scorer oracle_gain_scorer(const FitnessOracle& oracle);

// Joint softmax over one flat score list.
std::vector<double> global_softmax(const std::vector<double>& scores);

struct Candidate {
  std::string sequence;
  std::vector<mutadata::Mutation> mutations;  // replay wild type -> sequence
  double fitness = 0;
};

struct RoundStats {
  int64_t round = 0;  // 1-based
  double best = 0;
  double mean = 0;
  double std_dev = 0;
};

struct BeamConfig {
  int64_t beams = 20;
  int64_t rounds = 10;
  bool deterministic = false;  // top-K by score instead of sampling
  bool keep_best = false;      // extension: carry the best candidate forward
  uint64_t seed = 0;
};

struct BeamResult {
  std::vector<Candidate> candidates;
  std::vector<RoundStats> trace;  // one row per round
};

// Each round scores every candidate, softmax-normalizes jointly over all
// (candidate, position, residue) triples, draws `beams` triples without
// replacement (or takes the top ones in deterministic mode) and replaces
// the candidate set with the mutated sequences.
BeamResult beam_search_optimize(const std::string& x_wt, const Scorer& scorer,
                                const FitnessOracle& oracle, const BeamConfig& cfg);

// Independent seeded runs on worker threads; run r uses seed cfg.seed + r.
std::vector<BeamResult> run_many(const std::string& x_wt, const Scorer& scorer,
                                 const FitnessOracle& oracle, const BeamConfig& cfg,
                                 int64_t runs);

std::string trace_csv(const std::vector<BeamResult>& runs);
void write_trace_csv(const std::string& path, const std::vector<BeamResult>& runs);

}  // namespace mutadelta::engineer
