#include "mutadelta/engineer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <utility>

#include "mutadelta/objectives.hpp"

namespace mutadelta::engineer {

namespace {

struct Triple {
  int64_t cand = 0;
  int64_t pos = 0;
  int64_t residue = 0;
  double score = 0;
};

bool triple_before(const Triple& a, const Triple& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.cand != b.cand) return a.cand < b.cand;
  if (a.pos != b.pos) return a.pos < b.pos;
  return a.residue < b.residue;
}

RoundStats stats_of(int64_t round, const std::vector<Candidate>& cands) {
  RoundStats s;
  s.round = round;
  s.best = cands.front().fitness;
  double sum = 0;
  for (const auto& c : cands) {
    s.best = std::max(s.best, c.fitness);
    sum += c.fitness;
  }
  s.mean = sum / static_cast<double>(cands.size());
  double var = 0;
  for (const auto& c : cands) var += (c.fitness - s.mean) * (c.fitness - s.mean);
  s.std_dev = std::sqrt(var / static_cast<double>(cands.size()));
  return s;
}

void validate_score_matrix(const ScoreMatrix& sm) {
  if (sm.scores.rows() != sm.length() || sm.scores.cols() != mutadata::kAlphabetSize)
    throw shape_error("score matrix: scores must be L x 20 with one wild-type entry per row");
  for (int64_t i = 0; i < sm.scores.numel(); ++i)
    if (!std::isfinite(sm.scores[i])) throw numeric_error("score matrix: non-finite entry");
}

}  // namespace

ScoreMatrix score_mutations(const model::DeltaNetwork<double>& net, const ParamSet<double>& ps,
                            const text::Vocabulary& vocab, const std::string& x_wt,
                            const ScorerConfig& cfg) {
  mutadata::validate_sequence(x_wt);
  text::PromptInputs in;
  in.instruction = vocab.encode(cfg.instruction);
  if (in.instruction.empty()) throw contract_error("score_mutations: empty instruction");
  if (cfg.function_text.empty()) {
    train::ObjectiveConfig ocfg;
    ocfg.max_new_tokens = cfg.max_new_tokens;
    in.function_text = train::Objectives<double>(net, vocab, ocfg).generate_function_ids(ps, x_wt);
  } else {
    in.function_text = vocab.encode(cfg.function_text);
    in.function_text.push_back(text::kEos);
  }
  in.k_latent = net.config().k;
  in.k_soft = net.config().k;

  Tensor<double> h_wt = net.plm().forward_raw(ps, model::residue_ids(x_wt));
  Tensor<double> z_wt = net.encode_wildtype_raw(ps, h_wt);
  text::PromptLayout lay =
      text::assemble_prompt(text::TemplateId::kMutationEngineering, in, vocab);
  Tensor<double> rows = model::embed_prompt_raw<double>(
      ps, net.llm(), lay,
      {{text::LatentRole::kWildtype, z_wt},
       {text::LatentRole::kSoft, ps.at("soft_tokens").value}});
  auto cache = net.llm().make_cache();
  Tensor<double> hidden = net.llm().prefill(ps, rows, cache);
  const int64_t d = net.config().llm.d;
  Tensor<double> z_soft = Tensor<double>::zeros(lay.soft_rows, d);
  for (int64_t r = 0; r < lay.soft_rows; ++r)
    for (int64_t c = 0; c < d; ++c) z_soft(r, c) = hidden(lay.soft_begin + r, c);

  Tensor<double> dh = net.decode_delta_raw(ps, z_soft, h_wt);
  model::MutationHeadsRaw<double> heads = net.predict_mutation_raw(ps, h_wt, dh);

  const int64_t L = static_cast<int64_t>(x_wt.size());
  ScoreMatrix sm;
  sm.scores = Tensor<double>::zeros(L, mutadata::kAlphabetSize);
  sm.wt.resize(static_cast<size_t>(L));
  for (int64_t i = 0; i < L; ++i) {
    sm.wt[static_cast<size_t>(i)] = mutadata::residue_index(x_wt[static_cast<size_t>(i)]);
    const double* row = heads.residue_logits.data() + i * mutadata::kAlphabetSize;
    const double lse = cfg.raw_residue_scores
                           ? 0.0
                           : numkit::kernels::log_sum_exp_row(row, mutadata::kAlphabetSize);
    for (int64_t j = 0; j < mutadata::kAlphabetSize; ++j)
      sm.scores(i, j) = heads.position_logits(i, 0) + row[j] - lse;
  }
  validate_score_matrix(sm);
  return sm;
}

Scorer make_model_scorer(const model::DeltaNetwork<double>& net, const ParamSet<double>& ps,
                         const text::Vocabulary& vocab, ScorerConfig cfg) {
  return [&net, &ps, &vocab, cfg = std::move(cfg)](const std::string& x) {
    return score_mutations(net, ps, vocab, x, cfg);
  };
}

std::vector<RankedMutation> rank_candidates(const ScoreMatrix& sm) {
  validate_score_matrix(sm);
  std::vector<RankedMutation> out;
  out.reserve(static_cast<size_t>(sm.length() * (mutadata::kAlphabetSize - 1)));
  for (int64_t i = 0; i < sm.length(); ++i)
    for (int64_t j = 0; j < mutadata::kAlphabetSize; ++j) {
      if (!sm.rankable(i, j)) continue;
      RankedMutation r;
      r.mutation.position = static_cast<int>(i) + 1;
      r.mutation.from = mutadata::kAlphabet[sm.wt[static_cast<size_t>(i)]];
      r.mutation.to = mutadata::kAlphabet[j];
      r.score = sm.scores(i, j);
      out.push_back(r);
    }
  std::sort(out.begin(), out.end(), [](const RankedMutation& a, const RankedMutation& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.mutation.position != b.mutation.position)
      return a.mutation.position < b.mutation.position;
    return mutadata::residue_index(a.mutation.to) < mutadata::residue_index(b.mutation.to);
  });
  return out;
}

int64_t rank_of(const std::vector<RankedMutation>& ranked, const mutadata::Mutation& truth) {
  for (size_t i = 0; i < ranked.size(); ++i)
    if (ranked[i].mutation == truth) return static_cast<int64_t>(i) + 1;
  throw contract_error("rank_of: mutation " + mutadata::format_mutation(truth) +
                       " is not a rankable substitution");
}

int recall_at_k(const std::vector<RankedMutation>& ranked, const mutadata::Mutation& truth,
                int64_t k) {
  if (k < 1) throw contract_error("recall_at_k: k must be >= 1");
  return rank_of(ranked, truth) <= k ? 1 : 0;
}

int accuracy_at_position(const ScoreMatrix& sm, const mutadata::Mutation& truth) {
  validate_score_matrix(sm);
  const int64_t i = static_cast<int64_t>(truth.position) - 1;
  if (i < 0 || i >= sm.length())
    throw index_error("accuracy_at_position: position " + std::to_string(truth.position) +
                      " outside sequence of length " + std::to_string(sm.length()));
  int64_t best = -1;
  for (int64_t j = 0; j < mutadata::kAlphabetSize; ++j) {
    if (!sm.rankable(i, j)) continue;
    if (best < 0 || sm.scores(i, j) > sm.scores(i, best)) best = j;
  }
  return best == mutadata::residue_index(truth.to) ? 1 : 0;
}

FitnessOracle::FitnessOracle(Tensor<double> weights, std::vector<EpistasisPair> pairs)
    : weights_(std::move(weights)), pairs_(std::move(pairs)) {
  if (weights_.rows() < 1 || weights_.cols() != mutadata::kAlphabetSize)
    throw shape_error("fitness oracle: weight table must be L x 20");
  for (const auto& p : pairs_) {
    if (p.table.rows() != mutadata::kAlphabetSize || p.table.cols() != mutadata::kAlphabetSize)
      throw shape_error("fitness oracle: epistasis tables must be 20 x 20");
    if (p.a < 0 || p.b <= p.a || p.b >= weights_.rows())
      throw index_error("fitness oracle: epistasis pair positions must satisfy 0 <= a < b < L");
  }
}

FitnessOracle FitnessOracle::random(int64_t length, int64_t n_pairs, uint64_t seed) {
  if (length < 1) throw contract_error("fitness oracle: length must be >= 1");
  const int64_t max_pairs = length * (length - 1) / 2;
  if (n_pairs < 0 || n_pairs > max_pairs)
    throw contract_error("fitness oracle: pair count must be in [0, L*(L-1)/2]");
  Rng root = Rng::seeded(seed);
  Rng w_rng = root.split("weights");
  Rng p_rng = root.split("pairs");
  Rng t_rng = root.split("tables");
  Tensor<double> w = numkit::init_normal<double>(w_rng, length, mutadata::kAlphabetSize, 1.0);
  std::set<std::pair<int64_t, int64_t>> chosen;
  while (static_cast<int64_t>(chosen.size()) < n_pairs) {
    int64_t a = static_cast<int64_t>(p_rng.uniform_int(static_cast<uint64_t>(length)));
    int64_t b = static_cast<int64_t>(p_rng.uniform_int(static_cast<uint64_t>(length)));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    chosen.emplace(a, b);
  }
  std::vector<EpistasisPair> pairs;
  for (const auto& [a, b] : chosen) {
    EpistasisPair p;
    p.a = a;
    p.b = b;
    p.table = numkit::init_normal<double>(t_rng, mutadata::kAlphabetSize,
                                          mutadata::kAlphabetSize, 1.0);
    pairs.push_back(std::move(p));
  }
  return FitnessOracle(std::move(w), std::move(pairs));
}

double FitnessOracle::fitness(const std::string& x) const {
  mutadata::validate_sequence(x);
  if (static_cast<int64_t>(x.size()) != weights_.rows())
    throw shape_error("fitness: sequence length " + std::to_string(x.size()) +
                      " does not match oracle length " + std::to_string(weights_.rows()));
  double f = 0;
  for (int64_t i = 0; i < weights_.rows(); ++i)
    f += weights_(i, mutadata::residue_index(x[static_cast<size_t>(i)]));
  for (const auto& p : pairs_)
    f += p.table(mutadata::residue_index(x[static_cast<size_t>(p.a)]),
                 mutadata::residue_index(x[static_cast<size_t>(p.b)]));
  return f;
}

Scorer oracle_gain_scorer(const FitnessOracle& oracle) {
  return [&oracle](const std::string& x) {
    mutadata::validate_sequence(x);
    const int64_t L = oracle.length();
    if (static_cast<int64_t>(x.size()) != L)
      throw shape_error("oracle gain scorer: sequence length mismatch");
    ScoreMatrix sm;
    sm.scores = Tensor<double>::zeros(L, mutadata::kAlphabetSize);
    sm.wt.resize(static_cast<size_t>(L));
    std::vector<int> cur(static_cast<size_t>(L));
    for (int64_t i = 0; i < L; ++i) {
      cur[static_cast<size_t>(i)] = mutadata::residue_index(x[static_cast<size_t>(i)]);
      sm.wt[static_cast<size_t>(i)] = cur[static_cast<size_t>(i)];
    }
    for (int64_t i = 0; i < L; ++i) {
      const int ci = cur[static_cast<size_t>(i)];
      for (int j = 0; j < mutadata::kAlphabetSize; ++j) {
        if (j == ci) continue;
        double gain = oracle.weights()(i, j) - oracle.weights()(i, ci);
        for (const auto& p : oracle.pairs()) {
          const int ca = cur[static_cast<size_t>(p.a)];
          const int cb = cur[static_cast<size_t>(p.b)];
          if (p.a == i) gain += p.table(j, cb) - p.table(ca, cb);
          if (p.b == i) gain += p.table(ca, j) - p.table(ca, cb);
        }
        sm.scores(i, j) = gain;
      }
    }
    return sm;
  };
}

std::vector<double> global_softmax(const std::vector<double>& scores) {
  if (scores.empty()) throw contract_error("global_softmax: empty score list");
  const double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double z = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

BeamResult beam_search_optimize(const std::string& x_wt, const Scorer& scorer,
                                const FitnessOracle& oracle, const BeamConfig& cfg) {
  if (cfg.rounds < 1) throw contract_error("beam search: rounds must be >= 1");
  if (cfg.beams < 1) throw contract_error("beam search: beams must be >= 1");
  mutadata::validate_sequence(x_wt);
  Rng rng = Rng::seeded(cfg.seed);

  BeamResult result;
  std::vector<Candidate> cur;
  cur.push_back(Candidate{x_wt, {}, oracle.fitness(x_wt)});

  for (int64_t round = 1; round <= cfg.rounds; ++round) {
    std::vector<Triple> triples;
    for (size_t c = 0; c < cur.size(); ++c) {
      ScoreMatrix sm = scorer(cur[c].sequence);
      validate_score_matrix(sm);
      for (int64_t i = 0; i < sm.length(); ++i)
        for (int64_t j = 0; j < mutadata::kAlphabetSize; ++j)
          if (sm.rankable(i, j))
            triples.push_back(Triple{static_cast<int64_t>(c), i, j, sm.scores(i, j)});
    }
    if (cfg.beams > static_cast<int64_t>(triples.size()))
      throw contract_error("beam search: " + std::to_string(cfg.beams) +
                           " beams exceed " + std::to_string(triples.size()) +
                           " rankable mutations");

    std::vector<size_t> picked;
    picked.reserve(static_cast<size_t>(cfg.beams));
    if (cfg.deterministic) {
      std::vector<size_t> order(triples.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(),
                [&](size_t a, size_t b) { return triple_before(triples[a], triples[b]); });
      picked.assign(order.begin(), order.begin() + cfg.beams);
    } else {
      std::vector<double> scores(triples.size());
      for (size_t i = 0; i < triples.size(); ++i) scores[i] = triples[i].score;
      std::vector<double> p = global_softmax(scores);
      std::vector<char> taken(triples.size(), 0);
      for (int64_t k = 0; k < cfg.beams; ++k) {
        double mass = 0;
        for (size_t i = 0; i < p.size(); ++i)
          if (!taken[i]) mass += p[i];
        const double u = rng.uniform01() * mass;
        double acc = 0;
        size_t chosen = p.size();
        for (size_t i = 0; i < p.size(); ++i) {
          if (taken[i]) continue;
          acc += p[i];
          chosen = i;
          if (u < acc) break;
        }
        taken[chosen] = 1;
        picked.push_back(chosen);
      }
    }

    std::vector<Candidate> next;
    next.reserve(picked.size());
    for (size_t idx : picked) {
      const Triple& t = triples[idx];
      const Candidate& src = cur[static_cast<size_t>(t.cand)];
      mutadata::Mutation m;
      m.position = static_cast<int>(t.pos) + 1;
      m.from = src.sequence[static_cast<size_t>(t.pos)];
      m.to = mutadata::kAlphabet[t.residue];
      Candidate c;
      c.sequence = mutadata::apply_mutation(src.sequence, m);
      c.mutations = src.mutations;
      c.mutations.push_back(m);
      c.fitness = oracle.fitness(c.sequence);
      next.push_back(std::move(c));
    }

    if (cfg.keep_best) {
      size_t best_old = 0, worst_new = 0;
      for (size_t i = 1; i < cur.size(); ++i)
        if (cur[i].fitness > cur[best_old].fitness) best_old = i;
      for (size_t i = 1; i < next.size(); ++i)
        if (next[i].fitness < next[worst_new].fitness) worst_new = i;
      if (cur[best_old].fitness > next[worst_new].fitness) next[worst_new] = cur[best_old];
    }

    cur = std::move(next);
    result.trace.push_back(stats_of(round, cur));
  }
  result.candidates = std::move(cur);
  return result;
}

std::vector<BeamResult> run_many(const std::string& x_wt, const Scorer& scorer,
                                 const FitnessOracle& oracle, const BeamConfig& cfg,
                                 int64_t runs) {
  if (runs < 1) throw contract_error("run_many: runs must be >= 1");
  std::vector<BeamResult> results(static_cast<size_t>(runs));
  const int64_t workers =
      std::min<int64_t>(runs, std::max(1u, std::thread::hardware_concurrency()));
  std::atomic<int64_t> next_run{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mu;
  for (int64_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const int64_t r = next_run.fetch_add(1);
        if (r >= runs) return;
        try {
          BeamConfig run_cfg = cfg;
          run_cfg.seed = cfg.seed + static_cast<uint64_t>(r);
          results[static_cast<size_t>(r)] = beam_search_optimize(x_wt, scorer, oracle, run_cfg);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::string trace_csv(const std::vector<BeamResult>& runs) {
  std::string out = "run_id,round,best_fitness,mean_fitness,std_fitness\n";
  char buf[160];
  for (size_t r = 0; r < runs.size(); ++r)
    for (const RoundStats& s : runs[r].trace) {
      std::snprintf(buf, sizeof(buf), "%zu,%lld,%.17g,%.17g,%.17g\n", r,
                    static_cast<long long>(s.round), s.best, s.mean, s.std_dev);
      out += buf;
    }
  return out;
}

void write_trace_csv(const std::string& path, const std::vector<BeamResult>& runs) {
  std::ofstream os(path);
  if (!os) throw config_error("trace: cannot write " + path);
  os << trace_csv(runs);
  if (!os) throw config_error("trace: write failed for " + path);
}

}  // namespace mutadelta::engineer
