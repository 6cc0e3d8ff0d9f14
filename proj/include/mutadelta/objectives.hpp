#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mutadelta/delta_net.hpp"
#include "mutadelta/mutadata.hpp"
#include "mutadelta/optim.hpp"
#include "mutadelta/vocab.hpp"

namespace mutadelta::train {

using model::DeltaNetwork;
using numkit::Graph;
using numkit::ParamSet;
using numkit::Rng;
using numkit::Tensor;
using numkit::Value;

struct MaskPlan {
  std::vector<int64_t> positions;  // 0-based, sorted, unique
  double rate = 0.15;
};

// round(rate * L) positions, at least one, uniform without replacement.
inline MaskPlan make_mask_plan(int64_t length, double rate, Rng& rng) {
  if (length < 1) throw contract_error("mask plan: empty sequence");
  if (!(rate > 0.0) || rate > 1.0) throw contract_error("mask plan: rate must be in (0, 1]");
  int64_t m = std::llround(rate * static_cast<double>(length));
  m = std::max<int64_t>(1, std::min(m, length));
  std::vector<int64_t> pool(static_cast<size_t>(length));
  for (int64_t i = 0; i < length; ++i) pool[static_cast<size_t>(i)] = i;
  for (int64_t i = 0; i < m; ++i) {
    const int64_t j =
        i + static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(length - i)));
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
  }
  MaskPlan plan;
  plan.rate = rate;
  plan.positions.assign(pool.begin(), pool.begin() + m);
  std::sort(plan.positions.begin(), plan.positions.end());
  return plan;
}

struct ObjectiveConfig {
  double lambda = 50.0;      // weight of the mutated position in the BCE term
  double mask_rate = 0.15;
  bool literal_round1 = false;  // condition round 2 on generated text instead
                                // of the ground-truth function text
  int64_t max_new_tokens = 24;
};

// Position-head BCE with weight lambda on the mutated position, averaged
// over length, plus the unaveraged residue cross-entropy at that position.
template <class T>
Value<T> eng_loss_terms(Graph<T>& g, Value<T> position_logits, Value<T> residue_logits,
                        int64_t mutated_pos, int32_t to_residue, T lambda) {
  const int64_t L = position_logits.val().rows();
  if (position_logits.val().cols() != 1)
    throw shape_error("eng_loss_terms: position logits must be L x 1");
  if (residue_logits.val().rows() != L)
    throw shape_error("eng_loss_terms: head row counts disagree");
  if (mutated_pos < 0 || mutated_pos >= L)
    throw index_error("eng_loss_terms: mutated position outside sequence");
  if (!(lambda > T(0))) throw contract_error("eng_loss_terms: lambda must be positive");
  Tensor<T> bce_targets = Tensor<T>::zeros(L, 1);
  bce_targets(mutated_pos, 0) = T(1);
  Tensor<T> bce_weights = Tensor<T>::filled(L, T(1) / static_cast<T>(L));
  bce_weights[mutated_pos] = lambda / static_cast<T>(L);
  Value<T> position_term =
      g.weighted_sum(g.bce_logits(position_logits, std::move(bce_targets)), std::move(bce_weights));
  std::vector<int32_t> ce_targets(static_cast<size_t>(L), -1);
  ce_targets[static_cast<size_t>(mutated_pos)] = to_residue;
  Value<T> residue_term = g.weighted_sum(g.cross_entropy_rows(residue_logits, ce_targets),
                                         Tensor<T>::filled(L, T(1)));
  return g.add(position_term, residue_term);
}

struct StepMetrics {
  double total = 0;
  std::map<std::string, double> components;
};

// All pre-training and fine-tuning losses over one delta network.  Tape
// methods build onto a caller-owned graph so batch items and loss terms
// share parameters and a single backward pass.
template <class T>
class Objectives {
 public:
  Objectives(const DeltaNetwork<T>& net, const text::Vocabulary& vocab, ObjectiveConfig cfg = {})
      : net_(&net), vocab_(&vocab), cfg_(cfg) {
    if (!(cfg_.lambda > 0)) throw config_error("objectives: lambda must be positive");
    if (cfg_.max_new_tokens < 1) throw config_error("objectives: max_new_tokens must be >= 1");
  }

  const ObjectiveConfig& config() const { return cfg_; }

  // Mean next-token cross-entropy of the text conditioned on z_wt.
  Value<T> loss_p2t(Graph<T>& g, ParamSet<T>& ps, Value<T> z_wt,
                    const std::vector<int32_t>& text_ids) const {
    if (text_ids.empty()) throw contract_error("loss_p2t: empty text");
    text::PromptInputs in;
    in.text = text_ids;
    in.k_latent = net_->config().k;
    return span_ce(g, ps, text::assemble_prompt(text::TemplateId::kPretrainP2T, in, *vocab_),
                   {{text::LatentRole::kWildtype, z_wt}});
  }

  // Masked-residue cross-entropy with the text-summarized delta added onto
  // the masked encoding.
  Value<T> loss_t2p(Graph<T>& g, ParamSet<T>& ps, const std::string& x_wt,
                    const std::vector<int32_t>& text_ids, const MaskPlan& plan) const {
    if (text_ids.empty()) throw contract_error("loss_t2p: empty text");
    if (plan.positions.empty()) throw contract_error("loss_t2p: empty mask set");
    text::PromptInputs in;
    in.text = text_ids;
    in.k_soft = net_->config().k;
    text::PromptLayout lay = text::assemble_prompt(text::TemplateId::kPretrainT2P, in, *vocab_);
    Value<T> hidden = net_->llm().forward_embedded(
        g, ps,
        model::embed_prompt(g, ps, net_->llm(), lay,
                            {{text::LatentRole::kSoft, net_->soft_tokens(g, ps)}}));
    Value<T> z = net_->soft_token_summary(g, lay, hidden);
    Value<T> h_mask = net_->plm().forward(g, ps, model::masked_residue_ids(x_wt, plan.positions));
    Value<T> dh = net_->decode_delta(g, ps, z, h_mask);
    model::MutationHeads<T> heads = net_->predict_mutation(g, ps, h_mask, dh);
    const int64_t L = static_cast<int64_t>(x_wt.size());
    std::vector<int32_t> targets(static_cast<size_t>(L), -1);
    Tensor<T> w = Tensor<T>::zeros(L);
    for (int64_t p : plan.positions) {
      targets[static_cast<size_t>(p)] =
          static_cast<int32_t>(mutadata::residue_index(x_wt[static_cast<size_t>(p)]));
      w[p] = T(1) / static_cast<T>(plan.positions.size());
    }
    return g.weighted_sum(g.cross_entropy_rows(heads.residue_logits, targets), std::move(w));
  }

  // Round-1 dialog: mean cross-entropy of the function text.
  Value<T> loss_func(Graph<T>& g, ParamSet<T>& ps, Value<T> z_wt,
                     const std::vector<int32_t>& func_ids) const {
    if (func_ids.empty()) throw contract_error("loss_func: empty function text");
    text::PromptInputs in;
    in.function_text = func_ids;
    in.k_latent = net_->config().k;
    return span_ce(g, ps, text::assemble_prompt(text::TemplateId::kFunctionPrediction, in, *vocab_),
                   {{text::LatentRole::kWildtype, z_wt}});
  }

  // Round-2 dialog: mean cross-entropy of the effect text conditioned on
  // the round-1 answer and both feature spans.
  Value<T> loss_exp(Graph<T>& g, ParamSet<T>& ps, Value<T> z_wt, Value<T> z_delta,
                    const std::vector<int32_t>& round1_ids,
                    const std::vector<int32_t>& effect_ids) const {
    if (effect_ids.empty()) throw contract_error("loss_exp: empty effect text");
    text::PromptInputs in;
    in.function_text = round1_ids;
    in.effect_text = effect_ids;
    in.k_latent = net_->config().k;
    return span_ce(g, ps,
                   text::assemble_prompt(text::TemplateId::kMutationExplanation, in, *vocab_),
                   {{text::LatentRole::kWildtype, z_wt}, {text::LatentRole::kDelta, z_delta}});
  }

  // Engineering summary: soft-token states of the round-2 engineering
  // prompt, built from the instruction text and the round-1 answer.
  Value<T> engineering_summary(Graph<T>& g, ParamSet<T>& ps, Value<T> z_wt,
                               const std::vector<int32_t>& round1_ids,
                               const std::vector<int32_t>& instruction_ids,
                               text::PromptLayout* layout_out = nullptr) const {
    text::PromptInputs in;
    in.function_text = round1_ids;
    in.instruction = instruction_ids;
    in.k_latent = net_->config().k;
    in.k_soft = net_->config().k;
    text::PromptLayout lay =
        text::assemble_prompt(text::TemplateId::kMutationEngineering, in, *vocab_);
    Value<T> hidden = net_->llm().forward_embedded(
        g, ps,
        model::embed_prompt(g, ps, net_->llm(), lay,
                            {{text::LatentRole::kWildtype, z_wt},
                             {text::LatentRole::kSoft, net_->soft_tokens(g, ps)}}));
    if (layout_out) *layout_out = lay;
    return net_->soft_token_summary(g, lay, hidden);
  }

  // Weighted position/residue loss for a single-site mutation, decoding
  // the soft summary against the wild-type representations.
  Value<T> loss_eng(Graph<T>& g, ParamSet<T>& ps, Value<T> h_wt, const std::string& x_wt,
                    const std::string& x_mt, Value<T> z_soft) const {
    if (x_wt.size() != x_mt.size() || mutadata::hamming(x_wt, x_mt) != 1)
      throw contract_error("loss_eng: sequences must differ at exactly one position");
    int64_t m = 0;
    while (x_wt[static_cast<size_t>(m)] == x_mt[static_cast<size_t>(m)]) ++m;
    Value<T> dh = net_->decode_delta(g, ps, z_soft, h_wt);
    model::MutationHeads<T> heads = net_->predict_mutation(g, ps, h_wt, dh);
    return eng_loss_terms(
        g, heads.position_logits, heads.residue_logits, m,
        static_cast<int32_t>(mutadata::residue_index(x_mt[static_cast<size_t>(m)])),
        static_cast<T>(cfg_.lambda));
  }

  // L1 for one pair; components reported under "p2t" and "t2p".
  Value<T> pretrain_loss(Graph<T>& g, ParamSet<T>& ps, const mutadata::PretrainPair& pair,
                         Rng& mask_rng, StepMetrics* metrics = nullptr) const {
    const std::vector<int32_t> text_ids = vocab_->encode(pair.text);
    Value<T> h_wt = net_->plm().forward(g, ps, model::residue_ids(pair.protein));
    Value<T> z_wt = net_->encode_wildtype(g, ps, h_wt);
    Value<T> p2t = loss_p2t(g, ps, z_wt, text_ids);
    MaskPlan plan =
        make_mask_plan(static_cast<int64_t>(pair.protein.size()), cfg_.mask_rate, mask_rng);
    Value<T> t2p = loss_t2p(g, ps, pair.protein, text_ids, plan);
    Value<T> total = g.add(p2t, t2p);
    if (metrics) {
      metrics->components["p2t"] += static_cast<double>(p2t.val().item());
      metrics->components["t2p"] += static_cast<double>(t2p.val().item());
      metrics->total += static_cast<double>(total.val().item());
    }
    return total;
  }

  // L2 for one record; components reported under "func", "exp" and "eng".
  Value<T> finetune_loss(Graph<T>& g, ParamSet<T>& ps, const mutadata::MutationRecord& record,
                         StepMetrics* metrics = nullptr) const {
    const std::string x_mt = mutadata::apply_mutation(record.wt, record.mutation);
    const std::vector<int32_t> func_ids = supervised_text(record.function_text, "function");
    const std::vector<int32_t> effect_ids = supervised_text(record.effect_text, "effect");
    Value<T> h_wt = net_->plm().forward(g, ps, model::residue_ids(record.wt));
    Value<T> h_mt = net_->plm().forward(g, ps, model::residue_ids(x_mt));
    Value<T> z_wt = net_->encode_wildtype(g, ps, h_wt);
    Value<T> z_delta = net_->encode_delta(g, ps, net_->delta_features(g, h_wt, h_mt));
    const std::vector<int32_t> round1 = round1_ids(ps, record);
    Value<T> lf = loss_func(g, ps, z_wt, func_ids);
    Value<T> le = loss_exp(g, ps, z_wt, z_delta, round1, effect_ids);
    Value<T> z_soft = engineering_summary(g, ps, z_wt, round1, effect_ids);
    Value<T> lg = loss_eng(g, ps, h_wt, record.wt, x_mt, z_soft);
    Value<T> total = g.add(g.add(lf, le), lg);
    if (metrics) {
      metrics->components["func"] += static_cast<double>(lf.val().item());
      metrics->components["exp"] += static_cast<double>(le.val().item());
      metrics->components["eng"] += static_cast<double>(lg.val().item());
      metrics->total += static_cast<double>(total.val().item());
    }
    return total;
  }

  // Round-1 conditioning: ground-truth function text by default, greedy
  // generated text in literal mode.
  std::vector<int32_t> round1_ids(const ParamSet<T>& ps,
                                  const mutadata::MutationRecord& record) const {
    if (cfg_.literal_round1) return generate_function_ids(ps, record.wt);
    std::vector<int32_t> ids = vocab_->encode(record.function_text);
    ids.push_back(text::kEos);
    return ids;
  }

  // Greedy round-1 generation on the no-tape path.
  std::vector<int32_t> generate_function_ids(const ParamSet<T>& ps,
                                             const std::string& x_wt) const {
    Tensor<T> h_wt = net_->plm().forward_raw(ps, model::residue_ids(x_wt));
    Tensor<T> z_wt = net_->encode_wildtype_raw(ps, h_wt);
    text::PromptInputs in;
    in.k_latent = net_->config().k;
    text::PromptLayout lay =
        text::assemble_prompt(text::TemplateId::kFunctionPrediction, in, *vocab_);
    Tensor<T> rows = model::embed_prompt_raw<T>(ps, net_->llm(), lay,
                                                {{text::LatentRole::kWildtype, z_wt}});
    return net_->llm().generate_greedy(ps, rows, cfg_.max_new_tokens);
  }

  StepMetrics pretrain_step(ParamSet<T>& ps, numkit::AdamW<T>& opt,
                            const std::vector<mutadata::PretrainPair>& batch, Rng& mask_rng,
                            double lr) const {
    return run_step(ps, opt, batch.size(), lr, [&](Graph<T>& g, size_t i, StepMetrics* m) {
      return pretrain_loss(g, ps, batch[i], mask_rng, m);
    });
  }

  StepMetrics finetune_step(ParamSet<T>& ps, numkit::AdamW<T>& opt,
                            const std::vector<mutadata::MutationRecord>& batch, double lr) const {
    return run_step(ps, opt, batch.size(), lr, [&](Graph<T>& g, size_t i, StepMetrics* m) {
      return finetune_loss(g, ps, batch[i], m);
    });
  }

 private:
  std::vector<int32_t> supervised_text(const std::string& s, const char* what) const {
    std::vector<int32_t> ids = vocab_->encode(s);
    if (ids.empty()) throw contract_error(std::string("finetune: empty ") + what + " text");
    return ids;
  }

  Value<T> span_ce(Graph<T>& g, ParamSet<T>& ps, const text::PromptLayout& lay,
                   const std::map<text::LatentRole, Value<T>>& latents) const {
    if (lay.supervised_count == 0) throw contract_error("span loss: no supervised tokens");
    Value<T> hidden =
        net_->llm().forward_embedded(g, ps, model::embed_prompt(g, ps, net_->llm(), lay, latents));
    Value<T> ce = g.cross_entropy_rows(net_->llm().lm_logits(g, ps, hidden), lay.next_targets);
    Tensor<T> w = Tensor<T>::zeros(lay.length);
    for (int64_t p = 0; p < lay.length; ++p)
      if (lay.next_targets[static_cast<size_t>(p)] >= 0)
        w[p] = T(1) / static_cast<T>(lay.supervised_count);
    return g.weighted_sum(ce, std::move(w));
  }

  template <class BuildOne>
  StepMetrics run_step(ParamSet<T>& ps, numkit::AdamW<T>& opt, size_t batch_size, double lr,
                       const BuildOne& build_one) const {
    if (batch_size == 0) throw contract_error("training step: empty batch");
    Graph<T> g;
    StepMetrics metrics;
    Value<T> total = build_one(g, 0, &metrics);
    for (size_t i = 1; i < batch_size; ++i) total = g.add(total, build_one(g, i, &metrics));
    Value<T> mean = g.scale(total, T(1) / static_cast<T>(batch_size));
    ps.zero_grads();
    g.backward(mean);
    opt.step(ps, lr);
    const double inv = 1.0 / static_cast<double>(batch_size);
    metrics.total *= inv;
    for (auto& [k, v] : metrics.components) v *= inv;
    return metrics;
  }

  const DeltaNetwork<T>* net_;
  const text::Vocabulary* vocab_;
  ObjectiveConfig cfg_;
};

}  // namespace mutadelta::train
