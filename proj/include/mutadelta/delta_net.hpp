#pragma once

#include <string>
#include <vector>

#include "mutadelta/backbones.hpp"

namespace mutadelta::model {

struct DeltaNetConfig {
  BackboneConfig plm;
  BackboneConfig llm;
  int64_t k = 8;  // query and soft token count

  // Hidden width of the delta decoder's feed-forward stage.
  int64_t d_ff_dec() const { return 4 * llm.d; }

  void validate() const {
    plm.validate();
    llm.validate();
    if (k < 1) throw config_error("delta net config: k must be >= 1");
  }
};

template <class T>
struct MutationHeads {
  Value<T> position_logits;  // L x 1, pre-sigmoid
  Value<T> position_probs;   // L x 1, in (0, 1)
  Value<T> residue_logits;   // L x 20
};

template <class T>
struct MutationHeadsRaw {
  Tensor<T> position_logits;
  Tensor<T> position_probs;
  Tensor<T> residue_logits;
};

// Wild-type encoder, delta encoder, delta decoder, mutation heads, and the
// trainable soft tokens.  All cross-attentions are single-head with key
// width d_LLM; the residue head shares the encoder's masked-LM weights.
template <class T>
class DeltaNetwork {
 public:
  DeltaNetwork(DeltaNetConfig cfg, int64_t vocab_size)
      : cfg_(cfg), plm_(cfg.plm), llm_(cfg.llm, vocab_size) {
    cfg_.validate();
  }

  const DeltaNetConfig& config() const { return cfg_; }
  const ProteinEncoder<T>& plm() const { return plm_; }
  const TextDecoder<T>& llm() const { return llm_; }

  void register_params(ParamSet<T>& ps, Rng& rng) const {
    Rng plm_rng = rng.split("plm");
    Rng llm_rng = rng.split("llm");
    Rng delta_rng = rng.split("delta");
    plm_.register_params(ps, plm_rng);
    llm_.register_params(ps, llm_rng);
    register_feature_encoder(ps, delta_rng, "wt_enc");
    register_feature_encoder(ps, delta_rng, "dl_enc");
    detail::register_linear(ps, delta_rng, "dl_dec.attn.q", cfg_.plm.d, cfg_.llm.d);
    detail::register_linear(ps, delta_rng, "dl_dec.attn.k", cfg_.llm.d, cfg_.llm.d);
    detail::register_linear(ps, delta_rng, "dl_dec.attn.v", cfg_.llm.d, cfg_.plm.d);
    detail::register_linear(ps, delta_rng, "dl_dec.ffn.1", cfg_.plm.d, cfg_.d_ff_dec());
    detail::register_linear(ps, delta_rng, "dl_dec.ffn.2", cfg_.d_ff_dec(), cfg_.plm.d);
    detail::register_linear(ps, delta_rng, "pos_head", cfg_.plm.d, 1);
    ps.add("soft_tokens", numkit::init_normal<T>(delta_rng, cfg_.k, cfg_.llm.d, 0.02));
  }

  Value<T> delta_features(Graph<T>& g, Value<T> h_wt, Value<T> h_mt) const {
    return g.sub(h_mt, h_wt);
  }

  Value<T> encode_wildtype(Graph<T>& g, ParamSet<T>& ps, Value<T> h_wt) const {
    return numkit::cross_attention(g, g.param(ps, "wt_enc.q"), h_wt, h_wt,
                                   attn_weights(g, ps, "wt_enc.attn"));
  }

  Value<T> encode_delta(Graph<T>& g, ParamSet<T>& ps, Value<T> h_delta) const {
    return numkit::cross_attention(g, g.param(ps, "dl_enc.q"), h_delta, h_delta,
                                   attn_weights(g, ps, "dl_enc.attn"));
  }

  // Cross-attention with the wild-type rows as queries over the K summary
  // rows, then a two-layer ReLU feed-forward stage; output is L x d like
  // the residue representations it will be added to.
  Value<T> decode_delta(Graph<T>& g, ParamSet<T>& ps, Value<T> z_delta, Value<T> h_queries) const {
    Value<T> a = numkit::cross_attention(g, h_queries, z_delta, z_delta,
                                         attn_weights(g, ps, "dl_dec.attn"));
    return detail::linear(g, ps, "dl_dec.ffn.2",
                          g.relu(detail::linear(g, ps, "dl_dec.ffn.1", a)));
  }

  MutationHeads<T> predict_mutation(Graph<T>& g, ParamSet<T>& ps, Value<T> h_wt,
                                    Value<T> h_delta_hat) const {
    Value<T> h_mt_hat = g.add(h_wt, h_delta_hat);
    Value<T> pos_logits = detail::linear(g, ps, "pos_head", h_mt_hat);
    return {pos_logits, g.sigmoid(pos_logits), plm_.masked_lm_logits(g, ps, h_mt_hat)};
  }

  // Final decoder hidden states at the soft-token span.
  Value<T> soft_token_summary(Graph<T>& g, const text::PromptLayout& layout,
                              Value<T> decoder_hidden) const {
    if (layout.soft_begin < 0)
      throw template_error("soft_token_summary: layout has no soft summary span");
    return g.slice_rows(decoder_hidden, layout.soft_begin, layout.soft_begin + layout.soft_rows);
  }

  Value<T> soft_tokens(Graph<T>& g, ParamSet<T>& ps) const { return g.param(ps, "soft_tokens"); }

  Tensor<T> delta_features_raw(const Tensor<T>& h_wt, const Tensor<T>& h_mt) const {
    if (!h_wt.same_shape(h_mt))
      throw shape_error("delta_features: shapes " + h_wt.shape_str() + " vs " + h_mt.shape_str());
    Tensor<T> d = h_mt;
    for (int64_t i = 0; i < d.numel(); ++i) d[i] -= h_wt[i];
    return d;
  }

  Tensor<T> encode_wildtype_raw(const ParamSet<T>& ps, const Tensor<T>& h_wt) const {
    return feature_encode_raw(ps, "wt_enc", h_wt);
  }

  Tensor<T> encode_delta_raw(const ParamSet<T>& ps, const Tensor<T>& h_delta) const {
    return feature_encode_raw(ps, "dl_enc", h_delta);
  }

  Tensor<T> decode_delta_raw(const ParamSet<T>& ps, const Tensor<T>& z_delta,
                             const Tensor<T>& h_queries) const {
    Tensor<T> a = numkit::cross_attention_raw(
        h_queries, z_delta, z_delta, ps.at("dl_dec.attn.q.w").value,
        ps.at("dl_dec.attn.q.b").value, ps.at("dl_dec.attn.k.w").value,
        ps.at("dl_dec.attn.k.b").value, ps.at("dl_dec.attn.v.w").value,
        ps.at("dl_dec.attn.v.b").value);
    Tensor<T> f = detail::linear_raw(ps, "dl_dec.ffn.1", a);
    for (int64_t i = 0; i < f.numel(); ++i) f[i] = f[i] > T(0) ? f[i] : T(0);
    return detail::linear_raw(ps, "dl_dec.ffn.2", f);
  }

  MutationHeadsRaw<T> predict_mutation_raw(const ParamSet<T>& ps, const Tensor<T>& h_wt,
                                           const Tensor<T>& h_delta_hat) const {
    if (!h_wt.same_shape(h_delta_hat)) throw shape_error("predict_mutation: shape mismatch");
    Tensor<T> h_mt_hat = h_wt;
    for (int64_t i = 0; i < h_mt_hat.numel(); ++i) h_mt_hat[i] += h_delta_hat[i];
    MutationHeadsRaw<T> out;
    out.position_logits = detail::linear_raw(ps, "pos_head", h_mt_hat);
    out.position_probs = out.position_logits;
    for (int64_t i = 0; i < out.position_probs.numel(); ++i)
      out.position_probs[i] = numkit::kernels::sigmoid_scalar(out.position_logits[i]);
    out.residue_logits = plm_.masked_lm_logits_raw(ps, h_mt_hat);
    return out;
  }

  Tensor<T> soft_token_summary_raw(const text::PromptLayout& layout,
                                   const Tensor<T>& decoder_hidden) const {
    if (layout.soft_begin < 0)
      throw template_error("soft_token_summary: layout has no soft summary span");
    Tensor<T> z = Tensor<T>::zeros(layout.soft_rows, decoder_hidden.cols());
    for (int64_t i = 0; i < layout.soft_rows; ++i)
      for (int64_t j = 0; j < decoder_hidden.cols(); ++j)
        z(i, j) = decoder_hidden(layout.soft_begin + i, j);
    return z;
  }

 private:
  void register_feature_encoder(ParamSet<T>& ps, Rng& rng, const std::string& prefix) const {
    ps.add(prefix + ".q", numkit::init_normal<T>(rng, cfg_.k, cfg_.plm.d, 0.02));
    detail::register_linear(ps, rng, prefix + ".attn.q", cfg_.plm.d, cfg_.llm.d);
    detail::register_linear(ps, rng, prefix + ".attn.k", cfg_.plm.d, cfg_.llm.d);
    detail::register_linear(ps, rng, prefix + ".attn.v", cfg_.plm.d, cfg_.llm.d);
  }

  numkit::AttnWeights<T> attn_weights(Graph<T>& g, ParamSet<T>& ps,
                                      const std::string& prefix) const {
    return {g.param(ps, prefix + ".q.w"), g.param(ps, prefix + ".q.b"),
            g.param(ps, prefix + ".k.w"), g.param(ps, prefix + ".k.b"),
            g.param(ps, prefix + ".v.w"), g.param(ps, prefix + ".v.b")};
  }

  Tensor<T> feature_encode_raw(const ParamSet<T>& ps, const std::string& prefix,
                               const Tensor<T>& keys) const {
    return numkit::cross_attention_raw(
        ps.at(prefix + ".q").value, keys, keys, ps.at(prefix + ".attn.q.w").value,
        ps.at(prefix + ".attn.q.b").value, ps.at(prefix + ".attn.k.w").value,
        ps.at(prefix + ".attn.k.b").value, ps.at(prefix + ".attn.v.w").value,
        ps.at(prefix + ".attn.v.b").value);
  }

  DeltaNetConfig cfg_;
  ProteinEncoder<T> plm_;
  TextDecoder<T> llm_;
};

}  // namespace mutadelta::model
