#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mutadelta/graph.hpp"
#include "mutadelta/kernels.hpp"
#include "mutadelta/mutadata.hpp"
#include "mutadelta/ops.hpp"
#include "mutadelta/params.hpp"
#include "mutadelta/prompts.hpp"
#include "mutadelta/rng.hpp"

namespace mutadelta::model {

using numkit::Graph;
using numkit::ParamSet;
using numkit::Rng;
using numkit::Tensor;
using numkit::Value;

inline constexpr int32_t kMaskResidueId = 20;
inline constexpr int64_t kResidueVocab = 21;  // 20 residues + mask

struct BackboneConfig {
  int64_t d = 64;
  int64_t n_layers = 2;
  int64_t n_heads = 2;
  int64_t d_ff = 256;
  int64_t max_len = 256;

  void validate() const {
    if (d < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1 || max_len < 1)
      throw config_error("backbone config: all dimensions must be positive");
    if (d % n_heads != 0) throw config_error("backbone config: n_heads must divide d");
  }
};

inline std::vector<int32_t> residue_ids(const std::string& seq) {
  mutadata::validate_sequence(seq);
  std::vector<int32_t> ids;
  ids.reserve(seq.size());
  for (char c : seq) ids.push_back(static_cast<int32_t>(mutadata::residue_index(c)));
  return ids;
}

// positions are 0-based; each one is replaced by the mask embedding id.
inline std::vector<int32_t> masked_residue_ids(const std::string& seq,
                                               const std::vector<int64_t>& positions) {
  std::vector<int32_t> ids = residue_ids(seq);
  for (int64_t p : positions) {
    if (p < 0 || p >= static_cast<int64_t>(ids.size()))
      throw index_error("masked_residue_ids: position " + std::to_string(p) + " outside length " +
                        std::to_string(ids.size()));
    ids[static_cast<size_t>(p)] = kMaskResidueId;
  }
  return ids;
}

namespace detail {

template <class T>
void register_linear(ParamSet<T>& ps, Rng& rng, const std::string& name, int64_t in, int64_t out) {
  ps.add(name + ".w", numkit::init_uniform_fan_in<T>(rng, in, out, in));
  ps.add(name + ".b", Tensor<T>::zeros(out));
}

template <class T>
void register_layer_norm(ParamSet<T>& ps, const std::string& name, int64_t d) {
  ps.add(name + ".g", Tensor<T>::filled(d, T(1)));
  ps.add(name + ".b", Tensor<T>::zeros(d));
}

template <class T>
void register_block(ParamSet<T>& ps, Rng& rng, const std::string& prefix,
                    const BackboneConfig& cfg) {
  const int64_t dk = cfg.d / cfg.n_heads;
  register_layer_norm(ps, prefix + ".ln1", cfg.d);
  for (int64_t h = 0; h < cfg.n_heads; ++h) {
    const std::string hp = prefix + ".h" + std::to_string(h);
    register_linear(ps, rng, hp + ".q", cfg.d, dk);
    register_linear(ps, rng, hp + ".k", cfg.d, dk);
    register_linear(ps, rng, hp + ".v", cfg.d, dk);
  }
  register_linear(ps, rng, prefix + ".attn.o", cfg.d, cfg.d);
  register_layer_norm(ps, prefix + ".ln2", cfg.d);
  register_linear(ps, rng, prefix + ".ffn.1", cfg.d, cfg.d_ff);
  register_linear(ps, rng, prefix + ".ffn.2", cfg.d_ff, cfg.d);
}

template <class T>
Value<T> linear(Graph<T>& g, ParamSet<T>& ps, const std::string& name, Value<T> x) {
  return g.add_rowvec(g.matmul(x, g.param(ps, name + ".w")), g.param(ps, name + ".b"));
}

template <class T>
Value<T> layer_norm(Graph<T>& g, ParamSet<T>& ps, const std::string& name, Value<T> x) {
  return g.layer_norm(x, g.param(ps, name + ".g"), g.param(ps, name + ".b"));
}

// Pre-norm block: x + MHA(LN(x)), then x + FFN(LN(x)).  attn_bias, when
// present, is added to every head's scores before the softmax.
template <class T>
Value<T> block_forward(Graph<T>& g, ParamSet<T>& ps, const std::string& prefix,
                       const BackboneConfig& cfg, Value<T> x, const Value<T>* attn_bias) {
  const int64_t dk = cfg.d / cfg.n_heads;
  const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(dk));
  Value<T> h = layer_norm(g, ps, prefix + ".ln1", x);
  std::vector<Value<T>> heads;
  for (int64_t hd = 0; hd < cfg.n_heads; ++hd) {
    const std::string hp = prefix + ".h" + std::to_string(hd);
    Value<T> qh = linear(g, ps, hp + ".q", h);
    Value<T> kh = linear(g, ps, hp + ".k", h);
    Value<T> vh = linear(g, ps, hp + ".v", h);
    Value<T> scores = g.scale(g.matmul_nt(qh, kh), inv_sqrt_dk);
    if (attn_bias) scores = g.add(scores, *attn_bias);
    heads.push_back(g.matmul(g.softmax_rows(scores), vh));
  }
  Value<T> merged = cfg.n_heads == 1 ? heads[0] : g.concat_cols(heads);
  x = g.add(x, linear(g, ps, prefix + ".attn.o", merged));
  Value<T> f = linear(g, ps, prefix + ".ffn.1", layer_norm(g, ps, prefix + ".ln2", x));
  return g.add(x, linear(g, ps, prefix + ".ffn.2", g.relu(f)));
}

template <class T>
Tensor<T> linear_raw(const ParamSet<T>& ps, const std::string& name, const Tensor<T>& x) {
  const Tensor<T>& w = ps.at(name + ".w").value;
  const Tensor<T>& b = ps.at(name + ".b").value;
  Tensor<T> y = Tensor<T>::zeros(x.rows(), w.cols());
  numkit::kernels::matmul(x, w, y);
  for (int64_t i = 0; i < y.rows(); ++i)
    for (int64_t j = 0; j < y.cols(); ++j) y(i, j) += b[j];
  return y;
}

template <class T>
Tensor<T> layer_norm_raw(const ParamSet<T>& ps, const std::string& name, const Tensor<T>& x) {
  Tensor<T> y = Tensor<T>::zeros(x.rows(), x.cols());
  numkit::kernels::layer_norm_rows(x, ps.at(name + ".g").value, ps.at(name + ".b").value, y,
                                   static_cast<Tensor<T>*>(nullptr), T(1e-5));
  return y;
}

template <class T>
Tensor<T> block_forward_raw(const ParamSet<T>& ps, const std::string& prefix,
                            const BackboneConfig& cfg, const Tensor<T>& x_in,
                            const Tensor<T>* attn_bias) {
  const int64_t dk = cfg.d / cfg.n_heads;
  const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(dk));
  Tensor<T> x = x_in;
  Tensor<T> h = layer_norm_raw(ps, prefix + ".ln1", x);
  Tensor<T> merged = Tensor<T>::zeros(x.rows(), cfg.d);
  for (int64_t hd = 0; hd < cfg.n_heads; ++hd) {
    const std::string hp = prefix + ".h" + std::to_string(hd);
    Tensor<T> qh = linear_raw(ps, hp + ".q", h);
    Tensor<T> kh = linear_raw(ps, hp + ".k", h);
    Tensor<T> vh = linear_raw(ps, hp + ".v", h);
    Tensor<T> scores = Tensor<T>::zeros(qh.rows(), kh.rows());
    numkit::kernels::matmul_nt(qh, kh, scores);
    for (int64_t i = 0; i < scores.numel(); ++i) scores[i] *= inv_sqrt_dk;
    if (attn_bias) {
      for (int64_t i = 0; i < scores.numel(); ++i) scores[i] += (*attn_bias)[i];
    }
    Tensor<T> probs = scores;
    numkit::kernels::softmax_rows(scores, probs);
    Tensor<T> attn = Tensor<T>::zeros(qh.rows(), dk);
    numkit::kernels::matmul(probs, vh, attn);
    for (int64_t i = 0; i < attn.rows(); ++i)
      for (int64_t j = 0; j < dk; ++j) merged(i, hd * dk + j) = attn(i, j);
  }
  Tensor<T> ao = linear_raw(ps, prefix + ".attn.o", merged);
  for (int64_t i = 0; i < x.numel(); ++i) x[i] += ao[i];
  Tensor<T> f = linear_raw(ps, prefix + ".ffn.1", layer_norm_raw(ps, prefix + ".ln2", x));
  for (int64_t i = 0; i < f.numel(); ++i) f[i] = f[i] > T(0) ? f[i] : T(0);
  Tensor<T> f2 = linear_raw(ps, prefix + ".ffn.2", f);
  for (int64_t i = 0; i < x.numel(); ++i) x[i] += f2[i];
  return x;
}

inline std::vector<int32_t> iota_ids(int64_t n) {
  std::vector<int32_t> ids(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) ids[static_cast<size_t>(i)] = static_cast<int32_t>(i);
  return ids;
}

}  // namespace detail

// Bidirectional residue encoder with a masked-LM head over residue types.
template <class T>
class ProteinEncoder {
 public:
  explicit ProteinEncoder(BackboneConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const BackboneConfig& config() const { return cfg_; }

  void register_params(ParamSet<T>& ps, Rng& rng) const {
    ps.add("plm.tok_emb", numkit::init_normal<T>(rng, kResidueVocab, cfg_.d, 0.02));
    ps.add("plm.pos_emb", numkit::init_normal<T>(rng, cfg_.max_len, cfg_.d, 0.02));
    for (int64_t l = 0; l < cfg_.n_layers; ++l)
      detail::register_block(ps, rng, "plm.l" + std::to_string(l), cfg_);
    detail::register_layer_norm(ps, "plm.lnf", cfg_.d);
    detail::register_linear(ps, rng, "plm.lm", cfg_.d, mutadata::kAlphabetSize);
  }

  Value<T> forward(Graph<T>& g, ParamSet<T>& ps, const std::vector<int32_t>& ids) const {
    check_length(static_cast<int64_t>(ids.size()));
    Value<T> x = g.add(g.embed(g.param(ps, "plm.tok_emb"), ids),
                       g.embed(g.param(ps, "plm.pos_emb"),
                               detail::iota_ids(static_cast<int64_t>(ids.size()))));
    for (int64_t l = 0; l < cfg_.n_layers; ++l)
      x = detail::block_forward<T>(g, ps, "plm.l" + std::to_string(l), cfg_, x, nullptr);
    return detail::layer_norm(g, ps, "plm.lnf", x);
  }

  Value<T> masked_lm_logits(Graph<T>& g, ParamSet<T>& ps, Value<T> reps) const {
    return detail::linear(g, ps, "plm.lm", reps);
  }

  Tensor<T> forward_raw(const ParamSet<T>& ps, const std::vector<int32_t>& ids) const {
    check_length(static_cast<int64_t>(ids.size()));
    const Tensor<T>& tok = ps.at("plm.tok_emb").value;
    const Tensor<T>& pos = ps.at("plm.pos_emb").value;
    const int64_t n = static_cast<int64_t>(ids.size());
    Tensor<T> x = Tensor<T>::zeros(n, cfg_.d);
    for (int64_t i = 0; i < n; ++i) {
      const int32_t id = ids[static_cast<size_t>(i)];
      if (id < 0 || id >= kResidueVocab)
        throw index_error("protein encoder: residue id out of range");
      for (int64_t j = 0; j < cfg_.d; ++j) x(i, j) = tok(id, j) + pos(i, j);
    }
    for (int64_t l = 0; l < cfg_.n_layers; ++l)
      x = detail::block_forward_raw<T>(ps, "plm.l" + std::to_string(l), cfg_, x, nullptr);
    return detail::layer_norm_raw(ps, "plm.lnf", x);
  }

  Tensor<T> masked_lm_logits_raw(const ParamSet<T>& ps, const Tensor<T>& reps) const {
    return detail::linear_raw(ps, "plm.lm", reps);
  }

 private:
  void check_length(int64_t n) const {
    if (n < 1) throw contract_error("protein encoder: empty input");
    if (n > cfg_.max_len)
      throw context_error("protein encoder: length " + std::to_string(n) + " exceeds " +
                          std::to_string(cfg_.max_len));
  }

  BackboneConfig cfg_;
};

// Causal word-level decoder over the closed vocabulary.  Inputs arrive as
// embedding rows so feature spans can be spliced between word embeddings;
// positional embeddings are added inside the forward passes.
template <class T>
class TextDecoder {
 public:
  TextDecoder(BackboneConfig cfg, int64_t vocab_size) : cfg_(cfg), vocab_(vocab_size) {
    cfg_.validate();
    if (vocab_ < text::kNumReserved)
      throw config_error("text decoder: vocabulary smaller than the reserved tokens");
  }

  const BackboneConfig& config() const { return cfg_; }
  int64_t vocab_size() const { return vocab_; }

  void register_params(ParamSet<T>& ps, Rng& rng) const {
    ps.add("llm.tok_emb", numkit::init_normal<T>(rng, vocab_, cfg_.d, 0.02));
    ps.add("llm.pos_emb", numkit::init_normal<T>(rng, cfg_.max_len, cfg_.d, 0.02));
    for (int64_t l = 0; l < cfg_.n_layers; ++l)
      detail::register_block(ps, rng, "llm.l" + std::to_string(l), cfg_);
    detail::register_layer_norm(ps, "llm.lnf", cfg_.d);
    detail::register_linear(ps, rng, "llm.lm", cfg_.d, vocab_);
  }

  Value<T> embed_tokens(Graph<T>& g, ParamSet<T>& ps, const std::vector<int32_t>& ids) const {
    return g.embed(g.param(ps, "llm.tok_emb"), ids);
  }

  Value<T> forward_embedded(Graph<T>& g, ParamSet<T>& ps, Value<T> rows) const {
    const int64_t n = rows.val().rows();
    check_length(n);
    Value<T> x =
        g.add(rows, g.embed(g.param(ps, "llm.pos_emb"), detail::iota_ids(n)));
    Value<T> mask = g.input(causal_bias(n));
    for (int64_t l = 0; l < cfg_.n_layers; ++l)
      x = detail::block_forward(g, ps, "llm.l" + std::to_string(l), cfg_, x, &mask);
    return detail::layer_norm(g, ps, "llm.lnf", x);
  }

  Value<T> lm_logits(Graph<T>& g, ParamSet<T>& ps, Value<T> hidden) const {
    return detail::linear(g, ps, "llm.lm", hidden);
  }

  struct Cache {
    std::vector<Tensor<T>> k, v;  // indexed layer * n_heads + head
    int64_t len = 0;
  };

  Cache make_cache() const {
    Cache c;
    const int64_t dk = cfg_.d / cfg_.n_heads;
    c.k.assign(static_cast<size_t>(cfg_.n_layers * cfg_.n_heads),
               Tensor<T>::zeros(cfg_.max_len, dk));
    c.v = c.k;
    return c;
  }

  // Full-prefix pass on an empty cache; returns hidden rows for every
  // position and leaves projected keys/values behind for step().
  Tensor<T> prefill(const ParamSet<T>& ps, const Tensor<T>& rows, Cache& cache) const {
    if (cache.len != 0) throw contract_error("text decoder: prefill requires an empty cache");
    const int64_t n = rows.rows();
    check_length(n);
    const Tensor<T>& pos = ps.at("llm.pos_emb").value;
    Tensor<T> x = rows;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < cfg_.d; ++j) x(i, j) += pos(i, j);
    const Tensor<T> bias = causal_bias(n);
    const int64_t dk = cfg_.d / cfg_.n_heads;
    for (int64_t l = 0; l < cfg_.n_layers; ++l) {
      const std::string prefix = "llm.l" + std::to_string(l);
      Tensor<T> h = detail::layer_norm_raw(ps, prefix + ".ln1", x);
      Tensor<T> merged = Tensor<T>::zeros(n, cfg_.d);
      for (int64_t hd = 0; hd < cfg_.n_heads; ++hd) {
        const std::string hp = prefix + ".h" + std::to_string(hd);
        Tensor<T> qh = detail::linear_raw(ps, hp + ".q", h);
        Tensor<T> kh = detail::linear_raw(ps, hp + ".k", h);
        Tensor<T> vh = detail::linear_raw(ps, hp + ".v", h);
        Tensor<T>& ck = cache.k[static_cast<size_t>(l * cfg_.n_heads + hd)];
        Tensor<T>& cv = cache.v[static_cast<size_t>(l * cfg_.n_heads + hd)];
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < dk; ++j) {
            ck(i, j) = kh(i, j);
            cv(i, j) = vh(i, j);
          }
        Tensor<T> scores = Tensor<T>::zeros(n, n);
        numkit::kernels::matmul_nt(qh, kh, scores);
        const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(dk));
        for (int64_t i = 0; i < scores.numel(); ++i)
          scores[i] = scores[i] * inv_sqrt_dk + bias[i];
        Tensor<T> probs = scores;
        numkit::kernels::softmax_rows(scores, probs);
        Tensor<T> attn = Tensor<T>::zeros(n, dk);
        numkit::kernels::matmul(probs, vh, attn);
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < dk; ++j) merged(i, hd * dk + j) = attn(i, j);
      }
      Tensor<T> ao = detail::linear_raw(ps, prefix + ".attn.o", merged);
      for (int64_t i = 0; i < x.numel(); ++i) x[i] += ao[i];
      Tensor<T> f = detail::linear_raw(ps, prefix + ".ffn.1",
                                       detail::layer_norm_raw(ps, prefix + ".ln2", x));
      for (int64_t i = 0; i < f.numel(); ++i) f[i] = f[i] > T(0) ? f[i] : T(0);
      Tensor<T> f2 = detail::linear_raw(ps, prefix + ".ffn.2", f);
      for (int64_t i = 0; i < x.numel(); ++i) x[i] += f2[i];
    }
    cache.len = n;
    return detail::layer_norm_raw(ps, "llm.lnf", x);
  }

  // One added position; attends over everything cached so far plus itself.
  Tensor<T> step(const ParamSet<T>& ps, const Tensor<T>& row, Cache& cache) const {
    if (row.rows() != 1 || row.cols() != cfg_.d)
      throw shape_error("text decoder: step expects one embedding row");
    const int64_t p = cache.len;
    check_length(p + 1);
    const Tensor<T>& pos = ps.at("llm.pos_emb").value;
    Tensor<T> x = row;
    for (int64_t j = 0; j < cfg_.d; ++j) x(0, j) += pos(p, j);
    const int64_t dk = cfg_.d / cfg_.n_heads;
    const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(dk));
    for (int64_t l = 0; l < cfg_.n_layers; ++l) {
      const std::string prefix = "llm.l" + std::to_string(l);
      Tensor<T> h = detail::layer_norm_raw(ps, prefix + ".ln1", x);
      Tensor<T> merged = Tensor<T>::zeros(1, cfg_.d);
      for (int64_t hd = 0; hd < cfg_.n_heads; ++hd) {
        const std::string hp = prefix + ".h" + std::to_string(hd);
        Tensor<T> qh = detail::linear_raw(ps, hp + ".q", h);
        Tensor<T> kh = detail::linear_raw(ps, hp + ".k", h);
        Tensor<T> vh = detail::linear_raw(ps, hp + ".v", h);
        Tensor<T>& ck = cache.k[static_cast<size_t>(l * cfg_.n_heads + hd)];
        Tensor<T>& cv = cache.v[static_cast<size_t>(l * cfg_.n_heads + hd)];
        for (int64_t j = 0; j < dk; ++j) {
          ck(p, j) = kh(0, j);
          cv(p, j) = vh(0, j);
        }
        Tensor<T> scores = Tensor<T>::zeros(p + 1);
        for (int64_t i = 0; i <= p; ++i) {
          T acc = T(0);
          for (int64_t j = 0; j < dk; ++j) acc += qh(0, j) * ck(i, j);
          scores[i] = acc * inv_sqrt_dk;
        }
        Tensor<T> probs = scores;
        numkit::kernels::softmax_row(scores.data(), probs.data(), p + 1);
        for (int64_t i = 0; i <= p; ++i) {
          const T w = probs[i];
          if (w == T(0)) continue;
          for (int64_t j = 0; j < dk; ++j) merged(0, hd * dk + j) += w * cv(i, j);
        }
      }
      Tensor<T> ao = detail::linear_raw(ps, prefix + ".attn.o", merged);
      for (int64_t j = 0; j < cfg_.d; ++j) x(0, j) += ao(0, j);
      Tensor<T> f = detail::linear_raw(ps, prefix + ".ffn.1",
                                       detail::layer_norm_raw(ps, prefix + ".ln2", x));
      for (int64_t i = 0; i < f.numel(); ++i) f[i] = f[i] > T(0) ? f[i] : T(0);
      Tensor<T> f2 = detail::linear_raw(ps, prefix + ".ffn.2", f);
      for (int64_t j = 0; j < cfg_.d; ++j) x(0, j) += f2(0, j);
    }
    cache.len = p + 1;
    return detail::layer_norm_raw(ps, "llm.lnf", x);
  }

  Tensor<T> logits_raw(const ParamSet<T>& ps, const Tensor<T>& hidden) const {
    return detail::linear_raw(ps, "llm.lm", hidden);
  }

  Tensor<T> token_embedding(const ParamSet<T>& ps, int32_t id) const {
    const Tensor<T>& tok = ps.at("llm.tok_emb").value;
    if (id < 0 || id >= tok.rows()) throw index_error("text decoder: token id out of range");
    Tensor<T> row = Tensor<T>::zeros(1, cfg_.d);
    for (int64_t j = 0; j < cfg_.d; ++j) row(0, j) = tok(id, j);
    return row;
  }

  // Greedy decoding from an embedded prefix; stops after <eos> or max_new
  // tokens.  Ties break toward the lowest token id.
  std::vector<int32_t> generate_greedy(const ParamSet<T>& ps, const Tensor<T>& prefix_rows,
                                       int64_t max_new, int32_t eos_id = text::kEos) const {
    if (max_new < 1) throw contract_error("generate_greedy: max_new must be >= 1");
    Cache cache = make_cache();
    Tensor<T> hidden = prefill(ps, prefix_rows, cache);
    Tensor<T> last = Tensor<T>::zeros(1, cfg_.d);
    for (int64_t j = 0; j < cfg_.d; ++j) last(0, j) = hidden(hidden.rows() - 1, j);
    std::vector<int32_t> out;
    for (int64_t t = 0; t < max_new; ++t) {
      Tensor<T> logits = logits_raw(ps, last);
      int32_t best = 0;
      for (int64_t j = 1; j < logits.cols(); ++j)
        if (logits(0, j) > logits(0, best)) best = static_cast<int32_t>(j);
      out.push_back(best);
      if (best == eos_id) break;
      if (cache.len >= cfg_.max_len) break;
      last = step(ps, token_embedding(ps, best), cache);
    }
    return out;
  }

 private:
  void check_length(int64_t n) const {
    if (n < 1) throw contract_error("text decoder: empty input");
    if (n > cfg_.max_len)
      throw context_error("text decoder: length " + std::to_string(n) + " exceeds " +
                          std::to_string(cfg_.max_len));
  }

  Tensor<T> causal_bias(int64_t n) const {
    Tensor<T> m = Tensor<T>::zeros(n, n);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = i + 1; j < n; ++j) m(i, j) = T(-1e9);
    return m;
  }

  BackboneConfig cfg_;
  int64_t vocab_;
};

// Splices word embeddings and feature rows into one decoder input, in the
// order the layout dictates.
template <class T>
Value<T> embed_prompt(Graph<T>& g, ParamSet<T>& ps, const TextDecoder<T>& dec,
                      const text::PromptLayout& layout,
                      const std::map<text::LatentRole, Value<T>>& latents) {
  std::vector<Value<T>> parts;
  for (const auto& span : layout.spans) {
    if (span.is_latent) {
      auto it = latents.find(span.role);
      if (it == latents.end())
        throw template_error("embed_prompt: missing latent rows for a feature span");
      const Value<T>& rows = it->second;
      if (rows.val().rows() != span.length || rows.val().cols() != dec.config().d)
        throw shape_error("embed_prompt: latent rows " + rows.val().shape_str() +
                          " do not fit a span of " + std::to_string(span.length) + "x" +
                          std::to_string(dec.config().d));
      parts.push_back(rows);
    } else {
      parts.push_back(dec.embed_tokens(g, ps, span.tokens));
    }
  }
  return parts.size() == 1 ? parts[0] : g.concat_rows(parts);
}

template <class T>
Tensor<T> embed_prompt_raw(const ParamSet<T>& ps, const TextDecoder<T>& dec,
                           const text::PromptLayout& layout,
                           const std::map<text::LatentRole, Tensor<T>>& latents) {
  const Tensor<T>& tok = ps.at("llm.tok_emb").value;
  Tensor<T> rows = Tensor<T>::zeros(layout.length, dec.config().d);
  int64_t r = 0;
  for (const auto& span : layout.spans) {
    if (span.is_latent) {
      auto it = latents.find(span.role);
      if (it == latents.end())
        throw template_error("embed_prompt_raw: missing latent rows for a feature span");
      const Tensor<T>& m = it->second;
      if (m.rows() != span.length || m.cols() != dec.config().d)
        throw shape_error("embed_prompt_raw: latent rows do not fit the span");
      for (int64_t i = 0; i < m.rows(); ++i, ++r)
        for (int64_t j = 0; j < m.cols(); ++j) rows(r, j) = m(i, j);
    } else {
      for (int32_t id : span.tokens) {
        if (id < 0 || id >= tok.rows())
          throw index_error("embed_prompt_raw: token id out of range");
        for (int64_t j = 0; j < dec.config().d; ++j) rows(r, j) = tok(id, j);
        ++r;
      }
    }
  }
  return rows;
}

}  // namespace mutadelta::model
