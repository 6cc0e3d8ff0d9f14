#pragma once

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "mutadelta/kernels.hpp"
#include "mutadelta/params.hpp"
#include "mutadelta/tensor.hpp"

namespace mutadelta::numkit {

template <class T>
class Graph;

// Handle to a node on a Graph tape.
template <class T>
struct Value {
  Graph<T>* g = nullptr;
  int32_t id = -1;

  const Tensor<T>& val() const;
  const Tensor<T>& grad() const;
  bool valid() const { return g != nullptr && id >= 0; }
};

// Define-by-run reverse-mode tape over a closed op set.  Values are computed
// eagerly at op creation; backward() walks the tape in reverse and finally
// flushes parameter-node gradients into their ParamSet slots.
template <class T>
class Graph {
 public:
  enum class Op : uint8_t {
    kLeaf,
    kParam,
    kAdd,
    kSub,
    kScale,
    kAddRowVec,
    kMatMul,
    kMatMulNT,
    kRelu,
    kSigmoid,
    kSoftmaxRows,
    kLayerNorm,
    kEmbed,
    kConcatRows,
    kConcatCols,
    kSliceRows,
    kCrossEntropyRows,
    kBceLogits,
    kWeightedSum,
    kSumAll,
  };

  Graph() { nodes_.reserve(256); }

  Value<T> input(Tensor<T> v) {
    return push(Op::kLeaf, {}, std::move(v), false);
  }

  // Binds a ParamSet slot; repeated binds of the same slot return the same
  // node so shared parameters accumulate gradients in one place.
  Value<T> param(ParamSet<T>& ps, const std::string& name) {
    ParamSlot<T>* slot = &ps.at(name);
    auto it = param_nodes_.find(slot);
    if (it != param_nodes_.end()) return Value<T>{this, it->second};
    Value<T> v = push(Op::kParam, {}, slot->value, true);
    nodes_[static_cast<size_t>(v.id)].slot = slot;
    param_nodes_[slot] = v.id;
    return v;
  }

  Value<T> add(Value<T> a, Value<T> b) {
    require_same_shape(a, b, "add");
    Tensor<T> out = node(a).val;
    const Tensor<T>& bv = node(b).val;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
    return push(Op::kAdd, {a.id, b.id}, std::move(out));
  }

  Value<T> sub(Value<T> a, Value<T> b) {
    require_same_shape(a, b, "sub");
    Tensor<T> out = node(a).val;
    const Tensor<T>& bv = node(b).val;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
    return push(Op::kSub, {a.id, b.id}, std::move(out));
  }

  Value<T> scale(Value<T> a, T c) {
    Tensor<T> out = node(a).val;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= c;
    Value<T> v = push(Op::kScale, {a.id}, std::move(out));
    nodes_[static_cast<size_t>(v.id)].scalar = c;
    return v;
  }

  // A (r x c) plus a length-c vector broadcast over rows.
  Value<T> add_rowvec(Value<T> a, Value<T> vrow) {
    const Tensor<T>& av = node(a).val;
    const Tensor<T>& vv = node(vrow).val;
    if (vv.numel() != av.cols())
      throw shape_error("add_rowvec: " + av.shape_str() + " vs " + vv.shape_str());
    Tensor<T> out = av;
    for (int64_t i = 0; i < av.rows(); ++i)
      for (int64_t j = 0; j < av.cols(); ++j) out(i, j) += vv[j];
    return push(Op::kAddRowVec, {a.id, vrow.id}, std::move(out));
  }

  Value<T> matmul(Value<T> a, Value<T> b) {
    const Tensor<T>& av = node(a).val;
    const Tensor<T>& bv = node(b).val;
    Tensor<T> out = Tensor<T>::zeros(av.rows(), bv.cols());
    kernels::matmul(av, bv, out);
    return push(Op::kMatMul, {a.id, b.id}, std::move(out));
  }

  // a * b^T with b given row-major (m x k).
  Value<T> matmul_nt(Value<T> a, Value<T> b) {
    const Tensor<T>& av = node(a).val;
    const Tensor<T>& bv = node(b).val;
    Tensor<T> out = Tensor<T>::zeros(av.rows(), bv.rows());
    kernels::matmul_nt(av, bv, out);
    return push(Op::kMatMulNT, {a.id, b.id}, std::move(out));
  }

  Value<T> relu(Value<T> a) {
    Tensor<T> out = node(a).val;
    for (int64_t i = 0; i < out.numel(); ++i)
      if (out[i] < T(0)) out[i] = T(0);
    return push(Op::kRelu, {a.id}, std::move(out));
  }

  Value<T> sigmoid(Value<T> a) {
    Tensor<T> out = node(a).val;
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = kernels::sigmoid_scalar(out[i]);
    return push(Op::kSigmoid, {a.id}, std::move(out));
  }

  Value<T> softmax_rows(Value<T> a) {
    const Tensor<T>& av = node(a).val;
    if (av.rank() != 2) throw shape_error("softmax_rows: rank-2 input required");
    Tensor<T> out = Tensor<T>::zeros(av.rows(), av.cols());
    kernels::softmax_rows(av, out);
    return push(Op::kSoftmaxRows, {a.id}, std::move(out));
  }

  Value<T> layer_norm(Value<T> a, Value<T> gain, Value<T> bias, T eps = T(1e-5)) {
    const Tensor<T>& av = node(a).val;
    if (node(gain).val.numel() != av.cols() || node(bias).val.numel() != av.cols())
      throw shape_error("layer_norm: gain/bias length must equal cols");
    Tensor<T> out = Tensor<T>::zeros(av.rows(), av.cols());
    Tensor<T> stats = Tensor<T>::zeros(av.rows(), 2);
    kernels::layer_norm_rows(av, node(gain).val, node(bias).val, out, &stats, eps);
    Value<T> v = push(Op::kLayerNorm, {a.id, gain.id, bias.id}, std::move(out));
    nodes_[static_cast<size_t>(v.id)].aux = std::move(stats);
    nodes_[static_cast<size_t>(v.id)].scalar = eps;
    return v;
  }

  // Gathers rows of a table; ids out of range raise index errors.
  Value<T> embed(Value<T> table, const std::vector<int32_t>& ids) {
    const Tensor<T>& tv = node(table).val;
    Tensor<T> out = Tensor<T>::zeros(static_cast<int64_t>(ids.size()), tv.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || ids[i] >= tv.rows())
        throw index_error("embed: id " + std::to_string(ids[i]) + " outside table of " +
                          std::to_string(tv.rows()) + " rows");
      for (int64_t j = 0; j < tv.cols(); ++j) out(static_cast<int64_t>(i), j) = tv(ids[i], j);
    }
    Value<T> v = push(Op::kEmbed, {table.id}, std::move(out));
    nodes_[static_cast<size_t>(v.id)].ints = ids;
    return v;
  }

  Value<T> concat_rows(const std::vector<Value<T>>& parts) {
    if (parts.empty()) throw contract_error("concat_rows: empty parts");
    const int64_t c = node(parts[0]).val.cols();
    int64_t r = 0;
    for (const auto& p : parts) {
      if (node(p).val.cols() != c) throw shape_error("concat_rows: column mismatch");
      r += node(p).val.rows();
    }
    Tensor<T> out = Tensor<T>::zeros(r, c);
    std::vector<int32_t> in;
    int64_t at = 0;
    for (const auto& p : parts) {
      const Tensor<T>& pv = node(p).val;
      for (int64_t i = 0; i < pv.rows(); ++i)
        for (int64_t j = 0; j < c; ++j) out(at + i, j) = pv(i, j);
      at += pv.rows();
      in.push_back(p.id);
    }
    return push_multi(Op::kConcatRows, in, std::move(out));
  }

  Value<T> concat_cols(const std::vector<Value<T>>& parts) {
    if (parts.empty()) throw contract_error("concat_cols: empty parts");
    const int64_t r = node(parts[0]).val.rows();
    int64_t c = 0;
    for (const auto& p : parts) {
      if (node(p).val.rows() != r) throw shape_error("concat_cols: row mismatch");
      c += node(p).val.cols();
    }
    Tensor<T> out = Tensor<T>::zeros(r, c);
    std::vector<int32_t> in;
    int64_t at = 0;
    for (const auto& p : parts) {
      const Tensor<T>& pv = node(p).val;
      for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < pv.cols(); ++j) out(i, at + j) = pv(i, j);
      at += pv.cols();
      in.push_back(p.id);
    }
    return push_multi(Op::kConcatCols, in, std::move(out));
  }

  Value<T> slice_rows(Value<T> a, int64_t r0, int64_t r1) {
    const Tensor<T>& av = node(a).val;
    if (r0 < 0 || r1 > av.rows() || r0 > r1)
      throw index_error("slice_rows: [" + std::to_string(r0) + "," + std::to_string(r1) +
                        ") outside " + av.shape_str());
    Tensor<T> out = Tensor<T>::zeros(r1 - r0, av.cols());
    for (int64_t i = r0; i < r1; ++i)
      for (int64_t j = 0; j < av.cols(); ++j) out(i - r0, j) = av(i, j);
    Value<T> v = push(Op::kSliceRows, {a.id}, std::move(out));
    nodes_[static_cast<size_t>(v.id)].ints = {static_cast<int32_t>(r0), static_cast<int32_t>(r1)};
    return v;
  }

  // Per-row cross entropy of row softmax vs an integer target; target -1
  // skips the row (contributes exactly zero).  Softmax probabilities of
  // active rows are cached for the backward pass.
  Value<T> cross_entropy_rows(Value<T> logits, const std::vector<int32_t>& targets) {
    const Tensor<T>& lv = node(logits).val;
    if (static_cast<int64_t>(targets.size()) != lv.rows())
      throw shape_error("cross_entropy_rows: one target per row required");
    const int64_t v = lv.cols();
    Tensor<T> out = Tensor<T>::zeros(lv.rows());
    Tensor<T> probs = Tensor<T>::zeros(lv.rows(), v);
    for (int64_t i = 0; i < lv.rows(); ++i) {
      const int32_t t = targets[static_cast<size_t>(i)];
      if (t < 0) continue;
      if (t >= v) throw index_error("cross_entropy_rows: target " + std::to_string(t) +
                                    " outside " + std::to_string(v) + " classes");
      kernels::softmax_row(lv.data() + i * v, probs.data() + i * v, v);
      const T lse = kernels::log_sum_exp_row(lv.data() + i * v, v);
      out[i] = lse - lv(i, t);
    }
    Value<T> r = push(Op::kCrossEntropyRows, {logits.id}, std::move(out));
    nodes_[static_cast<size_t>(r.id)].ints = targets;
    nodes_[static_cast<size_t>(r.id)].aux = std::move(probs);
    return r;
  }

  // Elementwise binary cross entropy on logits against constant targets.
  Value<T> bce_logits(Value<T> logits, Tensor<T> targets) {
    const Tensor<T>& lv = node(logits).val;
    if (!lv.same_shape(targets)) throw shape_error("bce_logits: target shape mismatch");
    Tensor<T> out = targets;
    for (int64_t i = 0; i < lv.numel(); ++i)
      out[i] = kernels::bce_with_logits_scalar(lv[i], targets[i]);
    Value<T> r = push(Op::kBceLogits, {logits.id}, std::move(out));
    nodes_[static_cast<size_t>(r.id)].aux = std::move(targets);
    return r;
  }

  // Scalar sum of elementwise products with a constant weight tensor; the
  // masked reduction used by every mean-over-span loss.
  Value<T> weighted_sum(Value<T> a, Tensor<T> weights) {
    const Tensor<T>& av = node(a).val;
    if (av.numel() != weights.numel()) throw shape_error("weighted_sum: weight length mismatch");
    T acc = T(0);
    for (int64_t i = 0; i < av.numel(); ++i) acc += av[i] * weights[i];
    Value<T> r = push(Op::kWeightedSum, {a.id}, Tensor<T>::scalar(acc));
    nodes_[static_cast<size_t>(r.id)].aux = std::move(weights);
    return r;
  }

  Value<T> sum(Value<T> a) {
    const Tensor<T>& av = node(a).val;
    T acc = T(0);
    for (int64_t i = 0; i < av.numel(); ++i) acc += av[i];
    return push(Op::kSumAll, {a.id}, Tensor<T>::scalar(acc));
  }

  void backward(Value<T> loss) {
    Node& ln = node(loss);
    if (ln.val.numel() != 1) throw contract_error("backward: loss must be scalar");
    if (!ln.requires_grad)
      throw contract_error("backward: loss does not depend on any parameter");
    for (auto& n : nodes_) {
      if (n.requires_grad && n.grad.numel() == 0) {
        n.grad = n.val;
        n.grad.fill(T(0));
      }
    }
    ln.grad[0] = T(1);
    for (int32_t id = static_cast<int32_t>(nodes_.size()) - 1; id >= 0; --id) {
      Node& n = nodes_[static_cast<size_t>(id)];
      if (!n.requires_grad || n.op == Op::kLeaf || n.op == Op::kParam) continue;
      backprop(n);
    }
    for (auto& [slot, id] : param_nodes_) {
      const Node& n = nodes_[static_cast<size_t>(id)];
      for (int64_t i = 0; i < n.grad.numel(); ++i) slot->grad[i] += n.grad[i];
    }
  }

  const Tensor<T>& value_of(int32_t id) const { return nodes_[static_cast<size_t>(id)].val; }
  const Tensor<T>& grad_of(int32_t id) const { return nodes_[static_cast<size_t>(id)].grad; }
  size_t size() const { return nodes_.size(); }

  bool all_values_finite() const {
    for (const auto& n : nodes_)
      if (!n.val.all_finite()) return false;
    return true;
  }

 private:
  struct Node {
    Op op;
    std::vector<int32_t> in;
    Tensor<T> val;
    Tensor<T> grad;
    bool requires_grad = false;
    std::vector<int32_t> ints;
    Tensor<T> aux;
    T scalar = T(0);
    ParamSlot<T>* slot = nullptr;
  };

  Node& node(Value<T> v) {
    if (v.g != this) throw contract_error("value belongs to a different graph");
    return nodes_[static_cast<size_t>(v.id)];
  }
  const Node& node(Value<T> v) const {
    if (v.g != this) throw contract_error("value belongs to a different graph");
    return nodes_[static_cast<size_t>(v.id)];
  }

  Value<T> push(Op op, std::initializer_list<int32_t> in, Tensor<T> val, bool rg_override = false) {
    return push_multi(op, std::vector<int32_t>(in), std::move(val), rg_override);
  }

  Value<T> push_multi(Op op, std::vector<int32_t> in, Tensor<T> val, bool rg_override = false) {
    Node n;
    n.op = op;
    n.in = std::move(in);
    n.val = std::move(val);
    n.requires_grad = rg_override;
    for (int32_t i : n.in)
      if (nodes_[static_cast<size_t>(i)].requires_grad) n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return Value<T>{this, static_cast<int32_t>(nodes_.size() - 1)};
  }

  void require_same_shape(Value<T> a, Value<T> b, const char* what) {
    if (!node(a).val.same_shape(node(b).val))
      throw shape_error(std::string(what) + ": " + node(a).val.shape_str() + " vs " +
                        node(b).val.shape_str());
  }

  Tensor<T>* grad_ptr(int32_t id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    return n.requires_grad ? &n.grad : nullptr;
  }

  void backprop(Node& n) {
    const Tensor<T>& go = n.grad;
    switch (n.op) {
      case Op::kAdd: {
        if (auto* g = grad_ptr(n.in[0]))
          for (int64_t i = 0; i < go.numel(); ++i) (*g)[i] += go[i];
        if (auto* g = grad_ptr(n.in[1]))
          for (int64_t i = 0; i < go.numel(); ++i) (*g)[i] += go[i];
        break;
      }
      case Op::kSub: {
        if (auto* g = grad_ptr(n.in[0]))
          for (int64_t i = 0; i < go.numel(); ++i) (*g)[i] += go[i];
        if (auto* g = grad_ptr(n.in[1]))
          for (int64_t i = 0; i < go.numel(); ++i) (*g)[i] -= go[i];
        break;
      }
      case Op::kScale: {
        if (auto* g = grad_ptr(n.in[0]))
          for (int64_t i = 0; i < go.numel(); ++i) (*g)[i] += n.scalar * go[i];
        break;
      }
      case Op::kAddRowVec: {
        if (auto* g = grad_ptr(n.in[0]))
          for (int64_t i = 0; i < go.numel(); ++i) (*g)[i] += go[i];
        if (auto* g = grad_ptr(n.in[1]))
          for (int64_t i = 0; i < go.rows(); ++i)
            for (int64_t j = 0; j < go.cols(); ++j) (*g)[j] += go(i, j);
        break;
      }
      case Op::kMatMul: {
        const Tensor<T>& a = nodes_[static_cast<size_t>(n.in[0])].val;
        const Tensor<T>& b = nodes_[static_cast<size_t>(n.in[1])].val;
        if (auto* g = grad_ptr(n.in[0])) kernels::matmul_nt_accum(go, b, *g);
        if (auto* g = grad_ptr(n.in[1])) kernels::matmul_tn_accum(a, go, *g);
        break;
      }
      case Op::kMatMulNT: {
        const Tensor<T>& a = nodes_[static_cast<size_t>(n.in[0])].val;
        const Tensor<T>& b = nodes_[static_cast<size_t>(n.in[1])].val;
        if (auto* g = grad_ptr(n.in[0])) kernels::matmul_accum(go, b, *g);
        if (auto* g = grad_ptr(n.in[1])) kernels::matmul_tn_accum(go, a, *g);
        break;
      }
      case Op::kRelu: {
        const Tensor<T>& x = nodes_[static_cast<size_t>(n.in[0])].val;
        if (auto* g = grad_ptr(n.in[0]))
          for (int64_t i = 0; i < go.numel(); ++i)
            if (x[i] > T(0)) (*g)[i] += go[i];
        break;
      }
      case Op::kSigmoid: {
        if (auto* g = grad_ptr(n.in[0]))
          for (int64_t i = 0; i < go.numel(); ++i)
            (*g)[i] += go[i] * n.val[i] * (T(1) - n.val[i]);
        break;
      }
      case Op::kSoftmaxRows: {
        auto* g = grad_ptr(n.in[0]);
        if (!g) break;
        const int64_t r = n.val.rows(), c = n.val.cols();
        for (int64_t i = 0; i < r; ++i) {
          T dot = T(0);
          for (int64_t j = 0; j < c; ++j) dot += go(i, j) * n.val(i, j);
          for (int64_t j = 0; j < c; ++j) (*g)(i, j) += n.val(i, j) * (go(i, j) - dot);
        }
        break;
      }
      case Op::kLayerNorm: {
        const Tensor<T>& x = nodes_[static_cast<size_t>(n.in[0])].val;
        const Tensor<T>& gain = nodes_[static_cast<size_t>(n.in[1])].val;
        const int64_t r = x.rows(), c = x.cols();
        auto* gx = grad_ptr(n.in[0]);
        auto* gg = grad_ptr(n.in[1]);
        auto* gb = grad_ptr(n.in[2]);
        for (int64_t i = 0; i < r; ++i) {
          const T mean = n.aux(i, 0);
          const T rstd = n.aux(i, 1);
          T sum_dxh = T(0), sum_dxh_xh = T(0);
          for (int64_t j = 0; j < c; ++j) {
            const T xh = (x(i, j) - mean) * rstd;
            const T dxh = go(i, j) * gain[j];
            sum_dxh += dxh;
            sum_dxh_xh += dxh * xh;
            if (gg) (*gg)[j] += go(i, j) * xh;
            if (gb) (*gb)[j] += go(i, j);
          }
          if (gx) {
            const T inv_c = T(1) / T(c);
            for (int64_t j = 0; j < c; ++j) {
              const T xh = (x(i, j) - mean) * rstd;
              const T dxh = go(i, j) * gain[j];
              (*gx)(i, j) += rstd * (dxh - inv_c * sum_dxh - xh * inv_c * sum_dxh_xh);
            }
          }
        }
        break;
      }
      case Op::kEmbed: {
        auto* g = grad_ptr(n.in[0]);
        if (!g) break;
        const int64_t c = n.val.cols();
        for (size_t i = 0; i < n.ints.size(); ++i)
          for (int64_t j = 0; j < c; ++j)
            (*g)(n.ints[i], j) += go(static_cast<int64_t>(i), j);
        break;
      }
      case Op::kConcatRows: {
        int64_t at = 0;
        for (int32_t src : n.in) {
          const int64_t rr = nodes_[static_cast<size_t>(src)].val.rows();
          if (auto* g = grad_ptr(src))
            for (int64_t i = 0; i < rr; ++i)
              for (int64_t j = 0; j < go.cols(); ++j) (*g)(i, j) += go(at + i, j);
          at += rr;
        }
        break;
      }
      case Op::kConcatCols: {
        int64_t at = 0;
        for (int32_t src : n.in) {
          const int64_t cc = nodes_[static_cast<size_t>(src)].val.cols();
          if (auto* g = grad_ptr(src))
            for (int64_t i = 0; i < go.rows(); ++i)
              for (int64_t j = 0; j < cc; ++j) (*g)(i, j) += go(i, at + j);
          at += cc;
        }
        break;
      }
      case Op::kSliceRows: {
        auto* g = grad_ptr(n.in[0]);
        if (!g) break;
        const int64_t r0 = n.ints[0];
        for (int64_t i = 0; i < go.rows(); ++i)
          for (int64_t j = 0; j < go.cols(); ++j) (*g)(r0 + i, j) += go(i, j);
        break;
      }
      case Op::kCrossEntropyRows: {
        auto* g = grad_ptr(n.in[0]);
        if (!g) break;
        const int64_t v = g->cols();
        for (int64_t i = 0; i < n.val.rows(); ++i) {
          const int32_t t = n.ints[static_cast<size_t>(i)];
          if (t < 0) continue;
          const T gi = go[i];
          for (int64_t j = 0; j < v; ++j) (*g)(i, j) += gi * n.aux(i, j);
          (*g)(i, t) -= gi;
        }
        break;
      }
      case Op::kBceLogits: {
        auto* g = grad_ptr(n.in[0]);
        if (!g) break;
        const Tensor<T>& x = nodes_[static_cast<size_t>(n.in[0])].val;
        for (int64_t i = 0; i < go.numel(); ++i)
          (*g)[i] += go[i] * (kernels::sigmoid_scalar(x[i]) - n.aux[i]);
        break;
      }
      case Op::kWeightedSum: {
        auto* g = grad_ptr(n.in[0]);
        if (!g) break;
        const T gi = go[0];
        for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += gi * n.aux[i];
        break;
      }
      case Op::kSumAll: {
        auto* g = grad_ptr(n.in[0]);
        if (!g) break;
        const T gi = go[0];
        for (int64_t i = 0; i < g->numel(); ++i) (*g)[i] += gi;
        break;
      }
      case Op::kLeaf:
      case Op::kParam:
        break;
    }
  }

  std::vector<Node> nodes_;
  std::unordered_map<ParamSlot<T>*, int32_t> param_nodes_;

  friend struct Value<T>;
};

template <class T>
const Tensor<T>& Value<T>::val() const {
  return g->value_of(id);
}

template <class T>
const Tensor<T>& Value<T>::grad() const {
  return g->grad_of(id);
}

}  // namespace mutadelta::numkit
