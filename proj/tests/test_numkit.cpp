#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mutadelta/grad_check.hpp"
#include "mutadelta/graph.hpp"
#include "mutadelta/ops.hpp"
#include "mutadelta/optim.hpp"
#include "mutadelta/rng.hpp"

using namespace mutadelta;
using namespace mutadelta::numkit;

namespace {

// Independent wide-precision oracles: direct formulas in long double, no
// shared code with the library kernels.
std::vector<long double> oracle_softmax(const std::vector<long double>& x) {
  long double mx = x[0];
  for (long double v : x) mx = std::max(mx, v);
  long double z = 0;
  std::vector<long double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    out[i] = expl(x[i] - mx);
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return out;
}

long double oracle_cross_entropy(const std::vector<long double>& x, int t) {
  long double mx = x[0];
  for (long double v : x) mx = std::max(mx, v);
  long double z = 0;
  for (long double v : x) z += expl(v - mx);
  return mx + logl(z) - x[static_cast<size_t>(t)];
}

// Step-by-step cross-attention in long double with explicit loops.
std::vector<std::vector<long double>> oracle_cross_attention(
    const std::vector<std::vector<long double>>& q, const std::vector<std::vector<long double>>& k,
    const std::vector<std::vector<long double>>& v, const std::vector<std::vector<long double>>& wq,
    const std::vector<long double>& bq, const std::vector<std::vector<long double>>& wk,
    const std::vector<long double>& bk, const std::vector<std::vector<long double>>& wv,
    const std::vector<long double>& bv) {
  auto project = [](const std::vector<std::vector<long double>>& x,
                    const std::vector<std::vector<long double>>& w,
                    const std::vector<long double>& b) {
    std::vector<std::vector<long double>> y(x.size(), std::vector<long double>(w[0].size(), 0));
    for (size_t i = 0; i < x.size(); ++i)
      for (size_t j = 0; j < w[0].size(); ++j) {
        long double acc = b[j];
        for (size_t l = 0; l < w.size(); ++l) acc += x[i][l] * w[l][j];
        y[i][j] = acc;
      }
    return y;
  };
  auto qh = project(q, wq, bq);
  auto kh = project(k, wk, bk);
  auto vh = project(v, wv, bv);
  const long double scale = 1.0L / sqrtl(static_cast<long double>(qh[0].size()));
  std::vector<std::vector<long double>> out(qh.size(), std::vector<long double>(vh[0].size(), 0));
  for (size_t i = 0; i < qh.size(); ++i) {
    std::vector<long double> scores(kh.size());
    for (size_t j = 0; j < kh.size(); ++j) {
      long double acc = 0;
      for (size_t l = 0; l < qh[0].size(); ++l) acc += qh[i][l] * kh[j][l];
      scores[j] = acc * scale;
    }
    auto attn = oracle_softmax(scores);
    for (size_t j = 0; j < kh.size(); ++j)
      for (size_t l = 0; l < vh[0].size(); ++l) out[i][l] += attn[j] * vh[j][l];
  }
  return out;
}

template <class T>
Tensor<T> random_tensor(Rng& rng, int64_t r, int64_t c, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t = Tensor<T>::zeros(r, c);
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

}  // namespace

TEST_SUITE("rng") {
  TEST_CASE("same seed reproduces the stream") {
    Rng a = Rng::seeded(7), b = Rng::seeded(7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  }

  TEST_CASE("split streams differ from parent and from each other") {
    Rng root = Rng::seeded(7);
    Rng a = root.split("alpha"), b = root.split("beta");
    CHECK(a.next_u64() != b.next_u64());
    CHECK(root.split("alpha").next_u64() == Rng::seeded(7).split("alpha").next_u64());
  }

  TEST_CASE("state round trip continues bit-exactly") {
    Rng a = Rng::seeded(11);
    for (int i = 0; i < 17; ++i) a.next_u64();
    Rng b;
    b.set_state(a.key(), a.counter());
    for (int i = 0; i < 50; ++i) CHECK(a.next_u64() == b.next_u64());
  }

  TEST_CASE("uniform_int stays in range and covers values") {
    Rng a = Rng::seeded(3);
    std::vector<int> seen(5, 0);
    for (int i = 0; i < 1000; ++i) seen[a.uniform_int(5)] += 1;
    for (int c : seen) CHECK(c > 100);
    CHECK_THROWS_AS(a.uniform_int(0), contract_error);
  }

  TEST_CASE("normal is roughly centered with the requested spread") {
    Rng a = Rng::seeded(5);
    double sum = 0, sq = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      double x = a.normal(0.0, 0.02);
      sum += x;
      sq += x * x;
    }
    CHECK(std::abs(sum / n) < 1e-3);
    CHECK(std::sqrt(sq / n) == doctest::Approx(0.02).epsilon(0.05));
  }
}

TEST_SUITE("softmax") {
  TEST_CASE("two equal logits split evenly") {
    auto p = softmax<double>({0.0, 0.0});
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);
  }

  TEST_CASE("matches the wide-precision oracle") {
    auto p = softmax<double>({1.0, 2.0, 3.0});
    auto o = oracle_softmax({1.0L, 2.0L, 3.0L});
    for (int i = 0; i < 3; ++i)
      CHECK(std::abs(p[static_cast<size_t>(i)] - static_cast<double>(o[static_cast<size_t>(i)])) < 1e-12);
  }

  TEST_CASE("shift invariance gives exact uniform for constant rows") {
    for (double x : {-1e6, 0.0, 3.5, 1e6, 700.0}) {
      auto p = softmax<double>({x, x, x, x});
      for (double v : p) CHECK(v == 0.25);
    }
  }

  TEST_CASE("rejects non-finite logits") {
    CHECK_THROWS_AS(softmax<double>({1.0, std::nan("")}), numeric_error);
    CHECK_THROWS_AS(softmax<double>({1.0, INFINITY}), numeric_error);
  }

  TEST_CASE("sums to one and preserves order on random vectors") {
    Rng rng = Rng::seeded(42);
    for (int it = 0; it < 200; ++it) {
      const size_t n = 2 + rng.uniform_int(30);
      std::vector<double> x(n);
      for (auto& v : x) v = rng.uniform(-50, 50);
      auto p = softmax<double>(x);
      double s = 0;
      for (double v : p) s += v;
      CHECK(std::abs(s - 1.0) < 1e-9);
      for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
          if (x[i] < x[j]) CHECK(p[i] <= p[j]);
    }
  }
}

TEST_SUITE("cross_entropy") {
  TEST_CASE("uniform logits over 4 classes give ln 4") {
    CHECK(cross_entropy<double>({1.0, 1.0, 1.0, 1.0}, 2) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }

  TEST_CASE("dominant true logit drives the loss to zero") {
    CHECK(cross_entropy<double>({100.0, 0.0, 0.0}, 0) < 1e-12);
  }

  TEST_CASE("matches the wide-precision oracle") {
    const double got = cross_entropy<double>({1.0, 2.0, 3.0}, 0);
    const long double want = oracle_cross_entropy({1.0L, 2.0L, 3.0L}, 0);
    CHECK(std::abs(got - static_cast<double>(want)) < 1e-12);
  }

  TEST_CASE("invariant under uniform logit shifts") {
    Rng rng = Rng::seeded(9);
    for (int it = 0; it < 50; ++it) {
      std::vector<double> x(6);
      for (auto& v : x) v = rng.uniform(-5, 5);
      const int t = static_cast<int>(rng.uniform_int(6));
      const double base = cross_entropy<double>(x, t);
      for (double shift : {1e3, -1e3}) {
        std::vector<double> y = x;
        for (auto& v : y) v += shift;
        CHECK(cross_entropy<double>(y, t) == doctest::Approx(base).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("rejects out-of-range targets") {
    CHECK_THROWS_AS(cross_entropy<double>({1.0, 2.0}, 2), index_error);
    CHECK_THROWS_AS(cross_entropy<double>({1.0, 2.0}, -1), index_error);
  }
}

TEST_SUITE("cross_attention") {
  TEST_CASE("single query single key reduces to the projected value") {
    Rng rng = Rng::seeded(1);
    ParamSet<double> ps;
    ps.add("wq", random_tensor<double>(rng, 4, 4));
    ps.add("bq", random_tensor<double>(rng, 4, 1));
    ps.add("wk", random_tensor<double>(rng, 4, 4));
    ps.add("bk", random_tensor<double>(rng, 4, 1));
    ps.add("wv", random_tensor<double>(rng, 4, 3));
    ps.add("bv", random_tensor<double>(rng, 3, 1));
    Graph<double> g;
    Value<double> q = g.input(random_tensor<double>(rng, 1, 4));
    Value<double> kv = g.input(random_tensor<double>(rng, 1, 4));
    AttnWeights<double> w{g.param(ps, "wq"), g.param(ps, "bq"), g.param(ps, "wk"),
                          g.param(ps, "bk"), g.param(ps, "wv"), g.param(ps, "bv")};
    Value<double> out = cross_attention(g, q, kv, kv, w);
    Value<double> vh = g.add_rowvec(g.matmul(kv, w.wv), w.bv);
    CHECK(out.val().rows() == 1);
    CHECK(out.val().cols() == 3);
    CHECK(out.val().max_abs_diff(vh.val()) < 1e-15);
  }

  TEST_CASE("identical key rows yield uniform attention") {
    Rng rng = Rng::seeded(2);
    ParamSet<double> ps;
    ps.add("wq", random_tensor<double>(rng, 4, 4));
    ps.add("bq", random_tensor<double>(rng, 4, 1));
    ps.add("wk", random_tensor<double>(rng, 4, 4));
    ps.add("bk", random_tensor<double>(rng, 4, 1));
    ps.add("wv", random_tensor<double>(rng, 4, 4));
    ps.add("bv", random_tensor<double>(rng, 4, 1));
    Tensor<double> keys = Tensor<double>::zeros(3, 4);
    Tensor<double> krow = random_tensor<double>(rng, 1, 4);
    for (int64_t i = 0; i < 3; ++i)
      for (int64_t j = 0; j < 4; ++j) keys(i, j) = krow(0, j);
    Tensor<double> values = random_tensor<double>(rng, 3, 4);

    Graph<double> g;
    AttnWeights<double> w{g.param(ps, "wq"), g.param(ps, "bq"), g.param(ps, "wk"),
                          g.param(ps, "bk"), g.param(ps, "wv"), g.param(ps, "bv")};
    Value<double> out =
        cross_attention(g, g.input(random_tensor<double>(rng, 2, 4)), g.input(keys),
                        g.input(values), w);
    Value<double> vh = g.add_rowvec(g.matmul(g.input(values), w.wv), w.bv);
    for (int64_t j = 0; j < 4; ++j) {
      const double mean = (vh.val()(0, j) + vh.val()(1, j) + vh.val()(2, j)) / 3.0;
      CHECK(out.val()(0, j) == doctest::Approx(mean).epsilon(1e-12));
      CHECK(out.val()(1, j) == doctest::Approx(mean).epsilon(1e-12));
    }
  }

  TEST_CASE("random instance matches the step-by-step oracle") {
    Rng rng = Rng::seeded(3);
    const int64_t M = 2, N = 3, D = 4, DK = 4, DV = 5;
    auto to_vv = [](const Tensor<double>& t) {
      std::vector<std::vector<long double>> v(static_cast<size_t>(t.rows()),
                                              std::vector<long double>(static_cast<size_t>(t.cols())));
      for (int64_t i = 0; i < t.rows(); ++i)
        for (int64_t j = 0; j < t.cols(); ++j) v[static_cast<size_t>(i)][static_cast<size_t>(j)] = t(i, j);
      return v;
    };
    auto to_v = [](const Tensor<double>& t) {
      std::vector<long double> v(static_cast<size_t>(t.numel()));
      for (int64_t i = 0; i < t.numel(); ++i) v[static_cast<size_t>(i)] = t[i];
      return v;
    };
    Tensor<double> q = random_tensor<double>(rng, M, D), k = random_tensor<double>(rng, N, D),
                   v = random_tensor<double>(rng, N, D), wq = random_tensor<double>(rng, D, DK),
                   bq = random_tensor<double>(rng, DK, 1), wk = random_tensor<double>(rng, D, DK),
                   bk = random_tensor<double>(rng, DK, 1), wv = random_tensor<double>(rng, D, DV),
                   bv = random_tensor<double>(rng, DV, 1);
    ParamSet<double> ps;
    ps.add("wq", wq);
    ps.add("bq", bq);
    ps.add("wk", wk);
    ps.add("bk", bk);
    ps.add("wv", wv);
    ps.add("bv", bv);
    Graph<double> g;
    AttnWeights<double> w{g.param(ps, "wq"), g.param(ps, "bq"), g.param(ps, "wk"),
                          g.param(ps, "bk"), g.param(ps, "wv"), g.param(ps, "bv")};
    Value<double> out = cross_attention(g, g.input(q), g.input(k), g.input(v), w);
    auto want = oracle_cross_attention(to_vv(q), to_vv(k), to_vv(v), to_vv(wq), to_v(bq),
                                       to_vv(wk), to_v(bk), to_vv(wv), to_v(bv));
    for (int64_t i = 0; i < M; ++i)
      for (int64_t j = 0; j < DV; ++j)
        CHECK(std::abs(out.val()(i, j) -
                       static_cast<double>(want[static_cast<size_t>(i)][static_cast<size_t>(j)])) < 1e-12);

    Tensor<double> raw = cross_attention_raw(q, k, v, wq, bq, wk, bk, wv, bv);
    CHECK(raw.max_abs_diff(out.val()) == 0.0);
  }

  TEST_CASE("shape mismatches are rejected") {
    Graph<double> g;
    Rng rng = Rng::seeded(4);
    Value<double> a = g.input(random_tensor<double>(rng, 2, 3));
    Value<double> b = g.input(random_tensor<double>(rng, 2, 4));
    CHECK_THROWS_AS(g.matmul(a, b), shape_error);
    CHECK_THROWS_AS(g.add(a, b), shape_error);
  }
}

TEST_SUITE("tape") {
  TEST_CASE("gradient of a plain sum is all ones") {
    Rng rng = Rng::seeded(5);
    ParamSet<double> ps;
    ps.add("w", random_tensor<double>(rng, 3, 4));
    Graph<double> g;
    Value<double> loss = g.sum(g.param(ps, "w"));
    g.backward(loss);
    for (int64_t i = 0; i < 12; ++i) CHECK(ps.at("w").grad[i] == 1.0);
  }

  TEST_CASE("zero-scaled graphs produce exactly zero gradients") {
    Rng rng = Rng::seeded(6);
    ParamSet<double> ps;
    ps.add("w", random_tensor<double>(rng, 3, 4));
    Graph<double> g;
    Value<double> w = g.param(ps, "w");
    Value<double> loss = g.scale(g.sum(g.relu(w)), 0.0);
    g.backward(loss);
    for (int64_t i = 0; i < 12; ++i) CHECK(ps.at("w").grad[i] == 0.0);
  }

  TEST_CASE("shared parameter nodes accumulate both uses") {
    ParamSet<double> ps;
    ps.add("w", Tensor<double>::filled(2, 3.0));
    Graph<double> g;
    Value<double> a = g.param(ps, "w");
    Value<double> b = g.param(ps, "w");
    CHECK(a.id == b.id);
    Value<double> loss = g.sum(g.add(a, b));
    g.backward(loss);
    CHECK(ps.at("w").grad[0] == 2.0);
    CHECK(ps.at("w").grad[1] == 2.0);
  }

  TEST_CASE("composite fragment matches central differences") {
    Rng rng = Rng::seeded(7);
    ParamSet<long double> ps;
    ps.add("w1", random_tensor<long double>(rng, 4, 6));
    ps.add("b1", random_tensor<long double>(rng, 6, 1));
    ps.add("w2", random_tensor<long double>(rng, 6, 3));
    ps.add("b2", random_tensor<long double>(rng, 3, 1));
    ps.add("ln_g", Tensor<long double>::filled(6, 1.0L));
    ps.add("ln_b", Tensor<long double>::zeros(6));
    Tensor<long double> x = random_tensor<long double>(rng, 5, 4);
    auto build = [&x](Graph<long double>& g, ParamSet<long double>& p) {
      Value<long double> h = g.add_rowvec(g.matmul(g.input(x), g.param(p, "w1")), g.param(p, "b1"));
      h = g.layer_norm(g.relu(h), g.param(p, "ln_g"), g.param(p, "ln_b"));
      Value<long double> logits = g.add_rowvec(g.matmul(h, g.param(p, "w2")), g.param(p, "b2"));
      Value<long double> probs = g.softmax_rows(logits);
      return g.scale(g.sum(g.sigmoid(probs)), 0.25L);
    };
    auto rep = grad_check<long double>(build, ps, 1e-5L, 6);
    CHECK(rep.max_rel_err < 1e-6L);
    CHECK(rep.coords_checked > 0);
  }

  TEST_CASE("all tape values stay finite on a mixed fragment") {
    Rng rng = Rng::seeded(8);
    ParamSet<double> ps;
    ps.add("w", random_tensor<double>(rng, 4, 4));
    Graph<double> g;
    Value<double> w = g.param(ps, "w");
    Value<double> y = g.softmax_rows(g.scale(g.matmul_nt(w, w), 100.0));
    Value<double> loss = g.sum(y);
    g.backward(loss);
    CHECK(g.all_values_finite());
  }

  TEST_CASE("cross entropy rows skip ignored targets exactly") {
    Graph<double> g;
    Tensor<double> logits = Tensor<double>::matrix(3, 4, {1, 2, 3, 4, 0, 0, 0, 0, 5, 1, 1, 1});
    ParamSet<double> ps;
    ps.add("l", logits);
    Value<double> lv = g.param(ps, "l");
    Value<double> ce = g.cross_entropy_rows(lv, {-1, 1, 0});
    CHECK(ce.val()[0] == 0.0);
    CHECK(ce.val()[1] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    Value<double> loss = g.sum(ce);
    g.backward(loss);
    for (int64_t j = 0; j < 4; ++j) CHECK(ps.at("l").grad(0, j) == 0.0);
  }
}

TEST_SUITE("grad_check") {
  TEST_CASE("linear plus softmax cross entropy passes below 1e-4") {
    Rng rng = Rng::seeded(9);
    ParamSet<long double> ps;
    ps.add("w", random_tensor<long double>(rng, 5, 7));
    ps.add("b", random_tensor<long double>(rng, 7, 1));
    Tensor<long double> x = random_tensor<long double>(rng, 3, 5);
    std::vector<int32_t> targets{2, 6, 0};
    auto build = [&](Graph<long double>& g, ParamSet<long double>& p) {
      Value<long double> logits =
          g.add_rowvec(g.matmul(g.input(x), g.param(p, "w")), g.param(p, "b"));
      Value<long double> ce = g.cross_entropy_rows(logits, targets);
      return g.scale(g.sum(ce), 1.0L / 3.0L);
    };
    auto rep = grad_check<long double>(build, ps, 1e-5L, 8);
    CHECK(rep.max_rel_err < 1e-4L);
  }

  TEST_CASE("cross attention block passes below 1e-4") {
    Rng rng = Rng::seeded(10);
    ParamSet<long double> ps;
    ps.add("wq", random_tensor<long double>(rng, 4, 4));
    ps.add("bq", random_tensor<long double>(rng, 4, 1));
    ps.add("wk", random_tensor<long double>(rng, 4, 4));
    ps.add("bk", random_tensor<long double>(rng, 4, 1));
    ps.add("wv", random_tensor<long double>(rng, 4, 4));
    ps.add("bv", random_tensor<long double>(rng, 4, 1));
    Tensor<long double> q = random_tensor<long double>(rng, 3, 4);
    Tensor<long double> kv = random_tensor<long double>(rng, 5, 4);
    auto build = [&](Graph<long double>& g, ParamSet<long double>& p) {
      AttnWeights<long double> w{g.param(p, "wq"), g.param(p, "bq"), g.param(p, "wk"),
                                 g.param(p, "bk"), g.param(p, "wv"), g.param(p, "bv")};
      return g.sum(g.sigmoid(cross_attention(g, g.input(q), g.input(kv), g.input(kv), w)));
    };
    auto rep = grad_check<long double>(build, ps, 1e-5L, 8);
    CHECK(rep.max_rel_err < 1e-4L);
  }

  TEST_CASE("rejects non-positive eps and non-scalar fragments") {
    ParamSet<long double> ps;
    ps.add("w", Tensor<long double>::filled(2, 1.0L));
    auto scalar_build = [](Graph<long double>& g, ParamSet<long double>& p) {
      return g.sum(g.param(p, "w"));
    };
    CHECK_THROWS_AS(grad_check<long double>(scalar_build, ps, 0.0L), contract_error);
    auto vec_build = [](Graph<long double>& g, ParamSet<long double>& p) {
      return g.relu(g.param(p, "w"));
    };
    CHECK_THROWS_AS(grad_check<long double>(vec_build, ps), contract_error);
  }
}

TEST_SUITE("adamw") {
  TEST_CASE("zero gradients with zero decay leave parameters untouched") {
    ParamSet<double> ps;
    ps.add("w", Tensor<double>::filled(4, 1.5));
    Tensor<double> before = ps.at("w").value;
    AdamW<double> opt(0.9, 0.999, 1e-8, 0.0);
    ps.zero_grads();
    opt.step(ps, 1e-3);
    CHECK(ps.at("w").value.bitwise_equal(before));
  }

  TEST_CASE("single step matches the hand-rolled update") {
    ParamSet<double> ps;
    ps.add("w", Tensor<double>::scalar(1.0));
    ps.at("w").grad[0] = 1.0;
    AdamW<double> opt(0.9, 0.999, 1e-8, 0.01);
    opt.step(ps, 1e-3);
    // Hand: m=0.1, v=0.001, mhat=1, vhat=1.
    const double want = 1.0 - 1e-3 * (1.0 / (1.0 + 1e-8) + 0.01 * 1.0);
    CHECK(ps.at("w").value[0] == doctest::Approx(want).epsilon(1e-15));
  }

  TEST_CASE("identical gradients keep twin parameters identical") {
    ParamSet<double> ps;
    ps.add("a", Tensor<double>::scalar(0.7));
    ps.add("b", Tensor<double>::scalar(0.7));
    AdamW<double> opt;
    Rng rng = Rng::seeded(11);
    for (int s = 0; s < 10; ++s) {
      const double gshared = rng.uniform(-1, 1);
      ps.at("a").grad[0] = gshared;
      ps.at("b").grad[0] = gshared;
      opt.step(ps, 1e-3);
      CHECK(ps.at("a").value[0] == ps.at("b").value[0]);
    }
  }

  TEST_CASE("identical runs are bitwise deterministic") {
    auto run = []() {
      ParamSet<double> ps;
      Rng rng = Rng::seeded(12);
      ps.add("w", random_tensor<double>(rng, 8, 8));
      AdamW<double> opt;
      for (int s = 0; s < 25; ++s) {
        for (int64_t i = 0; i < 64; ++i) ps.at("w").grad[i] = rng.uniform(-1, 1);
        opt.step(ps, 1e-3);
      }
      return ps.at("w").value;
    };
    CHECK(run().bitwise_equal(run()));
  }

  TEST_CASE("non-finite gradients raise a numeric error") {
    ParamSet<double> ps;
    ps.add("w", Tensor<double>::scalar(1.0));
    ps.at("w").grad[0] = std::nan("");
    AdamW<double> opt;
    CHECK_THROWS_AS(opt.step(ps, 1e-3), numeric_error);
  }
}

TEST_SUITE("schedule") {
  TEST_CASE("warmup peak floor and midpoint") {
    Schedule s{1e-4, 1e-5, 1000, 10000};
    CHECK(lr_at(s, 0) == 0.0);
    CHECK(lr_at(s, 500) == doctest::Approx(5e-5).epsilon(1e-12));
    CHECK(lr_at(s, 1000) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(lr_at(s, 10000) == doctest::Approx(1e-5).epsilon(1e-12));
    CHECK(lr_at(s, 20000) == 1e-5);
  }

  TEST_CASE("continuous at the warmup boundary and monotone after") {
    Schedule s{1e-4, 1e-5, 100, 5000};
    CHECK(std::abs(lr_at(s, 100) - lr_at(s, 101)) < 1e-7);
    double prev = lr_at(s, 100);
    for (int64_t t = 101; t <= 5000; t += 7) {
      const double cur = lr_at(s, t);
      CHECK(cur <= prev + 1e-18);
      prev = cur;
    }
  }

  TEST_CASE("invalid schedules are rejected") {
    CHECK_THROWS_AS(lr_at(Schedule{1e-4, 1e-5, 0, 100}, 1), contract_error);
    CHECK_THROWS_AS(lr_at(Schedule{1e-4, 1e-5, 100, 100}, 1), contract_error);
    CHECK_THROWS_AS(lr_at(Schedule{1e-5, 1e-4, 10, 100}, 1), contract_error);
    CHECK_THROWS_AS(lr_at(Schedule{1e-4, 1e-5, 10, 100}, -1), contract_error);
  }
}
