#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "mutadelta/objectives.hpp"

using namespace mutadelta;
using numkit::AdamW;
using numkit::Graph;
using numkit::ParamSet;
using numkit::Rng;
using numkit::Tensor;
using numkit::Value;
using train::MaskPlan;
using train::ObjectiveConfig;
using train::Objectives;
using train::StepMetrics;

namespace {

model::DeltaNetConfig tiny_cfg() {
  model::DeltaNetConfig cfg;
  cfg.plm.d = 8;
  cfg.plm.n_layers = 1;
  cfg.plm.n_heads = 2;
  cfg.plm.d_ff = 16;
  cfg.plm.max_len = 48;
  cfg.llm.d = 8;
  cfg.llm.n_layers = 1;
  cfg.llm.n_heads = 2;
  cfg.llm.d_ff = 16;
  cfg.llm.max_len = 128;
  cfg.k = 3;
  return cfg;
}

text::Vocabulary make_vocab(const std::vector<std::string>& extra) {
  std::vector<std::string> texts = text::template_strings();
  texts.insert(texts.end(), extra.begin(), extra.end());
  return text::Vocabulary::build(texts);
}

struct Fixture {
  model::DeltaNetConfig cfg;
  text::Vocabulary vocab;
  model::DeltaNetwork<double> net;
  ParamSet<double> ps;

  explicit Fixture(const std::vector<std::string>& texts, uint64_t seed = 7)
      : cfg(tiny_cfg()),
        vocab(make_vocab(texts)),
        net(cfg, vocab.size()) {
    Rng rng = Rng::seeded(seed);
    net.register_params(ps, rng);
  }
};

double span_ce_oracle(const Tensor<double>& logits, const std::vector<int32_t>& targets) {
  double acc = 0;
  int64_t n = 0;
  const int64_t v = logits.cols();
  for (int64_t i = 0; i < logits.rows(); ++i) {
    const int32_t t = targets[static_cast<size_t>(i)];
    if (t < 0) continue;
    acc += numkit::kernels::log_sum_exp_row(logits.data() + i * v, v) - logits(i, t);
    ++n;
  }
  return acc / static_cast<double>(n);
}

bool grad_nonzero(const ParamSet<double>& ps, const std::string& name) {
  const Tensor<double>& g = ps.at(name).grad;
  for (int64_t i = 0; i < g.numel(); ++i)
    if (g[i] != 0.0) return true;
  return false;
}

long double softplus_l(long double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

TEST_SUITE("mask_plan") {
  TEST_CASE("size follows the rounded rate with a floor of one") {
    Rng rng = Rng::seeded(11);
    for (int64_t L = 1; L <= 60; ++L) {
      MaskPlan plan = train::make_mask_plan(L, 0.15, rng);
      const int64_t want = std::max<int64_t>(1, std::llround(0.15 * static_cast<double>(L)));
      CHECK(static_cast<int64_t>(plan.positions.size()) == want);
      std::set<int64_t> seen;
      for (int64_t p : plan.positions) {
        CHECK(p >= 0);
        CHECK(p < L);
        seen.insert(p);
      }
      CHECK(static_cast<int64_t>(seen.size()) == want);
      CHECK(std::is_sorted(plan.positions.begin(), plan.positions.end()));
    }
  }

  TEST_CASE("rate one masks every position") {
    Rng rng = Rng::seeded(3);
    MaskPlan plan = train::make_mask_plan(9, 1.0, rng);
    REQUIRE(plan.positions.size() == 9);
    for (int64_t i = 0; i < 9; ++i) CHECK(plan.positions[static_cast<size_t>(i)] == i);
  }

  TEST_CASE("same seed reproduces the plan") {
    Rng a = Rng::seeded(42);
    Rng b = Rng::seeded(42);
    for (int rep = 0; rep < 20; ++rep) {
      MaskPlan pa = train::make_mask_plan(33, 0.3, a);
      MaskPlan pb = train::make_mask_plan(33, 0.3, b);
      CHECK(pa.positions == pb.positions);
    }
  }

  TEST_CASE("invalid inputs are rejected") {
    Rng rng = Rng::seeded(1);
    CHECK_THROWS_AS(train::make_mask_plan(0, 0.15, rng), contract_error);
    CHECK_THROWS_AS(train::make_mask_plan(10, 0.0, rng), contract_error);
    CHECK_THROWS_AS(train::make_mask_plan(10, -0.1, rng), contract_error);
    CHECK_THROWS_AS(train::make_mask_plan(10, 1.5, rng), contract_error);
  }
}

TEST_SUITE("engineering_loss") {
  TEST_CASE("zero logits over two positions give the frozen reference value") {
    for (int64_t m : {0, 1}) {
      Graph<double> g;
      Value<double> pos = g.input(Tensor<double>::zeros(2, 1));
      Value<double> res = g.input(Tensor<double>::zeros(2, 20));
      Value<double> loss = train::eng_loss_terms(g, pos, res, m, 4, 50.0);
      CHECK(loss.val().item() == doctest::Approx(20.670985377832596).epsilon(1e-12));
    }
  }

  TEST_CASE("random logits match a long double reference") {
    Rng rng = Rng::seeded(17);
    for (int rep = 0; rep < 50; ++rep) {
      const int64_t L = 1 + static_cast<int64_t>(rng.uniform_int(6));
      const int64_t m = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(L)));
      const int32_t to = static_cast<int32_t>(rng.uniform_int(20));
      const double lambda = 1.0 + static_cast<double>(rng.uniform_int(100));
      Tensor<double> pos = numkit::init_normal<double>(rng, L, 1, 2.0);
      Tensor<double> res = numkit::init_normal<double>(rng, L, 20, 2.0);
      Graph<double> g;
      Value<double> loss =
          train::eng_loss_terms(g, g.input(pos), g.input(res), m, to, lambda);
      long double ref = 0;
      for (int64_t i = 0; i < L; ++i) {
        const long double x = pos(i, 0);
        ref += (i == m ? lambda : 1.0L) * softplus_l(i == m ? -x : x);
      }
      ref /= static_cast<long double>(L);
      long double mx = res(m, 0);
      for (int64_t j = 1; j < 20; ++j) mx = std::max<long double>(mx, res(m, j));
      long double se = 0;
      for (int64_t j = 0; j < 20; ++j) se += std::exp(static_cast<long double>(res(m, j)) - mx);
      ref += mx + std::log(se) - res(m, to);
      CHECK(loss.val().item() == doctest::Approx(static_cast<double>(ref)).epsilon(1e-9));
    }
  }

  TEST_CASE("difference across lambda isolates the mutated position term") {
    Rng rng = Rng::seeded(23);
    const int64_t L = 5, m = 2;
    Tensor<double> pos = numkit::init_normal<double>(rng, L, 1, 1.0);
    Tensor<double> res = numkit::init_normal<double>(rng, L, 20, 1.0);
    auto eval = [&](double lambda) {
      Graph<double> g;
      return train::eng_loss_terms(g, g.input(pos), g.input(res), m, 7, lambda).val().item();
    };
    const double diff = eval(80.0) - eval(30.0);
    const double want =
        (80.0 - 30.0) / static_cast<double>(L) * static_cast<double>(softplus_l(-pos(m, 0)));
    CHECK(diff == doctest::Approx(want).epsilon(1e-9));
  }

  TEST_CASE("shape and argument validation") {
    Graph<double> g;
    Value<double> pos = g.input(Tensor<double>::zeros(3, 1));
    Value<double> wide = g.input(Tensor<double>::zeros(3, 2));
    Value<double> res = g.input(Tensor<double>::zeros(3, 20));
    Value<double> short_res = g.input(Tensor<double>::zeros(2, 20));
    CHECK_THROWS_AS(train::eng_loss_terms(g, wide, res, 0, 0, 50.0), shape_error);
    CHECK_THROWS_AS(train::eng_loss_terms(g, pos, short_res, 0, 0, 50.0), shape_error);
    CHECK_THROWS_AS(train::eng_loss_terms(g, pos, res, 3, 0, 50.0), index_error);
    CHECK_THROWS_AS(train::eng_loss_terms(g, pos, res, -1, 0, 50.0), index_error);
    CHECK_THROWS_AS(train::eng_loss_terms(g, pos, res, 0, 0, 0.0), contract_error);
  }
}

TEST_SUITE("pretrain_losses") {
  TEST_CASE("protein to text matches a raw decoding oracle") {
    Fixture f({"binds atp near the active site"});
    Objectives<double> obj(f.net, f.vocab);
    const std::string protein = "ACDEFGHIKL";
    const std::vector<int32_t> ids = f.vocab.encode("binds atp near the active site");

    Graph<double> g;
    Value<double> h_wt = f.net.plm().forward(g, f.ps, model::residue_ids(protein));
    Value<double> z_wt = f.net.encode_wildtype(g, f.ps, h_wt);
    const double loss = obj.loss_p2t(g, f.ps, z_wt, ids).val().item();

    Tensor<double> h_raw = f.net.plm().forward_raw(f.ps, model::residue_ids(protein));
    Tensor<double> z_raw = f.net.encode_wildtype_raw(f.ps, h_raw);
    text::PromptInputs in;
    in.text = ids;
    in.k_latent = f.cfg.k;
    text::PromptLayout lay = text::assemble_prompt(text::TemplateId::kPretrainP2T, in, f.vocab);
    Tensor<double> rows = model::embed_prompt_raw<double>(
        f.ps, f.net.llm(), lay, {{text::LatentRole::kWildtype, z_raw}});
    auto cache = f.net.llm().make_cache();
    Tensor<double> hidden = f.net.llm().prefill(f.ps, rows, cache);
    Tensor<double> logits = f.net.llm().logits_raw(f.ps, hidden);
    CHECK(loss == doctest::Approx(span_ce_oracle(logits, lay.next_targets)).epsilon(1e-12));
  }

  TEST_CASE("zeroed lm head makes the text loss log of vocab size") {
    Fixture f({"stabilizes the fold"});
    Objectives<double> obj(f.net, f.vocab);
    f.ps.at("llm.lm.w").value.fill(0.0);
    f.ps.at("llm.lm.b").value.fill(0.0);
    Graph<double> g;
    Value<double> h_wt = f.net.plm().forward(g, f.ps, model::residue_ids("MKTV"));
    Value<double> z_wt = f.net.encode_wildtype(g, f.ps, h_wt);
    const double loss =
        obj.loss_p2t(g, f.ps, z_wt, f.vocab.encode("stabilizes the fold")).val().item();
    CHECK(loss == doctest::Approx(std::log(static_cast<double>(f.vocab.size()))).epsilon(1e-12));
  }

  TEST_CASE("empty text is rejected") {
    Fixture f({"x"});
    Objectives<double> obj(f.net, f.vocab);
    Graph<double> g;
    Value<double> h_wt = f.net.plm().forward(g, f.ps, model::residue_ids("MK"));
    Value<double> z_wt = f.net.encode_wildtype(g, f.ps, h_wt);
    CHECK_THROWS_AS(obj.loss_p2t(g, f.ps, z_wt, {}), contract_error);
  }

  TEST_CASE("text to protein matches a hand computed masked cross entropy") {
    Fixture f({"loses thermal stability"});
    Objectives<double> obj(f.net, f.vocab);
    const std::string x = "ACDEFGHIKLMNPQRSTVWY";
    const std::vector<int32_t> ids = f.vocab.encode("loses thermal stability");
    MaskPlan plan;
    plan.positions = {1, 7, 19};

    Graph<double> g;
    const double loss = obj.loss_t2p(g, f.ps, x, ids, plan).val().item();

    Graph<double> h;
    text::PromptInputs in;
    in.text = ids;
    in.k_soft = f.cfg.k;
    text::PromptLayout lay = text::assemble_prompt(text::TemplateId::kPretrainT2P, in, f.vocab);
    Value<double> hidden = f.net.llm().forward_embedded(
        h, f.ps,
        model::embed_prompt(h, f.ps, f.net.llm(), lay,
                            {{text::LatentRole::kSoft, f.net.soft_tokens(h, f.ps)}}));
    Value<double> z = f.net.soft_token_summary(h, lay, hidden);
    Value<double> h_mask =
        f.net.plm().forward(h, f.ps, model::masked_residue_ids(x, plan.positions));
    Value<double> dh = f.net.decode_delta(h, f.ps, z, h_mask);
    model::MutationHeads<double> heads = f.net.predict_mutation(h, f.ps, h_mask, dh);
    const Tensor<double>& logits = heads.residue_logits.val();
    double oracle = 0;
    for (int64_t p : plan.positions) {
      const int64_t t = mutadata::residue_index(x[static_cast<size_t>(p)]);
      oracle += numkit::kernels::log_sum_exp_row(logits.data() + p * 20, 20) - logits(p, t);
    }
    oracle /= static_cast<double>(plan.positions.size());
    CHECK(loss == doctest::Approx(oracle).epsilon(1e-12));
  }

  TEST_CASE("text to protein depends on the conditioning text") {
    Fixture f({"gains activity", "loses activity"});
    Objectives<double> obj(f.net, f.vocab);
    MaskPlan plan;
    plan.positions = {0, 3};
    Graph<double> g;
    const double a =
        obj.loss_t2p(g, f.ps, "ACDEFGHI", f.vocab.encode("gains activity"), plan).val().item();
    const double b =
        obj.loss_t2p(g, f.ps, "ACDEFGHI", f.vocab.encode("loses activity"), plan).val().item();
    CHECK(a != b);
  }

  TEST_CASE("empty mask set and empty text are rejected") {
    Fixture f({"y"});
    Objectives<double> obj(f.net, f.vocab);
    Graph<double> g;
    MaskPlan empty;
    CHECK_THROWS_AS(obj.loss_t2p(g, f.ps, "MK", f.vocab.encode("y"), empty), contract_error);
    MaskPlan ok;
    ok.positions = {0};
    CHECK_THROWS_AS(obj.loss_t2p(g, f.ps, "MK", {}, ok), contract_error);
  }

  TEST_CASE("pair loss is the sum of both directions") {
    Fixture f({"transports ions"});
    Objectives<double> obj(f.net, f.vocab);
    mutadata::PretrainPair pair{"p1", "ACDEFGHIKL", "transports ions"};
    Rng mask_rng = Rng::seeded(5);
    Graph<double> g;
    StepMetrics m;
    const double total = obj.pretrain_loss(g, f.ps, pair, mask_rng, &m).val().item();
    CHECK(total == m.components["p2t"] + m.components["t2p"]);
    CHECK(m.total == total);
    CHECK(m.components["p2t"] > 0);
    CHECK(m.components["t2p"] > 0);
  }
}

TEST_SUITE("finetune_losses") {
  std::vector<std::string> corpus_texts() {
    return {"hydrolyzes peptide bonds", "the enzyme loses catalytic activity"};
  }

  mutadata::MutationRecord make_record() {
    mutadata::MutationRecord r;
    r.id = "r1";
    r.wt = "ACDEFGHIKL";
    r.mutation = mutadata::parse_mutation("C2W");
    r.function_text = "hydrolyzes peptide bonds";
    r.effect_text = "the enzyme loses catalytic activity";
    return r;
  }

  TEST_CASE("function loss matches a raw decoding oracle") {
    Fixture f(corpus_texts());
    Objectives<double> obj(f.net, f.vocab);
    mutadata::MutationRecord r = make_record();
    const std::vector<int32_t> func_ids = f.vocab.encode(r.function_text);

    Graph<double> g;
    Value<double> h_wt = f.net.plm().forward(g, f.ps, model::residue_ids(r.wt));
    Value<double> z_wt = f.net.encode_wildtype(g, f.ps, h_wt);
    const double loss = obj.loss_func(g, f.ps, z_wt, func_ids).val().item();

    Tensor<double> h_raw = f.net.plm().forward_raw(f.ps, model::residue_ids(r.wt));
    Tensor<double> z_raw = f.net.encode_wildtype_raw(f.ps, h_raw);
    text::PromptInputs in;
    in.function_text = func_ids;
    in.k_latent = f.cfg.k;
    text::PromptLayout lay =
        text::assemble_prompt(text::TemplateId::kFunctionPrediction, in, f.vocab);
    Tensor<double> rows = model::embed_prompt_raw<double>(
        f.ps, f.net.llm(), lay, {{text::LatentRole::kWildtype, z_raw}});
    auto cache = f.net.llm().make_cache();
    Tensor<double> logits =
        f.net.llm().logits_raw(f.ps, f.net.llm().prefill(f.ps, rows, cache));
    CHECK(loss == doctest::Approx(span_ce_oracle(logits, lay.next_targets)).epsilon(1e-12));
  }

  TEST_CASE("explanation loss matches a raw decoding oracle") {
    Fixture f(corpus_texts());
    Objectives<double> obj(f.net, f.vocab);
    mutadata::MutationRecord r = make_record();
    const std::string x_mt = mutadata::apply_mutation(r.wt, r.mutation);
    const std::vector<int32_t> round1 = obj.round1_ids(f.ps, r);
    const std::vector<int32_t> effect_ids = f.vocab.encode(r.effect_text);

    Graph<double> g;
    Value<double> h_wt = f.net.plm().forward(g, f.ps, model::residue_ids(r.wt));
    Value<double> h_mt = f.net.plm().forward(g, f.ps, model::residue_ids(x_mt));
    Value<double> z_wt = f.net.encode_wildtype(g, f.ps, h_wt);
    Value<double> z_dl = f.net.encode_delta(g, f.ps, f.net.delta_features(g, h_wt, h_mt));
    const double loss = obj.loss_exp(g, f.ps, z_wt, z_dl, round1, effect_ids).val().item();

    Tensor<double> hw = f.net.plm().forward_raw(f.ps, model::residue_ids(r.wt));
    Tensor<double> hm = f.net.plm().forward_raw(f.ps, model::residue_ids(x_mt));
    Tensor<double> zw = f.net.encode_wildtype_raw(f.ps, hw);
    Tensor<double> zd = f.net.encode_delta_raw(f.ps, f.net.delta_features_raw(hw, hm));
    text::PromptInputs in;
    in.function_text = round1;
    in.effect_text = effect_ids;
    in.k_latent = f.cfg.k;
    text::PromptLayout lay =
        text::assemble_prompt(text::TemplateId::kMutationExplanation, in, f.vocab);
    Tensor<double> rows = model::embed_prompt_raw<double>(
        f.ps, f.net.llm(), lay,
        {{text::LatentRole::kWildtype, zw}, {text::LatentRole::kDelta, zd}});
    auto cache = f.net.llm().make_cache();
    Tensor<double> logits =
        f.net.llm().logits_raw(f.ps, f.net.llm().prefill(f.ps, rows, cache));
    CHECK(loss == doctest::Approx(span_ce_oracle(logits, lay.next_targets)).epsilon(1e-12));
  }

  TEST_CASE("empty answers are rejected") {
    Fixture f(corpus_texts());
    Objectives<double> obj(f.net, f.vocab);
    Graph<double> g;
    Value<double> h_wt = f.net.plm().forward(g, f.ps, model::residue_ids("MKWC"));
    Value<double> z_wt = f.net.encode_wildtype(g, f.ps, h_wt);
    CHECK_THROWS_AS(obj.loss_func(g, f.ps, z_wt, {}), contract_error);
    CHECK_THROWS_AS(obj.loss_exp(g, f.ps, z_wt, z_wt, {text::kEos}, {}), contract_error);
  }

  TEST_CASE("teacher conditioning appends eos to the function text") {
    Fixture f(corpus_texts());
    Objectives<double> obj(f.net, f.vocab);
    mutadata::MutationRecord r = make_record();
    std::vector<int32_t> want = f.vocab.encode(r.function_text);
    want.push_back(text::kEos);
    CHECK(obj.round1_ids(f.ps, r) == want);
  }

  TEST_CASE("literal conditioning generates bounded well formed ids") {
    Fixture f(corpus_texts());
    ObjectiveConfig cfg;
    cfg.literal_round1 = true;
    cfg.max_new_tokens = 12;
    Objectives<double> obj(f.net, f.vocab, cfg);
    mutadata::MutationRecord r = make_record();
    const std::vector<int32_t> ids = obj.round1_ids(f.ps, r);
    REQUIRE(!ids.empty());
    CHECK(static_cast<int64_t>(ids.size()) <= cfg.max_new_tokens);
    for (int32_t id : ids) {
      CHECK(id >= 0);
      CHECK(id < f.vocab.size());
    }
    CHECK(obj.round1_ids(f.ps, r) == ids);
  }

  TEST_CASE("engineering loss rejects non single site pairs") {
    Fixture f(corpus_texts());
    Objectives<double> obj(f.net, f.vocab);
    Graph<double> g;
    Value<double> h_wt = f.net.plm().forward(g, f.ps, model::residue_ids("ACDE"));
    Value<double> z = g.input(Tensor<double>::zeros(f.cfg.k, f.cfg.llm.d));
    CHECK_THROWS_AS(obj.loss_eng(g, f.ps, h_wt, "ACDE", "ACDE", z), contract_error);
    CHECK_THROWS_AS(obj.loss_eng(g, f.ps, h_wt, "ACDE", "WCDF", z), contract_error);
    CHECK_THROWS_AS(obj.loss_eng(g, f.ps, h_wt, "ACDE", "ACD", z), contract_error);
  }

  TEST_CASE("record loss is the ordered sum of its three terms") {
    Fixture f(corpus_texts());
    Objectives<double> obj(f.net, f.vocab);
    Graph<double> g;
    StepMetrics m;
    const double total = obj.finetune_loss(g, f.ps, make_record(), &m).val().item();
    CHECK(total == (m.components["func"] + m.components["exp"]) + m.components["eng"]);
    CHECK(m.total == total);
    CHECK(m.components["func"] > 0);
    CHECK(m.components["exp"] > 0);
    CHECK(m.components["eng"] > 0);
  }

  TEST_CASE("gradients reach every stage of the network") {
    Fixture f(corpus_texts());
    Objectives<double> obj(f.net, f.vocab);
    Graph<double> g;
    Value<double> loss = obj.finetune_loss(g, f.ps, make_record());
    f.ps.zero_grads();
    g.backward(loss);
    for (const char* name :
         {"soft_tokens", "pos_head.w", "wt_enc.q", "dl_enc.q", "dl_dec.ffn.1.w",
          "dl_dec.attn.v.w", "plm.tok_emb", "plm.lm.w", "llm.tok_emb", "llm.lm.w"})
      CHECK_MESSAGE(grad_nonzero(f.ps, name), name);
  }
}

TEST_SUITE("training_steps") {
  TEST_CASE("pretraining steps reduce the batch loss") {
    Fixture f({"binds dna", "pumps protons across the membrane"});
    Objectives<double> obj(f.net, f.vocab);
    std::vector<mutadata::PretrainPair> batch = {
        {"a", "ACDEFGHIKL", "binds dna"},
        {"b", "MNPQRSTVWY", "pumps protons across the membrane"},
    };
    AdamW<double> opt;
    Rng mask_rng = Rng::seeded(9);
    double first = 0, last = 0;
    for (int step = 0; step < 40; ++step) {
      Rng step_rng = Rng::seeded(9);
      StepMetrics m = obj.pretrain_step(f.ps, opt, batch, step_rng, 5e-3);
      if (step == 0) first = m.total;
      last = m.total;
      CHECK(std::isfinite(m.total));
    }
    (void)mask_rng;
    CHECK(last < 0.5 * first);
  }

  TEST_CASE("finetuning steps reduce the batch loss") {
    Fixture f({"hydrolyzes peptide bonds", "the enzyme loses catalytic activity"});
    Objectives<double> obj(f.net, f.vocab);
    mutadata::MutationRecord r;
    r.id = "r1";
    r.wt = "ACDEFGHIKL";
    r.mutation = mutadata::parse_mutation("D3K");
    r.function_text = "hydrolyzes peptide bonds";
    r.effect_text = "the enzyme loses catalytic activity";
    std::vector<mutadata::MutationRecord> batch = {r};
    AdamW<double> opt;
    double first = 0, last = 0;
    for (int step = 0; step < 60; ++step) {
      StepMetrics m = obj.finetune_step(f.ps, opt, batch, 5e-3);
      if (step == 0) first = m.total;
      last = m.total;
      CHECK(std::isfinite(m.total));
    }
    CHECK(last < 0.5 * first);
  }

  TEST_CASE("literal conditioning still yields a finite trainable loss") {
    Fixture f({"hydrolyzes peptide bonds", "the enzyme loses catalytic activity"});
    ObjectiveConfig cfg;
    cfg.literal_round1 = true;
    cfg.max_new_tokens = 8;
    Objectives<double> obj(f.net, f.vocab, cfg);
    mutadata::MutationRecord r;
    r.id = "r1";
    r.wt = "ACDEFGHIKL";
    r.mutation = mutadata::parse_mutation("D3K");
    r.function_text = "hydrolyzes peptide bonds";
    r.effect_text = "the enzyme loses catalytic activity";
    AdamW<double> opt;
    StepMetrics m = obj.finetune_step(f.ps, opt, {r}, 1e-3);
    CHECK(std::isfinite(m.total));
    CHECK(m.total > 0);
  }

  TEST_CASE("empty batches are rejected") {
    Fixture f({"z"});
    Objectives<double> obj(f.net, f.vocab);
    AdamW<double> opt;
    Rng rng = Rng::seeded(1);
    CHECK_THROWS_AS(obj.pretrain_step(f.ps, opt, {}, rng, 1e-3), contract_error);
    CHECK_THROWS_AS(obj.finetune_step(f.ps, opt, {}, 1e-3), contract_error);
  }

  TEST_CASE("invalid objective configuration is rejected") {
    Fixture f({"z"});
    ObjectiveConfig bad;
    bad.lambda = 0;
    CHECK_THROWS_AS(Objectives<double>(f.net, f.vocab, bad), config_error);
    bad = {};
    bad.max_new_tokens = 0;
    CHECK_THROWS_AS(Objectives<double>(f.net, f.vocab, bad), config_error);
  }
}
