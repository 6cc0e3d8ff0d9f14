#include "mutadelta/train.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>

#include "mutadelta/objectives.hpp"

namespace mutadelta::cli {

namespace {

namespace fs = std::filesystem;
using numkit::AdamW;
using numkit::ParamSet;
using numkit::Rng;
using numkit::Tensor;
using train::Objectives;
using train::StepMetrics;

text::Vocabulary resolve_vocab(const Config& cfg, const std::vector<std::string>& texts,
                               std::string* path_out) {
  if (!cfg.vocab.empty() && fs::exists(cfg.vocab)) {
    *path_out = cfg.vocab;
    return text::Vocabulary::load(cfg.vocab);
  }
  std::vector<std::string> all = text::template_strings();
  all.insert(all.end(), texts.begin(), texts.end());
  text::Vocabulary v = text::Vocabulary::build(all);
  *path_out = cfg.vocab.empty() ? cfg.out + "/vocab.txt" : cfg.vocab;
  v.save(*path_out);
  return v;
}

nlohmann::json rng_state(const Rng& data_rng, const Rng& mask_rng) {
  return {{"data", {{"key", data_rng.key()}, {"counter", data_rng.counter()}}},
          {"mask", {{"key", mask_rng.key()}, {"counter", mask_rng.counter()}}}};
}

void restore_stream(const nlohmann::json& j, const char* name, Rng& rng) {
  try {
    rng.set_state(j.at(name).at("key").get<uint64_t>(),
                  j.at(name).at("counter").get<uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw format_error(std::string("checkpoint: malformed rng state for ") + name + ": " +
                       e.what());
  }
}

struct RunState {
  text::Vocabulary vocab;
  std::string vocab_path;
  std::unique_ptr<model::DeltaNetwork<double>> net;
  ParamSet<double> params;
  AdamW<double> opt;
  Rng data_rng;
  Rng mask_rng;
  int64_t start_step = 0;
};

RunState prepare_run(const Config& cfg, const std::vector<std::string>& texts) {
  cfg.validate();
  fs::create_directories(cfg.out);
  std::optional<CheckpointData> ckpt;
  if (!cfg.ckpt.empty()) ckpt = load_checkpoint(cfg.ckpt);
  Config vcfg = cfg;
  if (vcfg.vocab.empty() && ckpt && ckpt->config.contains("vocab"))
    vcfg.vocab = ckpt->config.at("vocab").get<std::string>();
  RunState st;
  st.vocab = resolve_vocab(vcfg, texts, &st.vocab_path);
  st.net = std::make_unique<model::DeltaNetwork<double>>(cfg.model_config(), st.vocab.size());
  Rng root = Rng::seeded(cfg.seed);
  Rng init = root.split("init");
  st.net->register_params(st.params, init);
  st.data_rng = root.split("data");
  st.mask_rng = root.split("mask");
  if (ckpt) {
    if (cfg.resume) {
      restore_checkpoint(*ckpt, st.params, &st.opt);
      restore_stream(ckpt->rng, "data", st.data_rng);
      restore_stream(ckpt->rng, "mask", st.mask_rng);
      st.start_step = ckpt->step;
    } else {
      restore_checkpoint(*ckpt, st.params, nullptr);
    }
  }
  if (st.start_step >= cfg.steps)
    throw config_error("train: checkpoint step " + std::to_string(st.start_step) +
                       " is already at or past steps=" + std::to_string(cfg.steps));
  return st;
}

class Telemetry {
 public:
  Telemetry(const std::string& path, bool append) : path_(path) {
    os_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!os_) throw config_error("train: cannot write " + path);
    start_ = std::chrono::steady_clock::now();
  }

  void log(int64_t step, const StepMetrics& m, double lr) {
    nlohmann::json j;
    j["step"] = step;
    j["loss"] = m.total;
    for (const auto& [name, value] : m.components) j["loss_" + name] = value;
    j["lr"] = lr;
    j["wall_time_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start_)
                            .count();
    os_ << j.dump() << '\n';
    os_.flush();
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream os_;
  std::chrono::steady_clock::time_point start_;
};

template <class StepFn>
TrainOutcome run_loop(const Config& cfg, RunState& st, const std::string& phase,
                      const StepFn& one_step) {
  Telemetry telemetry(cfg.out + "/" + phase + "_log.jsonl", st.start_step > 0);
  const std::string final_path = cfg.out + "/" + phase + ".ckpt";
  nlohmann::json snapshot = cfg.to_json();
  snapshot["vocab"] = st.vocab_path;
  const auto save = [&](int64_t step, const std::string& path) {
    save_checkpoint(path, snapshot, step, rng_state(st.data_rng, st.mask_rng), st.params,
                    &st.opt);
  };
  numkit::Schedule sched = cfg.schedule();
  StepMetrics last;
  for (int64_t step = st.start_step + 1; step <= cfg.steps; ++step) {
    const double lr = numkit::lr_at(sched, step);
    last = one_step(lr);
    if (step % cfg.log_every == 0 || step == cfg.steps) telemetry.log(step, last, lr);
    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step < cfg.steps)
      save(step, cfg.out + "/" + phase + "_step" + std::to_string(step) + ".ckpt");
  }
  save(cfg.steps, final_path);
  return TrainOutcome{cfg.steps, last.total, final_path, telemetry.path(), st.vocab_path};
}

std::vector<int32_t> teacher_ids(const text::Vocabulary& vocab, const std::string& s) {
  std::vector<int32_t> ids = vocab.encode(s);
  ids.push_back(text::kEos);
  return ids;
}

std::vector<int32_t> generated_effect_ids(const LoadedModel& lm, const Tensor<double>& z_wt,
                                          const Tensor<double>& z_delta,
                                          const std::vector<int32_t>& round1) {
  text::PromptInputs in;
  in.function_text = round1;
  in.k_latent = lm.config.k;
  text::PromptLayout lay =
      text::assemble_prompt(text::TemplateId::kMutationExplanation, in, lm.vocab);
  Tensor<double> rows = model::embed_prompt_raw<double>(
      lm.params, lm.net->llm(), lay,
      {{text::LatentRole::kWildtype, z_wt}, {text::LatentRole::kDelta, z_delta}});
  return lm.net->llm().generate_greedy(lm.params, rows, lm.config.max_new_tokens);
}

}  // namespace

TrainOutcome pretrain_run(const Config& cfg) {
  if (cfg.pairs.empty()) throw config_error("pretrain: pairs path must be set");
  std::vector<mutadata::PretrainPair> pairs = mutadata::load_pairs(cfg.pairs);
  if (pairs.empty()) throw contract_error("pretrain: empty pair set");
  std::vector<std::string> texts;
  for (const auto& p : pairs) texts.push_back(p.text);
  RunState st = prepare_run(cfg, texts);
  Objectives<double> obj(*st.net, st.vocab, cfg.objective_config());
  return run_loop(cfg, st, "pretrain", [&](double lr) {
    std::vector<mutadata::PretrainPair> batch;
    for (int64_t b = 0; b < cfg.batch; ++b)
      batch.push_back(pairs[st.data_rng.uniform_int(pairs.size())]);
    return obj.pretrain_step(st.params, st.opt, batch, st.mask_rng, lr);
  });
}

TrainOutcome finetune_run(const Config& cfg) {
  if (cfg.records.empty()) throw config_error("finetune: records path must be set");
  std::vector<mutadata::MutationRecord> records = mutadata::load_records(cfg.records);
  if (!cfg.split.empty()) {
    mutadata::SplitAssignment split = mutadata::SplitAssignment::load(cfg.split);
    std::vector<mutadata::MutationRecord> kept;
    for (auto& r : records) {
      auto it = split.subset_of.find(r.id);
      if (it != split.subset_of.end() && it->second == "train") kept.push_back(std::move(r));
    }
    records = std::move(kept);
  }
  if (records.empty()) throw contract_error("finetune: no training records");
  std::vector<std::string> texts;
  for (const auto& r : records) {
    texts.push_back(r.function_text);
    texts.push_back(r.effect_text);
  }
  RunState st = prepare_run(cfg, texts);
  Objectives<double> obj(*st.net, st.vocab, cfg.objective_config());
  return run_loop(cfg, st, "finetune", [&](double lr) {
    std::vector<mutadata::MutationRecord> batch;
    for (int64_t b = 0; b < cfg.batch; ++b)
      batch.push_back(records[st.data_rng.uniform_int(records.size())]);
    return obj.finetune_step(st.params, st.opt, batch, lr);
  });
}

LoadedModel load_model(const std::string& ckpt_path, const std::string& vocab_override) {
  CheckpointData c = load_checkpoint(ckpt_path);
  LoadedModel lm;
  lm.config = Config::from_json(c.config);
  const std::string vpath = vocab_override.empty() ? lm.config.vocab : vocab_override;
  if (vpath.empty())
    throw config_error("model: checkpoint records no vocabulary path; pass one explicitly");
  lm.vocab = text::Vocabulary::load(vpath);
  lm.net =
      std::make_unique<model::DeltaNetwork<double>>(lm.config.model_config(), lm.vocab.size());
  Rng init = Rng::seeded(lm.config.seed);
  lm.net->register_params(lm.params, init);
  restore_checkpoint(c, lm.params, nullptr);
  return lm;
}

Explanation explain_mutation(const LoadedModel& lm, const std::string& wt,
                             const mutadata::Mutation& m) {
  const std::string x_mt = mutadata::apply_mutation(wt, m);
  Tensor<double> h_wt = lm.net->plm().forward_raw(lm.params, model::residue_ids(wt));
  Tensor<double> h_mt = lm.net->plm().forward_raw(lm.params, model::residue_ids(x_mt));
  Tensor<double> z_wt = lm.net->encode_wildtype_raw(lm.params, h_wt);
  Tensor<double> z_delta =
      lm.net->encode_delta_raw(lm.params, lm.net->delta_features_raw(h_wt, h_mt));
  Objectives<double> obj(*lm.net, lm.vocab, lm.config.objective_config());
  const std::vector<int32_t> round1 = obj.generate_function_ids(lm.params, wt);
  const std::vector<int32_t> effect = generated_effect_ids(lm, z_wt, z_delta, round1);
  return Explanation{lm.vocab.decode(round1), lm.vocab.decode(effect)};
}

EvalReports evaluate_model(const LoadedModel& lm, const Config& cfg,
                           const std::vector<mutadata::MutationRecord>& records,
                           const mutadata::SplitAssignment* split) {
  std::vector<evalkit::ExplanationItem> exp_items;
  std::vector<evalkit::EngineeringItem> eng_items;
  Objectives<double> obj(*lm.net, lm.vocab, cfg.objective_config());
  for (const auto& r : records) {
    std::string subset = "all";
    if (split) {
      auto it = split->subset_of.find(r.id);
      if (it == split->subset_of.end() || it->second.rfind("test", 0) != 0) continue;
      subset = it->second;
    }
    Tensor<double> h_wt = lm.net->plm().forward_raw(lm.params, model::residue_ids(r.wt));
    Tensor<double> h_mt = lm.net->plm().forward_raw(
        lm.params, model::residue_ids(mutadata::apply_mutation(r.wt, r.mutation)));
    Tensor<double> z_wt = lm.net->encode_wildtype_raw(lm.params, h_wt);
    Tensor<double> z_delta =
        lm.net->encode_delta_raw(lm.params, lm.net->delta_features_raw(h_wt, h_mt));
    const std::vector<int32_t> round1 = cfg.teacher_round1
                                            ? teacher_ids(lm.vocab, r.function_text)
                                            : obj.generate_function_ids(lm.params, r.wt);
    const std::vector<int32_t> effect = generated_effect_ids(lm, z_wt, z_delta, round1);
    exp_items.push_back({subset, lm.vocab.decode(effect), r.effect_text});

    engineer::ScorerConfig sc;
    sc.instruction = r.effect_text;
    sc.function_text = cfg.teacher_round1 ? r.function_text : "";
    sc.raw_residue_scores = cfg.raw_residue_scores;
    sc.max_new_tokens = cfg.max_new_tokens;
    engineer::ScoreMatrix sm =
        engineer::score_mutations(*lm.net, lm.params, lm.vocab, r.wt, sc);
    const int64_t rank = engineer::rank_of(engineer::rank_candidates(sm), r.mutation);
    eng_items.push_back(
        {subset, rank, sm.length() * (mutadata::kAlphabetSize - 1)});
  }
  if (exp_items.empty()) throw contract_error("eval: no records selected for evaluation");
  EvalReports reports;
  reports.explanation = evalkit::evaluate_explanations(exp_items);
  reports.engineering = evalkit::evaluate_engineering(eng_items, cfg.recall_k);
  return reports;
}

}  // namespace mutadelta::cli
