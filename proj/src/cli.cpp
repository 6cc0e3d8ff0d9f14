#include "mutadelta/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mutadelta/config.hpp"
#include "mutadelta/engineer.hpp"
#include "mutadelta/evalkit.hpp"
#include "mutadelta/mutadata.hpp"
#include "mutadelta/train.hpp"

namespace mutadelta::cli {

namespace {

namespace fs = std::filesystem;

std::string config_path_from(const std::vector<std::string>& args) {
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw config_error("--config requires a path");
      return args[i + 1];
    }
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return "";
}

void add_config_options(CLI::App* sub, Config& cfg, std::string& config_sink) {
  sub->add_option("--config", config_sink, "JSON config file; explicit flags override it");
  for_each_field(cfg, [&](const char* key, auto& field) {
    sub->add_option(std::string("--") + key, field);
  });
}

std::string default_under_out(const Config& cfg, const std::string& configured,
                              const char* name) {
  const std::string path = configured.empty() ? cfg.out + "/" + name : configured;
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  return path;
}

std::string random_wildtype(uint64_t seed, int64_t length) {
  numkit::Rng rng = numkit::Rng::seeded(seed).split("wildtype");
  std::string wt;
  for (int64_t i = 0; i < length; ++i)
    wt += mutadata::kAlphabet[rng.uniform_int(mutadata::kAlphabetSize)];
  return wt;
}

void cmd_data_gen(const Config& cfg) {
  mutadata::SyntheticCorpus corpus = mutadata::generate_synthetic_corpus(
      cfg.seed, static_cast<int>(cfg.n_proteins), static_cast<int>(cfg.muts_per_protein),
      static_cast<int>(cfg.min_len), static_cast<int>(cfg.max_len));
  const std::string rec_path = default_under_out(cfg, cfg.records, "records.jsonl");
  const std::string pair_path = default_under_out(cfg, cfg.pairs, "pairs.jsonl");
  mutadata::save_records(rec_path, corpus.records);
  mutadata::save_pairs(pair_path, corpus.pairs);
  std::cout << "wrote " << corpus.records.size() << " records to " << rec_path << "\n"
            << "wrote " << corpus.pairs.size() << " pairs to " << pair_path << "\n";
}

void cmd_data_split(const Config& cfg) {
  if (cfg.records.empty()) throw config_error("data split: records path must be set");
  std::vector<mutadata::MutationRecord> records = mutadata::load_records(cfg.records);
  mutadata::SplitAssignment sa;
  if (cfg.split_mode == "homology") {
    sa = mutadata::split_by_homology(records, cfg.seed,
                                     {cfg.frac_train, cfg.frac_valid, cfg.frac_test});
  } else if (cfg.split_mode == "temporal") {
    sa = mutadata::split_temporal(records, static_cast<int>(cfg.cutoff_year), cfg.frac_valid,
                                  cfg.seed);
  } else {
    throw config_error("data split: unknown split_mode '" + cfg.split_mode + "'");
  }
  const std::string path = default_under_out(cfg, cfg.split, "split.json");
  sa.save(path);
  std::map<std::string, int64_t> counts;
  for (const auto& [id, subset] : sa.subset_of) ++counts[subset];
  std::cout << "wrote " << path << "\n";
  for (const auto& [subset, n] : counts) std::cout << subset << ": " << n << "\n";
}

void cmd_data_stats(const Config& cfg) {
  if (cfg.records.empty()) throw config_error("data stats: records path must be set");
  std::vector<mutadata::MutationRecord> records = mutadata::load_records(cfg.records);
  std::cout << mutadata::dataset_stats(records).to_json().dump(2) << "\n";
}

void cmd_pretrain(const Config& cfg) {
  TrainOutcome o = pretrain_run(cfg);
  std::cout << "pretrain finished: step " << o.final_step << ", loss " << o.final_loss
            << "\ncheckpoint: " << o.checkpoint_path << "\nlog: " << o.telemetry_path << "\n";
}

void cmd_finetune(const Config& cfg) {
  TrainOutcome o = finetune_run(cfg);
  std::cout << "finetune finished: step " << o.final_step << ", loss " << o.final_loss
            << "\ncheckpoint: " << o.checkpoint_path << "\nlog: " << o.telemetry_path << "\n";
}

void cmd_explain(const Config& cfg, const std::string& wt, const std::string& mutation_code) {
  if (cfg.ckpt.empty()) throw config_error("explain: --ckpt must be set");
  LoadedModel lm = load_model(cfg.ckpt, cfg.vocab);
  Explanation e = explain_mutation(lm, wt, mutadata::parse_mutation(mutation_code));
  std::cout << "function: " << e.function_text << "\neffect: " << e.effect_text << "\n";
}

void cmd_engineer(const Config& cfg, const std::string& wt, const std::string& instruction,
                  const std::string& function_text, const std::string& truth_code) {
  if (cfg.ckpt.empty()) throw config_error("engineer: --ckpt must be set");
  LoadedModel lm = load_model(cfg.ckpt, cfg.vocab);
  engineer::ScorerConfig sc;
  sc.instruction = instruction;
  sc.function_text = function_text;
  sc.raw_residue_scores = cfg.raw_residue_scores;
  sc.max_new_tokens = cfg.max_new_tokens;
  engineer::ScoreMatrix sm = engineer::score_mutations(*lm.net, lm.params, lm.vocab, wt, sc);
  std::vector<engineer::RankedMutation> ranked = engineer::rank_candidates(sm);
  const int64_t shown = std::min<int64_t>(cfg.top, static_cast<int64_t>(ranked.size()));
  for (int64_t i = 0; i < shown; ++i)
    std::cout << (i + 1) << " " << mutadata::format_mutation(ranked[i].mutation) << " "
              << ranked[i].score << "\n";
  if (!truth_code.empty()) {
    const mutadata::Mutation truth = mutadata::parse_mutation(truth_code);
    std::cout << "truth rank: " << engineer::rank_of(ranked, truth)
              << "\nrecall@" << cfg.recall_k << ": "
              << engineer::recall_at_k(ranked, truth, cfg.recall_k)
              << "\naccuracy at position: " << engineer::accuracy_at_position(sm, truth)
              << "\n";
  }
}

void cmd_optimize(const Config& cfg, std::string wt, const std::string& instruction,
                  const std::string& function_text, std::string trace_path) {
  if (wt.empty()) {
    wt = random_wildtype(cfg.seed, 30);
    std::cout << "wild type (random): " << wt << "\n";
  }
  engineer::FitnessOracle oracle = engineer::FitnessOracle::random(
      static_cast<int64_t>(wt.size()), cfg.oracle_pairs, cfg.seed);
  LoadedModel lm;
  engineer::Scorer scorer;
  if (instruction.empty()) {
    scorer = engineer::oracle_gain_scorer(oracle);
  } else {
    if (cfg.ckpt.empty()) throw config_error("optimize: --instruction needs --ckpt");
    lm = load_model(cfg.ckpt, cfg.vocab);
    engineer::ScorerConfig sc;
    sc.instruction = instruction;
    sc.function_text = function_text;
    sc.raw_residue_scores = cfg.raw_residue_scores;
    sc.max_new_tokens = cfg.max_new_tokens;
    scorer = engineer::make_model_scorer(*lm.net, lm.params, lm.vocab, sc);
  }
  engineer::BeamConfig bc;
  bc.beams = cfg.beams;
  bc.rounds = cfg.rounds;
  bc.deterministic = cfg.deterministic_beam;
  bc.seed = cfg.seed;
  std::vector<engineer::BeamResult> results =
      engineer::run_many(wt, scorer, oracle, bc, cfg.runs);
  trace_path = default_under_out(cfg, trace_path, "trace.csv");
  engineer::write_trace_csv(trace_path, results);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : results)
    for (const auto& c : r.candidates) best = std::max(best, c.fitness);
  std::cout << "wrote " << trace_path << "\nwild-type fitness: " << oracle.fitness(wt)
            << "\nbest fitness: " << best << "\n";
}

void cmd_eval(const Config& cfg) {
  if (cfg.ckpt.empty()) throw config_error("eval: --ckpt must be set");
  if (cfg.records.empty()) throw config_error("eval: --records must be set");
  LoadedModel lm = load_model(cfg.ckpt, cfg.vocab);
  std::vector<mutadata::MutationRecord> records = mutadata::load_records(cfg.records);
  mutadata::SplitAssignment sa;
  const mutadata::SplitAssignment* sp = nullptr;
  if (!cfg.split.empty()) {
    sa = mutadata::SplitAssignment::load(cfg.split);
    sp = &sa;
  }
  EvalReports reports = evaluate_model(lm, cfg, records, sp);
  std::cout << "explanation metrics\n"
            << reports.explanation.format_table() << "engineering metrics\n"
            << reports.engineering.format_table();
  fs::create_directories(cfg.out);
  const std::string path = cfg.out + "/eval.json";
  std::ofstream os(path);
  if (!os) throw config_error("eval: cannot write " + path);
  os << nlohmann::json{{"explanation", reports.explanation.to_json()},
                       {"engineering", reports.engineering.to_json()}}
            .dump(2)
     << "\n";
  std::cout << "wrote " << path << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args) {
  try {
    Config cfg;
    const std::string cpath = config_path_from(args);
    if (!cpath.empty()) cfg = Config::load(cpath);

    CLI::App app{"mutation delta-network toolkit", "mutadelta"};
    app.require_subcommand(1);
    std::string config_sink;
    std::string wt, mutation_code, instruction, function_text, truth_code, trace_path;

    CLI::App* data = app.add_subcommand("data", "dataset tooling");
    data->require_subcommand(1);
    CLI::App* gen = data->add_subcommand("gen", "generate a synthetic corpus");
    add_config_options(gen, cfg, config_sink);
    gen->callback([&] { cmd_data_gen(cfg); });
    CLI::App* split = data->add_subcommand("split", "assign records to subsets");
    add_config_options(split, cfg, config_sink);
    split->add_option("--mode", cfg.split_mode, "homology or temporal");
    split->callback([&] { cmd_data_split(cfg); });
    CLI::App* stats = data->add_subcommand("stats", "print corpus statistics");
    add_config_options(stats, cfg, config_sink);
    stats->callback([&] { cmd_data_stats(cfg); });

    CLI::App* pretrain = app.add_subcommand("pretrain", "protein-text pre-training");
    add_config_options(pretrain, cfg, config_sink);
    pretrain->callback([&] { cmd_pretrain(cfg); });

    CLI::App* finetune = app.add_subcommand("finetune", "mutation-dialog fine-tuning");
    add_config_options(finetune, cfg, config_sink);
    finetune->callback([&] { cmd_finetune(cfg); });

    CLI::App* explain = app.add_subcommand("explain", "describe one mutation");
    add_config_options(explain, cfg, config_sink);
    explain->add_option("--wt", wt, "wild-type sequence")->required();
    explain->add_option("--mutation", mutation_code, "mutation code, e.g. A205D")->required();
    explain->callback([&] { cmd_explain(cfg, wt, mutation_code); });

    CLI::App* engineer_cmd = app.add_subcommand("engineer", "rank single mutations");
    add_config_options(engineer_cmd, cfg, config_sink);
    engineer_cmd->add_option("--wt", wt, "wild-type sequence")->required();
    engineer_cmd->add_option("--instruction", instruction, "desired-effect text")->required();
    engineer_cmd->add_option("--function", function_text,
                             "round-1 function text (default: generated)");
    engineer_cmd->add_option("--truth", truth_code, "known answer to score against");
    engineer_cmd->callback(
        [&] { cmd_engineer(cfg, wt, instruction, function_text, truth_code); });

    CLI::App* optimize = app.add_subcommand("optimize", "multi-round beam-search optimization");
    add_config_options(optimize, cfg, config_sink);
    optimize->add_option("--wt", wt, "wild-type sequence (default: random, length 30)");
    optimize->add_option("--instruction", instruction,
                         "desired-effect text; scores with the model instead of the oracle");
    optimize->add_option("--function", function_text,
                         "round-1 function text for the model scorer");
    optimize->add_option("--trace", trace_path, "trace CSV path (default: <out>/trace.csv)");
    optimize->callback(
        [&] { cmd_optimize(cfg, wt, instruction, function_text, trace_path); });

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on records");
    add_config_options(eval, cfg, config_sink);
    eval->callback([&] { cmd_eval(cfg); });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace mutadelta::cli
