#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mutadelta/checkpoint.hpp"
#include "mutadelta/config.hpp"
#include "mutadelta/engineer.hpp"
#include "mutadelta/evalkit.hpp"
#include "mutadelta/mutadata.hpp"

namespace mutadelta::cli {

struct TrainOutcome {
  int64_t final_step = 0;
  double final_loss = 0;
  std::string checkpoint_path;
  std::string telemetry_path;
  std::string vocab_path;
};

// Both runs write <out>/<phase>.ckpt, step checkpoints when configured,
// a JSONL telemetry log and the vocabulary.  cfg.ckpt initializes weights
// from a previous checkpoint; with cfg.resume the optimizer moments, RNG
// streams and step counter continue bit-exactly as well.
TrainOutcome pretrain_run(const Config& cfg);
TrainOutcome finetune_run(const Config& cfg);

struct LoadedModel {
  Config config;  // snapshot stored in the checkpoint
  text::Vocabulary vocab;
  std::unique_ptr<model::DeltaNetwork<double>> net;
  numkit::ParamSet<double> params;
};

LoadedModel load_model(const std::string& ckpt_path, const std::string& vocab_override = "");

struct Explanation {
  std::string function_text;
  std::string effect_text;
};

// Two-round generation: function text from the wild-type features, then
// effect text conditioned on it and the delta features.
Explanation explain_mutation(const LoadedModel& lm, const std::string& wt,
                             const mutadata::Mutation& m);

struct EvalReports {
  evalkit::MetricReport explanation;
  evalkit::MetricReport engineering;
};

// Generation metrics and mutation-retrieval metrics per subset.  With a
// split only test subsets are evaluated; without one every record lands in
// subset "all".
EvalReports evaluate_model(const LoadedModel& lm, const Config& cfg,
                           const std::vector<mutadata::MutationRecord>& records,
                           const mutadata::SplitAssignment* split);

}  // namespace mutadelta::cli
