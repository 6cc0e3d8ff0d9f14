#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mutadelta/cli.hpp"
#include "mutadelta/engineer.hpp"
#include "mutadelta/evalkit.hpp"
#include "mutadelta/train.hpp"

namespace py = pybind11;
using namespace mutadelta;
using cli::Config;

namespace {

nlohmann::json py_to_json(const py::handle& obj) {
  py::module_ json = py::module_::import("json");
  return nlohmann::json::parse(json.attr("dumps")(obj).cast<std::string>());
}

py::object json_to_py(const nlohmann::json& j) {
  py::module_ json = py::module_::import("json");
  return json.attr("loads")(j.dump());
}

py::dict outcome_dict(const cli::TrainOutcome& o) {
  py::dict d;
  d["final_step"] = o.final_step;
  d["final_loss"] = o.final_loss;
  d["checkpoint"] = o.checkpoint_path;
  d["telemetry"] = o.telemetry_path;
  d["vocab"] = o.vocab_path;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "protein mutation delta-network core";

  py::register_exception<config_error>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<parse_error>(m, "ParseError", PyExc_ValueError);
  py::register_exception<format_error>(m, "FormatError", PyExc_ValueError);

  py::class_<Config>(m, "Config")
      .def(py::init([](const py::kwargs& kw) {
             if (kw.empty()) return Config();
             return Config::from_json(py_to_json(kw));
           }),
           "Default configuration; keyword arguments override individual keys.")
      .def("to_dict", [](const Config& c) { return json_to_py(c.to_json()); })
      .def_static("from_dict",
                  [](const py::dict& d) { return Config::from_json(py_to_json(d)); })
      .def_static("load", &Config::load, py::arg("path"))
      .def("save", &Config::save, py::arg("path"))
      .def("validate", &Config::validate)
      .def("__getattr__",
           [](const Config& c, const std::string& name) {
             nlohmann::json j = c.to_json();
             if (!j.contains(name)) throw py::attribute_error(name);
             return json_to_py(j.at(name));
           })
      .def("__setattr__",
           [](Config& c, const std::string& name, const py::object& value) {
             nlohmann::json j = c.to_json();
             if (!j.contains(name)) throw py::attribute_error(name);
             j[name] = py_to_json(value);
             c = Config::from_json(j);
           })
      .def("__repr__", [](const Config& c) { return "Config(" + c.to_json().dump() + ")"; });

  m.def("parse_mutation",
        [](const std::string& code) {
          mutadata::Mutation mt = mutadata::parse_mutation(code);
          return py::make_tuple(std::string(1, mt.from), mt.position, std::string(1, mt.to));
        },
        py::arg("code"), "Splits a code like A205D into (from, position, to).");
  m.def("format_mutation",
        [](const std::string& from, int position, const std::string& to) {
          if (from.size() != 1 || to.size() != 1)
            throw parse_error("format_mutation: residues must be single characters");
          return mutadata::format_mutation({position, from[0], to[0]});
        },
        py::arg("from_residue"), py::arg("position"), py::arg("to_residue"));
  m.def("apply_mutation",
        [](const std::string& wt, const std::string& code) {
          return mutadata::apply_mutation(wt, mutadata::parse_mutation(code));
        },
        py::arg("wt"), py::arg("code"));

  m.def("generate_corpus",
        [](uint64_t seed, int n_proteins, int muts_per_protein, int min_len, int max_len,
           const std::string& records_path, const std::string& pairs_path) {
          mutadata::SyntheticCorpus corpus = mutadata::generate_synthetic_corpus(
              seed, n_proteins, muts_per_protein, min_len, max_len);
          if (!records_path.empty()) mutadata::save_records(records_path, corpus.records);
          if (!pairs_path.empty()) mutadata::save_pairs(pairs_path, corpus.pairs);
          py::list records;
          for (const auto& r : corpus.records) records.append(json_to_py(record_to_json(r)));
          py::list pairs;
          for (const auto& p : corpus.pairs) {
            py::dict d;
            d["id"] = p.id;
            d["protein"] = p.protein;
            d["text"] = p.text;
            pairs.append(d);
          }
          py::dict out;
          out["records"] = records;
          out["pairs"] = pairs;
          return out;
        },
        py::arg("seed") = 42, py::arg("n_proteins") = 8, py::arg("muts_per_protein") = 8,
        py::arg("min_len") = 8, py::arg("max_len") = 64, py::arg("records_path") = "",
        py::arg("pairs_path") = "");

  m.def("dataset_stats",
        [](const std::string& records_path) {
          return json_to_py(
              mutadata::dataset_stats(mutadata::load_records(records_path)).to_json());
        },
        py::arg("records_path"));

  m.def("pretrain", [](const Config& cfg) { return outcome_dict(cli::pretrain_run(cfg)); },
        py::arg("config"), "Runs protein-text pre-training per the configuration.");
  m.def("finetune", [](const Config& cfg) { return outcome_dict(cli::finetune_run(cfg)); },
        py::arg("config"), "Runs mutation-dialog fine-tuning per the configuration.");

  m.def("bleu",
        [](const std::string& candidate, const std::string& reference, int n, bool smoothing) {
          return evalkit::bleu_n(evalkit::tokenize(candidate), evalkit::tokenize(reference), n,
                                 smoothing);
        },
        py::arg("candidate"), py::arg("reference"), py::arg("n") = 2,
        py::arg("smoothing") = false);
  m.def("rouge_l",
        [](const std::string& candidate, const std::string& reference) {
          evalkit::PrfScore s =
              evalkit::rouge_l(evalkit::tokenize(candidate), evalkit::tokenize(reference));
          py::dict d;
          d["precision"] = s.precision;
          d["recall"] = s.recall;
          d["f1"] = s.f1;
          return d;
        },
        py::arg("candidate"), py::arg("reference"));

  py::class_<cli::LoadedModel>(m, "Model")
      .def(py::init([](const std::string& ckpt, const std::string& vocab) {
             return cli::load_model(ckpt, vocab);
           }),
           py::arg("ckpt"), py::arg("vocab") = "")
      .def_property_readonly("config", [](const cli::LoadedModel& lm) { return lm.config; })
      .def("explain",
           [](const cli::LoadedModel& lm, const std::string& wt, const std::string& code) {
             cli::Explanation e = cli::explain_mutation(lm, wt, mutadata::parse_mutation(code));
             return py::make_tuple(e.function_text, e.effect_text);
           },
           py::arg("wt"), py::arg("mutation"),
           "Two-round generation: (function text, mutation effect text).")
      .def("rank_mutations",
           [](const cli::LoadedModel& lm, const std::string& wt, const std::string& instruction,
              const std::string& function_text, int64_t top, bool raw_residue_scores) {
             engineer::ScorerConfig sc;
             sc.instruction = instruction;
             sc.function_text = function_text;
             sc.raw_residue_scores = raw_residue_scores;
             sc.max_new_tokens = lm.config.max_new_tokens;
             engineer::ScoreMatrix sm =
                 engineer::score_mutations(*lm.net, lm.params, lm.vocab, wt, sc);
             std::vector<engineer::RankedMutation> ranked = engineer::rank_candidates(sm);
             if (top > 0 && top < static_cast<int64_t>(ranked.size()))
               ranked.resize(static_cast<size_t>(top));
             py::list out;
             for (const auto& r : ranked)
               out.append(py::make_tuple(mutadata::format_mutation(r.mutation), r.score));
             return out;
           },
           py::arg("wt"), py::arg("instruction"), py::arg("function_text") = "",
           py::arg("top") = 10, py::arg("raw_residue_scores") = false,
           "Ranked (mutation, score) pairs, best first; top=0 keeps all.")
      .def("evaluate",
           [](const cli::LoadedModel& lm, const std::string& records_path,
              const std::string& split_path, int64_t recall_k) {
             Config cfg = lm.config;
             cfg.recall_k = recall_k;
             std::vector<mutadata::MutationRecord> records =
                 mutadata::load_records(records_path);
             mutadata::SplitAssignment sa;
             const mutadata::SplitAssignment* sp = nullptr;
             if (!split_path.empty()) {
               sa = mutadata::SplitAssignment::load(split_path);
               sp = &sa;
             }
             cli::EvalReports reports = cli::evaluate_model(lm, cfg, records, sp);
             py::dict d;
             d["explanation"] = json_to_py(reports.explanation.to_json());
             d["engineering"] = json_to_py(reports.engineering.to_json());
             return d;
           },
           py::arg("records_path"), py::arg("split_path") = "", py::arg("recall_k") = 50);

  m.def("optimize",
        [](const std::string& wt, uint64_t seed, int64_t beams, int64_t rounds, int64_t runs,
           int64_t oracle_pairs, bool deterministic, const std::string& trace_path) {
          engineer::FitnessOracle oracle = engineer::FitnessOracle::random(
              static_cast<int64_t>(wt.size()), oracle_pairs, seed);
          engineer::BeamConfig bc;
          bc.beams = beams;
          bc.rounds = rounds;
          bc.deterministic = deterministic;
          bc.seed = seed;
          std::vector<engineer::BeamResult> results =
              engineer::run_many(wt, engineer::oracle_gain_scorer(oracle), oracle, bc, runs);
          if (!trace_path.empty()) engineer::write_trace_csv(trace_path, results);
          py::list run_traces;
          double best = -std::numeric_limits<double>::infinity();
          std::string best_sequence;
          for (const auto& r : results) {
            py::list trace;
            for (const auto& s : r.trace) {
              py::dict row;
              row["round"] = s.round;
              row["best"] = s.best;
              row["mean"] = s.mean;
              row["std"] = s.std_dev;
              trace.append(row);
            }
            run_traces.append(trace);
            for (const auto& c : r.candidates)
              if (c.fitness > best) {
                best = c.fitness;
                best_sequence = c.sequence;
              }
          }
          py::dict out;
          out["wildtype_fitness"] = oracle.fitness(wt);
          out["best_fitness"] = best;
          out["best_sequence"] = best_sequence;
          out["traces"] = run_traces;
          return out;
        },
        py::arg("wt"), py::arg("seed") = 42, py::arg("beams") = 20, py::arg("rounds") = 10,
        py::arg("runs") = 20, py::arg("oracle_pairs") = 2, py::arg("deterministic") = false,
        py::arg("trace_path") = "",
        "Multi-round beam-search optimization against a seeded fitness oracle.");

  m.def("run_cli", [](const std::vector<std::string>& args) { return cli::run(args); },
        py::arg("args"), "Invokes the command-line interface in-process.");
}
