/* Copyright 2026 The JasperCpp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Command-line interface.  Verbs: train, decode, evaluate, inspect, lm,
// synth.  Exit codes: 0 success, 1 usage or configuration error, 2 data
// error (missing or malformed files), 3 numeric failure.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jasper/beam_search.h"
#include "jasper/checkpoint.h"
#include "jasper/ctc.h"
#include "jasper/error.h"
#include "jasper/lm.h"
#include "jasper/manifest.h"
#include "jasper/metrics.h"
#include "jasper/model.h"
#include "jasper/model_config.h"
#include "jasper/pipeline.h"
#include "jasper/run_config.h"
#include "jasper/synthetic.h"

namespace {

using namespace jasper;

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot write file: " + tmp);
    os << text;
    if (!os) throw DataError("failed writing file: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string format_g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// Loads a model configuration from a file when one exists at the given
// path, else treats the argument as a preset name.
model::ModelConfig model_config_from(const std::string& name_or_path) {
  if (std::filesystem::exists(name_or_path)) {
    return model::parse_config(read_file(name_or_path));
  }
  return model::preset(name_or_path);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string resume;
};

void run_train(const TrainArgs& a) {
  const RunConfig cfg = load_run_config(a.config);
  pipeline::TrainOutcome out;
  if (cfg.precision == "f32") {
    out = pipeline::run_training<float>(cfg, a.resume, std::cout);
  } else {
    out = pipeline::run_training<double>(cfg, a.resume, std::cout);
  }
  std::cout << "metrics: " << out.metrics_csv << "\n";
  if (!out.last_checkpoint.empty()) {
    std::cout << "last checkpoint: " << out.last_checkpoint << "\n";
  }
  if (!out.best_checkpoint.empty()) {
    std::cout << "best checkpoint: " << out.best_checkpoint;
    if (!out.history.empty()) {
      std::cout << " (dev WER " << format_g12(out.best_wer) << ")";
    }
    std::cout << "\n";
  }
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

struct DecodeArgs {
  std::string config;
  std::string checkpoint;
  std::string manifest;
  std::string hyp;
  std::string nbest;
  std::string mode;
  std::string external;
};

template <typename Scalar>
void run_decode_typed(const DecodeArgs& a, const RunConfig& cfg) {
  auto loaded = model::load_checkpoint<Scalar>(a.checkpoint);
  model::Model<Scalar>& m = loaded.model;
  if (m.config().in_channels != cfg.features.n_mels) {
    throw ConfigError("checkpoint expects " +
                      std::to_string(m.config().in_channels) +
                      " input channels but the feature config produces " +
                      std::to_string(cfg.features.n_mels));
  }
  const ctc::Alphabet alphabet{m.config().graphemes};
  const auto entries = data::load_manifest(a.manifest);
  const auto utts =
      pipeline::load_utterances(entries, alphabet, /*require_targets=*/false);

  std::optional<lm::BackoffLM> first_pass, rescorer;
  if (!cfg.lm_path.empty()) {
    first_pass = lm::BackoffLM::load_arpa(cfg.lm_path);
  }
  if (!cfg.rescore_lm_path.empty()) {
    rescorer = lm::BackoffLM::load_arpa(cfg.rescore_lm_path);
  }
  const lm::BackoffLM* lm_ptr = first_pass ? &*first_pass : nullptr;
  const lm::BackoffLM* rescore_ptr = rescorer ? &*rescorer : nullptr;

  pipeline::DecodeOutcome out;
  if (a.external.empty()) {
    out = pipeline::decode_utterances(m, utts, cfg, lm_ptr, rescore_ptr);
  } else {
    if (cfg.decode_mode != DecodeMode::kBeamRescore) {
      throw ConfigError("--external requires decode mode 'beam+rescore'");
    }
    // First pass plain beam; the external file supplies the rescoring
    // scores, one id<TAB>score line per n-best hypothesis in rank order.
    RunConfig beam_cfg = cfg;
    beam_cfg.decode_mode = DecodeMode::kBeam;
    out = pipeline::decode_utterances(m, utts, beam_cfg, lm_ptr, nullptr);
    const auto scores = decode::load_external_scores(a.external);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < out.nbest.size(); ++i) {
      decode::NBestList& list = out.nbest[i];
      std::vector<double> ext;
      ext.reserve(list.hyps.size());
      for (std::size_t r = 0; r < list.hyps.size(); ++r, ++pos) {
        if (pos >= scores.size() || scores[pos].first != list.utterance_id) {
          throw DataError(
              "external scores do not align with the n-best lists near "
              "entry " +
              std::to_string(pos + 1) + " (expected utterance " +
              list.utterance_id + ")");
        }
        ext.push_back(scores[pos].second);
      }
      list = decode::rescore(list, ext, {cfg.w_am, cfg.w_lm, cfg.w_wc});
      out.hyps[i] = list.hyps.empty() ? std::string() : list.hyps[0].text;
    }
    if (pos != scores.size()) {
      throw DataError("external score file has " +
                      std::to_string(scores.size() - pos) + " unused lines");
    }
  }

  pipeline::save_hypotheses(a.hyp, out.ids, out.hyps);
  if (!a.nbest.empty()) {
    if (cfg.decode_mode == DecodeMode::kGreedy) {
      throw ConfigError("--nbest output requires a beam decode mode");
    }
    decode::save_nbest(a.nbest, out.nbest);
  }
  std::cout << "decoded " << out.ids.size() << " utterances (mode "
            << decode_mode_name(cfg.decode_mode) << ") -> " << a.hyp << "\n";
}

void run_decode(const DecodeArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (!a.mode.empty()) cfg.decode_mode = parse_decode_mode(a.mode);
  if (cfg.precision == "f32") {
    run_decode_typed<float>(a, cfg);
  } else {
    run_decode_typed<double>(a, cfg);
  }
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string ref;
  std::string hyp;
  std::string csv;
};

void run_evaluate(const EvaluateArgs& a) {
  const auto refs = data::load_manifest(a.ref);
  const auto hyps = pipeline::load_hypotheses(a.hyp);
  auto rows = pipeline::evaluate_hypotheses(refs, hyps);
  const eval::ErrorCounts total = eval::aggregate(rows);
  if (!a.csv.empty()) {
    // Per-utterance rows plus one aggregate row.
    eval::UttResult agg;
    agg.id = "(aggregate)";
    agg.counts = total;
    rows.push_back(agg);
    write_file_atomic(a.csv, eval::wer_csv(rows));
    std::cout << "report: " << a.csv << "\n";
  }
  std::cout << "WER " << format_g12(total.rate()) << " (S="
            << total.substitutions << " I=" << total.insertions
            << " D=" << total.deletions << " over " << total.ref_len
            << " reference words)\n";
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

struct InspectArgs {
  std::string model;
};

// Receptive field of one output frame at the input-frame resolution.  Only
// the main path matters: every projection conv has kernel 1 and cannot
// extend it.
std::int64_t receptive_field(const model::ModelConfig& cfg) {
  std::int64_t rf = 1, jump = 1;
  const auto visit = [&rf, &jump](const model::BlockSpec& b, int repeats) {
    for (int r = 0; r < repeats; ++r) {
      rf += static_cast<std::int64_t>(b.kernel - 1) * b.dilation * jump;
      jump *= b.stride;
    }
  };
  visit(cfg.conv1, 1);
  for (const model::BlockSpec& b : cfg.blocks) visit(b, b.sub_blocks);
  visit(cfg.conv2, 1);
  visit(cfg.conv3, 1);
  // Conv4 is a 1x1 onto the output classes.
  return rf;
}

void run_inspect(const InspectArgs& a) {
  const model::ModelConfig cfg = model_config_from(a.model);

  // Aggregate trainable parameters per stage (the name prefix up to the
  // first dot: conv1, block1..blockB, conv2..conv4).
  std::map<std::string, std::int64_t> stage_params;
  for (const model::ParamInfo& info : model::param_shapes(cfg)) {
    std::int64_t n = 1;
    for (Index d : info.shape) n *= d;
    stage_params[info.name.substr(0, info.name.find('.'))] += n;
  }

  std::cout << "model: " << a.model << "\n"
            << "topology: " << model::topology_name(cfg.topology) << "\n"
            << "norm: " << model::norm_name(cfg.norm) << "\n"
            << "activation: " << model::act_name(cfg.act.kind) << "\n"
            << "graphemes: " << cfg.graphemes.size() << " (+1 blank)\n"
            << "conv layers: " << model::conv_layer_count(cfg) << "\n"
            << "parameters: " << model::count_params(cfg) << "\n"
            << "receptive field: " << receptive_field(cfg)
            << " input frames\n"
            << "stages:\n";

  const auto stage_line = [&stage_params](const std::string& name,
                                          const model::BlockSpec& b,
                                          const std::string& extra) {
    std::cout << "  " << name << ": kernel " << b.kernel << " channels "
              << b.channels;
    if (b.stride != 1) std::cout << " stride " << b.stride;
    if (b.dilation != 1) std::cout << " dilation " << b.dilation;
    if (!extra.empty()) std::cout << " " << extra;
    std::cout << " params " << stage_params[name] << "\n";
  };
  stage_line("conv1", cfg.conv1, "");
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const model::ResidualPlan plan =
        model::residual_sources(cfg, static_cast<int>(i) + 1);
    stage_line("block" + std::to_string(i + 1), cfg.blocks[i],
               "sub-blocks " + std::to_string(cfg.blocks[i].sub_blocks) +
                   " indegree " + std::to_string(plan.sources.size()));
  }
  stage_line("conv2", cfg.conv2, "");
  stage_line("conv3", cfg.conv3, "");
  model::BlockSpec conv4;
  conv4.kernel = 1;
  conv4.channels = static_cast<int>(cfg.output_channels());
  stage_line("conv4", conv4, "");
}

// ---------------------------------------------------------------------------
// lm
// ---------------------------------------------------------------------------

struct LmTrainArgs {
  std::string corpus;
  std::string arpa;
  int order = 3;
};

void run_lm_train(const LmTrainArgs& a) {
  const auto sentences = lm::read_corpus(a.corpus);
  const lm::BackoffLM model = lm::BackoffLM::train(sentences, a.order);
  model.save_arpa(a.arpa);
  std::cout << "trained order-" << a.order << " model on "
            << sentences.size() << " sentences";
  for (int n = 1; n <= model.order(); ++n) {
    std::cout << (n == 1 ? ": " : ", ") << model.ngram_count(n) << " "
              << n << "-grams";
  }
  std::cout << "\nwrote " << a.arpa << "\n";
}

struct LmPerplexityArgs {
  std::string arpa;
  std::string corpus;
};

void run_lm_perplexity(const LmPerplexityArgs& a) {
  const lm::BackoffLM model = lm::BackoffLM::load_arpa(a.arpa);
  const auto sentences = lm::read_corpus(a.corpus);
  std::cout << "perplexity " << format_g12(model.perplexity(sentences))
            << " over " << sentences.size() << " sentences\n";
}

struct LmRoundtripArgs {
  std::string arpa;
  std::string out;
};

void run_lm_roundtrip(const LmRoundtripArgs& a) {
  // Canonicalize, then verify the canonical form is a fixpoint: writing the
  // reloaded model must reproduce the file byte for byte.
  const lm::BackoffLM first = lm::BackoffLM::load_arpa(a.arpa);
  first.save_arpa(a.out);
  const lm::BackoffLM second = lm::BackoffLM::load_arpa(a.out);
  const std::string again = a.out + ".check";
  second.save_arpa(again);
  const bool stable = read_file(a.out) == read_file(again);
  std::filesystem::remove(again);
  if (!stable) {
    throw NumericError("ARPA round-trip is not a fixpoint for " + a.arpa);
  }
  std::cout << "round-trip stable: " << a.out << " ("
            << first.vocab().size() << " words, order " << first.order()
            << ")\n";
}

struct LmSweepArgs {
  std::string config;
  std::string checkpoint;
  std::string manifest;
  std::string corpus;
  std::string orders = "1,2,3";
  std::string csv;
};

std::vector<int> parse_order_list(const std::string& text) {
  std::vector<int> orders;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int value = 0;
    const auto [p, ec] =
        std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || p != item.data() + item.size() || value < 1) {
      throw ConfigError("invalid order list '" + text +
                        "' (expected comma-separated positive integers)");
    }
    orders.push_back(value);
  }
  if (orders.empty()) throw ConfigError("order list is empty");
  return orders;
}

// Decodes the manifest once per LM order and reports (order, perplexity,
// WER) rows: the data behind a perplexity-versus-WER plot.
template <typename Scalar>
void run_lm_sweep_typed(const LmSweepArgs& a, const RunConfig& base_cfg) {
  auto loaded = model::load_checkpoint<Scalar>(a.checkpoint);
  model::Model<Scalar>& m = loaded.model;
  const ctc::Alphabet alphabet{m.config().graphemes};
  const auto entries = data::load_manifest(a.manifest);
  const auto utts = pipeline::load_utterances(entries, alphabet,
                                              /*require_targets=*/false);
  const auto sentences = lm::read_corpus(a.corpus);

  // Held-out text for perplexity: the manifest's normalized transcripts.
  std::vector<std::vector<std::string>> held_out;
  held_out.reserve(utts.size());
  for (const pipeline::Utterance& u : utts) {
    held_out.push_back(eval::words(u.text));
  }

  std::string csv = "order,perplexity,wer\n";
  for (const int order : parse_order_list(a.orders)) {
    const lm::BackoffLM lm_model = lm::BackoffLM::train(sentences, order);
    const double ppl = lm_model.perplexity(held_out);

    RunConfig cfg = base_cfg;
    cfg.decode_mode = DecodeMode::kBeam;
    const pipeline::DecodeOutcome out =
        pipeline::decode_utterances(m, utts, cfg, &lm_model, nullptr);
    eval::ErrorCounts total;
    for (std::size_t i = 0; i < utts.size(); ++i) {
      total += eval::edit_distance(eval::words(utts[i].text),
                                   eval::words(out.hyps[i]));
    }
    csv += std::to_string(order) + "," + format_g12(ppl) + "," +
           format_g12(total.rate()) + "\n";
    std::cout << "order " << order << ": perplexity " << format_g12(ppl)
              << ", WER " << format_g12(total.rate()) << "\n";
  }
  write_file_atomic(a.csv, csv);
  std::cout << "wrote " << a.csv << "\n";
}

void run_lm_sweep(const LmSweepArgs& a) {
  const RunConfig cfg = load_run_config(a.config);
  if (cfg.precision == "f32") {
    run_lm_sweep_typed<float>(a, cfg);
  } else {
    run_lm_sweep_typed<double>(a, cfg);
  }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string dir;
  int count = 20;
  std::uint64_t seed = 7;
};

void run_synth(const SynthArgs& a) {
  data::SyntheticSpec spec;
  spec.n_utterances = a.count;
  spec.seed = a.seed;
  const auto entries = data::generate_synthetic_corpus(a.dir, spec);
  double seconds = 0.0;
  for (const auto& e : entries) seconds += e.duration;
  std::cout << "wrote " << entries.size() << " utterances ("
            << format_g12(seconds) << " s of audio) under " << a.dir << "\n"
            << "manifest: "
            << (std::filesystem::path(a.dir) / "manifest.jsonl").string()
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convolutional CTC speech recognition toolkit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a model from a run config");
  train->add_option("--config", train_args.config, "run configuration file")
      ->required();
  train->add_option("--resume", train_args.resume,
                    "checkpoint to resume from (epoch boundary)");
  train->callback([&train_args] { run_train(train_args); });

  DecodeArgs decode_args;
  CLI::App* decode =
      app.add_subcommand("decode", "Decode a manifest with a checkpoint");
  decode->add_option("--config", decode_args.config, "run configuration file")
      ->required();
  decode->add_option("--checkpoint", decode_args.checkpoint, "model checkpoint")
      ->required();
  decode->add_option("--manifest", decode_args.manifest, "input manifest")
      ->required();
  decode->add_option("--hyp", decode_args.hyp, "hypothesis output file")
      ->required();
  decode->add_option("--nbest", decode_args.nbest,
                     "n-best output file (beam modes)");
  decode->add_option("--mode", decode_args.mode,
                     "greedy | beam | beam+rescore (overrides the config)");
  decode->add_option("--external", decode_args.external,
                     "external rescoring scores (id<TAB>score per hypothesis)");
  decode->callback([&decode_args] { run_decode(decode_args); });

  EvaluateArgs eval_args;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Score hypotheses against references");
  evaluate->add_option("--ref", eval_args.ref, "reference manifest")
      ->required();
  evaluate->add_option("--hyp", eval_args.hyp, "hypothesis file")->required();
  evaluate->add_option("--csv", eval_args.csv, "per-utterance report CSV");
  evaluate->callback([&eval_args] { run_evaluate(eval_args); });

  InspectArgs inspect_args;
  CLI::App* inspect =
      app.add_subcommand("inspect", "Print model structure facts");
  inspect
      ->add_option("--model", inspect_args.model,
                   "preset name or model config file")
      ->required();
  inspect->callback([&inspect_args] { run_inspect(inspect_args); });

  CLI::App* lm_cmd = app.add_subcommand("lm", "Language model utilities");
  lm_cmd->require_subcommand(1);

  LmTrainArgs lm_train_args;
  CLI::App* lm_train = lm_cmd->add_subcommand("train", "Train an n-gram LM");
  lm_train->add_option("--corpus", lm_train_args.corpus, "training text")
      ->required();
  lm_train->add_option("--order", lm_train_args.order, "n-gram order");
  lm_train->add_option("--arpa", lm_train_args.arpa, "ARPA output file")
      ->required();
  lm_train->callback([&lm_train_args] { run_lm_train(lm_train_args); });

  LmPerplexityArgs lm_ppl_args;
  CLI::App* lm_ppl =
      lm_cmd->add_subcommand("perplexity", "Perplexity of text under an LM");
  lm_ppl->add_option("--arpa", lm_ppl_args.arpa, "ARPA model file")->required();
  lm_ppl->add_option("--corpus", lm_ppl_args.corpus, "evaluation text")
      ->required();
  lm_ppl->callback([&lm_ppl_args] { run_lm_perplexity(lm_ppl_args); });

  LmRoundtripArgs lm_rt_args;
  CLI::App* lm_rt = lm_cmd->add_subcommand(
      "roundtrip", "Canonicalize an ARPA file and verify stability");
  lm_rt->add_option("--arpa", lm_rt_args.arpa, "ARPA input file")->required();
  lm_rt->add_option("--out", lm_rt_args.out, "canonicalized output file")
      ->required();
  lm_rt->callback([&lm_rt_args] { run_lm_roundtrip(lm_rt_args); });

  LmSweepArgs lm_sweep_args;
  CLI::App* lm_sweep = lm_cmd->add_subcommand(
      "sweep", "Perplexity/WER rows across n-gram orders");
  lm_sweep->add_option("--config", lm_sweep_args.config, "run configuration")
      ->required();
  lm_sweep
      ->add_option("--checkpoint", lm_sweep_args.checkpoint, "model checkpoint")
      ->required();
  lm_sweep->add_option("--manifest", lm_sweep_args.manifest, "eval manifest")
      ->required();
  lm_sweep->add_option("--corpus", lm_sweep_args.corpus, "LM training text")
      ->required();
  lm_sweep->add_option("--orders", lm_sweep_args.orders,
                       "comma-separated n-gram orders");
  lm_sweep->add_option("--csv", lm_sweep_args.csv, "output CSV")->required();
  lm_sweep->callback([&lm_sweep_args] { run_lm_sweep(lm_sweep_args); });

  SynthArgs synth_args;
  CLI::App* synth =
      app.add_subcommand("synth", "Generate the synthetic tone corpus");
  synth->add_option("--dir", synth_args.dir, "output directory")->required();
  synth->add_option("--count", synth_args.count, "number of utterances");
  synth->add_option("--seed", synth_args.seed, "generator seed");
  synth->callback([&synth_args] { run_synth(synth_args); });

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
