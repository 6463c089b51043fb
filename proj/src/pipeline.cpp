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

#include "jasper/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "jasper/checkpoint.h"
#include "jasper/error.h"
#include "jasper/graph.h"
#include "jasper/nn_ops.h"
#include "jasper/optim.h"
#include "jasper/rng.h"

namespace jasper {
namespace pipeline {

namespace fs = std::filesystem;

namespace {

constexpr double kLn10 = 2.302585092994046;

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot write file: " + tmp);
    os << text;
    if (!os) throw DataError("failed writing file: " + tmp);
  }
  fs::rename(tmp, path);
}

// Log-mel features for one clip, optionally speed-perturbed first.
Tensor<double> features_for(const AudioClip& clip, double factor,
                            const FeatureConfig& fcfg) {
  if (factor == 1.0) return mel_features(clip, fcfg);
  return mel_features(speed_perturb(clip, factor), fcfg);
}

// Stacks per-utterance feature tensors [1, C, T_i] into a zero-padded
// [B, C, T_max] batch of the model's scalar type.
template <typename Scalar>
PaddedBatch<Scalar> assemble_batch(const std::vector<Tensor<double>>& feats) {
  const Index b_n = static_cast<Index>(feats.size());
  const Index c_n = feats.front().dim(1);
  Index t_max = 0;
  std::vector<Index> lengths;
  lengths.reserve(feats.size());
  for (const Tensor<double>& f : feats) {
    lengths.push_back(f.dim(2));
    t_max = std::max(t_max, f.dim(2));
  }
  Tensor<Scalar> x = Tensor<Scalar>::zeros({b_n, c_n, t_max});
  for (Index b = 0; b < b_n; ++b) {
    const Tensor<double>& f = feats[static_cast<std::size_t>(b)];
    for (Index c = 0; c < c_n; ++c) {
      for (Index t = 0; t < f.dim(2); ++t) {
        x.at(b, c, t) = static_cast<Scalar>(f.at(0, c, t));
      }
    }
  }
  return PaddedBatch<Scalar>::make(std::move(x), std::move(lengths));
}

// Utterance indices grouped into duration-bucketed batches: sorting by
// sample count keeps each batch's padding small.
std::vector<std::vector<std::size_t>> bucket_batches(
    const std::vector<Utterance>& utts, int batch_size) {
  std::vector<std::size_t> order(utts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&utts](std::size_t a, std::size_t b) {
                     return utts[a].audio.samples.size() <
                            utts[b].audio.samples.size();
                   });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(order.size(), i + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

// Greedy WER of the model over a set of utterances, batched for speed.
template <typename Scalar>
double greedy_wer(model::Model<Scalar>& model,
                  const std::vector<Utterance>& utts, const RunConfig& cfg,
                  const ctc::Alphabet& alphabet) {
  eval::ErrorCounts total;
  for (std::size_t i = 0; i < utts.size();
       i += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t end =
        std::min(utts.size(), i + static_cast<std::size_t>(cfg.batch_size));
    std::vector<Tensor<double>> feats;
    for (std::size_t k = i; k < end; ++k) {
      feats.push_back(features_for(utts[k].audio, 1.0, cfg.features));
    }
    PaddedBatch<Scalar> batch = assemble_batch<Scalar>(feats);
    Graph<Scalar> g;
    auto fwd = model.forward(g, batch, nn::Mode::kInfer);
    const std::vector<std::string> hyps =
        ctc::greedy_decode(g.value(fwd.log_probs), fwd.out_lengths, alphabet);
    for (std::size_t k = i; k < end; ++k) {
      total += eval::edit_distance(eval::words(utts[k].text),
                                   eval::words(hyps[k - i]));
    }
  }
  return total.rate();
}

double perturb_factor(const RunConfig& cfg, int epoch, std::size_t utt_index) {
  if (cfg.speed_perturb == PerturbPolicy::kNone) return 1.0;
  SplitMix64 rng(derive_stream(cfg.seed, "speed-perturb",
                               {static_cast<std::uint64_t>(epoch),
                                static_cast<std::uint64_t>(utt_index)}));
  if (cfg.speed_perturb == PerturbPolicy::kFixed) {
    constexpr double kFactors[3] = {0.9, 1.0, 1.1};
    return kFactors[rng.uniform_int(3)];
  }
  return rng.uniform(cfg.perturb_low, cfg.perturb_high);
}

std::string epoch_checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch-%04d.ckpt", epoch);
  return buf;
}

}  // namespace

std::vector<Utterance> load_utterances(
    const std::vector<data::ManifestEntry>& entries,
    const ctc::Alphabet& alphabet, bool require_targets) {
  std::vector<Utterance> utts;
  utts.reserve(entries.size());
  std::set<std::string> seen;
  for (const data::ManifestEntry& entry : entries) {
    Utterance u;
    u.id = data::utterance_id(entry);
    if (!seen.insert(u.id).second) {
      throw DataError("duplicate utterance id in manifest: " + u.id);
    }
    u.audio = read_wav(entry.resolved_path);
    u.text = eval::normalize_text(entry.text);
    if (require_targets) {
      try {
        u.target = alphabet.encode(u.text);
      } catch (const DataError& e) {
        throw DataError("utterance " + u.id + ": " + e.what());
      }
    }
    utts.push_back(std::move(u));
  }
  return utts;
}

std::string metrics_csv_text(const std::vector<EpochStats>& history) {
  std::string text = "epoch,step,train_loss,dev_wer\n";
  for (const EpochStats& row : history) {
    text += std::to_string(row.epoch) + "," + std::to_string(row.global_step) +
            "," + format_g17(row.train_loss) + "," + format_g17(row.dev_wer) +
            "\n";
  }
  return text;
}

template <typename Scalar>
TrainOutcome run_training(const RunConfig& cfg,
                          const std::string& resume_checkpoint,
                          std::ostream& log) {
  cfg.validate();
  if (cfg.train_manifest.empty()) {
    throw ConfigError("[data] train_manifest is required for training");
  }
  const model::ModelConfig mcfg = cfg.model();
  const ctc::Alphabet alphabet{mcfg.graphemes};

  const std::vector<Utterance> train_utts =
      load_utterances(data::load_manifest(cfg.train_manifest), alphabet);
  if (train_utts.empty()) {
    throw DataError("training manifest has no entries: " + cfg.train_manifest);
  }
  const std::vector<Utterance> dev_utts =
      cfg.dev_manifest.empty()
          ? train_utts
          : load_utterances(data::load_manifest(cfg.dev_manifest), alphabet);
  if (dev_utts.empty()) {
    throw DataError("dev manifest has no entries: " + cfg.dev_manifest);
  }

  const std::vector<std::vector<std::size_t>> batches =
      bucket_batches(train_utts, cfg.batch_size);
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>(batches.size());
  const optim::LrSchedule sched = cfg.schedule(cfg.epochs * steps_per_epoch);

  fs::create_directories(cfg.checkpoint_dir);
  const fs::path ckpt_dir(cfg.checkpoint_dir);

  optim::NovoGrad<Scalar> novograd(
      {cfg.beta1, cfg.beta2, cfg.epsilon, cfg.weight_decay});
  optim::SgdMomentum<Scalar> sgd({cfg.momentum, cfg.weight_decay});
  const bool use_novograd = cfg.optimizer == "novograd";

  std::optional<model::Model<Scalar>> model;
  std::int64_t global_step = 0;
  int epoch_start = 0;
  if (!resume_checkpoint.empty()) {
    auto loaded = model::load_checkpoint<Scalar>(resume_checkpoint);
    if (model::config_text(loaded.model.config()) != model::config_text(mcfg)) {
      throw ConfigError(
          "checkpoint was built with a different model configuration: " +
          resume_checkpoint);
    }
    global_step = static_cast<std::int64_t>(loaded.global_step);
    if (steps_per_epoch > 0 && global_step % steps_per_epoch != 0) {
      throw DataError("checkpoint step " + std::to_string(global_step) +
                      " is not at an epoch boundary (steps per epoch: " +
                      std::to_string(steps_per_epoch) + ")");
    }
    epoch_start = steps_per_epoch > 0
                      ? static_cast<int>(global_step / steps_per_epoch)
                      : 0;
    if (epoch_start > cfg.epochs) {
      throw ConfigError("checkpoint is past the configured horizon of " +
                        std::to_string(cfg.epochs) + " epochs");
    }
    if (loaded.optimizer) {
      if (use_novograd) {
        model::restore_optimizer(*loaded.optimizer, novograd);
      } else {
        model::restore_optimizer(*loaded.optimizer, sgd);
      }
    }
    model.emplace(std::move(loaded.model));
  } else {
    model.emplace(mcfg, cfg.seed);
  }

  TrainOutcome out;
  out.best_wer = std::numeric_limits<double>::infinity();
  out.metrics_csv = (ckpt_dir / "metrics.csv").string();

  const auto save_with_optimizer = [&](const fs::path& path) {
    if (use_novograd) {
      const auto snap = model::snapshot_optimizer(novograd);
      model::save_checkpoint(path, *model,
                             static_cast<std::uint64_t>(global_step), &snap);
    } else {
      const auto snap = model::snapshot_optimizer(sgd);
      model::save_checkpoint(path, *model,
                             static_cast<std::uint64_t>(global_step), &snap);
    }
  };

  if (cfg.epochs == 0) {
    const fs::path initial = ckpt_dir / "initial.ckpt";
    save_with_optimizer(initial);
    out.last_checkpoint = initial.string();
    out.best_checkpoint = initial.string();
    write_text_atomic(out.metrics_csv, metrics_csv_text({}));
    log << "epochs=0: wrote initial checkpoint " << initial.string() << "\n";
    return out;
  }

  for (int e = epoch_start; e < cfg.epochs; ++e) {
    // Seed-keyed shuffle of the batch order; the buckets themselves stay
    // duration-sorted so padding stays small.
    std::vector<std::size_t> perm(batches.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    SplitMix64 shuffle_rng(
        derive_stream(cfg.seed, "batch-order", {static_cast<std::uint64_t>(e)}));
    for (std::size_t i = perm.size(); i > 1; --i) {
      std::swap(perm[i - 1], perm[shuffle_rng.uniform_int(i)]);
    }

    double loss_sum = 0.0;
    std::int64_t loss_items = 0;
    for (std::size_t bi = 0; bi < perm.size(); ++bi) {
      const std::vector<std::size_t>& members = batches[perm[bi]];
      std::vector<Tensor<double>> feats;
      std::vector<std::vector<Index>> targets;
      feats.reserve(members.size());
      targets.reserve(members.size());
      for (std::size_t k : members) {
        const double factor = perturb_factor(cfg, e, k);
        feats.push_back(features_for(train_utts[k].audio, factor, cfg.features));
        const Index t_out =
            nn::conv_out_length(feats.back().dim(2), mcfg.conv1.stride);
        if (ctc::ctc_min_frames(train_utts[k].target) > t_out) {
          throw DataError("utterance " + train_utts[k].id + " yields " +
                          std::to_string(t_out) +
                          " frames after striding but its transcript needs " +
                          std::to_string(ctc::ctc_min_frames(train_utts[k].target)));
        }
        targets.push_back(train_utts[k].target);
      }

      PaddedBatch<Scalar> batch = assemble_batch<Scalar>(feats);
      Graph<Scalar> g;
      auto fwd = model->forward(
          g, batch, nn::Mode::kTrain,
          derive_stream(cfg.seed, "dropout",
                        {static_cast<std::uint64_t>(e),
                         static_cast<std::uint64_t>(bi)}));
      const Var loss = ctc::ctc_loss_node(g, fwd.log_probs, targets,
                                          fwd.out_lengths, alphabet.blank());
      g.backward(loss);

      std::vector<optim::ParamRef<Scalar>> refs;
      refs.reserve(model->params().size());
      for (auto& [name, tensor] : model->params()) {
        refs.push_back({name, &tensor, &g.grad(fwd.param_vars.at(name))});
      }
      const double lr = sched.at(global_step);
      if (use_novograd) {
        novograd.step(refs, lr);
      } else {
        sgd.step(refs, lr);
      }
      ++global_step;

      loss_sum += static_cast<double>(g.value(loss).value()) *
                  static_cast<double>(members.size());
      loss_items += static_cast<std::int64_t>(members.size());
    }

    const double wer = greedy_wer(*model, dev_utts, cfg, alphabet);
    EpochStats row;
    row.epoch = e + 1;
    row.global_step = global_step;
    row.train_loss = loss_sum / static_cast<double>(loss_items);
    row.dev_wer = wer;
    out.history.push_back(row);
    write_text_atomic(out.metrics_csv, metrics_csv_text(out.history));
    log << "epoch " << row.epoch << " step " << row.global_step << " loss "
        << row.train_loss << " dev_wer " << row.dev_wer << "\n";

    const fs::path epoch_path = ckpt_dir / epoch_checkpoint_name(e + 1);
    save_with_optimizer(epoch_path);
    out.last_checkpoint = epoch_path.string();
    if (wer < out.best_wer) {
      out.best_wer = wer;
      const fs::path best = ckpt_dir / "best.ckpt";
      save_with_optimizer(best);
      out.best_checkpoint = best.string();
    }
    if (cfg.stop_wer >= 0.0 && wer <= cfg.stop_wer) {
      log << "dev WER " << wer << " reached stop threshold " << cfg.stop_wer
          << "; stopping\n";
      break;
    }
  }
  return out;
}

template <typename Scalar>
DecodeOutcome decode_utterances(model::Model<Scalar>& model,
                                const std::vector<Utterance>& utts,
                                const RunConfig& cfg,
                                const lm::BackoffLM* lm,
                                const lm::BackoffLM* rescore_lm) {
  const ctc::Alphabet alphabet{model.config().graphemes};
  if (cfg.decode_mode != DecodeMode::kGreedy && lm == nullptr &&
      (cfg.alpha != 0.0 || cfg.decode_mode == DecodeMode::kBeamRescore)) {
    // Beam search itself runs LM-free, but a weighted LM or a rescoring
    // pass cannot.
    throw ConfigError("decode mode '" + decode_mode_name(cfg.decode_mode) +
                      "' requires a language model ([decode] lm)");
  }
  for (const lm::BackoffLM* m : {lm, rescore_lm}) {
    if (m == nullptr) continue;
    for (const std::string& word : m->vocab()) {
      if (word == lm::kUnkWord || word == lm::kBosWord || word == lm::kEosWord) {
        continue;
      }
      for (char c : word) {
        if (alphabet.graphemes.find(c) == std::string::npos) {
          throw ConfigError(std::string("LM vocabulary word '") + word +
                            "' uses symbol '" + c +
                            "' absent from the model graphemes");
        }
      }
    }
  }

  DecodeOutcome out;
  for (std::size_t i = 0; i < utts.size();
       i += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t end =
        std::min(utts.size(), i + static_cast<std::size_t>(cfg.batch_size));
    std::vector<Tensor<double>> feats;
    for (std::size_t k = i; k < end; ++k) {
      feats.push_back(features_for(utts[k].audio, 1.0, cfg.features));
    }
    PaddedBatch<Scalar> batch = assemble_batch<Scalar>(feats);
    Graph<Scalar> g;
    auto fwd = model.forward(g, batch, nn::Mode::kInfer);

    if (cfg.decode_mode == DecodeMode::kGreedy) {
      const std::vector<std::string> hyps = ctc::greedy_decode(
          g.value(fwd.log_probs), fwd.out_lengths, alphabet);
      for (std::size_t k = i; k < end; ++k) {
        out.ids.push_back(utts[k].id);
        out.hyps.push_back(hyps[k - i]);
      }
      continue;
    }

    const Tensor<double> log_probs =
        tensor_cast<double>(g.value(fwd.log_probs));
    decode::BeamConfig bcfg;
    bcfg.width = cfg.beam_width;
    bcfg.nbest = cfg.nbest;
    bcfg.alpha = cfg.alpha;
    bcfg.beta = cfg.beta;
    for (std::size_t k = i; k < end; ++k) {
      decode::NBestList list = decode::beam_search(
          log_probs, static_cast<Index>(k - i), fwd.out_lengths[k - i],
          alphabet, lm, bcfg, utts[k].id);
      if (cfg.decode_mode == DecodeMode::kBeamRescore) {
        const lm::BackoffLM* scorer = rescore_lm != nullptr ? rescore_lm : lm;
        std::vector<double> external;
        external.reserve(list.hyps.size());
        for (const decode::Hypothesis& h : list.hyps) {
          external.push_back(scorer->sentence_logp(eval::words(h.text)) *
                             kLn10);
        }
        list = decode::rescore(list, external,
                               {cfg.w_am, cfg.w_lm, cfg.w_wc});
      }
      out.ids.push_back(utts[k].id);
      out.hyps.push_back(list.hyps.empty() ? std::string() : list.hyps[0].text);
      out.nbest.push_back(std::move(list));
    }
  }
  return out;
}

void save_hypotheses(const std::string& path,
                     const std::vector<std::string>& ids,
                     const std::vector<std::string>& hyps) {
  if (ids.size() != hyps.size()) {
    throw ShapeError("hypothesis ids and texts differ in count");
  }
  std::string text;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    text += ids[i] + "\t" + hyps[i] + "\n";
  }
  write_text_atomic(path, text);
}

std::vector<std::pair<std::string, std::string>> load_hypotheses(
    const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open hypothesis file: " + path);
  std::vector<std::pair<std::string, std::string>> hyps;
  std::set<std::string> seen;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("hypothesis line has no <TAB> separator", line_no);
    }
    const std::string id = line.substr(0, tab);
    if (id.empty()) throw ParseError("hypothesis line has an empty id", line_no);
    if (!seen.insert(id).second) {
      throw ParseError("duplicate utterance id: " + id, line_no);
    }
    hyps.emplace_back(id, line.substr(tab + 1));
  }
  return hyps;
}

std::vector<eval::UttResult> evaluate_hypotheses(
    const std::vector<data::ManifestEntry>& refs,
    const std::vector<std::pair<std::string, std::string>>& hyps) {
  std::map<std::string, std::string> by_id(hyps.begin(), hyps.end());
  std::vector<std::string> missing;  // in the references, not in the hyps
  std::set<std::string> ref_ids;
  for (const data::ManifestEntry& entry : refs) {
    const std::string id = data::utterance_id(entry);
    if (!ref_ids.insert(id).second) {
      throw DataError("duplicate utterance id in reference manifest: " + id);
    }
    if (by_id.find(id) == by_id.end()) missing.push_back(id);
  }
  std::vector<std::string> extra;  // in the hyps, not in the references
  for (const auto& [id, text] : by_id) {
    if (ref_ids.find(id) == ref_ids.end()) extra.push_back(id);
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "utterance ids do not align;";
    if (!missing.empty()) {
      msg += " missing from hypotheses:";
      for (const std::string& id : missing) msg += " " + id;
      msg += ";";
    }
    if (!extra.empty()) {
      msg += " absent from references:";
      for (const std::string& id : extra) msg += " " + id;
    }
    throw DataError(msg);
  }

  std::vector<eval::UttResult> rows;
  rows.reserve(refs.size());
  for (const data::ManifestEntry& entry : refs) {
    eval::UttResult row;
    row.id = data::utterance_id(entry);
    row.ref = eval::normalize_text(entry.text);
    row.hyp = eval::normalize_text(by_id.at(row.id));
    row.counts = eval::edit_distance(eval::words(row.ref), eval::words(row.hyp));
    rows.push_back(std::move(row));
  }
  return rows;
}

template TrainOutcome run_training<float>(const RunConfig&, const std::string&,
                                          std::ostream&);
template TrainOutcome run_training<double>(const RunConfig&,
                                           const std::string&, std::ostream&);
template DecodeOutcome decode_utterances<float>(model::Model<float>&,
                                                const std::vector<Utterance>&,
                                                const RunConfig&,
                                                const lm::BackoffLM*,
                                                const lm::BackoffLM*);
template DecodeOutcome decode_utterances<double>(model::Model<double>&,
                                                 const std::vector<Utterance>&,
                                                 const RunConfig&,
                                                 const lm::BackoffLM*,
                                                 const lm::BackoffLM*);

}  // namespace pipeline
}  // namespace jasper
