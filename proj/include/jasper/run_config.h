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

// Run configuration: a plain-text key-value format with [section] headers.
// Full-line comments start with '#'.  A value wrapped in double quotes is
// unquoted verbatim, which preserves leading or trailing spaces (useful for
// grapheme strings).  Every key is validated against the known set; a
// misspelled key is rejected with the nearest valid name as a suggestion.

#ifndef JASPER_RUN_CONFIG_H_
#define JASPER_RUN_CONFIG_H_

#include <cstdint>
#include <string>

#include "jasper/features.h"
#include "jasper/model_config.h"
#include "jasper/optim.h"

namespace jasper {

enum class PerturbPolicy {
  kNone,     // no augmentation
  kFixed,    // factor drawn from {0.9, 1.0, 1.1}
  kUniform,  // factor drawn from [perturb_low, perturb_high]
};

enum class DecodeMode {
  kGreedy,       // per-frame argmax + CTC collapse
  kBeam,         // prefix beam search, optionally with an n-gram LM
  kBeamRescore,  // beam search followed by n-best rescoring
};

DecodeMode parse_decode_mode(const std::string& name);
std::string decode_mode_name(DecodeMode mode);

struct RunConfig {
  // [model]
  std::string model_preset = "mini-2x2";  // one of model::preset_names()
  std::string model_config_file;          // overrides the preset when set
  std::string graphemes;                  // overrides the model's graphemes

  // [features]
  FeatureConfig features;

  // [data]
  std::string train_manifest;
  std::string dev_manifest;  // empty: validate on the training manifest

  // [train]
  std::string optimizer = "novograd";  // "novograd" | "sgd"
  std::string lr_policy = "poly";      // "poly" | "const"
  double base_lr = 0.01;
  std::int64_t warmup_steps = 0;
  double weight_decay = 1e-3;
  double beta1 = 0.95;   // novograd
  double beta2 = 0.5;    // novograd
  double epsilon = 1e-8; // novograd
  double momentum = 0.9; // sgd
  int batch_size = 4;
  int epochs = 10;
  std::uint64_t seed = 1;
  std::string checkpoint_dir = "checkpoints";
  PerturbPolicy speed_perturb = PerturbPolicy::kNone;
  double perturb_low = 0.9;
  double perturb_high = 1.1;
  double stop_wer = 0.0;  // stop once dev WER <= this; negative disables
  std::string precision = "f64";  // "f64" | "f32"

  // [decode]
  DecodeMode decode_mode = DecodeMode::kGreedy;
  int beam_width = 2048;  // 0 = unbounded
  double alpha = 0.0;
  double beta = 0.0;
  int nbest = 10;
  std::string lm_path;          // ARPA file for beam modes
  std::string rescore_lm_path;  // ARPA scoring the n-best; defaults to lm
  double w_am = 1.0;
  double w_lm = 0.0;
  double w_wc = 0.0;

  // [lm]
  int lm_order = 3;

  // Materializes the model configuration: the config file when given (read
  // from disk), otherwise the named preset; the grapheme override applies
  // on top of either.  Throws ConfigError / DataError accordingly.
  model::ModelConfig model() const;

  // Learning-rate schedule over the given horizon.
  optim::LrSchedule schedule(std::int64_t total_steps) const;

  // Range-checks every field (enums are checked during parsing).  Throws
  // ConfigError on the first violation.
  void validate() const;
};

// Parses configuration text / a configuration file.  Unknown sections and
// keys raise ConfigError naming the line and the nearest valid name.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace jasper

#endif  // JASPER_RUN_CONFIG_H_
