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

// Training and decoding drivers shared by the command-line tool and the
// tests.  Everything here is deterministic in (config, seed): batch order,
// augmentation factors, and dropout masks are all drawn from counter
// streams keyed by the seed together with epoch/step indices, so a resumed
// run replays the exact step sequence of an uninterrupted one.

#ifndef JASPER_PIPELINE_H_
#define JASPER_PIPELINE_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "jasper/beam_search.h"
#include "jasper/ctc.h"
#include "jasper/features.h"
#include "jasper/lm.h"
#include "jasper/manifest.h"
#include "jasper/metrics.h"
#include "jasper/model.h"
#include "jasper/run_config.h"

namespace jasper {
namespace pipeline {

// One utterance ready for the model: raw audio plus the normalized
// transcript encoded over the model alphabet.
struct Utterance {
  std::string id;
  AudioClip audio;
  std::string text;           // normalized transcript
  std::vector<Index> target;  // alphabet-encoded transcript
};

// Reads every manifest entry's audio and encodes its transcript.  A
// transcript using symbols outside the alphabet raises DataError naming the
// utterance; duplicate utterance ids raise DataError as well.  Decoding
// paths pass require_targets=false to skip transcript encoding, since a
// reference text outside the model alphabet is no obstacle to decoding.
std::vector<Utterance> load_utterances(
    const std::vector<data::ManifestEntry>& entries,
    const ctc::Alphabet& alphabet, bool require_targets = true);

struct EpochStats {
  int epoch = 0;                 // 1-based
  std::int64_t global_step = 0;  // optimizer steps taken so far
  double train_loss = 0.0;       // size-weighted mean CTC loss of the epoch
  double dev_wer = 0.0;          // greedy WER on the dev set
};

// CSV serialization of an epoch history; floats print at full precision so
// equal runs give byte-identical logs.
std::string metrics_csv_text(const std::vector<EpochStats>& history);

struct TrainOutcome {
  std::vector<EpochStats> history;  // epochs run by this call
  std::string last_checkpoint;
  std::string best_checkpoint;
  double best_wer = 0.0;
  std::string metrics_csv;  // path of the written log
};

// Runs the configured training loop: duration-bucketed batches in a
// seed-shuffled order, optional speed perturbation, CTC loss, the
// configured optimizer, a greedy dev-WER evaluation per epoch, and atomic
// per-epoch / best checkpoints under cfg.checkpoint_dir.  With epochs=0 an
// initial checkpoint is written and no steps run.  `resume_checkpoint`, when
// non-empty, restores model and optimizer state saved at an epoch boundary
// and continues from the following epoch, reproducing the uninterrupted
// run's remaining epochs bit for bit.  Training stops early once the dev
// WER drops to cfg.stop_wer or below (negative disables).  Progress lines
// go to `log`.
template <typename Scalar>
TrainOutcome run_training(const RunConfig& cfg,
                          const std::string& resume_checkpoint,
                          std::ostream& log);

struct DecodeOutcome {
  std::vector<std::string> ids;
  std::vector<std::string> hyps;        // top-1 text per utterance
  std::vector<decode::NBestList> nbest; // empty in greedy mode
};

// Decodes utterances with the configured mode.  Beam modes require `lms`;
// beam+rescore scores each candidate with `rescore_lm` (falling back to
// `lm`) as the external score.  Throws ConfigError when a required LM is
// missing or when the LM vocabulary uses symbols absent from the model
// graphemes.
template <typename Scalar>
DecodeOutcome decode_utterances(model::Model<Scalar>& model,
                                const std::vector<Utterance>& utts,
                                const RunConfig& cfg,
                                const lm::BackoffLM* lm,
                                const lm::BackoffLM* rescore_lm);

// Hypothesis exchange file: one "utterance_id<TAB>text" line per utterance.
void save_hypotheses(const std::string& path,
                     const std::vector<std::string>& ids,
                     const std::vector<std::string>& hyps);
std::vector<std::pair<std::string, std::string>> load_hypotheses(
    const std::string& path);

// Aligns hypotheses to reference entries by utterance id and scores each
// pair (both sides normalized).  Any id set mismatch raises DataError
// listing every missing and every unexpected id.
std::vector<eval::UttResult> evaluate_hypotheses(
    const std::vector<data::ManifestEntry>& refs,
    const std::vector<std::pair<std::string, std::string>>& hyps);

extern template TrainOutcome run_training<float>(const RunConfig&,
                                                 const std::string&,
                                                 std::ostream&);
extern template TrainOutcome run_training<double>(const RunConfig&,
                                                  const std::string&,
                                                  std::ostream&);
extern template DecodeOutcome decode_utterances<float>(
    model::Model<float>&, const std::vector<Utterance>&, const RunConfig&,
    const lm::BackoffLM*, const lm::BackoffLM*);
extern template DecodeOutcome decode_utterances<double>(
    model::Model<double>&, const std::vector<Utterance>&, const RunConfig&,
    const lm::BackoffLM*, const lm::BackoffLM*);

}  // namespace pipeline
}  // namespace jasper

#endif  // JASPER_PIPELINE_H_
