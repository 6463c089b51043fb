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

// CTC prefix beam search with an optional word-level backoff language model,
// n-best lists, and file-based rescoring with an external scorer.
//
// Score conventions (natural log throughout this module):
//   - acoustic  = ln p_ctc(text): total probability of every frame labelling
//     that collapses to the hypothesis text.
//   - lm        = ln p_lm(words(text)): full sentence probability including
//     the end-of-sentence event (0 when no LM is attached).
//   - combined  = acoustic + alpha * lm + beta * word_count; this is the
//     first-pass ranking score.
//   - rescoring = w_am * combined + w_lm * external + w_wc * word_count.
//
// During the search the language model is consulted at each completed word
// (space emission); a trailing partial word is provisionally scored with the
// unknown-word unigram floor and re-scored exactly at finalization.

#ifndef JASPER_BEAM_SEARCH_H_
#define JASPER_BEAM_SEARCH_H_

#include <string>
#include <vector>

#include "jasper/ctc.h"
#include "jasper/lm.h"
#include "jasper/tensor.h"

namespace jasper {
namespace decode {

struct Hypothesis {
  std::string text;
  double acoustic = 0.0;    // ln p_ctc
  double lm = 0.0;          // ln p_lm (0 without a model)
  int word_count = 0;
  double combined = 0.0;    // acoustic + alpha*lm + beta*word_count
  double external = 0.0;    // filled by rescoring
  double final_score = 0.0; // filled by rescoring
};

struct NBestList {
  std::string utterance_id;
  std::vector<Hypothesis> hyps;  // sorted by combined, best first
};

struct BeamConfig {
  int width = 2048;    // beams kept per frame; 0 means unbounded (exact)
  int nbest = 10;      // hypotheses returned
  double alpha = 0.0;  // language-model weight
  double beta = 0.0;   // word-insertion bonus
};

// Prefix beam search over frames [0, length) of batch item b in a [B, V, T]
// natural-log posterior tensor (blank = alphabet.blank()).  lm may be null
// for acoustic-only decoding.  Throws ConfigError for an empty alphabet,
// negative width, nbest < 1, or non-finite alpha/beta; ShapeError for a
// malformed tensor or out-of-range b/length.
NBestList beam_search(const Tensor<double>& log_probs, Index b, Index length,
                      const ctc::Alphabet& alphabet, const lm::BackoffLM* lm,
                      const BeamConfig& cfg, const std::string& utterance_id);

struct RescoreWeights {
  double w_am = 1.0;  // weight on the first-pass combined score
  double w_lm = 0.0;  // weight on the external scores
  double w_wc = 0.0;  // weight on the word count
};

// Reranks by w_am*combined + w_lm*external + w_wc*word_count with a stable
// sort and a lexicographic tie-break on the hypothesis text.  external must
// hold one score per hypothesis, in list order; throws DataError otherwise.
NBestList rescore(const NBestList& nbest, const std::vector<double>& external,
                  const RescoreWeights& weights);

// N-best exchange files: one line per hypothesis,
//   utterance_id <TAB> acoustic <TAB> lm <TAB> word_count <TAB> text
// in rank order, consecutive lines with one id forming that utterance's
// list.  Scores round-trip exactly; load recomputes combined from the given
// alpha/beta.  External-scorer files answer with
//   utterance_id <TAB> score
// lines aligned one-to-one with the n-best lines.
void save_nbest(const std::string& path, const std::vector<NBestList>& lists);
std::vector<NBestList> load_nbest(const std::string& path, double alpha,
                                  double beta);
std::vector<std::pair<std::string, double>> load_external_scores(
    const std::string& path);

}  // namespace decode
}  // namespace jasper

#endif  // JASPER_BEAM_SEARCH_H_
