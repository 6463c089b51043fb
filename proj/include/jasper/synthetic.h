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

// Synthetic tone corpus for end-to-end tests: each letter a..j maps to a
// fixed sine frequency, spaces map to silence, so an acoustic model can
// overfit the set quickly and a decode can be checked for exact recovery.

#ifndef JASPER_SYNTHETIC_H_
#define JASPER_SYNTHETIC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "jasper/features.h"
#include "jasper/manifest.h"

namespace jasper {
namespace data {

struct SyntheticSpec {
  int n_utterances = 20;
  std::uint64_t seed = 7;
  int sample_rate = 16000;
  double tone_ms = 100.0;    // duration of each letter tone
  double letter_gap_ms = 40.0;   // silence between letters in a word
  double word_gap_ms = 140.0;    // silence for each inter-word space
  double edge_ms = 60.0;         // leading/trailing silence
  double amplitude = 0.30;
};

// Sine frequency carrying letter `c` (must be in a..j).
double letter_frequency(char c);

// Renders one transcript (words over letters a..j separated by single
// spaces) into audio per the spec.
AudioClip render_transcript(const std::string& text, const SyntheticSpec& spec);

// Generates `n_utterances` transcripts from a fixed ten-word pool covering
// every letter a..j, renders them to <dir>/utt_NNN.wav, and writes
// <dir>/manifest.jsonl (audio paths relative to the manifest) plus
// <dir>/corpus.txt holding one transcript per line for LM training.
// Deterministic in the seed.  Returns the manifest entries.
std::vector<ManifestEntry> generate_synthetic_corpus(const std::string& dir,
                                                     const SyntheticSpec& spec);

}  // namespace data
}  // namespace jasper

#endif  // JASPER_SYNTHETIC_H_
