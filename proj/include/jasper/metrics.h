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

// Recognition scoring: Levenshtein alignment with deterministic tie-breaks,
// word/character error rates, text normalization, and CSV reports.

#ifndef JASPER_METRICS_H_
#define JASPER_METRICS_H_

#include <cstdint>
#include <string>
#include <vector>

namespace jasper {
namespace eval {

struct ErrorCounts {
  int64_t substitutions = 0;
  int64_t insertions = 0;
  int64_t deletions = 0;
  int64_t ref_len = 0;

  int64_t total() const { return substitutions + insertions + deletions; }

  // Word error rate; an empty reference is scored against a length floor of
  // one, so a non-empty hypothesis still counts its insertions.
  double rate() const {
    return static_cast<double>(total()) /
           static_cast<double>(ref_len > 0 ? ref_len : 1);
  }

  ErrorCounts& operator+=(const ErrorCounts& o) {
    substitutions += o.substitutions;
    insertions += o.insertions;
    deletions += o.deletions;
    ref_len += o.ref_len;
    return *this;
  }
};

// Minimal-cost alignment of hyp against ref.  Among minimal alignments the
// substitution count is maximized (substitution preferred over insertion
// over deletion), which pins down the full (S, I, D) triple: with the total
// fixed, I - D equals the length difference, so S determines both.
ErrorCounts edit_distance(const std::vector<std::string>& ref,
                          const std::vector<std::string>& hyp);

// Lowercases, strips punctuation except apostrophes (digits survive), and
// collapses whitespace runs to single spaces with no leading/trailing space.
std::string normalize_text(const std::string& text);

// Tokenizations for WER (whitespace words) and CER (every character,
// spaces included).
std::vector<std::string> words(const std::string& text);
std::vector<std::string> chars(const std::string& text);

struct UttResult {
  std::string id;
  std::string ref;
  std::string hyp;
  ErrorCounts counts;
};

// One CSV row per utterance: id, ref, hyp, substitutions, insertions,
// deletions, wer — with a header line.  Fields containing commas, quotes,
// or newlines are quoted per RFC 4180.
std::string wer_csv(const std::vector<UttResult>& rows);

// Sum of all per-utterance counts.
ErrorCounts aggregate(const std::vector<UttResult>& rows);

}  // namespace eval
}  // namespace jasper

#endif  // JASPER_METRICS_H_
