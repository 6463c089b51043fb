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

// Order-N backoff language model with interpolated Kneser-Ney smoothing and
// ARPA text I/O.
//
// Conventions:
//   - All stored scores are log10 probabilities (the ARPA native unit).
//   - Sentences are padded with a single "<s>" and terminated by "</s>".
//     "<s>" is never predicted; its unigram entry carries log10 p = -99 as
//     a placeholder plus a genuine backoff weight.
//   - Out-of-vocabulary words map to "<unk>".  Training always reserves
//     "<unk>"; a foreign ARPA without it scores OOV words at the -99 floor.
//   - The model is immutable after construction and safe for concurrent
//     readers.
//
// Smoothing (discount D = 0.75, fixed):
//   - Highest order uses raw counts; lower orders use continuation counts
//     N1+(. u) over distinct raw (n+1)-gram types, except n-grams starting
//     with "<s>", which keep raw counts (nothing can precede "<s>").
//   - p_n(w|ctx) = max(c - D, 0)/denom(ctx) + lambda(ctx) * p_{n-1}(w|ctx'),
//     lambda(ctx) = D * types(ctx) / denom(ctx), bottoming out in the
//     uniform distribution over the predicted vocabulary (all words except
//     "<s>").  The ARPA backoff weight of a context equals its lambda, so
//     every context's probabilities sum to exactly one.

#ifndef JASPER_LM_H_
#define JASPER_LM_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace jasper {
namespace lm {

inline constexpr const char* kUnkWord = "<unk>";
inline constexpr const char* kBosWord = "<s>";
inline constexpr const char* kEosWord = "</s>";
inline constexpr double kDiscount = 0.75;
inline constexpr double kBosLogProb = -99.0;

// Splits a line into whitespace-separated tokens.
std::vector<std::string> tokenize(const std::string& line);

// Reads a text corpus, one sentence per line; blank lines are skipped.
// Throws DataError if the file cannot be read.
std::vector<std::vector<std::string>> read_corpus(const std::string& path);

struct NgramEntry {
  double logp = 0.0;   // log10 conditional probability
  double bow = 0.0;    // log10 backoff weight, valid when has_bow
  bool has_bow = false;
};

class BackoffLM {
 public:
  using Key = std::vector<int32_t>;

  // Trains an order-N interpolated Kneser-Ney model.  Throws ConfigError if
  // order < 1, DataError if the corpus is empty or uses a reserved word.
  static BackoffLM train(const std::vector<std::vector<std::string>>& sentences,
                         int order);

  // ARPA text I/O.  load_arpa throws DataError if the file cannot be read
  // and ParseError (with a line number) on malformed content; save_arpa
  // writes atomically via a temporary file.
  static BackoffLM load_arpa(const std::string& path);
  void save_arpa(const std::string& path) const;

  int order() const { return order_; }
  const std::vector<std::string>& vocab() const { return words_; }
  std::size_t ngram_count(int n) const;

  // Entry for an explicit n-gram given as word strings, or nullptr if the
  // n-gram is not stored.
  const NgramEntry* lookup(const std::vector<std::string>& gram) const;

  // Word id, or -1 if the word is not in the vocabulary.
  int32_t word_id(const std::string& word) const;
  const std::string& word(int32_t id) const { return words_.at(static_cast<std::size_t>(id)); }
  int32_t unk_id() const { return unk_; }
  int32_t bos_id() const { return bos_; }
  int32_t eos_id() const { return eos_; }

  // log10 p(word | context); the context lists preceding words, most recent
  // last, and is truncated to order-1 tokens.  OOV words map to "<unk>".
  double word_logp(const std::vector<std::string>& context,
                   const std::string& word) const;

  // Same walk over pre-mapped word ids (negative ids are treated as OOV).
  double word_logp_ids(const Key& context, int32_t word) const;

  // log10 p(w1..wk </s> | <s>): the full sentence score with boundaries.
  double sentence_logp(const std::vector<std::string>& words) const;

  // 10^(-(1/M) sum log10 p) over the corpus, M counting one "</s>" per
  // sentence.  Throws DataError on an empty corpus.
  double perplexity(const std::vector<std::vector<std::string>>& sentences) const;

 private:
  BackoffLM() = default;
  int32_t intern(const std::string& word);

  int order_ = 1;
  std::vector<std::string> words_;       // id -> word
  std::map<std::string, int32_t> ids_;   // word -> id
  std::vector<std::map<Key, NgramEntry>> tables_;  // tables_[n-1]: order n
  int32_t unk_ = -1;
  int32_t bos_ = -1;
  int32_t eos_ = -1;
};

}  // namespace lm
}  // namespace jasper

#endif  // JASPER_LM_H_
