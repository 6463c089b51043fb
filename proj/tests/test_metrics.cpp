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

#include "jasper/metrics.h"

#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "jasper/rng.h"

namespace {

using jasper::eval::edit_distance;
using jasper::eval::ErrorCounts;

using Tokens = std::vector<std::string>;

Tokens random_tokens(jasper::SplitMix64& rng, int max_len) {
  static const Tokens pool = {"a", "b", "c", "d"};
  const int len = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(max_len + 1)));
  Tokens out;
  for (int i = 0; i < len; ++i) {
    out.push_back(pool[rng.uniform_int(pool.size())]);
  }
  return out;
}

}  // namespace

TEST_CASE("identical sequences have zero errors") {
  const Tokens s = {"the", "cat", "sat"};
  const ErrorCounts c = edit_distance(s, s);
  CHECK(c.substitutions == 0);
  CHECK(c.insertions == 0);
  CHECK(c.deletions == 0);
  CHECK(c.ref_len == 3);
  CHECK(c.rate() == 0.0);
}

TEST_CASE("hand-built alignment: one substitution plus one insertion") {
  const ErrorCounts c =
      edit_distance({"a", "b", "c"}, {"a", "x", "c", "d"});
  CHECK(c.substitutions == 1);
  CHECK(c.insertions == 1);
  CHECK(c.deletions == 0);
  CHECK(std::abs(c.rate() - 2.0 / 3.0) < 1e-15);
}

TEST_CASE("degenerate references and hypotheses") {
  const ErrorCounts del = edit_distance({"a"}, {});
  CHECK(del.deletions == 1);
  CHECK(del.rate() == 1.0);

  const ErrorCounts ins = edit_distance({}, {"x", "y"});
  CHECK(ins.insertions == 2);
  CHECK(ins.substitutions == 0);
  CHECK(ins.ref_len == 0);
  CHECK(ins.rate() == 2.0);  // empty reference scores against a floor of 1

  const ErrorCounts none = edit_distance({}, {});
  CHECK(none.total() == 0);
  CHECK(none.rate() == 0.0);
}

TEST_CASE("ties prefer substitution over insertion and deletion") {
  // "a b" vs "b a" can be solved by two substitutions or by one deletion
  // plus one insertion; both cost two edits.
  const ErrorCounts c = edit_distance({"a", "b"}, {"b", "a"});
  CHECK(c.total() == 2);
  CHECK(c.substitutions == 2);
  CHECK(c.insertions == 0);
  CHECK(c.deletions == 0);
}

TEST_CASE("swapping ref and hyp preserves cost and substitutions") {
  jasper::SplitMix64 rng(jasper::derive_stream(20260816, "metrics", {1}));
  for (int i = 0; i < 200; ++i) {
    const Tokens a = random_tokens(rng, 8);
    const Tokens b = random_tokens(rng, 8);
    const ErrorCounts ab = edit_distance(a, b);
    const ErrorCounts ba = edit_distance(b, a);
    CHECK(ab.total() == ba.total());
    CHECK(ab.substitutions == ba.substitutions);
    CHECK(ab.insertions == ba.deletions);
    CHECK(ab.deletions == ba.insertions);
  }
}

TEST_CASE("total edit count satisfies the triangle inequality") {
  jasper::SplitMix64 rng(jasper::derive_stream(20260816, "metrics", {2}));
  for (int i = 0; i < 150; ++i) {
    const Tokens a = random_tokens(rng, 6);
    const Tokens b = random_tokens(rng, 6);
    const Tokens c = random_tokens(rng, 6);
    CHECK(edit_distance(a, c).total() <=
          edit_distance(a, b).total() + edit_distance(b, c).total());
  }
}

TEST_CASE("text normalization") {
  using jasper::eval::normalize_text;
  CHECK(normalize_text("Hello, World!") == "hello world");
  CHECK(normalize_text("  DON'T   stop...  ") == "don't stop");
  CHECK(normalize_text("well-known fact") == "wellknown fact");
  CHECK(normalize_text("route 66; exit 9") == "route 66 exit 9");
  CHECK(normalize_text("\tTabs\tand\nnewlines\n") == "tabs and newlines");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("?!.,") == "");
}

TEST_CASE("word and character tokenizations") {
  using jasper::eval::chars;
  using jasper::eval::words;
  CHECK(words("the cat sat") == Tokens{"the", "cat", "sat"});
  CHECK(words("  padded  ") == Tokens{"padded"});
  CHECK(words("") == Tokens{});
  CHECK(chars("abc") == Tokens{"a", "b", "c"});
  CHECK(chars("a b") == Tokens{"a", " ", "b"});

  // Character error rate via the same alignment machinery.
  const ErrorCounts cer = edit_distance(chars("abc"), chars("abd"));
  CHECK(cer.substitutions == 1);
  CHECK(std::abs(cer.rate() - 1.0 / 3.0) < 1e-15);
}

TEST_CASE("a hypothesis scored against itself has zero error rate") {
  using jasper::eval::words;
  const std::string text = "speech recognition works";
  const ErrorCounts c = edit_distance(words(text), words(text));
  CHECK(c.rate() == 0.0);
}

TEST_CASE("csv report and aggregation") {
  using jasper::eval::aggregate;
  using jasper::eval::UttResult;
  std::vector<UttResult> rows(2);
  rows[0].id = "utt-1";
  rows[0].ref = "the cat";
  rows[0].hyp = "the cap";
  rows[0].counts = edit_distance({"the", "cat"}, {"the", "cap"});
  rows[1].id = "utt-2";
  rows[1].ref = "a b c";
  rows[1].hyp = "a x c d";
  rows[1].counts = edit_distance({"a", "b", "c"}, {"a", "x", "c", "d"});

  const std::string csv = jasper::eval::wer_csv(rows);
  CHECK(csv ==
        "utterance,ref,hyp,substitutions,insertions,deletions,wer\n"
        "utt-1,the cat,the cap,1,0,0,0.500000\n"
        "utt-2,a b c,a x c d,1,1,0,0.666667\n");

  const ErrorCounts sum = aggregate(rows);
  CHECK(sum.substitutions == 2);
  CHECK(sum.insertions == 1);
  CHECK(sum.deletions == 0);
  CHECK(sum.ref_len == 5);
  CHECK(std::abs(sum.rate() - 3.0 / 5.0) < 1e-15);

  // Fields with commas or quotes are quoted per RFC 4180.
  std::vector<UttResult> tricky(1);
  tricky[0].id = "u,1";
  tricky[0].ref = "say \"hi\"";
  tricky[0].hyp = "plain";
  const std::string quoted = jasper::eval::wer_csv(tricky);
  CHECK(quoted.find("\"u,1\"") != std::string::npos);
  CHECK(quoted.find("\"say \"\"hi\"\"\"") != std::string::npos);
}
