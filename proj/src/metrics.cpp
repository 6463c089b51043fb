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

#include <cctype>
#include <cstdio>
#include <sstream>

namespace jasper {
namespace eval {
namespace {

struct Cell {
  int64_t cost = 0;
  int64_t subs = 0;
  int64_t ins = 0;
  int64_t del = 0;
};

// Lower cost wins; at equal cost the higher substitution count wins, which
// makes the counts (not just the cost) deterministic and symmetric.
bool better(const Cell& a, const Cell& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  return a.subs > b.subs;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

}  // namespace

ErrorCounts edit_distance(const std::vector<std::string>& ref,
                          const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  // Two-row DP over (ref position, hyp position).
  std::vector<Cell> prev(m + 1);
  std::vector<Cell> cur(m + 1);
  for (std::size_t j = 1; j <= m; ++j) {
    prev[j] = Cell{static_cast<int64_t>(j), 0, static_cast<int64_t>(j), 0};
  }
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = Cell{static_cast<int64_t>(i), 0, 0, static_cast<int64_t>(i)};
    for (std::size_t j = 1; j <= m; ++j) {
      const bool match = ref[i - 1] == hyp[j - 1];
      Cell diag = prev[j - 1];
      if (!match) {
        diag.cost += 1;
        diag.subs += 1;
      }
      Cell insert = cur[j - 1];
      insert.cost += 1;
      insert.ins += 1;
      Cell erase = prev[j];
      erase.cost += 1;
      erase.del += 1;
      Cell best = diag;
      if (better(insert, best)) best = insert;
      if (better(erase, best)) best = erase;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  const Cell& c = prev[m];
  ErrorCounts out;
  out.substitutions = c.subs;
  out.insertions = c.ins;
  out.deletions = c.del;
  out.ref_len = static_cast<int64_t>(n);
  return out;
}

std::string normalize_text(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char raw : text) {
    const unsigned char u = static_cast<unsigned char>(raw);
    if (std::isspace(u)) {
      pending_space = !out.empty();
      continue;
    }
    char c = static_cast<char>(std::tolower(u));
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '\'')) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> words(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

std::vector<std::string> chars(const std::string& text) {
  std::vector<std::string> out;
  out.reserve(text.size());
  for (char c : text) out.emplace_back(1, c);
  return out;
}

std::string wer_csv(const std::vector<UttResult>& rows) {
  std::string out = "utterance,ref,hyp,substitutions,insertions,deletions,wer\n";
  char buf[64];
  for (const UttResult& r : rows) {
    out += csv_field(r.id);
    out += ',';
    out += csv_field(r.ref);
    out += ',';
    out += csv_field(r.hyp);
    out += ',';
    out += std::to_string(r.counts.substitutions);
    out += ',';
    out += std::to_string(r.counts.insertions);
    out += ',';
    out += std::to_string(r.counts.deletions);
    out += ',';
    std::snprintf(buf, sizeof(buf), "%.6f", r.counts.rate());
    out += buf;
    out += '\n';
  }
  return out;
}

ErrorCounts aggregate(const std::vector<UttResult>& rows) {
  ErrorCounts total;
  for (const UttResult& r : rows) total += r.counts;
  return total;
}

}  // namespace eval
}  // namespace jasper
