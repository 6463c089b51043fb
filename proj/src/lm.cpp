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

#include "jasper/lm.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "jasper/error.h"

namespace jasper {
namespace lm {
namespace {

// Sentinel for context words that cannot match any stored n-gram (OOV when
// the model has no "<unk>").  Lookups simply fail past it, which degrades
// into a clean backoff.
constexpr int32_t kNoMatch = -2;

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t") == std::string::npos;
}

double parse_double_token(const std::string& tok, int line) {
  double value = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ParseError("malformed number '" + tok + "'", line);
  }
  return value;
}

std::string format_score(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<std::vector<std::string>> read_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read corpus file: " + path);
  std::vector<std::vector<std::string>> sentences;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> words = tokenize(line);
    if (!words.empty()) sentences.push_back(std::move(words));
  }
  return sentences;
}

int32_t BackoffLM::intern(const std::string& word) {
  auto it = ids_.find(word);
  if (it != ids_.end()) return it->second;
  const int32_t id = static_cast<int32_t>(words_.size());
  words_.push_back(word);
  ids_.emplace(word, id);
  return id;
}

BackoffLM BackoffLM::train(
    const std::vector<std::vector<std::string>>& sentences, int order) {
  if (order < 1) {
    throw ConfigError("n-gram order must be >= 1, got " +
                      std::to_string(order));
  }
  if (sentences.empty()) throw DataError("empty corpus: nothing to train on");

  BackoffLM m;
  m.order_ = order;
  m.unk_ = m.intern(kUnkWord);
  m.bos_ = m.intern(kBosWord);
  m.eos_ = m.intern(kEosWord);
  for (const std::vector<std::string>& s : sentences) {
    for (const std::string& w : s) {
      if (w == kUnkWord || w == kBosWord || w == kEosWord) {
        throw DataError("reserved word in training corpus: " + w);
      }
      m.intern(w);
    }
  }

  const int N = order;
  // Raw counts per order: windows ending at target positions (the words and
  // the closing "</s>"; never at the leading "<s>").
  std::vector<std::map<Key, int64_t>> raw(static_cast<std::size_t>(N));
  for (const std::vector<std::string>& s : sentences) {
    std::vector<int32_t> pt;
    pt.reserve(s.size() + 2);
    pt.push_back(m.bos_);
    for (const std::string& w : s) pt.push_back(m.ids_.at(w));
    pt.push_back(m.eos_);
    for (std::size_t i = 1; i < pt.size(); ++i) {
      for (int n = 1; n <= N; ++n) {
        const int start = static_cast<int>(i) - n + 1;
        if (start < 0) continue;
        Key key(pt.begin() + start, pt.begin() + static_cast<int>(i) + 1);
        ++raw[static_cast<std::size_t>(n - 1)][key];
      }
    }
  }

  // Counts actually estimated from: raw at the highest order and for
  // "<s>"-initial n-grams, continuation type counts everywhere else.
  std::vector<std::map<Key, int64_t>> used(static_cast<std::size_t>(N));
  used[static_cast<std::size_t>(N - 1)] = raw[static_cast<std::size_t>(N - 1)];
  for (int n = N - 1; n >= 1; --n) {
    std::map<Key, int64_t> cont;
    for (const auto& [key, count] : raw[static_cast<std::size_t>(n)]) {
      (void)count;
      ++cont[Key(key.begin() + 1, key.end())];
    }
    for (const auto& [key, count] : raw[static_cast<std::size_t>(n - 1)]) {
      const int64_t c = key.front() == m.bos_ ? count : cont[key];
      if (c > 0) used[static_cast<std::size_t>(n - 1)][key] = c;
    }
  }

  // Interpolated probabilities, bottom-up, kept linear until stored.
  std::vector<std::map<Key, double>> prob(static_cast<std::size_t>(N));
  m.tables_.resize(static_cast<std::size_t>(N));

  double denom = 0.0;
  int64_t types = 0;
  for (const auto& [key, count] : used[0]) {
    if (key.front() == m.bos_) continue;
    denom += static_cast<double>(count);
    ++types;
  }
  const double uniform =
      1.0 / static_cast<double>(m.words_.size() - 1);  // excludes "<s>"
  const double lam1 = kDiscount * static_cast<double>(types) / denom;
  for (int32_t w = 0; w < static_cast<int32_t>(m.words_.size()); ++w) {
    if (w == m.bos_) {
      m.tables_[0][{w}] = NgramEntry{kBosLogProb, 0.0, false};
      continue;
    }
    auto it = used[0].find({w});
    const double c = it == used[0].end() ? 0.0 : static_cast<double>(it->second);
    const double p = std::max(c - kDiscount, 0.0) / denom + lam1 * uniform;
    prob[0][{w}] = p;
    m.tables_[0][{w}] = NgramEntry{std::log10(p), 0.0, false};
  }

  for (int n = 2; n <= N; ++n) {
    std::map<Key, std::vector<std::pair<int32_t, int64_t>>> groups;
    for (const auto& [key, count] : used[static_cast<std::size_t>(n - 1)]) {
      groups[Key(key.begin(), key.end() - 1)].emplace_back(key.back(), count);
    }
    for (const auto& [ctx, items] : groups) {
      double dn = 0.0;
      for (const auto& [w, c] : items) {
        (void)w;
        dn += static_cast<double>(c);
      }
      const double lam =
          kDiscount * static_cast<double>(items.size()) / dn;
      auto cit = m.tables_[ctx.size() - 1].find(ctx);
      if (cit == m.tables_[ctx.size() - 1].end()) {
        throw DataError("internal: backoff context has no stored entry");
      }
      cit->second.bow = std::log10(lam);
      cit->second.has_bow = true;
      const Key lower_ctx(ctx.begin() + 1, ctx.end());
      for (const auto& [w, c] : items) {
        Key lower = lower_ctx;
        lower.push_back(w);
        const double p_lower = prob[static_cast<std::size_t>(n - 2)].at(lower);
        const double p = std::max(static_cast<double>(c) - kDiscount, 0.0) / dn +
                         lam * p_lower;
        Key full = ctx;
        full.push_back(w);
        prob[static_cast<std::size_t>(n - 1)][full] = p;
        m.tables_[static_cast<std::size_t>(n - 1)][full] =
            NgramEntry{std::log10(p), 0.0, false};
      }
    }
  }
  return m;
}

std::size_t BackoffLM::ngram_count(int n) const {
  if (n < 1 || n > order_) return 0;
  return tables_[static_cast<std::size_t>(n - 1)].size();
}

const NgramEntry* BackoffLM::lookup(
    const std::vector<std::string>& gram) const {
  if (gram.empty() || gram.size() > static_cast<std::size_t>(order_)) {
    return nullptr;
  }
  Key key;
  key.reserve(gram.size());
  for (const std::string& w : gram) {
    auto it = ids_.find(w);
    if (it == ids_.end()) return nullptr;
    key.push_back(it->second);
  }
  auto it = tables_[key.size() - 1].find(key);
  return it == tables_[key.size() - 1].end() ? nullptr : &it->second;
}

int32_t BackoffLM::word_id(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? -1 : it->second;
}

double BackoffLM::word_logp_ids(const Key& context, int32_t word) const {
  int32_t w = word;
  if (w < 0 || w >= static_cast<int32_t>(words_.size())) w = unk_;
  if (w < 0) return kBosLogProb;  // no "<unk>" in a foreign model

  Key ctx;
  const std::size_t keep =
      std::min(context.size(), static_cast<std::size_t>(order_ - 1));
  ctx.reserve(keep);
  for (std::size_t i = context.size() - keep; i < context.size(); ++i) {
    int32_t c = context[i];
    if (c < 0 || c >= static_cast<int32_t>(words_.size())) {
      c = unk_ >= 0 ? unk_ : kNoMatch;
    }
    ctx.push_back(c);
  }

  double acc = 0.0;
  while (true) {
    Key key = ctx;
    key.push_back(w);
    const auto& table = tables_[key.size() - 1];
    auto it = table.find(key);
    if (it != table.end()) return acc + it->second.logp;
    if (ctx.empty()) return acc + kBosLogProb;  // unigram hole: floor
    const auto& ctable = tables_[ctx.size() - 1];
    auto cit = ctable.find(ctx);
    if (cit != ctable.end() && cit->second.has_bow) acc += cit->second.bow;
    ctx.erase(ctx.begin());
  }
}

double BackoffLM::word_logp(const std::vector<std::string>& context,
                            const std::string& word) const {
  Key ctx;
  ctx.reserve(context.size());
  for (const std::string& c : context) ctx.push_back(word_id(c));
  return word_logp_ids(ctx, word_id(word));
}

double BackoffLM::sentence_logp(const std::vector<std::string>& words) const {
  std::vector<int32_t> toks;
  toks.reserve(words.size() + 2);
  if (bos_ >= 0) toks.push_back(bos_);
  const std::size_t first_target = toks.size();
  for (const std::string& w : words) toks.push_back(word_id(w));
  if (eos_ >= 0) toks.push_back(eos_);

  double total = 0.0;
  for (std::size_t i = first_target; i < toks.size(); ++i) {
    const std::size_t start =
        i > static_cast<std::size_t>(order_ - 1)
            ? i - static_cast<std::size_t>(order_ - 1)
            : 0;
    Key ctx(toks.begin() + static_cast<int>(start),
            toks.begin() + static_cast<int>(i));
    total += word_logp_ids(ctx, toks[i]);
  }
  return total;
}

double BackoffLM::perplexity(
    const std::vector<std::vector<std::string>>& sentences) const {
  if (sentences.empty()) throw DataError("empty corpus: cannot compute perplexity");
  double total = 0.0;
  double tokens = 0.0;
  for (const std::vector<std::string>& s : sentences) {
    total += sentence_logp(s);
    tokens += static_cast<double>(s.size()) + (eos_ >= 0 ? 1.0 : 0.0);
  }
  return std::pow(10.0, -total / tokens);
}

void BackoffLM::save_arpa(const std::string& path) const {
  std::string out;
  out += "\\data\\\n";
  for (int n = 1; n <= order_; ++n) {
    out += "ngram " + std::to_string(n) + "=" +
           std::to_string(ngram_count(n)) + "\n";
  }
  out += "\n";
  for (int n = 1; n <= order_; ++n) {
    out += "\\" + std::to_string(n) + "-grams:\n";
    // Sort by word strings for stable, conventional output.
    std::vector<std::pair<std::vector<std::string>, const NgramEntry*>> rows;
    rows.reserve(tables_[static_cast<std::size_t>(n - 1)].size());
    for (const auto& [key, entry] : tables_[static_cast<std::size_t>(n - 1)]) {
      std::vector<std::string> ws;
      ws.reserve(key.size());
      for (int32_t id : key) ws.push_back(words_[static_cast<std::size_t>(id)]);
      rows.emplace_back(std::move(ws), &entry);
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [ws, entry] : rows) {
      out += format_score(entry->logp);
      out += '\t';
      for (std::size_t i = 0; i < ws.size(); ++i) {
        if (i > 0) out += ' ';
        out += ws[i];
      }
      if (entry->has_bow) {
        out += '\t';
        out += format_score(entry->bow);
      }
      out += '\n';
    }
    out += "\n";
  }
  out += "\\end\\\n";

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot write ARPA file: " + tmp);
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw DataError("short write to ARPA file: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move ARPA file into place: " + ec.message());
}

BackoffLM BackoffLM::load_arpa(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read ARPA file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }

  std::size_t idx = 0;
  auto lineno = [&]() { return static_cast<int>(idx) + 1; };
  auto skip_blanks = [&]() {
    while (idx < lines.size() && is_blank(lines[idx])) ++idx;
  };

  skip_blanks();
  if (idx >= lines.size() || lines[idx] != "\\data\\") {
    throw ParseError("expected \\data\\ header", lineno());
  }
  ++idx;

  std::vector<int64_t> counts;
  while (idx < lines.size() && lines[idx].rfind("ngram ", 0) == 0) {
    const std::string rest = lines[idx].substr(6);
    const std::size_t eq = rest.find('=');
    if (eq == std::string::npos) {
      throw ParseError("malformed ngram count line", lineno());
    }
    const double n_val = parse_double_token(rest.substr(0, eq), lineno());
    const double c_val = parse_double_token(rest.substr(eq + 1), lineno());
    if (n_val != static_cast<double>(counts.size() + 1)) {
      throw ParseError("n-gram orders must be contiguous from 1", lineno());
    }
    if (c_val < 0 || c_val != std::floor(c_val)) {
      throw ParseError("invalid n-gram count", lineno());
    }
    counts.push_back(static_cast<int64_t>(c_val));
    ++idx;
  }
  if (counts.empty()) {
    throw ParseError("no ngram count lines in \\data\\ section", lineno());
  }

  BackoffLM m;
  m.order_ = static_cast<int>(counts.size());
  m.tables_.resize(counts.size());

  for (int n = 1; n <= m.order_; ++n) {
    skip_blanks();
    const std::string header = "\\" + std::to_string(n) + "-grams:";
    if (idx >= lines.size() || lines[idx] != header) {
      throw ParseError("expected " + header + " section", lineno());
    }
    ++idx;
    int64_t read_count = 0;
    while (read_count < counts[static_cast<std::size_t>(n - 1)]) {
      skip_blanks();
      if (idx >= lines.size() || lines[idx][0] == '\\') {
        throw ParseError(
            "n-gram count mismatch in " + header + " section (expected " +
                std::to_string(counts[static_cast<std::size_t>(n - 1)]) +
                ", found " + std::to_string(read_count) + ")",
            lineno());
      }
      const std::vector<std::string> toks = tokenize(lines[idx]);
      const std::size_t nn = static_cast<std::size_t>(n);
      if (toks.size() != nn + 1 && toks.size() != nn + 2) {
        throw ParseError("malformed " + std::to_string(n) + "-gram line",
                         lineno());
      }
      NgramEntry entry;
      entry.logp = parse_double_token(toks[0], lineno());
      if (toks.size() == nn + 2) {
        entry.bow = parse_double_token(toks[nn + 1], lineno());
        entry.has_bow = true;
      }
      Key key;
      key.reserve(nn);
      if (n == 1) {
        if (m.ids_.count(toks[1]) != 0) {
          throw ParseError("duplicate unigram '" + toks[1] + "'", lineno());
        }
        key.push_back(m.intern(toks[1]));
      } else {
        for (std::size_t i = 1; i <= nn; ++i) {
          auto it = m.ids_.find(toks[i]);
          if (it == m.ids_.end()) {
            throw ParseError("word '" + toks[i] + "' has no unigram entry",
                             lineno());
          }
          key.push_back(it->second);
        }
      }
      auto& table = m.tables_[static_cast<std::size_t>(n - 1)];
      if (!table.emplace(std::move(key), entry).second) {
        throw ParseError("duplicate n-gram entry", lineno());
      }
      ++read_count;
      ++idx;
    }
  }

  skip_blanks();
  if (idx >= lines.size() || lines[idx] != "\\end\\") {
    throw ParseError("missing \\end\\ marker", lineno());
  }
  ++idx;
  skip_blanks();
  if (idx < lines.size()) {
    throw ParseError("trailing content after \\end\\", lineno());
  }

  m.unk_ = m.word_id(kUnkWord);
  m.bos_ = m.word_id(kBosWord);
  m.eos_ = m.word_id(kEosWord);
  return m;
}

}  // namespace lm
}  // namespace jasper
