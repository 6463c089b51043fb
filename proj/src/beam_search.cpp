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

#include "jasper/beam_search.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <utility>

#include "jasper/error.h"

namespace jasper {
namespace decode {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLn10 = std::log(10.0);

double logaddexp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// Running probability of a prefix split by how it ends: with a blank (or
// nothing) versus with its final grapheme.  The split is what lets a repeated
// grapheme either collapse into the prefix or extend it across a blank.
struct Mass {
  double p_b = kNegInf;
  double p_nb = kNegInf;
  double total() const { return logaddexp(p_b, p_nb); }
};

// Pruning bonus: alpha * ln p_lm(completed words, partial word at the
// unknown-word unigram floor) + beta * word count.  Cached per prefix; the
// exact sentence probability replaces this estimate at finalization.
class PruneBonus {
 public:
  PruneBonus(const lm::BackoffLM* model, double alpha, double beta)
      : model_(model), alpha_(alpha), beta_(beta) {
    if (model_ != nullptr) {
      unk_floor_ = model_->word_logp({}, lm::kUnkWord);
    }
  }

  double operator()(const std::string& prefix) {
    auto it = cache_.find(prefix);
    if (it != cache_.end()) return it->second;

    std::vector<std::string> words = lm::tokenize(prefix);
    const bool partial = !prefix.empty() && prefix.back() != ' ';
    double bonus = 0.0;
    if (model_ != nullptr && alpha_ != 0.0) {
      double part = 0.0;
      std::vector<std::string> ctx = {lm::kBosWord};
      const std::size_t completed = words.size() - (partial ? 1 : 0);
      for (std::size_t i = 0; i < completed; ++i) {
        part += model_->word_logp(ctx, words[i]);
        ctx.push_back(words[i]);
      }
      if (partial) part += unk_floor_;
      bonus += alpha_ * part * kLn10;
    }
    bonus += beta_ * static_cast<double>(words.size());
    cache_.emplace(prefix, bonus);
    return bonus;
  }

 private:
  const lm::BackoffLM* model_;
  double alpha_;
  double beta_;
  double unk_floor_ = 0.0;
  std::map<std::string, double> cache_;
};

std::string format_exact(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

double parse_double_field(const std::string& tok, int line) {
  double value = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ParseError("malformed number '" + tok + "'", line);
  }
  return value;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

void write_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot write file: " + tmp);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw DataError("short write to file: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move file into place: " + ec.message());
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

NBestList beam_search(const Tensor<double>& log_probs, Index b, Index length,
                      const ctc::Alphabet& alphabet, const lm::BackoffLM* lm,
                      const BeamConfig& cfg, const std::string& utterance_id) {
  if (alphabet.graphemes.empty()) {
    throw ConfigError("beam_search: empty alphabet");
  }
  if (cfg.width < 0) {
    throw ConfigError("beam_search: width must be >= 0 (0 = unbounded)");
  }
  if (cfg.nbest < 1) throw ConfigError("beam_search: nbest must be >= 1");
  if (!std::isfinite(cfg.alpha) || !std::isfinite(cfg.beta)) {
    throw ConfigError("beam_search: alpha and beta must be finite");
  }
  if (log_probs.rank() != 3) {
    throw ShapeError("beam_search: expected [B,V,T] log-probabilities");
  }
  const Index batch = log_probs.shape()[0];
  const Index v_n = log_probs.shape()[1];
  const Index t_n = log_probs.shape()[2];
  if (v_n != alphabet.size()) {
    throw ShapeError("beam_search: alphabet size mismatch");
  }
  if (b < 0 || b >= batch) throw ShapeError("beam_search: batch index out of range");
  if (length < 0 || length > t_n) {
    throw ShapeError("beam_search: length out of range");
  }

  const Index blank = alphabet.blank();
  PruneBonus bonus(lm, cfg.alpha, cfg.beta);

  std::map<std::string, Mass> beams;
  beams[""] = Mass{0.0, kNegInf};

  for (Index t = 0; t < length; ++t) {
    std::map<std::string, Mass> next;
    for (const auto& [prefix, m] : beams) {
      const double tot = m.total();
      Mass& self = next[prefix];
      self.p_b = logaddexp(self.p_b, tot + log_probs.at(b, blank, t));
      for (Index c = 0; c < v_n; ++c) {
        if (c == blank) continue;
        const double lpc = log_probs.at(b, c, t);
        const char ch = alphabet.graphemes[static_cast<std::size_t>(c)];
        if (!prefix.empty() && prefix.back() == ch) {
          // Repeat without a separating blank collapses into the prefix;
          // only the blank-ending mass can spawn the doubled grapheme.
          self.p_nb = logaddexp(self.p_nb, m.p_nb + lpc);
          Mass& ext = next[prefix + ch];
          ext.p_nb = logaddexp(ext.p_nb, m.p_b + lpc);
        } else {
          Mass& ext = next[prefix + ch];
          ext.p_nb = logaddexp(ext.p_nb, tot + lpc);
        }
      }
    }
    if (cfg.width > 0 && next.size() > static_cast<std::size_t>(cfg.width)) {
      std::vector<std::pair<double, std::string>> ranked;
      ranked.reserve(next.size());
      for (const auto& [prefix, m] : next) {
        ranked.emplace_back(m.total() + bonus(prefix), prefix);
      }
      std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b2) {
        if (a.first != b2.first) return a.first > b2.first;
        return a.second < b2.second;
      });
      std::map<std::string, Mass> kept;
      for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.width); ++i) {
        kept.emplace(ranked[i].second, next.at(ranked[i].second));
      }
      next = std::move(kept);
    }
    beams = std::move(next);
  }

  std::vector<Hypothesis> hyps;
  hyps.reserve(beams.size());
  for (const auto& [prefix, m] : beams) {
    if (m.total() == kNegInf) continue;  // unreachable doubled-grapheme stub
    Hypothesis h;
    h.text = prefix;
    h.acoustic = m.total();
    const std::vector<std::string> words = lm::tokenize(prefix);
    h.word_count = static_cast<int>(words.size());
    if (lm != nullptr) h.lm = lm->sentence_logp(words) * kLn10;
    h.combined = h.acoustic + cfg.alpha * h.lm +
                 cfg.beta * static_cast<double>(h.word_count);
    hyps.push_back(std::move(h));
  }
  std::sort(hyps.begin(), hyps.end(), [](const Hypothesis& a, const Hypothesis& b2) {
    if (a.combined != b2.combined) return a.combined > b2.combined;
    return a.text < b2.text;
  });
  if (hyps.size() > static_cast<std::size_t>(cfg.nbest)) {
    hyps.resize(static_cast<std::size_t>(cfg.nbest));
  }
  return NBestList{utterance_id, std::move(hyps)};
}

NBestList rescore(const NBestList& nbest, const std::vector<double>& external,
                  const RescoreWeights& weights) {
  if (external.size() != nbest.hyps.size()) {
    throw DataError("rescore: expected " + std::to_string(nbest.hyps.size()) +
                    " external scores, got " + std::to_string(external.size()));
  }
  NBestList out;
  out.utterance_id = nbest.utterance_id;
  out.hyps = nbest.hyps;
  for (std::size_t i = 0; i < out.hyps.size(); ++i) {
    Hypothesis& h = out.hyps[i];
    h.external = external[i];
    h.final_score = weights.w_am * h.combined + weights.w_lm * h.external +
                    weights.w_wc * static_cast<double>(h.word_count);
  }
  std::stable_sort(out.hyps.begin(), out.hyps.end(),
                   [](const Hypothesis& a, const Hypothesis& b) {
                     if (a.final_score != b.final_score) {
                       return a.final_score > b.final_score;
                     }
                     return a.text < b.text;
                   });
  return out;
}

void save_nbest(const std::string& path, const std::vector<NBestList>& lists) {
  std::string out;
  for (const NBestList& list : lists) {
    for (const Hypothesis& h : list.hyps) {
      out += list.utterance_id;
      out += '\t';
      out += format_exact(h.acoustic);
      out += '\t';
      out += format_exact(h.lm);
      out += '\t';
      out += std::to_string(h.word_count);
      out += '\t';
      out += h.text;
      out += '\n';
    }
  }
  write_atomic(path, out);
}

std::vector<NBestList> load_nbest(const std::string& path, double alpha,
                                  double beta) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<NBestList> lists;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const int line_no = static_cast<int>(i) + 1;
    const std::vector<std::string> fields = split_tabs(lines[i]);
    if (fields.size() != 5) {
      throw ParseError("expected 5 tab-separated n-best fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    Hypothesis h;
    h.acoustic = parse_double_field(fields[1], line_no);
    h.lm = parse_double_field(fields[2], line_no);
    const double wc = parse_double_field(fields[3], line_no);
    if (wc < 0 || wc != std::floor(wc)) {
      throw ParseError("invalid word count '" + fields[3] + "'", line_no);
    }
    h.word_count = static_cast<int>(wc);
    h.text = fields[4];
    h.combined =
        h.acoustic + alpha * h.lm + beta * static_cast<double>(h.word_count);
    if (lists.empty() || lists.back().utterance_id != fields[0]) {
      lists.push_back(NBestList{fields[0], {}});
    }
    lists.back().hyps.push_back(std::move(h));
  }
  return lists;
}

std::vector<std::pair<std::string, double>> load_external_scores(
    const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const int line_no = static_cast<int>(i) + 1;
    const std::vector<std::string> fields = split_tabs(lines[i]);
    if (fields.size() != 2) {
      throw ParseError("expected 'utterance<TAB>score', got " +
                           std::to_string(fields.size()) + " fields",
                       line_no);
    }
    out.emplace_back(fields[0], parse_double_field(fields[1], line_no));
  }
  return out;
}

}  // namespace decode
}  // namespace jasper
