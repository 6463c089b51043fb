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

#include "jasper/run_config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "jasper/error.h"

namespace jasper {

DecodeMode parse_decode_mode(const std::string& name) {
  if (name == "greedy") return DecodeMode::kGreedy;
  if (name == "beam") return DecodeMode::kBeam;
  if (name == "beam+rescore") return DecodeMode::kBeamRescore;
  throw ConfigError("unknown decode mode '" + name +
                    "' (expected 'greedy', 'beam', or 'beam+rescore')");
}

std::string decode_mode_name(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::kGreedy: return "greedy";
    case DecodeMode::kBeam: return "beam";
    case DecodeMode::kBeamRescore: return "beam+rescore";
  }
  throw ConfigError("invalid decode mode value");
}

namespace {

std::string trim(const std::string& s) {
  const std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

// Plain character-level edit distance, used only to pick the suggestion for
// a misspelled key or section name.
std::size_t char_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1,
                         diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::string nearest(const std::string& name,
                    const std::vector<std::string>& known) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (const std::string& cand : known) {
    const std::size_t d = char_distance(name, cand);
    if (d < best_d || (d == best_d && cand < best)) {
      best_d = d;
      best = cand;
    }
  }
  return best;
}

// One settable key: how to parse its value string into the config.
struct KeyHandler {
  std::function<void(RunConfig&, const std::string&)> set;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected, long line) {
  throw ConfigError("invalid value '" + value + "' for key '" + key +
                    "' (expected " + expected + ") on line " +
                    std::to_string(line));
}

using Setter = std::function<void(RunConfig&, const std::string&, long)>;

Setter string_key(std::string RunConfig::* field) {
  return [field](RunConfig& cfg, const std::string& v, long) {
    cfg.*field = v;
  };
}

Setter double_key(double RunConfig::* field, const char* key) {
  return [field, key](RunConfig& cfg, const std::string& v, long line) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
      bad_value(key, v, "a number", line);
    }
    cfg.*field = out;
  };
}

Setter int_key(int RunConfig::* field, const char* key) {
  return [field, key](RunConfig& cfg, const std::string& v, long line) {
    int out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
      bad_value(key, v, "an integer", line);
    }
    cfg.*field = out;
  };
}

Setter i64_key(std::int64_t RunConfig::* field, const char* key) {
  return [field, key](RunConfig& cfg, const std::string& v, long line) {
    std::int64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
      bad_value(key, v, "an integer", line);
    }
    cfg.*field = out;
  };
}

Setter u64_key(std::uint64_t RunConfig::* field, const char* key) {
  return [field, key](RunConfig& cfg, const std::string& v, long line) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
      bad_value(key, v, "a non-negative integer", line);
    }
    cfg.*field = out;
  };
}

// The full key registry, grouped by section.  Parsing walks this table, so
// the table is also the source of suggestion candidates.
const std::map<std::string, std::map<std::string, Setter>>& registry() {
  static const auto* table = new std::map<std::string, std::map<std::string, Setter>>{
      {"model",
       {
           {"preset", string_key(&RunConfig::model_preset)},
           {"config_file", string_key(&RunConfig::model_config_file)},
           {"graphemes", string_key(&RunConfig::graphemes)},
       }},
      {"features",
       {
           {"n_mels",
            [](RunConfig& cfg, const std::string& v, long line) {
              int out = 0;
              const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
              if (ec != std::errc() || p != v.data() + v.size()) {
                bad_value("n_mels", v, "an integer", line);
              }
              cfg.features.n_mels = out;
            }},
           {"window_ms",
            [](RunConfig& cfg, const std::string& v, long line) {
              double out = 0.0;
              const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
              if (ec != std::errc() || p != v.data() + v.size()) {
                bad_value("window_ms", v, "a number", line);
              }
              cfg.features.window_ms = out;
            }},
           {"hop_ms",
            [](RunConfig& cfg, const std::string& v, long line) {
              double out = 0.0;
              const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
              if (ec != std::errc() || p != v.data() + v.size()) {
                bad_value("hop_ms", v, "a number", line);
              }
              cfg.features.hop_ms = out;
            }},
           {"preemphasis",
            [](RunConfig& cfg, const std::string& v, long line) {
              double out = 0.0;
              const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
              if (ec != std::errc() || p != v.data() + v.size()) {
                bad_value("preemphasis", v, "a number", line);
              }
              cfg.features.preemphasis = out;
            }},
           {"normalize",
            [](RunConfig& cfg, const std::string& v, long line) {
              if (v == "true" || v == "1" || v == "yes") {
                cfg.features.normalize = true;
              } else if (v == "false" || v == "0" || v == "no") {
                cfg.features.normalize = false;
              } else {
                bad_value("normalize", v, "a boolean", line);
              }
            }},
       }},
      {"data",
       {
           {"train_manifest", string_key(&RunConfig::train_manifest)},
           {"dev_manifest", string_key(&RunConfig::dev_manifest)},
       }},
      {"train",
       {
           {"optimizer", string_key(&RunConfig::optimizer)},
           {"lr_policy", string_key(&RunConfig::lr_policy)},
           {"base_lr", double_key(&RunConfig::base_lr, "base_lr")},
           {"warmup_steps", i64_key(&RunConfig::warmup_steps, "warmup_steps")},
           {"weight_decay", double_key(&RunConfig::weight_decay, "weight_decay")},
           {"beta1", double_key(&RunConfig::beta1, "beta1")},
           {"beta2", double_key(&RunConfig::beta2, "beta2")},
           {"epsilon", double_key(&RunConfig::epsilon, "epsilon")},
           {"momentum", double_key(&RunConfig::momentum, "momentum")},
           {"batch_size", int_key(&RunConfig::batch_size, "batch_size")},
           {"epochs", int_key(&RunConfig::epochs, "epochs")},
           {"seed", u64_key(&RunConfig::seed, "seed")},
           {"checkpoint_dir", string_key(&RunConfig::checkpoint_dir)},
           {"speed_perturb",
            [](RunConfig& cfg, const std::string& v, long line) {
              if (v == "none") {
                cfg.speed_perturb = PerturbPolicy::kNone;
              } else if (v == "fixed") {
                cfg.speed_perturb = PerturbPolicy::kFixed;
              } else if (v == "uniform") {
                cfg.speed_perturb = PerturbPolicy::kUniform;
              } else {
                bad_value("speed_perturb", v, "'none', 'fixed', or 'uniform'",
                          line);
              }
            }},
           {"perturb_low", double_key(&RunConfig::perturb_low, "perturb_low")},
           {"perturb_high", double_key(&RunConfig::perturb_high, "perturb_high")},
           {"stop_wer", double_key(&RunConfig::stop_wer, "stop_wer")},
           {"precision", string_key(&RunConfig::precision)},
       }},
      {"decode",
       {
           {"mode",
            [](RunConfig& cfg, const std::string& v, long line) {
              try {
                cfg.decode_mode = parse_decode_mode(v);
              } catch (const ConfigError&) {
                bad_value("mode", v, "'greedy', 'beam', or 'beam+rescore'",
                          line);
              }
            }},
           {"beam_width", int_key(&RunConfig::beam_width, "beam_width")},
           {"alpha", double_key(&RunConfig::alpha, "alpha")},
           {"beta", double_key(&RunConfig::beta, "beta")},
           {"nbest", int_key(&RunConfig::nbest, "nbest")},
           {"lm", string_key(&RunConfig::lm_path)},
           {"rescore_lm", string_key(&RunConfig::rescore_lm_path)},
           {"w_am", double_key(&RunConfig::w_am, "w_am")},
           {"w_lm", double_key(&RunConfig::w_lm, "w_lm")},
           {"w_wc", double_key(&RunConfig::w_wc, "w_wc")},
       }},
      {"lm",
       {
           {"order", int_key(&RunConfig::lm_order, "order")},
       }},
  };
  return *table;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string raw;
  long line_no = 0;
  std::string section;
  const auto& table = registry();

  while (std::getline(is, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;

    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError("malformed section header '" + line + "' on line " +
                          std::to_string(line_no));
      }
      section = trim(line.substr(1, line.size() - 2));
      if (table.find(section) == table.end()) {
        std::vector<std::string> names;
        for (const auto& [name, keys] : table) names.push_back(name);
        throw ConfigError("unknown section [" + section + "] on line " +
                          std::to_string(line_no) + "; did you mean [" +
                          nearest(section, names) + "]?");
      }
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected 'key = value' on line " +
                        std::to_string(line_no) + ", got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("missing key before '=' on line " +
                        std::to_string(line_no));
    }
    if (section.empty()) {
      throw ConfigError("key '" + key + "' on line " +
                        std::to_string(line_no) +
                        " appears before any [section] header");
    }
    // Double quotes preserve leading/trailing spaces in the value.
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }

    const auto& keys = table.at(section);
    const auto it = keys.find(key);
    if (it == keys.end()) {
      std::vector<std::string> names;
      for (const auto& [name, setter] : keys) names.push_back(name);
      throw ConfigError("unknown key '" + key + "' in [" + section +
                        "] on line " + std::to_string(line_no) +
                        "; did you mean '" + nearest(key, names) + "'?");
    }
    it->second(cfg, value, line_no);
  }

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open config: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_run_config(buf.str());
}

model::ModelConfig RunConfig::model() const {
  model::ModelConfig cfg;
  if (!model_config_file.empty()) {
    std::ifstream is(model_config_file, std::ios::binary);
    if (!is) throw DataError("cannot open model config: " + model_config_file);
    std::ostringstream buf;
    buf << is.rdbuf();
    cfg = model::parse_config(buf.str());
  } else {
    cfg = model::preset(model_preset);
  }
  if (!graphemes.empty()) cfg.graphemes = graphemes;
  cfg.in_channels = features.n_mels;
  cfg.validate();
  return cfg;
}

optim::LrSchedule RunConfig::schedule(std::int64_t total_steps) const {
  optim::LrSchedule sched;
  sched.policy = optim::parse_lr_policy(lr_policy);
  sched.base_lr = base_lr;
  sched.total_steps = std::max<std::int64_t>(1, total_steps);
  sched.warmup_steps = warmup_steps;
  return sched;
}

void RunConfig::validate() const {
  if (optimizer != "novograd" && optimizer != "sgd") {
    throw ConfigError("optimizer must be 'novograd' or 'sgd', got '" +
                      optimizer + "'");
  }
  optim::parse_lr_policy(lr_policy);  // throws on unknown names
  if (precision != "f64" && precision != "f32") {
    throw ConfigError("precision must be 'f64' or 'f32', got '" + precision +
                      "'");
  }
  if (base_lr < 0.0) throw ConfigError("base_lr must be non-negative");
  if (warmup_steps < 0) throw ConfigError("warmup_steps must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (features.n_mels < 1) throw ConfigError("n_mels must be positive");
  if (features.window_ms <= 0.0 || features.hop_ms <= 0.0) {
    throw ConfigError("window_ms and hop_ms must be positive");
  }
  if (speed_perturb == PerturbPolicy::kUniform) {
    if (!(perturb_low <= perturb_high)) {
      throw ConfigError("perturb_low must not exceed perturb_high");
    }
    if (perturb_low < 0.85 || perturb_high > 1.15) {
      throw ConfigError("perturbation factors must lie in [0.85, 1.15]");
    }
  }
  if (beam_width < 0) throw ConfigError("beam_width must be non-negative");
  if (nbest < 1) throw ConfigError("nbest must be at least 1");
  if (lm_order < 1) throw ConfigError("lm order must be at least 1");
}

}  // namespace jasper
