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

#include "jasper/synthetic.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "jasper/error.h"
#include "jasper/rng.h"

namespace jasper {
namespace data {

namespace fs = std::filesystem;

namespace {

// Ten words over the letters a..j; together they cover every letter, so a
// corpus sampled from the pool exposes the model to the whole alphabet.
const char* const kWordPool[10] = {"bad", "cab",  "face", "dig", "head",
                                   "jig", "gag", "ace",  "bid", "jade"};

void append_silence(std::vector<double>& samples, int count) {
  samples.insert(samples.end(), static_cast<std::size_t>(count), 0.0);
}

// One letter tone with a 5 ms raised-cosine fade at both ends; the fade
// keeps the spectrum narrow so neighboring letters stay separable.
void append_tone(std::vector<double>& samples, double freq, int count,
                 int rate, double amplitude) {
  const int fade = std::min(count / 2, rate / 200);
  for (int i = 0; i < count; ++i) {
    double env = 1.0;
    if (i < fade) {
      env = 0.5 - 0.5 * std::cos(std::numbers::pi * i / fade);
    } else if (i >= count - fade) {
      env = 0.5 - 0.5 * std::cos(std::numbers::pi * (count - 1 - i) / fade);
    }
    samples.push_back(amplitude * env *
                      std::sin(2.0 * std::numbers::pi * freq * i / rate));
  }
}

}  // namespace

double letter_frequency(char c) {
  if (c < 'a' || c > 'j') {
    throw DataError(std::string("synthetic corpus supports letters a..j, got '") +
                    c + "'");
  }
  // 300 Hz .. 1560 Hz in even 140 Hz steps: all well below Nyquist at 16 kHz
  // and separated by several mel bands.
  return 300.0 + 140.0 * (c - 'a');
}

AudioClip render_transcript(const std::string& text,
                            const SyntheticSpec& spec) {
  const int rate = spec.sample_rate;
  const auto ms_to_samples = [rate](double ms) {
    return static_cast<int>(std::lround(ms * rate / 1000.0));
  };
  AudioClip clip;
  clip.sample_rate = rate;
  append_silence(clip.samples, ms_to_samples(spec.edge_ms));
  bool first_in_word = true;
  for (char c : text) {
    if (c == ' ') {
      append_silence(clip.samples, ms_to_samples(spec.word_gap_ms));
      first_in_word = true;
      continue;
    }
    if (!first_in_word) {
      append_silence(clip.samples, ms_to_samples(spec.letter_gap_ms));
    }
    append_tone(clip.samples, letter_frequency(c), ms_to_samples(spec.tone_ms),
                rate, spec.amplitude);
    first_in_word = false;
  }
  append_silence(clip.samples, ms_to_samples(spec.edge_ms));
  return clip;
}

std::vector<ManifestEntry> generate_synthetic_corpus(
    const std::string& dir, const SyntheticSpec& spec) {
  if (spec.n_utterances < 1) {
    throw ConfigError("synthetic corpus needs at least one utterance");
  }
  fs::create_directories(dir);

  SplitMix64 rng(derive_stream(spec.seed, "synthetic-corpus"));
  std::vector<ManifestEntry> entries;
  std::ofstream corpus(fs::path(dir) / "corpus.txt", std::ios::binary);
  if (!corpus) throw DataError("cannot write corpus.txt under " + dir);

  for (int u = 0; u < spec.n_utterances; ++u) {
    // 1..3 words per utterance; the first n_utterances picks cycle through
    // the pool so every word (hence every letter) appears at least once.
    const int n_words = 1 + static_cast<int>(rng.uniform_int(3));
    std::string text;
    for (int w = 0; w < n_words; ++w) {
      const std::size_t pick = (w == 0 && u < 10)
                                   ? static_cast<std::size_t>(u)
                                   : static_cast<std::size_t>(rng.uniform_int(10));
      if (!text.empty()) text += ' ';
      text += kWordPool[pick];
    }

    char name[32];
    std::snprintf(name, sizeof(name), "utt_%03d.wav", u);
    const fs::path wav_path = fs::path(dir) / name;
    const AudioClip clip = render_transcript(text, spec);
    write_wav(wav_path.string(), clip);

    ManifestEntry entry;
    entry.audio_filepath = name;  // relative: resolved against the manifest
    entry.resolved_path = wav_path.string();
    entry.text = text;
    entry.duration = static_cast<double>(clip.samples.size()) / spec.sample_rate;
    entries.push_back(std::move(entry));
    corpus << text << "\n";
  }
  corpus.close();

  save_manifest((fs::path(dir) / "manifest.jsonl").string(), entries);
  return entries;
}

}  // namespace data
}  // namespace jasper
