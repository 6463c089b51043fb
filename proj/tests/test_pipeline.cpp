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

// Tests for the data plumbing and the training/decoding drivers: manifest
// I/O and path resolution, run-configuration parsing, the synthetic tone
// corpus, and the end-to-end trainer invariants (byte determinism, bitwise
// resume, early stop, checkpoint artifacts).

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "jasper/checkpoint.h"
#include "jasper/ctc.h"
#include "jasper/error.h"
#include "jasper/features.h"
#include "jasper/lm.h"
#include "jasper/manifest.h"
#include "jasper/metrics.h"
#include "jasper/model_config.h"
#include "jasper/pipeline.h"
#include "jasper/run_config.h"
#include "jasper/synthetic.h"

namespace fs = std::filesystem;

namespace jasper {
namespace {

// Fresh scratch directory under the system temp root; wiped on entry so a
// rerun never sees stale artifacts.
fs::path scratch_dir(const std::string& name) {
  const fs::path dir =
      fs::temp_directory_path() / "jasper-pipeline-tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  REQUIRE(os.good());
}

// Short sine clip so manifests in these tests point at real audio.
AudioClip tiny_clip(int n_samples, double freq = 440.0) {
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples.resize(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    clip.samples[static_cast<std::size_t>(i)] =
        0.25 * std::sin(2.0 * 3.14159265358979 * freq * i / 16000.0);
  }
  return clip;
}

data::ManifestEntry make_entry(const std::string& rel_path,
                               const std::string& text, double duration) {
  data::ManifestEntry e;
  e.audio_filepath = rel_path;
  e.text = text;
  e.duration = duration;
  return e;
}

// ---------------------------------------------------------------------------
// Manifest I/O
// ---------------------------------------------------------------------------

TEST_SUITE_BEGIN("manifest");

TEST_CASE("round trip preserves entries and resolves against manifest dir") {
  const fs::path dir = scratch_dir("manifest-roundtrip");
  write_wav((dir / "first.wav").string(), tiny_clip(1600));
  write_wav((dir / "second.wav").string(), tiny_clip(3200));

  std::vector<data::ManifestEntry> entries;
  entries.push_back(make_entry("first.wav", "ace bid", 0.1));
  entries.push_back(make_entry("second.wav", "jade", 0.2));
  const fs::path manifest = dir / "manifest.jsonl";
  data::save_manifest(manifest.string(), entries);

  const auto loaded = data::load_manifest(manifest.string());
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].audio_filepath == "first.wav");
  CHECK(loaded[0].text == "ace bid");
  CHECK(loaded[0].duration == doctest::Approx(0.1));
  CHECK(fs::exists(loaded[0].resolved_path));
  CHECK(fs::exists(loaded[1].resolved_path));
  CHECK(data::utterance_id(loaded[0]) == "first");
  CHECK(data::utterance_id(loaded[1]) == "second");

  // Saving what was loaded reproduces the file byte for byte.
  const fs::path copy = dir / "copy.jsonl";
  data::save_manifest(copy.string(), loaded);
  CHECK(slurp(copy) == slurp(manifest));
}

TEST_CASE("unknown keys, blank lines, and CRLF endings are tolerated") {
  const fs::path dir = scratch_dir("manifest-extras");
  write_wav((dir / "utt.wav").string(), tiny_clip(1600));
  spit(dir / "manifest.jsonl",
       "\r\n"
       "{\"audio_filepath\": \"utt.wav\", \"text\": \"bad cab\", "
       "\"duration\": 0.1, \"speaker\": \"s1\", \"snr\": 17.5}\r\n"
       "\n");
  const auto loaded = data::load_manifest((dir / "manifest.jsonl").string());
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].text == "bad cab");
}

TEST_CASE("malformed lines raise ParseError carrying the line number") {
  const fs::path dir = scratch_dir("manifest-errors");
  write_wav((dir / "ok.wav").string(), tiny_clip(1600));
  const std::string good =
      "{\"audio_filepath\": \"ok.wav\", \"text\": \"dig\", \"duration\": "
      "0.1}\n";

  auto expect_parse_error = [&](const std::string& bad_line,
                                const std::string& needle) {
    spit(dir / "m.jsonl", good + bad_line + "\n");
    try {
      data::load_manifest((dir / "m.jsonl").string());
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      INFO("message: " << msg);
      CHECK(msg.find(needle) != std::string::npos);
      CHECK(msg.find('2') != std::string::npos);  // offending line number
    }
  };

  expect_parse_error("[1, 2, 3]", "object");
  expect_parse_error("{\"text\": \"dig\", \"duration\": 0.1}",
                     "audio_filepath");
  expect_parse_error(
      "{\"audio_filepath\": \"ok.wav\", \"duration\": 0.1}", "text");
  expect_parse_error(
      "{\"audio_filepath\": \"ok.wav\", \"text\": \"dig\"}", "duration");
  expect_parse_error(
      "{\"audio_filepath\": \"ok.wav\", \"text\": \"dig\", \"duration\": "
      "-1}",
      "duration");
  expect_parse_error(
      "{\"audio_filepath\": \"ok.wav\", \"text\": \"!!\", \"duration\": "
      "0.1}",
      "transcript");
  expect_parse_error("{\"audio_filepath\": ", "line 2");
}

TEST_CASE("unresolvable audio raises DataError naming the path") {
  const fs::path dir = scratch_dir("manifest-missing-audio");
  spit(dir / "m.jsonl",
       "{\"audio_filepath\": \"ghost.wav\", \"text\": \"dig\", \"duration\": "
       "0.1}\n");
  try {
    data::load_manifest((dir / "m.jsonl").string());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("ghost.wav") != std::string::npos);
  }
  CHECK_THROWS_AS(data::load_manifest((dir / "absent.jsonl").string()),
                  DataError);
}

TEST_CASE("JASPER_DATA_ROOT anchors relative paths ahead of the manifest dir") {
  const fs::path audio_dir = scratch_dir("manifest-root-audio");
  const fs::path manifest_dir = scratch_dir("manifest-root-manifest");
  write_wav((audio_dir / "far.wav").string(), tiny_clip(1600));
  spit(manifest_dir / "m.jsonl",
       "{\"audio_filepath\": \"far.wav\", \"text\": \"face\", \"duration\": "
       "0.1}\n");

  // Without the root the file is not next to the manifest.
  ::unsetenv(data::kDataRootEnv);
  CHECK_THROWS_AS(data::load_manifest((manifest_dir / "m.jsonl").string()),
                  DataError);

  ::setenv(data::kDataRootEnv, audio_dir.string().c_str(), 1);
  const auto loaded = data::load_manifest((manifest_dir / "m.jsonl").string());
  ::unsetenv(data::kDataRootEnv);
  REQUIRE(loaded.size() == 1);
  CHECK(fs::path(loaded[0].resolved_path).parent_path() == audio_dir);
}

TEST_SUITE_END();

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

TEST_SUITE_BEGIN("run_config");

TEST_CASE("empty text yields the documented defaults") {
  const RunConfig cfg = parse_run_config("");
  CHECK(cfg.model_preset == "mini-2x2");
  CHECK(cfg.optimizer == "novograd");
  CHECK(cfg.lr_policy == "poly");
  CHECK(cfg.base_lr == doctest::Approx(0.01));
  CHECK(cfg.batch_size == 4);
  CHECK(cfg.epochs == 10);
  CHECK(cfg.seed == 1);
  CHECK(cfg.features.n_mels == 64);
  CHECK(cfg.speed_perturb == PerturbPolicy::kNone);
  CHECK(cfg.decode_mode == DecodeMode::kGreedy);
  CHECK(cfg.beam_width == 2048);
  CHECK(cfg.nbest == 10);
  CHECK(cfg.lm_order == 3);
  CHECK(cfg.precision == "f64");
  cfg.validate();
}

TEST_CASE("all sections parse, with comments, blanks, and quoted values") {
  const std::string text =
      "# training recipe\n"
      "[model]\n"
      "preset = slim-10x3-residual\n"
      "graphemes = \"abcdefghij \"\n"
      "\n"
      "[features]\n"
      "n_mels = 32\n"
      "window_ms = 25\n"
      "hop_ms = 12.5\n"
      "\n"
      "[data]\n"
      "train_manifest = train.jsonl\n"
      "dev_manifest = \"dev set.jsonl\"\n"
      "\n"
      "[train]\n"
      "optimizer = sgd\n"
      "lr_policy = const\n"
      "base_lr = 0.02\n"
      "momentum = 0.8\n"
      "batch_size = 8\n"
      "epochs = 42\n"
      "seed = 99\n"
      "speed_perturb = fixed\n"
      "stop_wer = 0.25\n"
      "precision = f32\n"
      "\n"
      "[decode]\n"
      "mode = beam+rescore\n"
      "beam_width = 16\n"
      "alpha = 1.5\n"
      "beta = 0.5\n"
      "nbest = 4\n"
      "w_lm = 0.3\n"
      "\n"
      "[lm]\n"
      "order = 2\n";
  const RunConfig cfg = parse_run_config(text);
  CHECK(cfg.model_preset == "slim-10x3-residual");
  CHECK(cfg.graphemes == "abcdefghij ");  // quotes keep the trailing space
  CHECK(cfg.features.n_mels == 32);
  CHECK(cfg.features.hop_ms == doctest::Approx(12.5));
  CHECK(cfg.dev_manifest == "dev set.jsonl");
  CHECK(cfg.optimizer == "sgd");
  CHECK(cfg.lr_policy == "const");
  CHECK(cfg.momentum == doctest::Approx(0.8));
  CHECK(cfg.epochs == 42);
  CHECK(cfg.seed == 99);
  CHECK(cfg.speed_perturb == PerturbPolicy::kFixed);
  CHECK(cfg.stop_wer == doctest::Approx(0.25));
  CHECK(cfg.precision == "f32");
  CHECK(cfg.decode_mode == DecodeMode::kBeamRescore);
  CHECK(cfg.beam_width == 16);
  CHECK(cfg.alpha == doctest::Approx(1.5));
  CHECK(cfg.nbest == 4);
  CHECK(cfg.w_lm == doctest::Approx(0.3));
  CHECK(cfg.lm_order == 2);
  cfg.validate();

  // The model assembles from the named preset with the grapheme override,
  // and the feature count drives the input channel count.
  const model::ModelConfig mc = cfg.model();
  CHECK(mc.graphemes == "abcdefghij ");
  CHECK(mc.in_channels == 32);
}

TEST_CASE("misspelled keys and sections are rejected with a suggestion") {
  try {
    parse_run_config("[train]\nepochz = 3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    INFO("message: " << msg);
    CHECK(msg.find("epochz") != std::string::npos);
    CHECK(msg.find("did you mean 'epochs'") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }
  try {
    parse_run_config("[trian]\nepochs = 3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("did you mean [train]") != std::string::npos);
  }
}

TEST_CASE("malformed values and ranges are rejected") {
  CHECK_THROWS_AS(parse_run_config("[train]\nepochs = soon\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[train]\nbase_lr = 1e\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[train]\nepochs\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[decode]\nmode = widest\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("[train]\nspeed_perturb = maybe\n"),
                  ConfigError);

  RunConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.epochs = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.speed_perturb = PerturbPolicy::kUniform;
  cfg.perturb_low = 0.5;  // outside the supported resampling range
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.optimizer = "adam";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("a model config file overrides the preset") {
  const fs::path dir = scratch_dir("config-model-file");
  model::ModelConfig custom = model::preset("mini-2x2");
  custom.conv2.channels = 96;
  spit(dir / "model.cfg", model::config_text(custom));

  RunConfig cfg;
  cfg.model_config_file = (dir / "model.cfg").string();
  const model::ModelConfig mc = cfg.model();
  CHECK(mc.conv2.channels == 96);
  CHECK(model::config_text(mc) == model::config_text(custom));

  cfg.model_config_file = (dir / "missing.cfg").string();
  CHECK_THROWS_AS(cfg.model(), DataError);
}

TEST_SUITE_END();

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

TEST_SUITE_BEGIN("synthetic");

TEST_CASE("letter frequencies are an arithmetic ladder over a..j") {
  CHECK(data::letter_frequency('a') == doctest::Approx(300.0));
  CHECK(data::letter_frequency('b') == doctest::Approx(440.0));
  CHECK(data::letter_frequency('j') == doctest::Approx(300.0 + 9 * 140.0));
  CHECK_THROWS_AS(data::letter_frequency('k'), DataError);
  CHECK_THROWS_AS(data::letter_frequency(' '), DataError);
}

TEST_CASE("rendering lays out tones, gaps, and edges exactly") {
  data::SyntheticSpec spec;
  const auto ms = [&](double v) {
    return static_cast<std::size_t>(
        std::llround(v * spec.sample_rate / 1000.0));
  };
  // "ab" = edge + tone + letter gap + tone + edge.
  const AudioClip two = data::render_transcript("ab", spec);
  CHECK(two.samples.size() ==
        2 * ms(spec.edge_ms) + 2 * ms(spec.tone_ms) + ms(spec.letter_gap_ms));
  // "a b" swaps the letter gap for a word gap.
  const AudioClip spaced = data::render_transcript("a b", spec);
  CHECK(spaced.samples.size() ==
        2 * ms(spec.edge_ms) + 2 * ms(spec.tone_ms) + ms(spec.word_gap_ms));
  CHECK(two.sample_rate == spec.sample_rate);
}

TEST_CASE("corpus generation is deterministic and covers every letter") {
  const fs::path dir_a = scratch_dir("synth-a");
  const fs::path dir_b = scratch_dir("synth-b");
  data::SyntheticSpec spec;
  spec.n_utterances = 12;
  spec.seed = 11;
  const auto entries_a = data::generate_synthetic_corpus(dir_a.string(), spec);
  const auto entries_b = data::generate_synthetic_corpus(dir_b.string(), spec);

  REQUIRE(entries_a.size() == 12);
  CHECK(slurp(dir_a / "corpus.txt") == slurp(dir_b / "corpus.txt"));
  CHECK(slurp(dir_a / "manifest.jsonl") == slurp(dir_b / "manifest.jsonl"));
  CHECK(slurp(dir_a / fs::path(entries_a[0].audio_filepath).filename()) ==
        slurp(dir_b / fs::path(entries_b[0].audio_filepath).filename()));

  // Every letter a..j appears somewhere in the corpus (the first ten
  // utterances cycle the whole word pool).
  std::string all_text;
  for (const auto& e : entries_a) all_text += e.text + " ";
  for (char c = 'a'; c <= 'j'; ++c) {
    INFO("letter: " << c);
    CHECK(all_text.find(c) != std::string::npos);
  }

  // The manifest loads and matches the rendered audio lengths.
  const auto loaded = data::load_manifest((dir_a / "manifest.jsonl").string());
  REQUIRE(loaded.size() == 12);
  for (const auto& e : loaded) {
    const AudioClip clip = read_wav(e.resolved_path);
    CHECK(e.duration ==
          doctest::Approx(static_cast<double>(clip.samples.size()) /
                          clip.sample_rate));
    CHECK(clip.samples.size() ==
          data::render_transcript(e.text, spec).samples.size());
  }

  // corpus.txt holds one transcript per line, in manifest order.
  std::istringstream corpus(slurp(dir_a / "corpus.txt"));
  std::string line;
  std::size_t n_lines = 0;
  while (std::getline(corpus, line)) {
    REQUIRE(n_lines < entries_a.size());
    CHECK(line == entries_a[n_lines].text);
    ++n_lines;
  }
  CHECK(n_lines == 12);
}

TEST_SUITE_END();

// ---------------------------------------------------------------------------
// Pipeline drivers
// ---------------------------------------------------------------------------

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("load_utterances encodes transcripts and validates ids") {
  const fs::path dir = scratch_dir("load-utts");
  data::SyntheticSpec spec;
  spec.n_utterances = 3;
  const auto entries = data::generate_synthetic_corpus(dir.string(), spec);
  const ctc::Alphabet english = ctc::Alphabet::english();

  const auto loaded = data::load_manifest((dir / "manifest.jsonl").string());
  const auto utts = pipeline::load_utterances(loaded, english);
  REQUIRE(utts.size() == 3);
  for (const auto& u : utts) {
    CHECK(u.target == english.encode(u.text));
    CHECK(!u.audio.samples.empty());
  }

  // Out-of-alphabet transcripts fail with the utterance named, unless
  // targets are not required (the decode path).
  auto bad = loaded;
  bad[1].text = "mix 7 up";
  try {
    pipeline::load_utterances(bad, english);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(data::utterance_id(bad[1])) !=
          std::string::npos);
  }
  const auto lax = pipeline::load_utterances(bad, english, false);
  CHECK(lax[1].target.empty());

  // Duplicate utterance ids are rejected.
  auto dupes = loaded;
  dupes.push_back(dupes[0]);
  CHECK_THROWS_AS(pipeline::load_utterances(dupes, english), DataError);
}

TEST_CASE("metrics csv serializes at full precision") {
  pipeline::EpochStats row;
  row.epoch = 2;
  row.global_step = 10;
  row.train_loss = 1.0 / 3.0;
  row.dev_wer = 0.125;
  const std::string text = pipeline::metrics_csv_text({row});
  CHECK(text ==
        "epoch,step,train_loss,dev_wer\n"
        "2,10,0.33333333333333331,0.125\n");
  CHECK(pipeline::metrics_csv_text({}) == "epoch,step,train_loss,dev_wer\n");
}

TEST_CASE("hypothesis files round trip and reject malformed lines") {
  const fs::path dir = scratch_dir("hyp-files");
  const fs::path path = dir / "hyps.tsv";
  pipeline::save_hypotheses(path.string(), {"utt_a", "utt_b"},
                            {"bad cab", ""});
  const auto loaded = pipeline::load_hypotheses(path.string());
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0] == std::pair<std::string, std::string>{"utt_a", "bad cab"});
  CHECK(loaded[1].second.empty());  // empty hypotheses survive the round trip

  spit(path, "utt_a\tx\nutt_a\ty\n");
  CHECK_THROWS_AS(pipeline::load_hypotheses(path.string()), ParseError);
  spit(path, "no separator here\n");
  CHECK_THROWS_AS(pipeline::load_hypotheses(path.string()), ParseError);
  spit(path, "\tmissing id\n");
  CHECK_THROWS_AS(pipeline::load_hypotheses(path.string()), ParseError);
  CHECK_THROWS_AS(pipeline::load_hypotheses((dir / "absent.tsv").string()),
                  DataError);
  CHECK_THROWS_AS(
      pipeline::save_hypotheses(path.string(), {"utt_a"}, {"x", "y"}),
      ShapeError);
}

TEST_CASE("evaluate_hypotheses aligns by id and reports mismatches fully") {
  const fs::path dir = scratch_dir("evaluate");
  write_wav((dir / "u1.wav").string(), tiny_clip(1600));
  write_wav((dir / "u2.wav").string(), tiny_clip(1600));
  std::vector<data::ManifestEntry> refs;
  refs.push_back(make_entry((dir / "u1.wav").string(), "Bad  Cab", 0.1));
  refs.push_back(make_entry((dir / "u2.wav").string(), "jade", 0.1));

  // Normalization applies to both sides; order of hypotheses is free.
  const auto rows = pipeline::evaluate_hypotheses(
      refs, {{"u2", "jade"}, {"u1", "bad cab"}});
  REQUIRE(rows.size() == 2);
  const eval::ErrorCounts agg = eval::aggregate(rows);
  CHECK(agg.total() == 0);
  CHECK(agg.ref_len == 3);

  // A wrong word counts against the right utterance.
  const auto rows2 = pipeline::evaluate_hypotheses(
      refs, {{"u1", "bad cap"}, {"u2", "jade"}});
  CHECK(eval::aggregate(rows2).substitutions == 1);

  // Id set mismatches list every missing and unexpected id at once.
  try {
    pipeline::evaluate_hypotheses(refs, {{"u1", "x"}, {"u9", "y"}});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    INFO("message: " << msg);
    CHECK(msg.find("u2") != std::string::npos);
    CHECK(msg.find("u9") != std::string::npos);
  }

  auto dupes = refs;
  dupes.push_back(refs[0]);
  CHECK_THROWS_AS(
      pipeline::evaluate_hypotheses(dupes, {{"u1", "x"}, {"u2", "y"}}),
      DataError);
}

// Shared trainer fixture: a six-utterance corpus and a small but real
// configuration (the desk-scale preset, two utterances per batch, three
// steps per epoch).
struct TrainerFixture {
  fs::path root;
  RunConfig cfg;

  TrainerFixture() {
    root = scratch_dir("trainer");
    data::SyntheticSpec spec;
    spec.n_utterances = 6;
    spec.seed = 11;
    data::generate_synthetic_corpus((root / "corpus").string(), spec);
    cfg.train_manifest = (root / "corpus" / "manifest.jsonl").string();
    cfg.batch_size = 2;
    cfg.epochs = 3;
    cfg.base_lr = 0.05;
    cfg.seed = 5;
    cfg.speed_perturb = PerturbPolicy::kFixed;
    cfg.stop_wer = -1.0;  // never stop early unless a case opts in
  }

  RunConfig with_dir(const std::string& name) {
    RunConfig c = cfg;
    c.checkpoint_dir = (root / name).string();
    return c;
  }
};

TEST_CASE("training runs, logs, checkpoints, and repeats byte for byte") {
  TrainerFixture fx;
  std::ostringstream log_a;
  const RunConfig cfg_a = fx.with_dir("run-a");
  const pipeline::TrainOutcome a =
      pipeline::run_training<double>(cfg_a, "", log_a);

  REQUIRE(a.history.size() == 3);
  CHECK(a.history[0].epoch == 1);
  CHECK(a.history[0].global_step == 3);  // 6 utterances / batch of 2
  CHECK(a.history[2].global_step == 9);
  for (const auto& row : a.history) {
    CHECK(std::isfinite(row.train_loss));
    CHECK(row.train_loss > 0.0);
    CHECK(row.dev_wer >= 0.0);
  }
  const fs::path dir_a = fs::path(cfg_a.checkpoint_dir);
  CHECK(fs::exists(dir_a / "epoch-0001.ckpt"));
  CHECK(fs::exists(dir_a / "epoch-0002.ckpt"));
  CHECK(fs::exists(dir_a / "epoch-0003.ckpt"));
  CHECK(fs::exists(a.best_checkpoint));
  CHECK(a.last_checkpoint == (dir_a / "epoch-0003.ckpt").string());
  CHECK(slurp(a.metrics_csv) == pipeline::metrics_csv_text(a.history));
  CHECK(log_a.str().find("epoch 1 step") != std::string::npos);

  // An identical configuration in a fresh directory reproduces the metrics
  // log and the final checkpoint bit for bit.
  std::ostringstream log_b;
  const RunConfig cfg_b = fx.with_dir("run-b");
  const pipeline::TrainOutcome b =
      pipeline::run_training<double>(cfg_b, "", log_b);
  CHECK(slurp(b.metrics_csv) == slurp(a.metrics_csv));
  CHECK(slurp(fs::path(cfg_b.checkpoint_dir) / "epoch-0003.ckpt") ==
        slurp(dir_a / "epoch-0003.ckpt"));

  // Resuming from the epoch-2 checkpoint under the same configuration
  // replays epoch 3 exactly: same metrics row, bitwise-equal checkpoint.
  std::ostringstream log_c;
  const RunConfig cfg_c = fx.with_dir("run-c");
  const pipeline::TrainOutcome c = pipeline::run_training<double>(
      cfg_c, (dir_a / "epoch-0002.ckpt").string(), log_c);
  REQUIRE(c.history.size() == 1);
  CHECK(c.history[0].epoch == 3);
  CHECK(c.history[0].global_step == 9);
  CHECK(c.history[0].train_loss == a.history[2].train_loss);
  CHECK(c.history[0].dev_wer == a.history[2].dev_wer);
  CHECK(slurp(fs::path(cfg_c.checkpoint_dir) / "epoch-0003.ckpt") ==
        slurp(dir_a / "epoch-0003.ckpt"));

  // Resume validation: a different model rejects the checkpoint, and a
  // horizon shorter than the checkpoint's position is refused.
  RunConfig wrong_model = fx.with_dir("run-d");
  wrong_model.model_preset = "slim-10x3-residual";
  std::ostringstream sink;
  CHECK_THROWS_AS(
      pipeline::run_training<double>(
          wrong_model, (dir_a / "epoch-0002.ckpt").string(), sink),
      ConfigError);
  RunConfig short_horizon = fx.with_dir("run-e");
  short_horizon.epochs = 1;
  CHECK_THROWS_AS(
      pipeline::run_training<double>(
          short_horizon, (dir_a / "epoch-0002.ckpt").string(), sink),
      ConfigError);
}

TEST_CASE("epochs=0 writes an initial checkpoint and a header-only log") {
  TrainerFixture fx;
  RunConfig cfg = fx.with_dir("run-zero");
  cfg.epochs = 0;
  std::ostringstream log;
  const pipeline::TrainOutcome out =
      pipeline::run_training<double>(cfg, "", log);
  CHECK(out.history.empty());
  CHECK(fs::exists(fs::path(cfg.checkpoint_dir) / "initial.ckpt"));
  CHECK(slurp(out.metrics_csv) == "epoch,step,train_loss,dev_wer\n");
}

TEST_CASE("training stops early once the dev WER reaches the target") {
  TrainerFixture fx;
  RunConfig cfg = fx.with_dir("run-early");
  cfg.epochs = 3;
  cfg.stop_wer = 10.0;  // any WER satisfies this, so one epoch suffices
  std::ostringstream log;
  const pipeline::TrainOutcome out =
      pipeline::run_training<double>(cfg, "", log);
  CHECK(out.history.size() == 1);
  CHECK(fs::exists(fs::path(cfg.checkpoint_dir) / "epoch-0001.ckpt"));
  CHECK(!fs::exists(fs::path(cfg.checkpoint_dir) / "epoch-0002.ckpt"));
}

TEST_CASE("training validates its inputs up front") {
  TrainerFixture fx;
  std::ostringstream sink;
  RunConfig no_manifest = fx.with_dir("run-f");
  no_manifest.train_manifest.clear();
  CHECK_THROWS_AS(pipeline::run_training<double>(no_manifest, "", sink),
                  ConfigError);
  RunConfig absent = fx.with_dir("run-g");
  absent.train_manifest = (fx.root / "nowhere.jsonl").string();
  CHECK_THROWS_AS(pipeline::run_training<double>(absent, "", sink),
                  DataError);
}

TEST_CASE("decode_utterances drives all three modes against a checkpoint") {
  TrainerFixture fx;
  RunConfig cfg = fx.with_dir("run-decode");
  cfg.epochs = 1;
  std::ostringstream log;
  const pipeline::TrainOutcome out =
      pipeline::run_training<double>(cfg, "", log);

  auto loaded = model::load_checkpoint<double>(out.last_checkpoint);
  const auto entries = data::load_manifest(cfg.train_manifest);
  const ctc::Alphabet alphabet(loaded.model.config().graphemes);
  const auto utts = pipeline::load_utterances(entries, alphabet, false);

  // Greedy needs no LM and yields one hypothesis per utterance.
  cfg.decode_mode = DecodeMode::kGreedy;
  const auto greedy =
      pipeline::decode_utterances(loaded.model, utts, cfg, nullptr, nullptr);
  REQUIRE(greedy.ids.size() == utts.size());
  CHECK(greedy.nbest.empty());
  CHECK(greedy.ids[0] == utts[0].id);

  // Beam search itself runs LM-free, but a weighted LM or a rescoring pass
  // requires one.
  cfg.decode_mode = DecodeMode::kBeam;
  cfg.beam_width = 8;
  cfg.nbest = 4;
  const auto lm_free =
      pipeline::decode_utterances(loaded.model, utts, cfg, nullptr, nullptr);
  CHECK(lm_free.nbest.size() == utts.size());
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(
      pipeline::decode_utterances(loaded.model, utts, cfg, nullptr, nullptr),
      ConfigError);
  cfg.alpha = 0.0;
  cfg.decode_mode = DecodeMode::kBeamRescore;
  CHECK_THROWS_AS(
      pipeline::decode_utterances(loaded.model, utts, cfg, nullptr, nullptr),
      ConfigError);
  cfg.decode_mode = DecodeMode::kBeam;
  cfg.alpha = 1.5;

  std::vector<std::vector<std::string>> sentences;
  for (const auto& u : utts) sentences.push_back(eval::words(u.text));
  const lm::BackoffLM lm = lm::BackoffLM::train(sentences, 2);
  const auto beam =
      pipeline::decode_utterances(loaded.model, utts, cfg, &lm, nullptr);
  REQUIRE(beam.nbest.size() == utts.size());
  for (const auto& list : beam.nbest) CHECK(!list.hyps.empty());

  cfg.decode_mode = DecodeMode::kBeamRescore;
  const auto rescored =
      pipeline::decode_utterances(loaded.model, utts, cfg, &lm, &lm);
  REQUIRE(rescored.nbest.size() == utts.size());
  for (std::size_t i = 0; i < rescored.nbest.size(); ++i) {
    for (const auto& h : rescored.nbest[i].hyps) {
      CHECK(std::isfinite(h.final_score));
    }
  }

  // A language model whose vocabulary cannot be spelled from the model
  // graphemes is rejected up front.
  const lm::BackoffLM digits =
      lm::BackoffLM::train({{"route", "66"}}, 1);
  cfg.decode_mode = DecodeMode::kBeam;
  try {
    pipeline::decode_utterances(loaded.model, utts, cfg, &digits, nullptr);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("66") != std::string::npos);
    CHECK(msg.find('6') != std::string::npos);
  }
}

TEST_SUITE_END();

}  // namespace
}  // namespace jasper
