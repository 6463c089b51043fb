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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "jasper/checkpoint.h"
#include "jasper/ctc.h"
#include "jasper/error.h"
#include "jasper/graph.h"
#include "jasper/model.h"
#include "jasper/model_config.h"
#include "jasper/nn_ops.h"
#include "jasper/rng.h"
#include "jasper/tensor.h"
#include "test_util.h"

namespace {

namespace model = jasper::model;
namespace nn = jasper::nn;
using jasper::ConfigError;
using jasper::DataError;
using jasper::Graph;
using jasper::Index;
using jasper::PaddedBatch;
using jasper::ShapeError;
using jasper::Tensor;
using jasper::Var;
using model::ModelConfig;
using model::Topology;

std::uint64_t key(std::uint64_t salt) {
  return jasper::derive_stream(20260816, "model", {salt});
}

// A tiny but structurally complete config for hand counting: one block,
// one sub-block, small channel counts.
ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.in_channels = 2;
  cfg.graphemes = "ab";
  cfg.topology = Topology::kResidual;
  cfg.conv1 = {3, 4, 0.0, 1, 2, 1};
  cfg.blocks = {{3, 4, 0.0, 1, 1, 1}};
  cfg.conv2 = {3, 6, 0.0, 1, 1, 2};
  cfg.conv3 = {1, 8, 0.0, 1, 1, 1};
  return cfg;
}

PaddedBatch<double> random_batch(Index batch, Index channels, Index t_max,
                                 std::vector<Index> lengths,
                                 std::uint64_t salt) {
  Tensor<double> feats =
      Tensor<double>::uniform({batch, channels, t_max}, -1.0, 1.0, key(salt));
  return PaddedBatch<double>::make(std::move(feats), std::move(lengths));
}

TEST_CASE("residual sources: plain residual has exactly one source") {
  const ModelConfig cfg = model::preset("jasper-10x3-residual");
  for (int i = 1; i <= 10; ++i) {
    const model::ResidualPlan plan = model::residual_sources(cfg, i);
    REQUIRE(plan.sources.size() == 1);
    CHECK(plan.sources[0] == i - 1);
    CHECK_FALSE(plan.concatenate);
    CHECK_FALSE(plan.intra_block_dense);
  }
}

TEST_CASE("residual sources: dense residual indegree of block i equals i") {
  const ModelConfig cfg = model::preset("jasper-10x3-dense-residual");
  for (int i = 1; i <= 10; ++i) {
    const model::ResidualPlan plan = model::residual_sources(cfg, i);
    REQUIRE(static_cast<int>(plan.sources.size()) == i);
    for (int s = 0; s < i; ++s) CHECK(plan.sources[static_cast<size_t>(s)] == s);
    CHECK_FALSE(plan.concatenate);
  }
  // Block 5 therefore has 5 incoming residual sources.
  CHECK(model::residual_sources(cfg, 5).sources.size() == 5);
}

TEST_CASE("residual sources: concatenative topologies") {
  const ModelConfig dn = model::preset("jasper-10x3-densenet");
  const ModelConfig drn = model::preset("jasper-10x3-densernet");
  // DenseRNet shares the inter-block graph of dense residual but combines by
  // concatenation.
  const ModelConfig dr = model::preset("jasper-10x3-dense-residual");
  CHECK(model::residual_sources(drn, 3).sources ==
        model::residual_sources(dr, 3).sources);
  CHECK(model::residual_sources(drn, 3).concatenate);
  CHECK(model::residual_sources(drn, 3).intra_block_dense);
  // DenseNet keeps dense connectivity inside the block only.
  CHECK(model::residual_sources(dn, 4).sources == std::vector<int>{3});
  CHECK(model::residual_sources(dn, 4).concatenate);
  CHECK(model::residual_sources(dn, 4).intra_block_dense);

  CHECK_THROWS_AS(model::residual_sources(dn, 0), ShapeError);
  CHECK_THROWS_AS(model::residual_sources(dn, 11), ShapeError);
}

TEST_CASE("param count: published sizings") {
  // Frozen outputs of an independent shape-walk oracle for these presets.
  const ModelConfig big = model::preset("jasper-dr-10x5");
  CHECK(model::count_params(big) == 332632349);
  CHECK(model::conv_layer_count(big) == 54);
  CHECK(std::abs(model::count_params(big) - 333e6) / 333e6 < 0.03);

  const ModelConfig small = model::preset("jasper-10x3-residual");
  CHECK(model::count_params(small) == 200500509);
  CHECK(model::conv_layer_count(small) == 34);
  CHECK(std::abs(model::count_params(small) - 201e6) / 201e6 < 0.03);
}

TEST_CASE("param count: four topologies at 10x3 sizing stay within 6%") {
  const std::vector<std::string> names = {
      "jasper-10x3-residual", "jasper-10x3-dense-residual",
      "jasper-10x3-densenet", "jasper-10x3-densernet"};
  std::vector<std::int64_t> counts;
  for (const std::string& name : names) {
    const ModelConfig cfg = model::preset(name);
    counts.push_back(model::count_params(cfg));
    CHECK(model::conv_layer_count(cfg) == 34);
  }
  CHECK(counts[1] == 210845981);
  CHECK(counts[2] == 205997173);
  CHECK(counts[3] == 211041525);
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  CHECK(static_cast<double>(*hi - *lo) / static_cast<double>(*lo) < 0.06);
}

TEST_CASE("param count: hand-counted tiny config") {
  // conv1: 3*2*4 + 8 = 32; block1 conv: 3*4*4 + 8 = 56; projection from
  // conv1: 4*4 + 8 = 24; conv2: 3*4*6 + 12 = 84; conv3: 6*8 + 16 = 64;
  // conv4: 8*3 + 3 = 27.  Total 287.
  ModelConfig cfg = tiny_config();
  CHECK(model::count_params(cfg) == 287);
  CHECK(model::conv_layer_count(cfg) == 5);

  // The count is independent of the norm kind: batch and layer norms carry
  // gamma+beta, weight norm carries magnitude+bias.
  cfg.norm = model::NormKind::kLayerMasked;
  CHECK(model::count_params(cfg) == 287);
  cfg.norm = model::NormKind::kWeight;
  CHECK(model::count_params(cfg) == 287);
}

TEST_CASE("config validation rejects bad fields") {
  CHECK_THROWS_AS(model::parse_topology("spaghetti"), ConfigError);
  CHECK_THROWS_AS(model::parse_norm("group"), ConfigError);
  CHECK_THROWS_AS(model::parse_act("swish"), ConfigError);
  CHECK_THROWS_AS(model::preset("jasper-99x9"), ConfigError);

  ModelConfig cfg = tiny_config();
  cfg.graphemes = "";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.graphemes = "aa";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.blocks[0].kernel = 4;  // even
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.blocks[0].dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.blocks[0].stride = 2;  // only conv1 may stride
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.conv1.dilation = 2;  // only conv2 may dilate
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.blocks.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config text round-trips every preset exactly") {
  for (const std::string& name : model::preset_names()) {
    const ModelConfig cfg = model::preset(name);
    const std::string text = model::config_text(cfg);
    const ModelConfig back = model::parse_config(text);
    CHECK(model::config_text(back) == text);
    CHECK(model::count_params(back) == model::count_params(cfg));
  }
}

TEST_CASE("config text parse errors carry line numbers") {
  CHECK_THROWS_WITH_AS(model::parse_config("bogus\n"),
                       doctest::Contains("line 1"), ConfigError);
  const std::string good = model::config_text(tiny_config());
  CHECK_THROWS_WITH_AS(model::parse_config(good + "mystery=1\n"),
                       doctest::Contains("unknown key"), ConfigError);
  CHECK_THROWS_AS(model::parse_config("jasper-config-v1\n"), ConfigError);
}

TEST_CASE("build: deterministic in the seed") {
  const ModelConfig cfg = model::preset("mini-2x2");
  model::Model<double> a(cfg, 7);
  model::Model<double> b(cfg, 7);
  model::Model<double> c(cfg, 8);
  bool saw_difference = false;
  for (const auto& [name, tensor] : a.params()) {
    const Tensor<double>& other = b.params().at(name);
    for (Index i = 0; i < tensor.numel(); ++i) {
      REQUIRE(tensor[i] == other[i]);  // bitwise
    }
    const Tensor<double>& third = c.params().at(name);
    for (Index i = 0; i < tensor.numel(); ++i) {
      if (tensor[i] != third[i]) saw_difference = true;
    }
  }
  CHECK(saw_difference);
}

TEST_CASE("build: parameter names match the introspected plan") {
  for (const char* preset_name : {"mini-2x2", "slim-10x3-residual"}) {
    ModelConfig cfg = model::preset(preset_name);
    cfg.blocks.resize(2);  // keep the slim variant cheap to build
    for (model::Topology topo :
         {Topology::kResidual, Topology::kDenseResidual, Topology::kDenseNet,
          Topology::kDenseRNet}) {
      for (model::NormKind norm :
           {model::NormKind::kBatch, model::NormKind::kLayerMasked,
            model::NormKind::kWeight}) {
        cfg.topology = topo;
        cfg.norm = norm;
        model::Model<double> m(cfg, 1);
        Graph<double> g;
        auto batch = random_batch(1, cfg.in_channels, 20, {20}, 11);
        auto out = m.forward(g, batch, nn::Mode::kTrain, 1);
        std::set<std::string> touched;
        for (const auto& [name, var] : out.param_vars) touched.insert(name);
        std::set<std::string> planned;
        for (const auto& info : model::param_shapes(cfg)) {
          planned.insert(info.name);
        }
        REQUIRE(touched == planned);
      }
    }
  }
}

TEST_CASE("forward: output geometry and normalization") {
  const ModelConfig cfg = model::preset("mini-2x2");
  model::Model<double> m(cfg, 42);
  Graph<double> g;
  auto batch = random_batch(2, 64, 100, {100, 73}, 1);
  auto out = m.forward(g, batch, nn::Mode::kInfer);

  const Tensor<double>& lp = g.value(out.log_probs);
  REQUIRE(lp.rank() == 3);
  CHECK(lp.dim(0) == 2);
  CHECK(lp.dim(1) == 29);  // 28 graphemes + blank
  CHECK(lp.dim(2) == 50);  // ceil(100 / 2)
  REQUIRE(out.out_lengths == std::vector<Index>{50, 37});  // ceil(73/2)

  // Per-frame distributions: exp sums to 1 at every valid frame.
  for (Index b = 0; b < 2; ++b) {
    for (Index t = 0; t < out.out_lengths[static_cast<size_t>(b)]; ++t) {
      double sum = 0.0;
      for (Index v = 0; v < 29; ++v) sum += std::exp(lp.at(b, v, t));
      REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("forward: infer is pure and repeatable") {
  const ModelConfig cfg = model::preset("mini-2x2");
  model::Model<double> m(cfg, 3);
  const auto buffers_before = m.buffers();
  auto batch = random_batch(1, 64, 40, {40}, 2);

  Graph<double> g1, g2;
  auto a = m.forward(g1, batch, nn::Mode::kInfer);
  auto b = m.forward(g2, batch, nn::Mode::kInfer);
  const Tensor<double>& va = g1.value(a.log_probs);
  const Tensor<double>& vb = g2.value(b.log_probs);
  for (Index i = 0; i < va.numel(); ++i) REQUIRE(va[i] == vb[i]);  // bitwise

  for (const auto& [name, tensor] : m.buffers()) {
    const Tensor<double>& before = buffers_before.at(name);
    for (Index i = 0; i < tensor.numel(); ++i) {
      REQUIRE(tensor[i] == before[i]);
    }
  }
}

TEST_CASE("forward: train mode updates batch-norm running statistics") {
  const ModelConfig cfg = model::preset("mini-2x2");
  model::Model<double> m(cfg, 3);
  const auto before = m.buffers();
  Graph<double> g;
  auto batch = random_batch(2, 64, 30, {30, 22}, 3);
  m.forward(g, batch, nn::Mode::kTrain, 5);
  bool changed = false;
  for (const auto& [name, tensor] : m.buffers()) {
    const Tensor<double>& old = before.at(name);
    for (Index i = 0; i < tensor.numel(); ++i) {
      if (tensor[i] != old[i]) changed = true;
    }
  }
  CHECK(changed);
}

TEST_CASE("forward: channel mismatch is rejected") {
  const ModelConfig cfg = model::preset("mini-2x2");
  model::Model<double> m(cfg, 1);
  Graph<double> g;
  auto batch = random_batch(1, 32, 20, {20}, 4);
  CHECK_THROWS_AS(m.forward(g, batch, nn::Mode::kInfer), ShapeError);
}

// Padding invariance: a sequence's valid outputs must not depend on what
// else shares the batch.  Masked norms plus post-sub-block zeroing make this
// hold for batch norm in infer mode and layer norm in any mode.
void check_padding_invariance(model::NormKind norm, nn::Mode mode) {
  ModelConfig cfg = model::preset("mini-2x2");
  cfg.norm = norm;
  model::Model<double> m(cfg, 9);

  const Index t_long = 48, t_short = 31;
  auto batch = random_batch(2, 64, t_long, {t_long, t_short}, 5);
  // Slice each sequence into its own single-item batch.
  Tensor<double> solo0 = Tensor<double>::zeros({1, 64, t_long});
  Tensor<double> solo1 = Tensor<double>::zeros({1, 64, t_short});
  for (Index c = 0; c < 64; ++c) {
    for (Index t = 0; t < t_long; ++t) {
      solo0.at(0, c, t) = batch.features.at(0, c, t);
    }
    for (Index t = 0; t < t_short; ++t) {
      solo1.at(0, c, t) = batch.features.at(1, c, t);
    }
  }

  Graph<double> gb, g0, g1;
  auto out_b = m.forward(gb, batch, mode, 77);
  auto out_0 = m.forward(
      g0, PaddedBatch<double>::make(std::move(solo0), {t_long}), mode, 77);
  auto out_1 = m.forward(
      g1, PaddedBatch<double>::make(std::move(solo1), {t_short}), mode, 77);

  const Tensor<double>& lb = gb.value(out_b.log_probs);
  const Tensor<double>& l0 = g0.value(out_0.log_probs);
  const Tensor<double>& l1 = g1.value(out_1.log_probs);
  double worst = 0.0;
  for (Index v = 0; v < 29; ++v) {
    for (Index t = 0; t < out_b.out_lengths[0]; ++t) {
      worst = std::max(worst, std::abs(lb.at(0, v, t) - l0.at(0, v, t)));
    }
    for (Index t = 0; t < out_b.out_lengths[1]; ++t) {
      worst = std::max(worst, std::abs(lb.at(1, v, t) - l1.at(0, v, t)));
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("forward: batching does not change valid outputs (batch norm, infer)") {
  check_padding_invariance(model::NormKind::kBatch, nn::Mode::kInfer);
}

TEST_CASE("forward: batching does not change valid outputs (layer norm, train)") {
  check_padding_invariance(model::NormKind::kLayerMasked, nn::Mode::kTrain);
}

TEST_CASE("forward: batching does not change valid outputs (weight norm, infer)") {
  check_padding_invariance(model::NormKind::kWeight, nn::Mode::kInfer);
}

TEST_CASE("forward: gated activations halve the doubled conv width") {
  ModelConfig cfg = tiny_config();
  cfg.act.kind = nn::ActKind::kGlu;
  model::Model<double> m(cfg, 5);
  // Conv weights widen to 2C...
  CHECK(m.params().at("conv1.conv.w").dim(0) == 8);
  Graph<double> g;
  auto batch = random_batch(1, 2, 16, {16}, 6);
  auto out = m.forward(g, batch, nn::Mode::kInfer);
  // ...but the network still emits |graphemes|+1 = 3 classes.
  CHECK(g.value(out.log_probs).dim(1) == 3);
}

TEST_CASE("backward: gradients reach block 1 through a deep stack") {
  const ModelConfig cfg = model::preset("slim-10x3-residual");
  model::Model<double> m(cfg, 13);
  Graph<double> g;
  auto batch = random_batch(1, 64, 30, {30}, 7);
  auto out = m.forward(g, batch, nn::Mode::kTrain, 0);

  const jasper::ctc::Alphabet alphabet = jasper::ctc::Alphabet::english();
  const std::vector<std::vector<Index>> targets = {alphabet.encode("ab")};
  Var loss = jasper::ctc::ctc_loss_node(g, out.log_probs, targets,
                                        out.out_lengths, alphabet.blank());
  g.backward(loss);

  // Every parameter's gradient is finite, and the earliest block receives
  // signal (residual paths keep gradients alive at depth 10).
  double block1_norm = 0.0;
  for (const auto& [name, var] : out.param_vars) {
    const Tensor<double>& grad = g.grad(var);
    REQUIRE(grad.all_finite());
    if (name == "block1.sub1.conv.w") {
      block1_norm = std::sqrt(grad.array().square().sum());
    }
  }
  CHECK(block1_norm > 1e-12);
}

TEST_CASE("checkpoint: round-trip reproduces the model bitwise") {
  namespace fs = std::filesystem;
  const fs::path path =
      fs::temp_directory_path() / "jasper_test_ckpt_roundtrip.jcp";
  const ModelConfig cfg = model::preset("mini-2x2");
  model::Model<double> m(cfg, 21);
  // Push the buffers away from their init values first.
  {
    Graph<double> g;
    auto batch = random_batch(2, 64, 24, {24, 17}, 8);
    m.forward(g, batch, nn::Mode::kTrain, 1);
  }
  model::save_checkpoint(path, m, 1234);
  CHECK_FALSE(fs::exists(path.string() + ".tmp"));

  auto loaded = model::load_checkpoint<double>(path);
  CHECK(loaded.global_step == 1234);
  CHECK_FALSE(loaded.optimizer.has_value());
  CHECK(model::config_text(loaded.model.config()) == model::config_text(cfg));
  CHECK(loaded.model.count_params() == m.count_params());
  for (const auto& [name, tensor] : m.params()) {
    const Tensor<double>& other = loaded.model.params().at(name);
    for (Index i = 0; i < tensor.numel(); ++i) REQUIRE(tensor[i] == other[i]);
  }
  for (const auto& [name, tensor] : m.buffers()) {
    const Tensor<double>& other = loaded.model.buffers().at(name);
    for (Index i = 0; i < tensor.numel(); ++i) REQUIRE(tensor[i] == other[i]);
  }

  // Forward outputs are bitwise equal after reload.
  Graph<double> g1, g2;
  auto batch = random_batch(1, 64, 20, {20}, 9);
  auto a = m.forward(g1, batch, nn::Mode::kInfer);
  auto b = loaded.model.forward(g2, batch, nn::Mode::kInfer);
  const Tensor<double>& va = g1.value(a.log_probs);
  const Tensor<double>& vb = g2.value(b.log_probs);
  for (Index i = 0; i < va.numel(); ++i) REQUIRE(va[i] == vb[i]);
  fs::remove(path);
}

TEST_CASE("checkpoint: optimizer state round-trips") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "jasper_test_ckpt_opt.jcp";
  ModelConfig cfg = tiny_config();
  model::Model<double> m(cfg, 2);
  jasper::optim::NovoGrad<double> opt;

  // A couple of real steps so the optimizer holds nontrivial state.
  for (int step = 0; step < 2; ++step) {
    Graph<double> g;
    auto batch = random_batch(1, 2, 12, {12}, 10 + step);
    auto out = m.forward(g, batch, nn::Mode::kTrain, step);
    const std::vector<std::vector<Index>> targets = {{0}};
    Var loss = jasper::ctc::ctc_loss_node(g, out.log_probs, targets,
                                          out.out_lengths, 2);
    g.backward(loss);
    std::vector<jasper::optim::ParamRef<double>> refs;
    for (auto& [name, var] : out.param_vars) {
      refs.push_back({name, &m.params().at(name), &g.grad(var)});
    }
    opt.step(refs, 0.01);
  }

  auto snap = model::snapshot_optimizer(opt);
  model::save_checkpoint(path, m, 2, &snap);
  auto loaded = model::load_checkpoint<double>(path);
  REQUIRE(loaded.optimizer.has_value());
  CHECK(loaded.optimizer->kind == "novograd");
  CHECK(loaded.optimizer->step == 2);

  jasper::optim::NovoGrad<double> opt2;
  model::restore_optimizer(*loaded.optimizer, opt2);
  CHECK(opt2.step_count() == opt.step_count());
  CHECK(opt2.second_moment_count() == opt.second_moment_count());
  for (const auto& [name, state] : opt.layers()) {
    const auto& other = opt2.layers().at(name);
    REQUIRE(state.v == other.v);  // bitwise
    for (Index i = 0; i < state.m.numel(); ++i) {
      REQUIRE(state.m[i] == other.m[i]);
    }
  }

  // Restoring into the wrong optimizer kind is rejected.
  jasper::optim::SgdMomentum<double> sgd;
  CHECK_THROWS_AS(model::restore_optimizer(*loaded.optimizer, sgd), DataError);
  fs::remove(path);
}

TEST_CASE("checkpoint: structural errors are rejected cleanly") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "jasper_test_ckpt_bad.jcp";
  ModelConfig cfg = tiny_config();
  model::Model<double> m(cfg, 4);
  model::save_checkpoint(path, m, 7);

  // Truncation.
  const auto full_size = fs::file_size(path);
  fs::resize_file(path, full_size / 2);
  CHECK_THROWS_WITH_AS(model::load_checkpoint<double>(path),
                       doctest::Contains("truncated"), DataError);

  // Wrong magic.
  model::save_checkpoint(path, m, 7);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("NOTACKPT", 8);
  }
  CHECK_THROWS_WITH_AS(model::load_checkpoint<double>(path),
                       doctest::Contains("not a checkpoint"), DataError);

  // Unsupported version.
  model::save_checkpoint(path, m, 7);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const std::uint32_t v = 99;
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
  CHECK_THROWS_WITH_AS(model::load_checkpoint<double>(path),
                       doctest::Contains("version"), DataError);

  // Scalar width mismatch: written as double, read as float.
  model::save_checkpoint(path, m, 7);
  CHECK_THROWS_WITH_AS(model::load_checkpoint<float>(path),
                       doctest::Contains("64-bit"), DataError);

  // Parameter set mismatch against a different config.
  ModelConfig other = tiny_config();
  other.conv3.channels = 16;
  CHECK_THROWS_AS(model::Model<double>(other, m.params(), m.buffers()),
                  DataError);
  fs::remove(path);
}

TEST_CASE("model: float32 build runs forward") {
  const ModelConfig cfg = model::preset("mini-2x2");
  model::Model<float> m(cfg, 11);
  Graph<float> g;
  Tensor<float> feats = Tensor<float>::uniform({1, 64, 20}, -1.0f, 1.0f, key(12));
  auto out = m.forward(g, PaddedBatch<float>::make(std::move(feats), {20}),
                       nn::Mode::kInfer);
  CHECK(g.value(out.log_probs).all_finite());
}

}  // namespace
