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

// Architecture description for Jasper BxR acoustic models, plus structure
// introspection that works on the config alone (no parameters allocated).
//
// A model is one pre-processing conv block (Conv1, strided), B blocks of R
// sub-blocks each (sub-block = 1D conv -> norm -> activation -> dropout),
// and three post-processing conv blocks (Conv2 dilated, Conv3, and the Conv4
// 1x1 output projection onto the grapheme set + CTC blank).
//
// Residual topologies:
//   residual        each block's input is added into the last sub-block's
//                   pre-activation output through a 1x1 conv + norm.
//   dense_residual  like residual, but every earlier stage output (Conv1 and
//                   all earlier blocks) is added, each through its own
//                   projection.
//   densenet        within a block, each sub-block consumes the channel
//                   concatenation of the block input and all earlier
//                   sub-block outputs, reduced by a 1x1 projection.
//   densernet       densenet connectivity within blocks, and the block input
//                   pool is the concatenation of all earlier stage outputs.

#ifndef JASPER_MODEL_CONFIG_H_
#define JASPER_MODEL_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "jasper/nn_ops.h"
#include "jasper/tensor.h"

namespace jasper {
namespace model {

// One conv block row: the pre/post blocks have sub_blocks=1; only the
// pre-block may stride and only Conv2 dilates.
struct BlockSpec {
  int kernel = 11;
  int channels = 256;
  double dropout = 0.0;
  int sub_blocks = 1;
  int stride = 1;
  int dilation = 1;
};

enum class Topology { kResidual, kDenseResidual, kDenseNet, kDenseRNet };

enum class NormKind { kBatch, kLayerMasked, kWeight };

Topology parse_topology(const std::string& name);
std::string topology_name(Topology t);
NormKind parse_norm(const std::string& name);
std::string norm_name(NormKind n);
nn::ActKind parse_act(const std::string& name);
std::string act_name(nn::ActKind k);

struct ModelConfig {
  int in_channels = 64;
  // Output symbols; the network emits |graphemes|+1 classes (CTC blank last).
  std::string graphemes = "abcdefghijklmnopqrstuvwxyz '";
  Topology topology = Topology::kDenseResidual;
  NormKind norm = NormKind::kBatch;
  nn::ActivationSpec act;

  BlockSpec conv1;                // pre-block (strided)
  std::vector<BlockSpec> blocks;  // B entries
  BlockSpec conv2;                // post-block (dilated)
  BlockSpec conv3;                // post-block
  // Conv4 is derived: 1x1 onto |graphemes|+1 channels, bias, no norm, no
  // activation, no dropout.  Published configurations list a dropout value
  // for it anyway; it is recorded here but never applied, since Conv4 feeds
  // the log-softmax directly.
  double conv4_dropout = 0.0;

  // Effective drop rate is min(rate, dropout_cap).  Some published configs
  // list 0.8 for Conv1, which is ambiguous between a drop rate and a keep
  // probability; the cap (default 0.5) keeps such values trainable while the
  // config text preserves the original number.  Raise the cap to opt out.
  double dropout_cap = 0.5;

  double bn_momentum = 0.1;
  double norm_epsilon = 1e-5;

  // Number of output classes: graphemes plus CTC blank.
  Index output_channels() const {
    return static_cast<Index>(graphemes.size()) + 1;
  }
  double effective_dropout(double rate) const {
    return rate < dropout_cap ? rate : dropout_cap;
  }

  // Throws ConfigError describing the first violated invariant.
  void validate() const;
};

// How residual information reaches block `block_index` (1-based).  `sources`
// lists stage indices (0 = Conv1 output, i = block i output) whose outputs
// feed this block.
struct ResidualPlan {
  std::vector<int> sources;
  bool concatenate = false;       // combine by channel concat instead of add
  bool intra_block_dense = false; // sub-block outputs pooled within the block
};

ResidualPlan residual_sources(const ModelConfig& cfg, int block_index);

// Named parameter/buffer enumeration in forward order.  Model construction,
// checkpoint validation, and parameter counting all walk this list, so the
// graph wiring and the introspection cannot drift apart.
struct ParamInfo {
  std::string name;
  Shape shape;
};

std::vector<ParamInfo> param_shapes(const ModelConfig& cfg);
std::vector<ParamInfo> buffer_shapes(const ModelConfig& cfg);

// Exact number of trainable scalars (running statistics excluded).
std::int64_t count_params(const ModelConfig& cfg);

// Convolutional depth as conventionally counted: B*R sub-block convs plus
// Conv1-Conv4.  Projection convs are not counted.
int conv_layer_count(const ModelConfig& cfg);

// Canonical single-string serialization used inside checkpoints.  Exact:
// parse_config(config_text(cfg)) reproduces cfg bit for bit.
std::string config_text(const ModelConfig& cfg);
ModelConfig parse_config(const std::string& text);

// Built-in configurations.  "jasper-dr-10x5" and the four "jasper-10x3-*"
// presets reproduce the published sizing (the concatenative variants carry
// channel multipliers so all four topologies land within a few percent of
// one another); "mini-2x2" and "slim-10x3-*" are desk-scale presets for
// tests and demos.
ModelConfig preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace model
}  // namespace jasper

#endif  // JASPER_MODEL_CONFIG_H_
