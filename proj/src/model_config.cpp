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

#include "jasper/model_config.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <utility>

#include "jasper/error.h"

namespace jasper {
namespace model {
namespace {

// Rounds a scaled channel count to the nearest multiple of 8 (minimum 8),
// half away from zero.  Used when sizing the concatenative topologies.
int round_to_8(double channels) {
  const int rounded = static_cast<int>(std::floor(channels / 8.0 + 0.5)) * 8;
  return rounded < 8 ? 8 : rounded;
}

// Exact decimal round-trip for doubles in the canonical config text.
std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double_field(const std::string& s, int line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw ConfigError("model config line " + std::to_string(line_no) +
                      ": bad number '" + s + "'");
  }
  return v;
}

int parse_int_field(const std::string& s, int line_no) {
  const double v = parse_double_field(s, line_no);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw ConfigError("model config line " + std::to_string(line_no) +
                      ": expected integer, got '" + s + "'");
  }
  return i;
}

std::string block_text(const BlockSpec& b) {
  std::ostringstream os;
  os << "kernel:" << b.kernel << ",channels:" << b.channels
     << ",dropout:" << format_double(b.dropout)
     << ",sub_blocks:" << b.sub_blocks << ",stride:" << b.stride
     << ",dilation:" << b.dilation;
  return os.str();
}

BlockSpec parse_block_text(const std::string& text, int line_no) {
  BlockSpec b;
  std::istringstream is(text);
  std::string field;
  while (std::getline(is, field, ',')) {
    const auto colon = field.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("model config line " + std::to_string(line_no) +
                        ": bad block field '" + field + "'");
    }
    const std::string key = field.substr(0, colon);
    const std::string value = field.substr(colon + 1);
    if (key == "kernel") b.kernel = parse_int_field(value, line_no);
    else if (key == "channels") b.channels = parse_int_field(value, line_no);
    else if (key == "dropout") b.dropout = parse_double_field(value, line_no);
    else if (key == "sub_blocks") b.sub_blocks = parse_int_field(value, line_no);
    else if (key == "stride") b.stride = parse_int_field(value, line_no);
    else if (key == "dilation") b.dilation = parse_int_field(value, line_no);
    else {
      throw ConfigError("model config line " + std::to_string(line_no) +
                        ": unknown block field '" + key + "'");
    }
  }
  return b;
}

void validate_block(const BlockSpec& b, const std::string& where,
                    bool allow_stride, bool allow_dilation,
                    bool allow_sub_blocks) {
  if (b.kernel < 1 || b.kernel % 2 == 0) {
    throw ConfigError(where + ": kernel must be odd and positive, got " +
                      std::to_string(b.kernel));
  }
  if (b.channels < 1) {
    throw ConfigError(where + ": channels must be positive");
  }
  if (b.dropout < 0.0 || b.dropout >= 1.0) {
    throw ConfigError(where + ": dropout must lie in [0, 1)");
  }
  if (b.sub_blocks < 1 || (!allow_sub_blocks && b.sub_blocks != 1)) {
    throw ConfigError(where + ": invalid sub_blocks count " +
                      std::to_string(b.sub_blocks));
  }
  if (b.stride < 1 || (!allow_stride && b.stride != 1)) {
    throw ConfigError(where + ": stride not allowed here");
  }
  if (b.dilation < 1 || (!allow_dilation && b.dilation != 1)) {
    throw ConfigError(where + ": dilation not allowed here");
  }
  if (b.stride > 1 && b.dilation > 1) {
    throw ConfigError(where + ": stride and dilation cannot both exceed 1");
  }
}

// Walks the full architecture in forward order and reports every planned
// convolution unit through the callback.  This is the single source of truth
// for layer names and shapes: parameter enumeration and the model builder
// both follow it.
//
// emit(name, in_channels, out_channels, kernel, has_norm, has_bias)
// Turns a conv unit name into the name stem of its data norm:
// "block1.sub2.conv" -> "block1.sub2.norm", "block1.sub2.proj" ->
// "block1.sub2.projnorm".
std::string norm_stem(const std::string& conv_name) {
  if (conv_name.size() >= 5 &&
      conv_name.compare(conv_name.size() - 5, 5, ".proj") == 0) {
    return conv_name.substr(0, conv_name.size() - 5) + ".projnorm";
  }
  return conv_name.substr(0, conv_name.rfind(".conv")) + ".norm";
}

void walk_convs(
    const ModelConfig& cfg,
    const std::function<void(const std::string&, int, int, int, bool, bool)>&
        emit) {
  // A gated activation consumes 2C channels and emits C, so convs feeding an
  // activation produce twice the nominal width.
  const int act_mult = cfg.act.gated() ? 2 : 1;
  const bool conv_bias = cfg.norm == NormKind::kWeight;

  emit("conv1.conv", cfg.in_channels, act_mult * cfg.conv1.channels,
       cfg.conv1.kernel, true, conv_bias);

  // Stage output widths: stage 0 is Conv1, stage i is block i.
  std::vector<int> stage_width{cfg.conv1.channels};
  const int num_blocks = static_cast<int>(cfg.blocks.size());
  for (int i = 1; i <= num_blocks; ++i) {
    const BlockSpec& blk = cfg.blocks[static_cast<size_t>(i - 1)];
    const ResidualPlan plan = residual_sources(cfg, i);
    const std::string bp = "block" + std::to_string(i);
    if (!plan.concatenate) {
      int cin = stage_width.back();
      for (int r = 1; r <= blk.sub_blocks; ++r) {
        emit(bp + ".sub" + std::to_string(r) + ".conv", cin,
             act_mult * blk.channels, blk.kernel, true, conv_bias);
        cin = blk.channels;
      }
      // Projections feed the last sub-block's pre-activation sum, so they
      // match the conv output width (2C under gated activations).
      for (int s : plan.sources) {
        emit(bp + ".res" + std::to_string(s) + ".conv",
             stage_width[static_cast<size_t>(s)], act_mult * blk.channels, 1,
             true, conv_bias);
      }
    } else {
      // Dense connectivity: each sub-block projects its concatenated input
      // pool down to the nominal width, then applies the main conv.
      int base_width = 0;
      for (int s : plan.sources) base_width += stage_width[static_cast<size_t>(s)];
      for (int r = 1; r <= blk.sub_blocks; ++r) {
        const int pool = base_width + (r - 1) * blk.channels;
        const std::string sp = bp + ".sub" + std::to_string(r);
        emit(sp + ".proj", pool, blk.channels, 1, true, conv_bias);
        emit(sp + ".conv", blk.channels, act_mult * blk.channels, blk.kernel,
             true, conv_bias);
      }
    }
    stage_width.push_back(blk.channels);
  }

  emit("conv2.conv", stage_width.back(), act_mult * cfg.conv2.channels,
       cfg.conv2.kernel, true, conv_bias);
  emit("conv3.conv", cfg.conv2.channels, act_mult * cfg.conv3.channels,
       cfg.conv3.kernel, true, conv_bias);
  emit("conv4.conv", cfg.conv3.channels,
       static_cast<int>(cfg.output_channels()), 1, false, true);
}

}  // namespace

Topology parse_topology(const std::string& name) {
  if (name == "residual") return Topology::kResidual;
  if (name == "dense_residual") return Topology::kDenseResidual;
  if (name == "densenet") return Topology::kDenseNet;
  if (name == "densernet") return Topology::kDenseRNet;
  throw ConfigError("unknown topology '" + name +
                    "' (expected residual, dense_residual, densenet, or "
                    "densernet)");
}

std::string topology_name(Topology t) {
  switch (t) {
    case Topology::kResidual: return "residual";
    case Topology::kDenseResidual: return "dense_residual";
    case Topology::kDenseNet: return "densenet";
    case Topology::kDenseRNet: return "densernet";
  }
  throw ConfigError("invalid topology value");
}

NormKind parse_norm(const std::string& name) {
  if (name == "batch") return NormKind::kBatch;
  if (name == "layer_masked") return NormKind::kLayerMasked;
  if (name == "weight") return NormKind::kWeight;
  throw ConfigError("unknown norm '" + name +
                    "' (expected batch, layer_masked, or weight)");
}

std::string norm_name(NormKind n) {
  switch (n) {
    case NormKind::kBatch: return "batch";
    case NormKind::kLayerMasked: return "layer_masked";
    case NormKind::kWeight: return "weight";
  }
  throw ConfigError("invalid norm value");
}

nn::ActKind parse_act(const std::string& name) {
  if (name == "relu") return nn::ActKind::kRelu;
  if (name == "clipped_relu") return nn::ActKind::kClippedRelu;
  if (name == "leaky_relu") return nn::ActKind::kLeakyRelu;
  if (name == "glu") return nn::ActKind::kGlu;
  if (name == "gau") return nn::ActKind::kGau;
  throw ConfigError("unknown activation '" + name +
                    "' (expected relu, clipped_relu, leaky_relu, glu, or "
                    "gau)");
}

std::string act_name(nn::ActKind k) {
  switch (k) {
    case nn::ActKind::kRelu: return "relu";
    case nn::ActKind::kClippedRelu: return "clipped_relu";
    case nn::ActKind::kLeakyRelu: return "leaky_relu";
    case nn::ActKind::kGlu: return "glu";
    case nn::ActKind::kGau: return "gau";
  }
  throw ConfigError("invalid activation value");
}

void ModelConfig::validate() const {
  if (in_channels < 1) throw ConfigError("in_channels must be positive");
  if (graphemes.empty()) throw ConfigError("grapheme set must not be empty");
  std::set<char> unique(graphemes.begin(), graphemes.end());
  if (unique.size() != graphemes.size()) {
    throw ConfigError("grapheme set contains duplicates");
  }
  if (blocks.empty()) throw ConfigError("model needs at least one block");
  if (dropout_cap < 0.0 || dropout_cap >= 1.0) {
    throw ConfigError("dropout_cap must lie in [0, 1)");
  }
  if (conv4_dropout < 0.0 || conv4_dropout >= 1.0) {
    throw ConfigError("conv4_dropout must lie in [0, 1)");
  }
  if (bn_momentum <= 0.0 || bn_momentum > 1.0) {
    throw ConfigError("bn_momentum must lie in (0, 1]");
  }
  if (norm_epsilon <= 0.0) throw ConfigError("norm_epsilon must be positive");
  if (act.kind == nn::ActKind::kClippedRelu && act.clip <= 0.0) {
    throw ConfigError("clipped_relu threshold must be positive");
  }
  if (act.kind == nn::ActKind::kLeakyRelu &&
      (act.slope <= 0.0 || act.slope >= 1.0)) {
    throw ConfigError("leaky_relu slope must lie in (0, 1)");
  }
  validate_block(conv1, "conv1", /*stride=*/true, /*dilation=*/false,
                 /*sub_blocks=*/false);
  for (size_t i = 0; i < blocks.size(); ++i) {
    validate_block(blocks[i], "block" + std::to_string(i + 1),
                   /*stride=*/false, /*dilation=*/false, /*sub_blocks=*/true);
  }
  validate_block(conv2, "conv2", /*stride=*/false, /*dilation=*/true,
                 /*sub_blocks=*/false);
  validate_block(conv3, "conv3", /*stride=*/false, /*dilation=*/false,
                 /*sub_blocks=*/false);
}

ResidualPlan residual_sources(const ModelConfig& cfg, int block_index) {
  const int num_blocks = static_cast<int>(cfg.blocks.size());
  if (block_index < 1 || block_index > num_blocks) {
    throw ShapeError("block index " + std::to_string(block_index) +
                     " outside [1, " + std::to_string(num_blocks) + "]");
  }
  ResidualPlan plan;
  switch (cfg.topology) {
    case Topology::kResidual:
      plan.sources = {block_index - 1};
      break;
    case Topology::kDenseResidual:
      for (int s = 0; s < block_index; ++s) plan.sources.push_back(s);
      break;
    case Topology::kDenseNet:
      plan.sources = {block_index - 1};
      plan.concatenate = true;
      plan.intra_block_dense = true;
      break;
    case Topology::kDenseRNet:
      for (int s = 0; s < block_index; ++s) plan.sources.push_back(s);
      plan.concatenate = true;
      plan.intra_block_dense = true;
      break;
  }
  return plan;
}

std::vector<ParamInfo> param_shapes(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<ParamInfo> out;
  walk_convs(cfg, [&](const std::string& name, int cin, int cout, int kernel,
                      bool has_norm, bool has_bias) {
    const Shape w_shape{static_cast<Index>(cout), static_cast<Index>(cin),
                        static_cast<Index>(kernel)};
    if (cfg.norm == NormKind::kWeight && has_norm) {
      // Weight-normalized conv: direction tensor + per-channel magnitude.
      out.push_back({name + ".v", w_shape});
      out.push_back({name + ".g", {static_cast<Index>(cout)}});
    } else {
      out.push_back({name + ".w", w_shape});
    }
    if (has_bias) {
      out.push_back({name + ".b", {static_cast<Index>(cout)}});
    }
    if (has_norm && cfg.norm != NormKind::kWeight) {
      // Data norm (batch or layer): per-channel affine parameters.  The norm
      // shares the conv's name prefix, e.g. "block1.sub2.norm.gamma".
      const std::string stem = norm_stem(name);
      out.push_back({stem + ".gamma", {static_cast<Index>(cout)}});
      out.push_back({stem + ".beta", {static_cast<Index>(cout)}});
    }
  });
  return out;
}

std::vector<ParamInfo> buffer_shapes(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<ParamInfo> out;
  if (cfg.norm != NormKind::kBatch) return out;
  walk_convs(cfg, [&](const std::string& name, int /*cin*/, int cout,
                      int /*kernel*/, bool has_norm, bool /*has_bias*/) {
    if (!has_norm) return;
    const std::string stem = norm_stem(name);
    out.push_back({stem + ".running_mean", {static_cast<Index>(cout)}});
    out.push_back({stem + ".running_var", {static_cast<Index>(cout)}});
  });
  return out;
}

std::int64_t count_params(const ModelConfig& cfg) {
  std::int64_t total = 0;
  for (const ParamInfo& p : param_shapes(cfg)) {
    std::int64_t n = 1;
    for (Index d : p.shape) n *= d;
    total += n;
  }
  return total;
}

int conv_layer_count(const ModelConfig& cfg) {
  int sub = 0;
  for (const BlockSpec& b : cfg.blocks) sub += b.sub_blocks;
  return sub + 4;
}

std::string config_text(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "jasper-config-v1\n";
  os << "topology=" << topology_name(cfg.topology) << "\n";
  os << "norm=" << norm_name(cfg.norm) << "\n";
  os << "act=" << act_name(cfg.act.kind) << "\n";
  os << "act_clip=" << format_double(cfg.act.clip) << "\n";
  os << "act_slope=" << format_double(cfg.act.slope) << "\n";
  os << "in_channels=" << cfg.in_channels << "\n";
  os << "graphemes=" << cfg.graphemes << "\n";
  os << "dropout_cap=" << format_double(cfg.dropout_cap) << "\n";
  os << "conv4_dropout=" << format_double(cfg.conv4_dropout) << "\n";
  os << "bn_momentum=" << format_double(cfg.bn_momentum) << "\n";
  os << "norm_epsilon=" << format_double(cfg.norm_epsilon) << "\n";
  os << "conv1=" << block_text(cfg.conv1) << "\n";
  for (const BlockSpec& b : cfg.blocks) os << "block=" << block_text(b) << "\n";
  os << "conv2=" << block_text(cfg.conv2) << "\n";
  os << "conv3=" << block_text(cfg.conv3) << "\n";
  return os.str();
}

ModelConfig parse_config(const std::string& text) {
  ModelConfig cfg;
  cfg.blocks.clear();
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  bool saw_conv1 = false, saw_conv2 = false, saw_conv3 = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "jasper-config-v1") {
        throw ConfigError("model config line 1: expected header "
                          "'jasper-config-v1', got '" + line + "'");
      }
      saw_header = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("model config line " + std::to_string(line_no) +
                        ": expected key=value, got '" + line + "'");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "topology") cfg.topology = parse_topology(value);
    else if (key == "norm") cfg.norm = parse_norm(value);
    else if (key == "act") cfg.act.kind = parse_act(value);
    else if (key == "act_clip") cfg.act.clip = parse_double_field(value, line_no);
    else if (key == "act_slope") cfg.act.slope = parse_double_field(value, line_no);
    else if (key == "in_channels") cfg.in_channels = parse_int_field(value, line_no);
    else if (key == "graphemes") cfg.graphemes = value;
    else if (key == "dropout_cap") cfg.dropout_cap = parse_double_field(value, line_no);
    else if (key == "conv4_dropout") cfg.conv4_dropout = parse_double_field(value, line_no);
    else if (key == "bn_momentum") cfg.bn_momentum = parse_double_field(value, line_no);
    else if (key == "norm_epsilon") cfg.norm_epsilon = parse_double_field(value, line_no);
    else if (key == "conv1") { cfg.conv1 = parse_block_text(value, line_no); saw_conv1 = true; }
    else if (key == "block") cfg.blocks.push_back(parse_block_text(value, line_no));
    else if (key == "conv2") { cfg.conv2 = parse_block_text(value, line_no); saw_conv2 = true; }
    else if (key == "conv3") { cfg.conv3 = parse_block_text(value, line_no); saw_conv3 = true; }
    else {
      throw ConfigError("model config line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    }
  }
  if (!saw_header) throw ConfigError("model config is empty");
  if (!saw_conv1 || !saw_conv2 || !saw_conv3 || cfg.blocks.empty()) {
    throw ConfigError("model config is missing conv1/blocks/conv2/conv3");
  }
  cfg.validate();
  return cfg;
}

namespace {

// Published Table-1 style sizing: kernels, channels, and dropout per block
// group, each group repeated twice.
ModelConfig table_preset(int sub_blocks, Topology topology,
                         double channel_mult) {
  ModelConfig cfg;
  cfg.topology = topology;
  const int kernels[5] = {11, 13, 17, 21, 25};
  const int channels[5] = {256, 384, 512, 640, 768};
  const double drops[5] = {0.2, 0.2, 0.2, 0.3, 0.3};
  auto scaled = [&](int c) { return round_to_8(c * channel_mult); };

  cfg.conv1 = {11, scaled(256), 0.8, 1, 2, 1};
  cfg.blocks.clear();
  for (int gi = 0; gi < 5; ++gi) {
    for (int rep = 0; rep < 2; ++rep) {
      cfg.blocks.push_back(
          {kernels[gi], scaled(channels[gi]), drops[gi], sub_blocks, 1, 1});
    }
  }
  cfg.conv2 = {29, scaled(896), 0.4, 1, 1, 2};
  cfg.conv3 = {1, scaled(1024), 0.4, 1, 1, 1};
  cfg.conv4_dropout = 0.3;
  return cfg;
}

// Desk-scale model used by the functional tests and the synthetic-corpus
// demo: two blocks of two sub-blocks, modest channel counts, no dropout so
// small corpora can be memorized quickly.
ModelConfig mini_preset() {
  ModelConfig cfg;
  cfg.topology = Topology::kResidual;
  cfg.conv1 = {7, 64, 0.0, 1, 2, 1};
  cfg.blocks = {{7, 64, 0.0, 2, 1, 1}, {9, 96, 0.0, 2, 1, 1}};
  cfg.conv2 = {11, 128, 0.0, 1, 1, 2};
  cfg.conv3 = {1, 160, 0.0, 1, 1, 1};
  cfg.conv4_dropout = 0.0;
  return cfg;
}

// Table-1 shape at one eighth the channel width: deep enough to exercise the
// full topology machinery, small enough for gradient tests.
ModelConfig slim_preset(Topology topology) {
  ModelConfig cfg;
  cfg.topology = topology;
  const int kernels[5] = {11, 13, 17, 21, 25};
  const int channels[5] = {32, 48, 64, 80, 96};
  cfg.conv1 = {11, 32, 0.0, 1, 2, 1};
  cfg.blocks.clear();
  for (int gi = 0; gi < 5; ++gi) {
    for (int rep = 0; rep < 2; ++rep) {
      cfg.blocks.push_back({kernels[gi], channels[gi], 0.0, 3, 1, 1});
    }
  }
  cfg.conv2 = {29, 112, 0.0, 1, 1, 2};
  cfg.conv3 = {1, 128, 0.0, 1, 1, 1};
  cfg.conv4_dropout = 0.0;
  return cfg;
}

}  // namespace

ModelConfig preset(const std::string& name) {
  // The concatenative 10x3 variants carry channel multipliers chosen so the
  // four topologies' parameter counts stay within a few percent of each
  // other, mirroring the published same-size comparison.
  if (name == "jasper-dr-10x5")
    return table_preset(5, Topology::kDenseResidual, 1.0);
  if (name == "jasper-10x3-residual")
    return table_preset(3, Topology::kResidual, 1.0);
  if (name == "jasper-10x3-dense-residual")
    return table_preset(3, Topology::kDenseResidual, 1.0);
  if (name == "jasper-10x3-densenet")
    return table_preset(3, Topology::kDenseNet, 0.964);
  if (name == "jasper-10x3-densernet")
    return table_preset(3, Topology::kDenseRNet, 0.916);
  if (name == "mini-2x2") return mini_preset();
  if (name == "slim-10x3-residual") return slim_preset(Topology::kResidual);
  if (name == "slim-10x3-dense-residual")
    return slim_preset(Topology::kDenseResidual);
  std::string known;
  for (const std::string& n : preset_names()) {
    if (!known.empty()) known += ", ";
    known += n;
  }
  throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

std::vector<std::string> preset_names() {
  return {"jasper-dr-10x5",          "jasper-10x3-residual",
          "jasper-10x3-dense-residual", "jasper-10x3-densenet",
          "jasper-10x3-densernet",   "mini-2x2",
          "slim-10x3-residual",      "slim-10x3-dense-residual"};
}

}  // namespace model
}  // namespace jasper
