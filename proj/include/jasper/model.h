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

// Jasper BxR model: parameter storage, deterministic initialization, and the
// forward graph builder.
//
// Every sub-block is conv -> norm -> activation -> dropout.  Residual inputs
// are projected by a 1x1 conv + norm and added to the last sub-block's
// pre-activation output; the concatenative topologies instead pool earlier
// outputs by channel concatenation and reduce with a 1x1 projection in front
// of every sub-block conv.  Time-padded positions are zeroed after every
// sub-block and norms receive the validity mask, so padded frames never leak
// into valid outputs.

#ifndef JASPER_MODEL_H_
#define JASPER_MODEL_H_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "jasper/error.h"
#include "jasper/graph.h"
#include "jasper/model_config.h"
#include "jasper/nn_ops.h"
#include "jasper/rng.h"
#include "jasper/tensor.h"

namespace jasper {
namespace model {

// Result of one forward pass.  `log_probs` is [B, |graphemes|+1, T'] with
// log-softmax applied per frame; values at time-padded positions are
// arbitrary and must be ignored via `out_lengths`.
template <typename Scalar>
struct ForwardResult {
  Var log_probs;
  std::vector<Index> out_lengths;
  Tensor<Scalar> out_mask;  // [B, T'] validity mask at output resolution
  // The graph variable of every parameter, for gradient lookup after
  // backward.  Keys equal the parameter names.
  std::map<std::string, Var> param_vars;
};

template <typename Scalar>
class Model {
 public:
  // Builds a freshly initialized model.  Conv weights (and weight-norm
  // directions) draw from a uniform fan-in distribution, bound
  // sqrt(1/(Cin*K)), on a counter stream keyed by (seed, parameter name), so
  // equal seeds give bitwise-equal parameters.  Norm gammas start at one;
  // betas, biases, and running means at zero; running variances at one.
  Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (const ParamInfo& info : param_shapes(cfg_)) {
      if (info.name.size() >= 2 &&
          info.name.compare(info.name.size() - 2, 2, ".g") == 0) {
        // Weight-norm magnitude: start at the direction's per-channel norms
        // so the effective weight equals the freshly drawn tensor.  The ".v"
        // entry for the same unit precedes ".g" in param_shapes order.
        const std::string v_name =
            info.name.substr(0, info.name.size() - 2) + ".v";
        params_.emplace(info.name,
                        nn::weight_norm_decompose(params_.at(v_name)).first);
        continue;
      }
      params_.emplace(info.name, init_param(info, seed));
    }
    for (const ParamInfo& info : buffer_shapes(cfg_)) {
      const bool is_var = info.name.size() >= 12 &&
                          info.name.compare(info.name.size() - 12, 12,
                                            ".running_var") == 0;
      buffers_.emplace(info.name, is_var ? Tensor<Scalar>::full(info.shape, 1)
                                         : Tensor<Scalar>::zeros(info.shape));
    }
  }

  // Re-assembles a model from checkpointed tensors.  The name sets and
  // shapes must exactly match what the config would build.
  Model(ModelConfig cfg, std::map<std::string, Tensor<Scalar>> params,
        std::map<std::string, Tensor<Scalar>> buffers)
      : cfg_(std::move(cfg)),
        params_(std::move(params)),
        buffers_(std::move(buffers)) {
    cfg_.validate();
    check_tensors(param_shapes(cfg_), params_, "parameter");
    check_tensors(buffer_shapes(cfg_), buffers_, "buffer");
  }

  const ModelConfig& config() const { return cfg_; }
  std::map<std::string, Tensor<Scalar>>& params() { return params_; }
  const std::map<std::string, Tensor<Scalar>>& params() const { return params_; }
  std::map<std::string, Tensor<Scalar>>& buffers() { return buffers_; }
  const std::map<std::string, Tensor<Scalar>>& buffers() const { return buffers_; }

  std::int64_t count_params() const { return model::count_params(cfg_); }

  // Builds the forward graph for one padded batch.  In train mode every
  // parameter enters the graph as a differentiable leaf, dropout draws masks
  // from (dropout_key, layer name), and batch-norm running statistics are
  // updated in place.  In infer mode parameters enter as constants, dropout
  // is identity, and no state mutates, so equal inputs give bitwise-equal
  // outputs.
  ForwardResult<Scalar> forward(Graph<Scalar>& g,
                                const PaddedBatch<Scalar>& batch,
                                nn::Mode mode,
                                std::uint64_t dropout_key = 0) {
    const Index channels = batch.features.dim(1);
    if (channels != cfg_.in_channels) {
      throw ShapeError("input has " + std::to_string(channels) +
                       " channels, model expects " +
                       std::to_string(cfg_.in_channels));
    }

    ForwardResult<Scalar> result;
    const Index t_in = batch.features.dim(2);

    // Only Conv1 strides, so output lengths are fixed here for the whole
    // network: T' = ceil(T / stride).
    const Index t_out = nn::conv_out_length(t_in, cfg_.conv1.stride);
    for (Index len : batch.lengths) {
      result.out_lengths.push_back(nn::conv_out_length(len, cfg_.conv1.stride));
    }
    result.out_mask = time_mask<Scalar>(result.out_lengths, t_out);
    const Tensor<Scalar>& mask = result.out_mask;

    // Leafs (train) or freezes (infer) a parameter into the graph.
    auto param = [&](const std::string& name) -> Var {
      auto it = params_.find(name);
      if (it == params_.end()) {
        throw ShapeError("model has no parameter '" + name + "'");
      }
      auto seen = result.param_vars.find(name);
      if (seen != result.param_vars.end()) return seen->second;
      const Var v = mode == nn::Mode::kTrain ? g.leaf(it->second, name)
                                             : g.constant(it->second, name);
      result.param_vars.emplace(name, v);
      return v;
    };

    // conv (+ weight norm, + bias where configured), named after the unit.
    // The kernel width lives in the stored weight shape; only stride and
    // dilation need passing.
    auto conv_unit = [&](const std::string& name, Var x, int stride,
                         int dilation, bool has_norm, bool force_bias) -> Var {
      nn::Conv1dSpec spec;
      spec.stride = stride;
      spec.dilation = dilation;
      Var w;
      if (cfg_.norm == NormKind::kWeight && has_norm) {
        w = nn::weight_norm(g, param(name + ".g"), param(name + ".v"),
                            name + ".wn");
      } else {
        w = param(name + ".w");
      }
      const Index cout = g.value(w).dim(0);
      Var b;
      if ((cfg_.norm == NormKind::kWeight && has_norm) || force_bias) {
        b = param(name + ".b");
      } else {
        b = g.constant(Tensor<Scalar>::zeros({cout}), name + ".nobias");
      }
      return nn::conv1d(g, x, w, b, spec, name);
    };

    // Data norm following a conv unit; identity under weight norm.
    auto norm_unit = [&](const std::string& conv_name, Var x) -> Var {
      if (cfg_.norm == NormKind::kWeight) return x;
      const std::string stem = norm_stem_of(conv_name);
      const Var gamma = param(stem + ".gamma");
      const Var beta = param(stem + ".beta");
      if (cfg_.norm == NormKind::kLayerMasked) {
        return nn::layer_norm_masked(g, x, gamma, beta,
                                     static_cast<Scalar>(cfg_.norm_epsilon),
                                     mask, stem);
      }
      return nn::batch_norm(g, x, gamma, beta,
                            buffers_.at(stem + ".running_mean"),
                            buffers_.at(stem + ".running_var"),
                            static_cast<Scalar>(cfg_.bn_momentum),
                            static_cast<Scalar>(cfg_.norm_epsilon), mode,
                            &mask, stem);
    };

    // Activation -> dropout -> zero the padded tail.
    auto finish_sub_block = [&](const std::string& prefix, Var y,
                                double drop_rate) -> Var {
      y = nn::activation(g, y, cfg_.act, prefix + ".act");
      const double rate = cfg_.effective_dropout(drop_rate);
      if (rate > 0.0) {
        y = nn::dropout(g, y, rate, mode,
                        derive_stream(dropout_key, prefix, {}),
                        prefix + ".dropout");
      }
      return nn::mask_time(g, y, mask, prefix + ".mask");
    };

    // --- Conv1 ------------------------------------------------------------
    // Zero the padded tail of the input so boundary frames of Conv1 see the
    // same zeros a lone-sequence run would get from conv padding.
    Tensor<Scalar> feats = batch.features;
    for (Index b = 0; b < static_cast<Index>(batch.lengths.size()); ++b) {
      for (Index c = 0; c < channels; ++c) {
        for (Index t = batch.lengths[static_cast<size_t>(b)]; t < t_in; ++t) {
          feats.at(b, c, t) = Scalar(0);
        }
      }
    }
    Var x = g.constant(std::move(feats), "input");
    Var h = conv_unit("conv1.conv", x, cfg_.conv1.stride,
                      cfg_.conv1.dilation, /*has_norm=*/true,
                      /*force_bias=*/false);
    h = norm_unit("conv1.conv", h);
    h = finish_sub_block("conv1", h, cfg_.conv1.dropout);

    // --- Blocks -----------------------------------------------------------
    std::vector<Var> stages{h};
    const int num_blocks = static_cast<int>(cfg_.blocks.size());
    for (int i = 1; i <= num_blocks; ++i) {
      const BlockSpec& blk = cfg_.blocks[static_cast<size_t>(i - 1)];
      const ResidualPlan plan = residual_sources(cfg_, i);
      const std::string bp = "block" + std::to_string(i);
      if (!plan.concatenate) {
        Var cur = stages.back();
        for (int r = 1; r <= blk.sub_blocks; ++r) {
          const std::string sp = bp + ".sub" + std::to_string(r);
          Var y = conv_unit(sp + ".conv", cur, 1, 1, true, false);
          y = norm_unit(sp + ".conv", y);
          if (r == blk.sub_blocks) {
            // Residual entries join the last sub-block before its
            // activation, each through a projection conv + norm.
            std::vector<Var> terms{y};
            for (int s : plan.sources) {
              const std::string rp = bp + ".res" + std::to_string(s);
              Var p = conv_unit(rp + ".conv",
                                stages[static_cast<size_t>(s)], 1, 1,
                                true, false);
              terms.push_back(norm_unit(rp + ".conv", p));
            }
            if (terms.size() > 1) y = nn::add_many(g, terms, bp + ".add");
          }
          cur = finish_sub_block(sp, y, blk.dropout);
        }
        stages.push_back(cur);
      } else {
        // Dense connectivity: pool = configured stage outputs plus all
        // earlier sub-block outputs of this block, projected down to the
        // nominal width before the main conv.
        std::vector<Var> pool;
        for (int s : plan.sources) {
          pool.push_back(stages[static_cast<size_t>(s)]);
        }
        Var last{};
        for (int r = 1; r <= blk.sub_blocks; ++r) {
          const std::string sp = bp + ".sub" + std::to_string(r);
          Var pin = pool.size() == 1
                        ? pool.front()
                        : nn::concat_channels(g, pool, sp + ".pool");
          Var y = conv_unit(sp + ".proj", pin, 1, 1, true, false);
          y = norm_unit(sp + ".proj", y);
          y = conv_unit(sp + ".conv", y, 1, 1, true, false);
          y = norm_unit(sp + ".conv", y);
          y = finish_sub_block(sp, y, blk.dropout);
          pool.push_back(y);
          last = y;
        }
        stages.push_back(last);
      }
    }

    // --- Conv2..Conv4 -----------------------------------------------------
    h = conv_unit("conv2.conv", stages.back(), 1, cfg_.conv2.dilation, true,
                  false);
    h = norm_unit("conv2.conv", h);
    h = finish_sub_block("conv2", h, cfg_.conv2.dropout);

    h = conv_unit("conv3.conv", h, 1, 1, true, false);
    h = norm_unit("conv3.conv", h);
    h = finish_sub_block("conv3", h, cfg_.conv3.dropout);

    h = conv_unit("conv4.conv", h, 1, 1, /*has_norm=*/false,
                  /*force_bias=*/true);
    result.log_probs = nn::log_softmax(g, h, "log_softmax");
    return result;
  }

 private:
  static std::string norm_stem_of(const std::string& conv_name) {
    if (conv_name.size() >= 5 &&
        conv_name.compare(conv_name.size() - 5, 5, ".proj") == 0) {
      return conv_name.substr(0, conv_name.size() - 5) + ".projnorm";
    }
    return conv_name.substr(0, conv_name.rfind(".conv")) + ".norm";
  }

  static Tensor<Scalar> init_param(const ParamInfo& info, std::uint64_t seed) {
    auto ends_with = [&](const char* suffix) {
      const size_t n = std::string(suffix).size();
      return info.name.size() >= n &&
             info.name.compare(info.name.size() - n, n, suffix) == 0;
    };
    if (ends_with(".w") || ends_with(".v")) {
      // Uniform fan-in initialization; fan-in = Cin * K for {Cout, Cin, K}.
      const double fan_in =
          static_cast<double>(info.shape[1]) * static_cast<double>(info.shape[2]);
      const double bound = std::sqrt(1.0 / fan_in);
      Tensor<Scalar> w = Tensor<Scalar>::uniform(
          info.shape, static_cast<Scalar>(-bound), static_cast<Scalar>(bound),
          derive_stream(seed, info.name, {}));
      return w;
    }
    if (ends_with(".gamma")) return Tensor<Scalar>::full(info.shape, 1);
    return Tensor<Scalar>::zeros(info.shape);  // beta, bias
  }

  static void check_tensors(const std::vector<ParamInfo>& expected,
                            const std::map<std::string, Tensor<Scalar>>& got,
                            const std::string& what) {
    if (expected.size() != got.size()) {
      throw DataError("checkpoint " + what + " count " +
                      std::to_string(got.size()) + " does not match model (" +
                      std::to_string(expected.size()) + ")");
    }
    for (const ParamInfo& info : expected) {
      auto it = got.find(info.name);
      if (it == got.end()) {
        throw DataError("checkpoint is missing " + what + " '" + info.name +
                        "'");
      }
      if (it->second.shape() != info.shape) {
        throw DataError("checkpoint " + what + " '" + info.name +
                        "' has the wrong shape");
      }
    }
  }

  ModelConfig cfg_;
  std::map<std::string, Tensor<Scalar>> params_;
  std::map<std::string, Tensor<Scalar>> buffers_;
};

}  // namespace model
}  // namespace jasper

#endif  // JASPER_MODEL_H_
