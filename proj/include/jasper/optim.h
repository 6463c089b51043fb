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

// Optimizers and learning-rate schedules.
//
// NovoGrad keeps one scalar second moment per layer (a "layer" is one named
// parameter tensor, so weights and biases are separate layers) and a
// per-weight first moment:
//
//   v_t = beta2 * v_{t-1} + (1 - beta2) * ||g_t||^2      (scalar per layer)
//   m_t = beta1 * m_{t-1} + g_t / sqrt(v_t + eps) + d * w_{t-1}
//   w_t = w_{t-1} - alpha_t * m_t
//
// There is no bias correction and no (1 - beta1) factor on the gradient
// term.  At the first step v_1 = ||g_1||^2 (not the zero-seeded moving
// average), which makes the first update invariant to gradient scale.
//
// SGD with momentum uses a per-weight velocity:
//
//   vel_t = mu * vel_{t-1} + (g_t + wd * w_{t-1})
//   w_t   = w_{t-1} - lr * vel_t

#ifndef JASPER_OPTIM_H_
#define JASPER_OPTIM_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "jasper/error.h"
#include "jasper/tensor.h"

namespace jasper {
namespace optim {

// ---------------------------------------------------------------------------
// Learning-rate schedules.
// ---------------------------------------------------------------------------

enum class LrPolicy {
  kConst,  // base_lr for every step
  kPoly,   // base_lr * (1 - step/total_steps)^2
};

// Parses a policy name as it appears in run configs.  Throws ConfigError on
// anything other than "const" or "poly".
inline LrPolicy parse_lr_policy(const std::string& name) {
  if (name == "const") return LrPolicy::kConst;
  if (name == "poly") return LrPolicy::kPoly;
  throw ConfigError("unknown learning-rate policy '" + name +
                    "' (expected 'const' or 'poly')");
}

inline std::string lr_policy_name(LrPolicy policy) {
  return policy == LrPolicy::kConst ? "const" : "poly";
}

// A schedule maps a step index in [0, total_steps] to a learning rate.  An
// optional linear warmup scales the rate by step/warmup_steps over the first
// warmup_steps steps; the warmup factor multiplies the policy factor.
struct LrSchedule {
  LrPolicy policy = LrPolicy::kPoly;
  double base_lr = 0.01;
  std::int64_t total_steps = 1;
  std::int64_t warmup_steps = 0;

  double at(std::int64_t step) const {
    if (base_lr < 0.0) {
      throw ConfigError("learning rate must be non-negative, got " +
                        std::to_string(base_lr));
    }
    if (total_steps < 1) {
      throw ConfigError("total_steps must be at least 1, got " +
                        std::to_string(total_steps));
    }
    if (warmup_steps < 0) {
      throw ConfigError("warmup_steps must be non-negative, got " +
                        std::to_string(warmup_steps));
    }
    if (step < 0 || step > total_steps) {
      throw ConfigError("schedule step " + std::to_string(step) +
                        " outside [0, " + std::to_string(total_steps) + "]");
    }
    double factor = 1.0;
    if (warmup_steps > 0) {
      factor = std::min(1.0, static_cast<double>(step) /
                                 static_cast<double>(warmup_steps));
    }
    if (policy == LrPolicy::kPoly) {
      const double remain =
          1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
      factor *= remain * remain;
    }
    return base_lr * factor;
  }
};

// ---------------------------------------------------------------------------
// Parameter plumbing shared by the optimizers.
// ---------------------------------------------------------------------------

// One named parameter tensor together with its gradient.  The optimizer
// updates *value in place; grad is read-only.  Names define the layer
// partition, which must stay fixed across steps.
template <typename Scalar>
struct ParamRef {
  std::string name;
  Tensor<Scalar>* value = nullptr;
  const Tensor<Scalar>* grad = nullptr;
};

namespace detail {

// Validates one step's parameter list: non-null pointers, unique names,
// matching value/grad shapes, and finite values and gradients.
template <typename Scalar>
void check_params(const std::vector<ParamRef<Scalar>>& params) {
  std::set<std::string> seen;
  for (const ParamRef<Scalar>& p : params) {
    if (p.value == nullptr || p.grad == nullptr) {
      throw ShapeError("optimizer parameter '" + p.name +
                       "' is missing a value or gradient tensor");
    }
    if (!seen.insert(p.name).second) {
      throw ShapeError("duplicate optimizer parameter name '" + p.name + "'");
    }
    if (!p.value->same_shape(*p.grad)) {
      throw ShapeError("gradient shape does not match parameter '" + p.name +
                       "'");
    }
    if (!p.grad->all_finite()) {
      throw NumericError("non-finite gradient for parameter '" + p.name + "'");
    }
    if (!p.value->all_finite()) {
      throw NumericError("non-finite value for parameter '" + p.name + "'");
    }
  }
}

// After the first step the layer partition is frozen: every later step must
// present exactly the same names with the same shapes.
template <typename Scalar, typename StateMap>
void check_partition(const std::vector<ParamRef<Scalar>>& params,
                     const StateMap& state) {
  if (params.size() != state.size()) {
    throw ShapeError(
        "optimizer layer partition changed: step has " +
        std::to_string(params.size()) + " parameters, state has " +
        std::to_string(state.size()));
  }
  for (const ParamRef<Scalar>& p : params) {
    auto it = state.find(p.name);
    if (it == state.end()) {
      throw ShapeError("optimizer has no state for parameter '" + p.name +
                       "' (layer partition must stay fixed)");
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// NovoGrad.
// ---------------------------------------------------------------------------

struct NovoGradHyper {
  double beta1 = 0.95;
  double beta2 = 0.5;
  double epsilon = 1e-8;
  double weight_decay = 1e-3;
};

template <typename Scalar>
class NovoGrad {
 public:
  // Per-layer state: one scalar second moment and a first moment with the
  // layer's shape.  Exposed so checkpoints can serialize optimizer state.
  struct LayerState {
    Scalar v = Scalar(0);
    Tensor<Scalar> m;
  };

  explicit NovoGrad(NovoGradHyper hyper = NovoGradHyper()) : hyper_(hyper) {
    if (hyper_.beta1 < 0.0 || hyper_.beta1 >= 1.0 || hyper_.beta2 < 0.0 ||
        hyper_.beta2 >= 1.0) {
      throw ConfigError("NovoGrad betas must lie in [0, 1)");
    }
    if (hyper_.epsilon <= 0.0) {
      throw ConfigError("NovoGrad epsilon must be positive");
    }
    if (hyper_.weight_decay < 0.0) {
      throw ConfigError("NovoGrad weight decay must be non-negative");
    }
  }

  const NovoGradHyper& hyper() const { return hyper_; }
  std::int64_t step_count() const { return step_; }

  // Number of second-moment scalars held - one per layer, independent of the
  // number of weights.  Used by tests to assert the memory law.
  std::int64_t second_moment_count() const {
    return static_cast<std::int64_t>(layers_.size());
  }

  const std::map<std::string, LayerState>& layers() const { return layers_; }

  // Replaces the optimizer state wholesale (checkpoint restore).
  void restore(std::int64_t step, std::map<std::string, LayerState> layers) {
    if (step < 0) throw ConfigError("optimizer step count must be >= 0");
    step_ = step;
    layers_ = std::move(layers);
  }

  // Applies one update with learning rate `lr` to every parameter.
  void step(const std::vector<ParamRef<Scalar>>& params, double lr) {
    detail::check_params(params);
    if (step_ > 0) detail::check_partition(params, layers_);

    const Scalar beta1 = static_cast<Scalar>(hyper_.beta1);
    const Scalar beta2 = static_cast<Scalar>(hyper_.beta2);
    const Scalar eps = static_cast<Scalar>(hyper_.epsilon);
    const Scalar decay = static_cast<Scalar>(hyper_.weight_decay);
    const Scalar alpha = static_cast<Scalar>(lr);

    for (const ParamRef<Scalar>& p : params) {
      const Scalar norm_sq = p.grad->array().square().sum();
      auto it = layers_.find(p.name);
      if (it == layers_.end()) {
        // First step for this layer: seed the second moment with the full
        // gradient norm (not the zero-started moving average) so the first
        // update is gradient-scale invariant, and start the momentum at zero.
        LayerState state;
        state.v = norm_sq;
        state.m = Tensor<Scalar>::zeros(p.value->shape());
        it = layers_.emplace(p.name, std::move(state)).first;
      } else {
        it->second.v = beta2 * it->second.v + (Scalar(1) - beta2) * norm_sq;
      }
      LayerState& state = it->second;
      const Scalar inv_norm = Scalar(1) / std::sqrt(state.v + eps);
      state.m.array() = beta1 * state.m.array() +
                        p.grad->array() * inv_norm +
                        decay * p.value->array();
      p.value->array() -= alpha * state.m.array();
    }
    ++step_;
  }

 private:
  NovoGradHyper hyper_;
  std::int64_t step_ = 0;
  std::map<std::string, LayerState> layers_;
};

// ---------------------------------------------------------------------------
// SGD with momentum.
// ---------------------------------------------------------------------------

struct SgdMomentumHyper {
  double momentum = 0.9;
  double weight_decay = 0.0;
};

template <typename Scalar>
class SgdMomentum {
 public:
  struct LayerState {
    Tensor<Scalar> velocity;
  };

  explicit SgdMomentum(SgdMomentumHyper hyper = SgdMomentumHyper())
      : hyper_(hyper) {
    if (hyper_.momentum < 0.0 || hyper_.momentum >= 1.0) {
      throw ConfigError("SGD momentum must lie in [0, 1)");
    }
    if (hyper_.weight_decay < 0.0) {
      throw ConfigError("SGD weight decay must be non-negative");
    }
  }

  const SgdMomentumHyper& hyper() const { return hyper_; }
  std::int64_t step_count() const { return step_; }
  const std::map<std::string, LayerState>& layers() const { return layers_; }

  void restore(std::int64_t step, std::map<std::string, LayerState> layers) {
    if (step < 0) throw ConfigError("optimizer step count must be >= 0");
    step_ = step;
    layers_ = std::move(layers);
  }

  void step(const std::vector<ParamRef<Scalar>>& params, double lr) {
    detail::check_params(params);
    if (step_ > 0) detail::check_partition(params, layers_);

    const Scalar mu = static_cast<Scalar>(hyper_.momentum);
    const Scalar decay = static_cast<Scalar>(hyper_.weight_decay);
    const Scalar rate = static_cast<Scalar>(lr);

    for (const ParamRef<Scalar>& p : params) {
      auto it = layers_.find(p.name);
      if (it == layers_.end()) {
        LayerState state;
        state.velocity = Tensor<Scalar>::zeros(p.value->shape());
        it = layers_.emplace(p.name, std::move(state)).first;
      }
      Tensor<Scalar>& vel = it->second.velocity;
      vel.array() = mu * vel.array() +
                    (p.grad->array() + decay * p.value->array());
      p.value->array() -= rate * vel.array();
    }
    ++step_;
  }

 private:
  SgdMomentumHyper hyper_;
  std::int64_t step_ = 0;
  std::map<std::string, LayerState> layers_;
};

}  // namespace optim
}  // namespace jasper

#endif  // JASPER_OPTIM_H_
