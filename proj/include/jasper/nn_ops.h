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

#ifndef JASPER_NN_OPS_H_
#define JASPER_NN_OPS_H_

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "jasper/graph.h"
#include "jasper/rng.h"
#include "jasper/tensor.h"

namespace jasper::nn {

enum class Mode { kTrain, kInfer };

template <typename Scalar>
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// -------------------------------------------------------------------------
// conv1d: symmetric same-padding, T' = ceil(T / stride).

struct Conv1dSpec {
  int stride = 1;
  int dilation = 1;
};

inline Index conv_out_length(Index t, int stride) {
  return (t + stride - 1) / stride;
}

inline Index conv_padding(Index kernel, int dilation) {
  return dilation * (kernel - 1) / 2;
}

namespace detail {

// Gathers the dilated receptive fields into a (Cin*K) x T' matrix.
template <typename Scalar>
void im2col(const Tensor<Scalar>& x, Index b, Index kernel, const Conv1dSpec& spec,
            MatrixRM<Scalar>& cols) {
  const Index c_in = x.dim(1), t_in = x.dim(2);
  const Index t_out = conv_out_length(t_in, spec.stride);
  const Index pad = conv_padding(kernel, spec.dilation);
  cols.resize(c_in * kernel, t_out);
  for (Index ci = 0; ci < c_in; ++ci) {
    const Scalar* row = x.data() + (b * c_in + ci) * t_in;
    for (Index k = 0; k < kernel; ++k) {
      Scalar* dst = cols.data() + (ci * kernel + k) * t_out;
      const Index off = k * spec.dilation - pad;
      for (Index t = 0; t < t_out; ++t) {
        const Index pos = t * spec.stride + off;
        dst[t] = (pos >= 0 && pos < t_in) ? row[pos] : Scalar(0);
      }
    }
  }
}

}  // namespace detail

template <typename Scalar>
Var conv1d(Graph<Scalar>& g, Var x, Var w, Var bias, const Conv1dSpec& spec,
           const std::string& label = "conv1d") {
  const Tensor<Scalar>& xv = g.value(x);
  const Tensor<Scalar>& wv = g.value(w);
  const Tensor<Scalar>& bv = g.value(bias);
  if (xv.rank() != 3 || wv.rank() != 3) {
    throw ShapeError(label + ": expected x [B,Cin,T] and w [Cout,Cin,K]");
  }
  const Index b_n = xv.dim(0), c_in = xv.dim(1), t_in = xv.dim(2);
  const Index c_out = wv.dim(0), kernel = wv.dim(2);
  if (wv.dim(1) != c_in) {
    throw ShapeError(label + ": weight expects " + std::to_string(wv.dim(1)) +
                     " input channels, input has " + std::to_string(c_in));
  }
  if (bv.numel() != c_out) throw ShapeError(label + ": bias size must equal Cout");
  if (kernel % 2 == 0) throw ShapeError(label + ": same-padding requires an odd kernel");
  if (spec.stride < 1 || spec.dilation < 1) throw ShapeError(label + ": stride/dilation must be >= 1");
  if (spec.stride > 1 && spec.dilation > 1) {
    throw ShapeError(label + ": stride > 1 and dilation > 1 are mutually exclusive");
  }

  const Index t_out = conv_out_length(t_in, spec.stride);
  Tensor<Scalar> out = Tensor<Scalar>::zeros({b_n, c_out, t_out});
  Eigen::Map<const MatrixRM<Scalar>> wm(wv.data(), c_out, c_in * kernel);
  Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> barr(bv.data(), c_out);
  MatrixRM<Scalar> cols;
  for (Index b = 0; b < b_n; ++b) {
    detail::im2col(xv, b, kernel, spec, cols);
    Eigen::Map<MatrixRM<Scalar>> yb(out.data() + b * c_out * t_out, c_out, t_out);
    yb.noalias() = wm * cols;
    yb.array().colwise() += barr;
  }

  auto backward = [x, w, bias, spec, kernel](Graph<Scalar>& gr, Var self) {
    const Tensor<Scalar>& xv2 = gr.value(x);
    const Tensor<Scalar>& wv2 = gr.value(w);
    const Tensor<Scalar>& dy = gr.grad(self);
    const Index b_n2 = xv2.dim(0), c_in2 = xv2.dim(1), t_in2 = xv2.dim(2);
    const Index c_out2 = wv2.dim(0);
    const Index t_out2 = conv_out_length(t_in2, spec.stride);
    const Index pad = conv_padding(kernel, spec.dilation);
    Eigen::Map<const MatrixRM<Scalar>> wm2(wv2.data(), c_out2, c_in2 * kernel);

    Tensor<Scalar> dx = Tensor<Scalar>::zeros(xv2.shape());
    MatrixRM<Scalar> dwm = MatrixRM<Scalar>::Zero(c_out2, c_in2 * kernel);
    Eigen::Array<Scalar, Eigen::Dynamic, 1> db = Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(c_out2);
    MatrixRM<Scalar> cols, dcols;
    for (Index b = 0; b < b_n2; ++b) {
      Eigen::Map<const MatrixRM<Scalar>> dyb(dy.data() + b * c_out2 * t_out2, c_out2, t_out2);
      detail::im2col(xv2, b, kernel, spec, cols);
      dwm.noalias() += dyb * cols.transpose();
      db += dyb.array().rowwise().sum();
      dcols.noalias() = wm2.transpose() * dyb;
      for (Index ci = 0; ci < c_in2; ++ci) {
        Scalar* drow = dx.data() + (b * c_in2 + ci) * t_in2;
        for (Index k = 0; k < kernel; ++k) {
          const Scalar* src = dcols.data() + (ci * kernel + k) * t_out2;
          const Index off = k * spec.dilation - pad;
          for (Index t = 0; t < t_out2; ++t) {
            const Index pos = t * spec.stride + off;
            if (pos >= 0 && pos < t_in2) drow[pos] += src[t];
          }
        }
      }
    }
    gr.accumulate(x, dx);
    gr.accumulate(w, Tensor<Scalar>(wv2.shape(),
                                    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(dwm.data(), dwm.size())));
    gr.accumulate(bias, Tensor<Scalar>({c_out2}, db));
  };
  return g.apply(label, {x, w, bias}, std::move(out), backward);
}

// -------------------------------------------------------------------------
// Normalization.

// Per-channel scale/shift plus inference statistics for batch norm.
template <typename Scalar>
struct NormParams {
  Tensor<Scalar> gamma, beta;              // [C], trainable
  Tensor<Scalar> running_mean, running_var;  // [C], buffers
  Scalar momentum = Scalar(0.1);
  Scalar epsilon = Scalar(1e-5);

  static NormParams identity(Index channels) {
    NormParams p;
    p.gamma = Tensor<Scalar>::full({channels}, Scalar(1));
    p.beta = Tensor<Scalar>::zeros({channels});
    p.running_mean = Tensor<Scalar>::zeros({channels});
    p.running_var = Tensor<Scalar>::full({channels}, Scalar(1));
    return p;
  }
};

// Batch norm over (batch x valid time) per channel.  In train mode the
// statistics are computed from the batch (masked if a mask is given) and the
// running statistics are updated in place; in infer mode the running
// statistics are used and nothing is mutated.
template <typename Scalar>
Var batch_norm(Graph<Scalar>& g, Var x, Var gamma, Var beta,
               Tensor<Scalar>& running_mean, Tensor<Scalar>& running_var,
               Scalar momentum, Scalar epsilon, Mode mode,
               const Tensor<std::type_identity_t<Scalar>>* mask,
               const std::string& label = "batch_norm") {
  using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  if (epsilon <= Scalar(0)) throw ShapeError(label + ": epsilon must be positive");
  const Tensor<Scalar>& xv = g.value(x);
  if (xv.rank() != 3) throw ShapeError(label + ": expected [B,C,T] input");
  const Index b_n = xv.dim(0), c_n = xv.dim(1), t_n = xv.dim(2);
  if (g.value(gamma).numel() != c_n || g.value(beta).numel() != c_n) {
    throw ShapeError(label + ": gamma/beta must have one entry per channel");
  }
  if (mask && (mask->rank() != 3 || mask->dim(0) != b_n || mask->dim(2) != t_n)) {
    throw ShapeError(label + ": mask must be [B,1,T]");
  }

  ArrayX mean(c_n), inv(c_n);
  Scalar count = 0;
  if (mode == Mode::kTrain) {
    if (mask) {
      for (Index b = 0; b < b_n; ++b)
        for (Index t = 0; t < t_n; ++t) count += mask->at(b, 0, t) != Scalar(0) ? Scalar(1) : Scalar(0);
    } else {
      count = static_cast<Scalar>(b_n * t_n);
    }
    if (count <= Scalar(0)) throw ShapeError(label + ": no valid frames for statistics");
    for (Index c = 0; c < c_n; ++c) {
      Scalar s = 0;
      for (Index b = 0; b < b_n; ++b) {
        const Scalar* row = xv.data() + (b * c_n + c) * t_n;
        if (mask) {
          for (Index t = 0; t < t_n; ++t)
            if (mask->at(b, 0, t) != Scalar(0)) s += row[t];
        } else {
          for (Index t = 0; t < t_n; ++t) s += row[t];
        }
      }
      const Scalar mu = s / count;
      Scalar sq = 0;
      for (Index b = 0; b < b_n; ++b) {
        const Scalar* row = xv.data() + (b * c_n + c) * t_n;
        if (mask) {
          for (Index t = 0; t < t_n; ++t)
            if (mask->at(b, 0, t) != Scalar(0)) sq += (row[t] - mu) * (row[t] - mu);
        } else {
          for (Index t = 0; t < t_n; ++t) sq += (row[t] - mu) * (row[t] - mu);
        }
      }
      const Scalar var = sq / count;
      mean[c] = mu;
      inv[c] = Scalar(1) / std::sqrt(var + epsilon);
      running_mean[c] = (Scalar(1) - momentum) * running_mean[c] + momentum * mu;
      running_var[c] = (Scalar(1) - momentum) * running_var[c] + momentum * var;
    }
  } else {
    for (Index c = 0; c < c_n; ++c) {
      if (running_var[c] < Scalar(0)) throw NumericError(label + ": negative running variance");
      mean[c] = running_mean[c];
      inv[c] = Scalar(1) / std::sqrt(running_var[c] + epsilon);
    }
  }

  const Tensor<Scalar>& gv = g.value(gamma);
  const Tensor<Scalar>& bv = g.value(beta);
  Tensor<Scalar> out = Tensor<Scalar>::zeros(xv.shape());
  for (Index b = 0; b < b_n; ++b) {
    for (Index c = 0; c < c_n; ++c) {
      const Scalar* row = xv.data() + (b * c_n + c) * t_n;
      Scalar* orow = out.data() + (b * c_n + c) * t_n;
      const Scalar a = gv[c] * inv[c], sh = bv[c] - gv[c] * inv[c] * mean[c];
      for (Index t = 0; t < t_n; ++t) orow[t] = a * row[t] + sh;
    }
  }

  Tensor<Scalar> mask_copy = mask ? *mask : Tensor<Scalar>();
  const bool masked = mask != nullptr;
  auto backward = [x, gamma, beta, mean, inv, count, mode, masked, mask_copy](Graph<Scalar>& gr, Var self) {
    const Tensor<Scalar>& xv2 = gr.value(x);
    const Tensor<Scalar>& gv2 = gr.value(gamma);
    const Tensor<Scalar>& dy = gr.grad(self);
    const Index b_n2 = xv2.dim(0), c_n2 = xv2.dim(1), t_n2 = xv2.dim(2);
    Tensor<Scalar> dx = Tensor<Scalar>::zeros(xv2.shape());
    ArrayX dgamma = ArrayX::Zero(c_n2), dbeta = ArrayX::Zero(c_n2);
    for (Index c = 0; c < c_n2; ++c) {
      const Scalar mu = mean[c], iv = inv[c], gm = gv2[c];
      Scalar sum_dxhat = 0, dvar = 0, dg = 0, db = 0;
      for (Index b = 0; b < b_n2; ++b) {
        const Scalar* row = xv2.data() + (b * c_n2 + c) * t_n2;
        const Scalar* dyr = dy.data() + (b * c_n2 + c) * t_n2;
        for (Index t = 0; t < t_n2; ++t) {
          const Scalar xhat = (row[t] - mu) * iv;
          dg += dyr[t] * xhat;
          db += dyr[t];
          const Scalar dxhat = dyr[t] * gm;
          sum_dxhat += dxhat;
          dvar += dxhat * (row[t] - mu);
        }
      }
      dgamma[c] = dg;
      dbeta[c] = db;
      if (mode == Mode::kInfer) {
        for (Index b = 0; b < b_n2; ++b) {
          const Scalar* dyr = dy.data() + (b * c_n2 + c) * t_n2;
          Scalar* dxr = dx.data() + (b * c_n2 + c) * t_n2;
          for (Index t = 0; t < t_n2; ++t) dxr[t] += dyr[t] * gm * iv;
        }
        continue;
      }
      dvar *= Scalar(-0.5) * iv * iv * iv;
      const Scalar dmean = -iv * sum_dxhat;
      for (Index b = 0; b < b_n2; ++b) {
        const Scalar* row = xv2.data() + (b * c_n2 + c) * t_n2;
        const Scalar* dyr = dy.data() + (b * c_n2 + c) * t_n2;
        Scalar* dxr = dx.data() + (b * c_n2 + c) * t_n2;
        for (Index t = 0; t < t_n2; ++t) {
          const bool valid = !masked || mask_copy.at(b, 0, t) != Scalar(0);
          Scalar v = dyr[t] * gm * iv;
          if (valid) v += (dvar * Scalar(2) * (row[t] - mu) + dmean) / count;
          dxr[t] += v;
        }
      }
    }
    gr.accumulate(x, dx);
    gr.accumulate(gamma, Tensor<Scalar>({c_n2}, dgamma));
    gr.accumulate(beta, Tensor<Scalar>({c_n2}, dbeta));
  };
  return g.apply(label, {x, gamma, beta}, std::move(out), backward);
}

// Convenience overload working on a NormParams bundle outside a model.
template <typename Scalar>
Var batch_norm(Graph<Scalar>& g, Var x, NormParams<Scalar>& params, Mode mode,
               const Tensor<std::type_identity_t<Scalar>>* mask,
               const std::string& label = "batch_norm") {
  Var gamma = g.leaf(params.gamma, label + ".gamma");
  Var beta = g.leaf(params.beta, label + ".beta");
  return batch_norm(g, x, gamma, beta, params.running_mean, params.running_var,
                    params.momentum, params.epsilon, mode, mask, label);
}

// Layer norm over channels and valid time jointly, per sequence.  Padded
// frames are excluded from the statistics and zeroed in the output.
template <typename Scalar>
Var layer_norm_masked(Graph<Scalar>& g, Var x, Var gamma, Var beta, Scalar epsilon,
                      const Tensor<Scalar>& mask, const std::string& label = "layer_norm") {
  using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  if (epsilon <= Scalar(0)) throw ShapeError(label + ": epsilon must be positive");
  const Tensor<Scalar>& xv = g.value(x);
  if (xv.rank() != 3) throw ShapeError(label + ": expected [B,C,T] input");
  const Index b_n = xv.dim(0), c_n = xv.dim(1), t_n = xv.dim(2);
  if (mask.rank() != 3 || mask.dim(0) != b_n || mask.dim(2) != t_n) {
    throw ShapeError(label + ": mask must be [B,1,T]");
  }
  const Tensor<Scalar>& gv = g.value(gamma);
  const Tensor<Scalar>& bv = g.value(beta);
  if (gv.numel() != c_n || bv.numel() != c_n) {
    throw ShapeError(label + ": gamma/beta must have one entry per channel");
  }

  ArrayX mean(b_n), inv(b_n), counts(b_n);
  for (Index b = 0; b < b_n; ++b) {
    Index valid = 0;
    for (Index t = 0; t < t_n; ++t)
      if (mask.at(b, 0, t) != Scalar(0)) ++valid;
    if (valid == 0) throw ShapeError(label + ": sequence " + std::to_string(b) + " has no valid frames");
    const Scalar m = static_cast<Scalar>(valid * c_n);
    Scalar s = 0;
    for (Index c = 0; c < c_n; ++c) {
      const Scalar* row = xv.data() + (b * c_n + c) * t_n;
      for (Index t = 0; t < t_n; ++t)
        if (mask.at(b, 0, t) != Scalar(0)) s += row[t];
    }
    const Scalar mu = s / m;
    Scalar sq = 0;
    for (Index c = 0; c < c_n; ++c) {
      const Scalar* row = xv.data() + (b * c_n + c) * t_n;
      for (Index t = 0; t < t_n; ++t)
        if (mask.at(b, 0, t) != Scalar(0)) sq += (row[t] - mu) * (row[t] - mu);
    }
    mean[b] = mu;
    inv[b] = Scalar(1) / std::sqrt(sq / m + epsilon);
    counts[b] = m;
  }

  Tensor<Scalar> out = Tensor<Scalar>::zeros(xv.shape());
  for (Index b = 0; b < b_n; ++b) {
    for (Index c = 0; c < c_n; ++c) {
      const Scalar* row = xv.data() + (b * c_n + c) * t_n;
      Scalar* orow = out.data() + (b * c_n + c) * t_n;
      for (Index t = 0; t < t_n; ++t) {
        if (mask.at(b, 0, t) != Scalar(0)) {
          orow[t] = gv[c] * (row[t] - mean[b]) * inv[b] + bv[c];
        }
      }
    }
  }

  Tensor<Scalar> mask_copy = mask;
  auto backward = [x, gamma, beta, mean, inv, counts, mask_copy](Graph<Scalar>& gr, Var self) {
    const Tensor<Scalar>& xv2 = gr.value(x);
    const Tensor<Scalar>& gv2 = gr.value(gamma);
    const Tensor<Scalar>& dy = gr.grad(self);
    const Index b_n2 = xv2.dim(0), c_n2 = xv2.dim(1), t_n2 = xv2.dim(2);
    Tensor<Scalar> dx = Tensor<Scalar>::zeros(xv2.shape());
    ArrayX dgamma = ArrayX::Zero(c_n2), dbeta = ArrayX::Zero(c_n2);
    for (Index b = 0; b < b_n2; ++b) {
      const Scalar mu = mean[b], iv = inv[b], m = counts[b];
      Scalar sum_dxhat = 0, dvar = 0;
      for (Index c = 0; c < c_n2; ++c) {
        const Scalar* row = xv2.data() + (b * c_n2 + c) * t_n2;
        const Scalar* dyr = dy.data() + (b * c_n2 + c) * t_n2;
        for (Index t = 0; t < t_n2; ++t) {
          if (mask_copy.at(b, 0, t) == Scalar(0)) continue;
          const Scalar xhat = (row[t] - mu) * iv;
          dgamma[c] += dyr[t] * xhat;
          dbeta[c] += dyr[t];
          const Scalar dxhat = dyr[t] * gv2[c];
          sum_dxhat += dxhat;
          dvar += dxhat * (row[t] - mu);
        }
      }
      dvar *= Scalar(-0.5) * iv * iv * iv;
      const Scalar dmean = -iv * sum_dxhat;
      for (Index c = 0; c < c_n2; ++c) {
        const Scalar* row = xv2.data() + (b * c_n2 + c) * t_n2;
        const Scalar* dyr = dy.data() + (b * c_n2 + c) * t_n2;
        Scalar* dxr = dx.data() + (b * c_n2 + c) * t_n2;
        for (Index t = 0; t < t_n2; ++t) {
          if (mask_copy.at(b, 0, t) == Scalar(0)) continue;
          dxr[t] += dyr[t] * gv2[c] * iv + (dvar * Scalar(2) * (row[t] - mu) + dmean) / m;
        }
      }
    }
    gr.accumulate(x, dx);
    gr.accumulate(gamma, Tensor<Scalar>({c_n2}, dgamma));
    gr.accumulate(beta, Tensor<Scalar>({c_n2}, dbeta));
  };
  return g.apply(label, {x, gamma, beta}, std::move(out), backward);
}

// -------------------------------------------------------------------------
// Weight norm reparameterization: w = g * v / ||v||, per output channel.

template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> weight_norm_decompose(const Tensor<Scalar>& w) {
  if (w.rank() != 3) throw ShapeError("weight_norm: expected [Cout,Cin,K] weight");
  const Index c_out = w.dim(0), per = w.dim(1) * w.dim(2);
  Tensor<Scalar> g = Tensor<Scalar>::zeros({c_out});
  for (Index o = 0; o < c_out; ++o) {
    Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> row(w.data() + o * per, per);
    const Scalar n = std::sqrt(row.square().sum());
    if (n == Scalar(0)) throw NumericError("weight_norm: zero-norm direction for channel " + std::to_string(o));
    g[o] = n;
  }
  return {g, w};
}

template <typename Scalar>
Tensor<Scalar> weight_norm_reconstruct(const Tensor<Scalar>& g, const Tensor<Scalar>& v) {
  Tensor<Scalar> w = Tensor<Scalar>::zeros(v.shape());
  const Index c_out = v.dim(0), per = v.dim(1) * v.dim(2);
  for (Index o = 0; o < c_out; ++o) {
    Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> row(v.data() + o * per, per);
    const Scalar n = std::sqrt(row.square().sum());
    if (n == Scalar(0)) throw NumericError("weight_norm: zero-norm direction for channel " + std::to_string(o));
    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(w.data() + o * per, per) = row * (g[o] / n);
  }
  return w;
}

// Graph op producing the reconstructed weight; gradients flow to g and v.
template <typename Scalar>
Var weight_norm(Graph<Scalar>& g, Var mag, Var dir, const std::string& label = "weight_norm") {
  const Tensor<Scalar>& gv = g.value(mag);
  const Tensor<Scalar>& vv = g.value(dir);
  if (vv.rank() != 3 || gv.numel() != vv.dim(0)) {
    throw ShapeError(label + ": expected g [Cout] and v [Cout,Cin,K]");
  }
  Tensor<Scalar> w = weight_norm_reconstruct(gv, vv);
  auto backward = [mag, dir](Graph<Scalar>& gr, Var self) {
    using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
    const Tensor<Scalar>& gv2 = gr.value(mag);
    const Tensor<Scalar>& vv2 = gr.value(dir);
    const Tensor<Scalar>& dw = gr.grad(self);
    const Index c_out = vv2.dim(0), per = vv2.dim(1) * vv2.dim(2);
    Tensor<Scalar> dg = Tensor<Scalar>::zeros({c_out});
    Tensor<Scalar> dv = Tensor<Scalar>::zeros(vv2.shape());
    for (Index o = 0; o < c_out; ++o) {
      Eigen::Map<const ArrayX> vrow(vv2.data() + o * per, per);
      Eigen::Map<const ArrayX> dwrow(dw.data() + o * per, per);
      const Scalar n = std::sqrt(vrow.square().sum());
      ArrayX vhat = vrow / n;
      const Scalar dot = (dwrow * vhat).sum();
      dg[o] = dot;
      Eigen::Map<ArrayX>(dv.data() + o * per, per) = (gv2[o] / n) * (dwrow - dot * vhat);
    }
    gr.accumulate(mag, dg);
    gr.accumulate(dir, dv);
  };
  return g.apply(label, {mag, dir}, std::move(w), backward);
}

// -------------------------------------------------------------------------
// Activations.

enum class ActKind { kRelu, kClippedRelu, kLeakyRelu, kGlu, kGau };

struct ActivationSpec {
  ActKind kind = ActKind::kRelu;
  double clip = 20.0;    // cReLU ceiling
  double slope = 0.01;   // lReLU negative slope

  // Gated kinds consume 2C channels and emit C.
  bool gated() const { return kind == ActKind::kGlu || kind == ActKind::kGau; }
};

template <typename Scalar>
Var activation(Graph<Scalar>& g, Var x, const ActivationSpec& spec,
               const std::string& label = "activation") {
  const Tensor<Scalar>& xv = g.value(x);
  if (!spec.gated()) {
    Tensor<Scalar> out = Tensor<Scalar>::zeros(xv.shape());
    const Scalar clip = static_cast<Scalar>(spec.clip), slope = static_cast<Scalar>(spec.slope);
    const ActKind kind = spec.kind;
    for (Index i = 0; i < xv.numel(); ++i) {
      const Scalar v = xv[i];
      switch (kind) {
        case ActKind::kRelu: out[i] = v > Scalar(0) ? v : Scalar(0); break;
        case ActKind::kClippedRelu: out[i] = std::min(std::max(v, Scalar(0)), clip); break;
        case ActKind::kLeakyRelu: out[i] = v > Scalar(0) ? v : slope * v; break;
        default: break;
      }
    }
    auto backward = [x, kind, clip, slope](Graph<Scalar>& gr, Var self) {
      const Tensor<Scalar>& xv2 = gr.value(x);
      const Tensor<Scalar>& dy = gr.grad(self);
      Tensor<Scalar> dx = Tensor<Scalar>::zeros(xv2.shape());
      for (Index i = 0; i < xv2.numel(); ++i) {
        const Scalar v = xv2[i];
        Scalar d = 0;
        switch (kind) {
          case ActKind::kRelu: d = v > Scalar(0) ? Scalar(1) : Scalar(0); break;
          case ActKind::kClippedRelu: d = (v > Scalar(0) && v < clip) ? Scalar(1) : Scalar(0); break;
          case ActKind::kLeakyRelu: d = v > Scalar(0) ? Scalar(1) : slope; break;
          default: break;
        }
        dx[i] = dy[i] * d;
      }
      gr.accumulate(x, dx);
    };
    return g.apply(label, {x}, std::move(out), backward);
  }

  // GLU: a * sigmoid(b); GAU: tanh(a) * sigmoid(b); channel-split halves.
  if (xv.rank() != 3) throw ShapeError(label + ": gated activations expect [B,C,T]");
  const Index b_n = xv.dim(0), c_n = xv.dim(1), t_n = xv.dim(2);
  if (c_n % 2 != 0) throw ShapeError(label + ": gated activations require an even channel count");
  const Index half = c_n / 2;
  const bool use_tanh = spec.kind == ActKind::kGau;
  Tensor<Scalar> out = Tensor<Scalar>::zeros({b_n, half, t_n});
  for (Index b = 0; b < b_n; ++b) {
    for (Index c = 0; c < half; ++c) {
      const Scalar* ar = xv.data() + (b * c_n + c) * t_n;
      const Scalar* br = xv.data() + (b * c_n + half + c) * t_n;
      Scalar* orow = out.data() + (b * half + c) * t_n;
      for (Index t = 0; t < t_n; ++t) {
        const Scalar sig = Scalar(1) / (Scalar(1) + std::exp(-br[t]));
        orow[t] = (use_tanh ? std::tanh(ar[t]) : ar[t]) * sig;
      }
    }
  }
  auto backward = [x, half, use_tanh](Graph<Scalar>& gr, Var self) {
    const Tensor<Scalar>& xv2 = gr.value(x);
    const Tensor<Scalar>& dy = gr.grad(self);
    const Index b_n2 = xv2.dim(0), c_n2 = xv2.dim(1), t_n2 = xv2.dim(2);
    Tensor<Scalar> dx = Tensor<Scalar>::zeros(xv2.shape());
    for (Index b = 0; b < b_n2; ++b) {
      for (Index c = 0; c < half; ++c) {
        const Scalar* ar = xv2.data() + (b * c_n2 + c) * t_n2;
        const Scalar* br = xv2.data() + (b * c_n2 + half + c) * t_n2;
        const Scalar* dyr = dy.data() + (b * half + c) * t_n2;
        Scalar* dar = dx.data() + (b * c_n2 + c) * t_n2;
        Scalar* dbr = dx.data() + (b * c_n2 + half + c) * t_n2;
        for (Index t = 0; t < t_n2; ++t) {
          const Scalar sig = Scalar(1) / (Scalar(1) + std::exp(-br[t]));
          if (use_tanh) {
            const Scalar th = std::tanh(ar[t]);
            dar[t] += dyr[t] * sig * (Scalar(1) - th * th);
            dbr[t] += dyr[t] * th * sig * (Scalar(1) - sig);
          } else {
            dar[t] += dyr[t] * sig;
            dbr[t] += dyr[t] * ar[t] * sig * (Scalar(1) - sig);
          }
        }
      }
    }
    gr.accumulate(x, dx);
  };
  return g.apply(label, {x}, std::move(out), backward);
}

// -------------------------------------------------------------------------
// Dropout: inverted scaling at train time, identity at inference.
// The survival mask is a pure function of the stream key, so a fixed
// (seed, step, layer) triple reproduces the same mask everywhere.

template <typename Scalar>
Var dropout(Graph<Scalar>& g, Var x, double rate, Mode mode, std::uint64_t stream_key,
            const std::string& label = "dropout") {
  if (rate < 0.0 || rate >= 1.0) throw ShapeError(label + ": rate must be in [0,1)");
  if (mode == Mode::kInfer || rate == 0.0) return x;
  const Tensor<Scalar>& xv = g.value(x);
  const Scalar scale = static_cast<Scalar>(1.0 / (1.0 - rate));
  auto mask = std::make_shared<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(xv.numel());
  SplitMix64 rng(stream_key);
  for (Index i = 0; i < xv.numel(); ++i) {
    (*mask)[i] = rng.uniform() >= rate ? scale : Scalar(0);
  }
  Tensor<Scalar> out(xv.shape(), xv.array() * (*mask));
  auto backward = [x, mask](Graph<Scalar>& gr, Var self) {
    const Tensor<Scalar>& dy = gr.grad(self);
    gr.accumulate(x, Tensor<Scalar>(dy.shape(), dy.array() * (*mask)));
  };
  return g.apply(label, {x}, std::move(out), backward);
}

// -------------------------------------------------------------------------
// log_softmax over the channel axis, stabilized by max subtraction.

template <typename Scalar>
Var log_softmax(Graph<Scalar>& g, Var x, const std::string& label = "log_softmax") {
  const Tensor<Scalar>& xv = g.value(x);
  if (xv.rank() != 3) throw ShapeError(label + ": expected [B,C,T]");
  if (!xv.all_finite()) throw NumericError(label + ": non-finite input");
  const Index b_n = xv.dim(0), c_n = xv.dim(1), t_n = xv.dim(2);
  Tensor<Scalar> out = Tensor<Scalar>::zeros(xv.shape());
  for (Index b = 0; b < b_n; ++b) {
    for (Index t = 0; t < t_n; ++t) {
      Scalar m = xv.at(b, 0, t);
      for (Index c = 1; c < c_n; ++c) m = std::max(m, xv.at(b, c, t));
      Scalar lse = 0;
      for (Index c = 0; c < c_n; ++c) lse += std::exp(xv.at(b, c, t) - m);
      lse = m + std::log(lse);
      for (Index c = 0; c < c_n; ++c) out.at(b, c, t) = xv.at(b, c, t) - lse;
    }
  }
  auto backward = [x](Graph<Scalar>& gr, Var self) {
    const Tensor<Scalar>& y = gr.value(self);
    const Tensor<Scalar>& dy = gr.grad(self);
    const Index b_n2 = y.dim(0), c_n2 = y.dim(1), t_n2 = y.dim(2);
    Tensor<Scalar> dx = Tensor<Scalar>::zeros(y.shape());
    for (Index b = 0; b < b_n2; ++b) {
      for (Index t = 0; t < t_n2; ++t) {
        Scalar s = 0;
        for (Index c = 0; c < c_n2; ++c) s += dy.at(b, c, t);
        for (Index c = 0; c < c_n2; ++c) {
          dx.at(b, c, t) = dy.at(b, c, t) - std::exp(y.at(b, c, t)) * s;
        }
      }
    }
    gr.accumulate(x, dx);
  };
  return g.apply(label, {x}, std::move(out), backward);
}

// -------------------------------------------------------------------------
// Structural ops.

// Zeroes padded time steps: x[b,c,t] * mask[b,0,t].
template <typename Scalar>
Var mask_time(Graph<Scalar>& g, Var x, const Tensor<Scalar>& mask,
              const std::string& label = "mask_time") {
  const Tensor<Scalar>& xv = g.value(x);
  if (xv.rank() != 3 || mask.rank() != 3 || mask.dim(0) != xv.dim(0) || mask.dim(2) != xv.dim(2)) {
    throw ShapeError(label + ": mask must be [B,1,T] matching x");
  }
  const Index b_n = xv.dim(0), c_n = xv.dim(1), t_n = xv.dim(2);
  Tensor<Scalar> out = Tensor<Scalar>::zeros(xv.shape());
  for (Index b = 0; b < b_n; ++b)
    for (Index c = 0; c < c_n; ++c)
      for (Index t = 0; t < t_n; ++t) out.at(b, c, t) = xv.at(b, c, t) * mask.at(b, 0, t);
  Tensor<Scalar> mask_copy = mask;
  auto backward = [x, mask_copy](Graph<Scalar>& gr, Var self) {
    const Tensor<Scalar>& dy = gr.grad(self);
    const Index b_n2 = dy.dim(0), c_n2 = dy.dim(1), t_n2 = dy.dim(2);
    Tensor<Scalar> dx = Tensor<Scalar>::zeros(dy.shape());
    for (Index b = 0; b < b_n2; ++b)
      for (Index c = 0; c < c_n2; ++c)
        for (Index t = 0; t < t_n2; ++t) dx.at(b, c, t) = dy.at(b, c, t) * mask_copy.at(b, 0, t);
    gr.accumulate(x, dx);
  };
  return g.apply(label, {x}, std::move(out), backward);
}

template <typename Scalar>
Var add(Graph<Scalar>& g, Var a, Var b, const std::string& label = "add") {
  const Tensor<Scalar>& av = g.value(a);
  const Tensor<Scalar>& bv = g.value(b);
  if (!av.same_shape(bv)) {
    throw ShapeError(label + ": shape mismatch " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
  }
  Tensor<Scalar> out(av.shape(), av.array() + bv.array());
  auto backward = [a, b](Graph<Scalar>& gr, Var self) {
    const Tensor<Scalar>& dy = gr.grad(self);
    gr.accumulate(a, dy);
    gr.accumulate(b, dy);
  };
  return g.apply(label, {a, b}, std::move(out), backward);
}

template <typename Scalar>
Var add_many(Graph<Scalar>& g, const std::vector<Var>& terms, const std::string& label = "add") {
  if (terms.empty()) throw ShapeError(label + ": no terms");
  Var acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(g, acc, terms[i], label);
  return acc;
}

template <typename Scalar>
Var concat_channels(Graph<Scalar>& g, const std::vector<Var>& parts,
                    const std::string& label = "concat") {
  if (parts.empty()) throw ShapeError(label + ": no parts");
  const Tensor<Scalar>& first = g.value(parts[0]);
  if (first.rank() != 3) throw ShapeError(label + ": expected [B,C,T] parts");
  const Index b_n = first.dim(0), t_n = first.dim(2);
  Index c_total = 0;
  std::vector<Index> offsets;
  for (Var p : parts) {
    const Tensor<Scalar>& pv = g.value(p);
    if (pv.dim(0) != b_n || pv.dim(2) != t_n) throw ShapeError(label + ": batch/time mismatch");
    offsets.push_back(c_total);
    c_total += pv.dim(1);
  }
  Tensor<Scalar> out = Tensor<Scalar>::zeros({b_n, c_total, t_n});
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Tensor<Scalar>& pv = g.value(parts[i]);
    for (Index b = 0; b < b_n; ++b) {
      std::copy(pv.data() + b * pv.dim(1) * t_n, pv.data() + (b + 1) * pv.dim(1) * t_n,
                out.data() + (b * c_total + offsets[i]) * t_n);
    }
  }
  std::vector<Var> inputs = parts;
  auto backward = [inputs, offsets, c_total](Graph<Scalar>& gr, Var self) {
    const Tensor<Scalar>& dy = gr.grad(self);
    const Index b_n2 = dy.dim(0), t_n2 = dy.dim(2);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const Tensor<Scalar>& pv = gr.value(inputs[i]);
      Tensor<Scalar> dp = Tensor<Scalar>::zeros(pv.shape());
      for (Index b = 0; b < b_n2; ++b) {
        std::copy(dy.data() + (b * c_total + offsets[i]) * t_n2,
                  dy.data() + (b * c_total + offsets[i] + pv.dim(1)) * t_n2,
                  dp.data() + b * pv.dim(1) * t_n2);
      }
      gr.accumulate(inputs[i], dp);
    }
  };
  return g.apply(label, std::move(inputs), std::move(out), backward);
}

// Elementwise product (test utility and gating building block).
template <typename Scalar>
Var mul(Graph<Scalar>& g, Var a, Var b, const std::string& label = "mul") {
  const Tensor<Scalar>& av = g.value(a);
  const Tensor<Scalar>& bv = g.value(b);
  if (!av.same_shape(bv)) throw ShapeError(label + ": shape mismatch");
  Tensor<Scalar> out(av.shape(), av.array() * bv.array());
  auto backward = [a, b](Graph<Scalar>& gr, Var self) {
    const Tensor<Scalar>& dy = gr.grad(self);
    gr.accumulate(a, Tensor<Scalar>(dy.shape(), dy.array() * gr.value(b).array()));
    gr.accumulate(b, Tensor<Scalar>(dy.shape(), dy.array() * gr.value(a).array()));
  };
  return g.apply(label, {a, b}, std::move(out), backward);
}

// Full reduction to a scalar.
template <typename Scalar>
Var reduce_sum(Graph<Scalar>& g, Var x, const std::string& label = "sum") {
  const Tensor<Scalar>& xv = g.value(x);
  Tensor<Scalar> out = Tensor<Scalar>::scalar(xv.array().sum());
  auto backward = [x](Graph<Scalar>& gr, Var self) {
    const Scalar dy = gr.grad(self).value();
    const Tensor<Scalar>& xv2 = gr.value(x);
    gr.accumulate(x, Tensor<Scalar>::full(xv2.shape(), dy));
  };
  return g.apply(label, {x}, std::move(out), backward);
}

// -------------------------------------------------------------------------
// Inference-time fusion of batch norm into the preceding convolution:
// conv(x, w', b') == bn(conv(x, w, b)) with populated running statistics.

template <typename Scalar>
std::pair<Tensor<Scalar>, Tensor<Scalar>> fold_batchnorm(const Tensor<Scalar>& w,
                                                         const Tensor<Scalar>& bias,
                                                         const NormParams<Scalar>& bn) {
  const Index c_out = w.dim(0), per = w.dim(1) * w.dim(2);
  if (bn.gamma.numel() != c_out || bn.running_mean.numel() != c_out) {
    throw ShapeError("fold_batchnorm: channel count mismatch");
  }
  Tensor<Scalar> w2 = Tensor<Scalar>::zeros(w.shape());
  Tensor<Scalar> b2 = Tensor<Scalar>::zeros({c_out});
  for (Index o = 0; o < c_out; ++o) {
    if (bn.running_var[o] < Scalar(0)) {
      throw NumericError("fold_batchnorm: negative running variance at channel " + std::to_string(o));
    }
    const Scalar inv = Scalar(1) / std::sqrt(bn.running_var[o] + bn.epsilon);
    const Scalar a = bn.gamma[o] * inv;
    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(w2.data() + o * per, per) =
        Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>(w.data() + o * per, per) * a;
    b2[o] = (bias[o] - bn.running_mean[o]) * a + bn.beta[o];
  }
  return {std::move(w2), std::move(b2)};
}

}  // namespace jasper::nn

#endif  // JASPER_NN_OPS_H_
