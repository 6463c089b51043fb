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

#ifndef JASPER_TENSOR_H_
#define JASPER_TENSOR_H_

#include <Eigen/Dense>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "jasper/error.h"
#include "jasper/rng.h"

namespace jasper {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

// Dense row-major tensor over a flat Eigen array.  Activations use
// (batch, channel, time) order; weights use (out, in, kernel).
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;
  Tensor(Shape shape, Array data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
      throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor zeros(Shape shape) {
    Index n = shape_numel(shape);
    return Tensor(std::move(shape), Array::Zero(n));
  }

  static Tensor full(Shape shape, Scalar v) {
    Index n = shape_numel(shape);
    return Tensor(std::move(shape), Array::Constant(n, v));
  }

  static Tensor scalar(Scalar v) { return full({}, v); }

  static Tensor from(Shape shape, std::initializer_list<Scalar> values) {
    Array a(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar v : values) a[i++] = v;
    return Tensor(std::move(shape), std::move(a));
  }

  // Uniform values in [lo, hi) from a dedicated stream.
  static Tensor uniform(Shape shape, Scalar lo, Scalar hi, std::uint64_t stream_key) {
    SplitMix64 rng(stream_key);
    Index n = shape_numel(shape);
    Array a(n);
    for (Index i = 0; i < n; ++i) {
      a[i] = static_cast<Scalar>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    }
    return Tensor(std::move(shape), std::move(a));
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_[static_cast<std::size_t>(i)]; }
  Index numel() const { return data_.size(); }
  bool is_scalar() const { return shape_.empty(); }

  Array& array() { return data_; }
  const Array& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  // 3-D accessors for (batch, channel, time) tensors.
  Scalar& at(Index b, Index c, Index t) { return data_[(b * dim(1) + c) * dim(2) + t]; }
  Scalar at(Index b, Index c, Index t) const { return data_[(b * dim(1) + c) * dim(2) + t]; }
  Scalar& at(Index i, Index j) { return data_[i * dim(1) + j]; }
  Scalar at(Index i, Index j) const { return data_[i * dim(1) + j]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const { return data_.isFinite().all(); }

  Scalar value() const {
    if (!is_scalar()) throw ShapeError("value() on non-scalar tensor " + shape_str(shape_));
    return data_[0];
  }

 private:
  Shape shape_;
  Array data_;
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  return Tensor<To>(t.shape(), t.array().template cast<To>());
}

// Padded feature/label batch: features [B, C, T_max], per-sequence valid
// frame counts, and the derived binary time mask [B, 1, T_max].
template <typename Scalar>
struct PaddedBatch {
  Tensor<Scalar> features;       // [B, C, T_max]
  std::vector<Index> lengths;    // valid frames per sequence, <= T_max
  Tensor<Scalar> mask;           // [B, 1, T_max]; mask[b,t] = 1 iff t < lengths[b]

  static PaddedBatch make(Tensor<Scalar> features, std::vector<Index> lengths) {
    if (features.rank() != 3) {
      throw ShapeError("padded batch features must be [B,C,T], got " + shape_str(features.shape()));
    }
    const Index b_n = features.dim(0), t_max = features.dim(2);
    if (static_cast<Index>(lengths.size()) != b_n) {
      throw ShapeError("lengths count does not match batch size");
    }
    Tensor<Scalar> mask = Tensor<Scalar>::zeros({b_n, 1, t_max});
    for (Index b = 0; b < b_n; ++b) {
      if (lengths[static_cast<std::size_t>(b)] > t_max || lengths[static_cast<std::size_t>(b)] < 0) {
        throw ShapeError("sequence length exceeds padded extent");
      }
      for (Index t = 0; t < lengths[static_cast<std::size_t>(b)]; ++t) mask.at(b, 0, t) = Scalar(1);
    }
    return PaddedBatch{std::move(features), std::move(lengths), std::move(mask)};
  }
};

// Builds a [B,1,T] binary mask from per-sequence lengths.
template <typename Scalar>
Tensor<Scalar> time_mask(const std::vector<Index>& lengths, Index t_max) {
  const Index b_n = static_cast<Index>(lengths.size());
  Tensor<Scalar> mask = Tensor<Scalar>::zeros({b_n, 1, t_max});
  for (Index b = 0; b < b_n; ++b) {
    for (Index t = 0; t < lengths[static_cast<std::size_t>(b)]; ++t) mask.at(b, 0, t) = Scalar(1);
  }
  return mask;
}

}  // namespace jasper

#endif  // JASPER_TENSOR_H_
