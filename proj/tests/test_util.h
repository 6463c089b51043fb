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

#ifndef JASPER_TESTS_TEST_UTIL_H_
#define JASPER_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "doctest.h"
#include "jasper/graph.h"
#include "jasper/nn_ops.h"
#include "jasper/tensor.h"

namespace jasper::testing {

using Tensor64 = Tensor<double>;

// Nudges every element away from zero so piecewise-linear activations are
// probed away from their kinks during finite differencing.
inline Tensor64 away_from_zero(Tensor64 t, double margin = 0.05) {
  for (Index i = 0; i < t.numel(); ++i) {
    if (std::abs(t[i]) < margin) t[i] = t[i] < 0 ? -margin : margin;
  }
  return t;
}

// Central-difference gradient check.  `build` maps (graph, leaves) to any
// tensor-valued node; the harness reduces it with a fixed random weighting
// (so permuted or mis-scattered gradients cannot cancel) and compares every
// analytic input gradient against (f(x+h) - f(x-h)) / 2h.
template <typename BuildFn>
void check_gradients(const std::vector<Tensor64>& inputs, BuildFn build,
                     double tol = 1e-4, double h = 1e-5) {
  auto run = [&](const std::vector<Tensor64>& ins, std::vector<Tensor64>* grads) {
    Graph<double> g;
    std::vector<Var> vars;
    vars.reserve(ins.size());
    for (const Tensor64& t : ins) vars.push_back(g.leaf(t, "in"));
    Var y = build(g, vars);
    const Tensor64& yv = g.value(y);
    Var w = g.constant(Tensor64::uniform(yv.shape(), 0.5, 1.5, 0xC0FFEEULL), "weights");
    Var loss = nn::reduce_sum(g, nn::mul(g, y, w));
    const double lv = g.value(loss).value();
    if (grads) {
      g.backward(loss);
      grads->clear();
      for (Var v : vars) grads->push_back(g.grad(v));
    }
    return lv;
  };

  std::vector<Tensor64> analytic;
  run(inputs, &analytic);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Index j = 0; j < inputs[i].numel(); ++j) {
      std::vector<Tensor64> plus = inputs, minus = inputs;
      plus[i][j] += h;
      minus[i][j] -= h;
      const double numeric = (run(plus, nullptr) - run(minus, nullptr)) / (2.0 * h);
      const double a = analytic[i][j];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-2});
      INFO("input " << i << " element " << j << ": analytic " << a << " numeric " << numeric);
      REQUIRE(rel <= tol);
    }
  }
}

// Elementwise max |a-b|.
inline double max_abs_diff(const Tensor64& a, const Tensor64& b) {
  REQUIRE(a.same_shape(b));
  double m = 0;
  for (Index i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_rel_diff(const Tensor64& a, const Tensor64& b) {
  REQUIRE(a.same_shape(b));
  double m = 0;
  for (Index i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), 1e-30}));
  }
  return m;
}

}  // namespace jasper::testing

#endif  // JASPER_TESTS_TEST_UTIL_H_
