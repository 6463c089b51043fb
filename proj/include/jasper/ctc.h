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

#ifndef JASPER_CTC_H_
#define JASPER_CTC_H_

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "jasper/graph.h"
#include "jasper/tensor.h"

namespace jasper::ctc {

// Ordered grapheme inventory; the blank symbol is implicit and always takes
// the last network output index (|graphemes|).
struct Alphabet {
  std::string graphemes;

  Index blank() const { return static_cast<Index>(graphemes.size()); }
  Index size() const { return static_cast<Index>(graphemes.size()) + 1; }

  // a-z, space, apostrophe: 28 graphemes + blank = 29 network outputs.
  static Alphabet english() {
    return Alphabet{"abcdefghijklmnopqrstuvwxyz '"};
  }

  Index index_of(char c) const {
    const std::size_t pos = graphemes.find(c);
    if (pos == std::string::npos) {
      throw DataError(std::string("alphabet: unknown symbol '") + c + "'");
    }
    return static_cast<Index>(pos);
  }

  std::vector<Index> encode(const std::string& text) const {
    std::vector<Index> ids;
    ids.reserve(text.size());
    for (char c : text) ids.push_back(index_of(c));
    return ids;
  }

  std::string decode(const std::vector<Index>& ids) const {
    std::string out;
    out.reserve(ids.size());
    for (Index id : ids) {
      if (id < 0 || id >= static_cast<Index>(graphemes.size())) {
        throw DataError("alphabet: index " + std::to_string(id) + " out of range");
      }
      out.push_back(graphemes[static_cast<std::size_t>(id)]);
    }
    return out;
  }
};

namespace detail {

template <typename Scalar>
Scalar log_zero() {
  return -std::numeric_limits<Scalar>::infinity();
}

template <typename Scalar>
Scalar log_add(Scalar a, Scalar b) {
  if (a == log_zero<Scalar>()) return b;
  if (b == log_zero<Scalar>()) return a;
  const Scalar m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace detail

// Fewest output frames that can realize `target`: one per label plus one
// separating blank per adjacent repeat.
inline Index ctc_min_frames(const std::vector<Index>& target) {
  Index need = static_cast<Index>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++need;
  }
  return need;
}

template <typename Scalar>
struct CtcResult {
  Scalar mean_loss = 0;                 // mean over all batch items
  std::vector<Scalar> item_loss;        // +inf marks an infeasible item
  Tensor<Scalar> grad;                  // d(mean_loss)/d(log_probs); zero rows
                                        // for infeasible items and padding
};

// CTC negative log likelihood over the blank-interleaved target lattice,
// computed entirely in log space, with the analytic gradient w.r.t. the
// per-frame log probabilities.  Infeasible items (more labels than frames
// can realize) yield +inf item loss and a zero gradient block rather than
// throwing, so callers can skip them.
template <typename Scalar>
CtcResult<Scalar> ctc_loss(const Tensor<Scalar>& log_probs,
                           const std::vector<std::vector<Index>>& targets,
                           const std::vector<Index>& out_lengths, Index blank) {
  const Scalar kLogZero = detail::log_zero<Scalar>();
  if (log_probs.rank() != 3) throw ShapeError("ctc_loss: expected [B,V,T] log probabilities");
  const Index b_n = log_probs.dim(0), v_n = log_probs.dim(1), t_max = log_probs.dim(2);
  if (static_cast<Index>(targets.size()) != b_n || static_cast<Index>(out_lengths.size()) != b_n) {
    throw ShapeError("ctc_loss: batch size mismatch between probabilities, targets and lengths");
  }
  if (blank < 0 || blank >= v_n) throw ShapeError("ctc_loss: blank index out of range");

  CtcResult<Scalar> result;
  result.item_loss.assign(static_cast<std::size_t>(b_n), Scalar(0));
  result.grad = Tensor<Scalar>::zeros(log_probs.shape());

  for (Index b = 0; b < b_n; ++b) {
    const std::vector<Index>& target = targets[static_cast<std::size_t>(b)];
    const Index t_n = out_lengths[static_cast<std::size_t>(b)];
    if (t_n < 0 || t_n > t_max) throw ShapeError("ctc_loss: output length out of range");
    for (Index label : target) {
      if (label == blank) throw DataError("ctc_loss: blank index present in target");
      if (label < 0 || label >= v_n) throw DataError("ctc_loss: target label out of range");
    }
    if (ctc_min_frames(target) > t_n || t_n == 0) {
      result.item_loss[static_cast<std::size_t>(b)] = std::numeric_limits<Scalar>::infinity();
      continue;
    }

    // Blank-interleaved state sequence: -, z1, -, z2, ..., zU, -.
    const Index u_n = static_cast<Index>(target.size());
    const Index s_n = 2 * u_n + 1;
    auto state_label = [&](Index s) {
      return s % 2 == 0 ? blank : target[static_cast<std::size_t>(s / 2)];
    };
    auto lp = [&](Index t, Index k) { return log_probs.at(b, k, t); };

    std::vector<Scalar> alpha(static_cast<std::size_t>(s_n * t_n), kLogZero);
    auto a = [&](Index t, Index s) -> Scalar& {
      return alpha[static_cast<std::size_t>(t * s_n + s)];
    };
    a(0, 0) = lp(0, blank);
    if (s_n > 1) a(0, 1) = lp(0, state_label(1));
    for (Index t = 1; t < t_n; ++t) {
      for (Index s = 0; s < s_n; ++s) {
        Scalar acc = a(t - 1, s);
        if (s >= 1) acc = detail::log_add(acc, a(t - 1, s - 1));
        if (s >= 2 && state_label(s) != blank && state_label(s) != state_label(s - 2)) {
          acc = detail::log_add(acc, a(t - 1, s - 2));
        }
        a(t, s) = acc == kLogZero ? kLogZero : acc + lp(t, state_label(s));
      }
    }
    Scalar log_p = a(t_n - 1, s_n - 1);
    if (s_n >= 2) log_p = detail::log_add(log_p, a(t_n - 1, s_n - 2));
    if (log_p == kLogZero) {
      // All alignments have probability zero (possible with -inf inputs).
      result.item_loss[static_cast<std::size_t>(b)] = std::numeric_limits<Scalar>::infinity();
      continue;
    }
    result.item_loss[static_cast<std::size_t>(b)] = -log_p;

    // beta(t, s): probability of completing states s..S-1 over frames after
    // t - the emission at t itself is already inside alpha, so
    // alpha + beta sums over full paths through (t, s) with no division.
    std::vector<Scalar> beta(static_cast<std::size_t>(s_n * t_n), kLogZero);
    auto bt = [&](Index t, Index s) -> Scalar& {
      return beta[static_cast<std::size_t>(t * s_n + s)];
    };
    bt(t_n - 1, s_n - 1) = Scalar(0);
    if (s_n >= 2) bt(t_n - 1, s_n - 2) = Scalar(0);
    for (Index t = t_n - 2; t >= 0; --t) {
      for (Index s = 0; s < s_n; ++s) {
        Scalar acc = bt(t + 1, s) == kLogZero ? kLogZero : bt(t + 1, s) + lp(t + 1, state_label(s));
        if (s + 1 < s_n && bt(t + 1, s + 1) != kLogZero) {
          acc = detail::log_add(acc, bt(t + 1, s + 1) + lp(t + 1, state_label(s + 1)));
        }
        if (s + 2 < s_n && state_label(s + 2) != blank && state_label(s + 2) != state_label(s) &&
            bt(t + 1, s + 2) != kLogZero) {
          acc = detail::log_add(acc, bt(t + 1, s + 2) + lp(t + 1, state_label(s + 2)));
        }
        bt(t, s) = acc;
      }
    }

    // d(-log P)/d lp(t,k) = -exp(logsumexp_{s: z_s = k}(alpha + beta) - log P).
    for (Index t = 0; t < t_n; ++t) {
      for (Index s = 0; s < s_n; ++s) {
        const Scalar joint = a(t, s) == kLogZero || bt(t, s) == kLogZero
                                 ? kLogZero
                                 : a(t, s) + bt(t, s);
        if (joint == kLogZero) continue;
        result.grad.at(b, state_label(s), t) -= std::exp(joint - log_p);
      }
    }
  }

  // Mean over the batch; gradient scaled accordingly.  Any infeasible item
  // makes the mean +inf (callers filter such items up front).
  Scalar total = 0;
  for (Scalar l : result.item_loss) total += l;
  result.mean_loss = total / static_cast<Scalar>(b_n);
  result.grad.array() /= static_cast<Scalar>(b_n);
  return result;
}

// Graph node for the batch-mean CTC loss.  The per-item gradient is already
// available from the forward computation, so backward just scales it.
template <typename Scalar>
Var ctc_loss_node(Graph<Scalar>& g, Var log_probs,
                  const std::vector<std::vector<Index>>& targets,
                  const std::vector<Index>& out_lengths, Index blank,
                  const std::string& label = "ctc_loss") {
  CtcResult<Scalar> res = ctc_loss(g.value(log_probs), targets, out_lengths, blank);
  auto grad = std::make_shared<Tensor<Scalar>>(std::move(res.grad));
  auto backward = [log_probs, grad](Graph<Scalar>& gr, Var self) {
    const Scalar dy = gr.grad(self).value();
    gr.accumulate(log_probs, Tensor<Scalar>(grad->shape(), grad->array() * dy));
  };
  return g.apply(label, {log_probs}, Tensor<Scalar>::scalar(res.mean_loss), backward);
}

// Exact CTC likelihood by enumerating every frame-label path and collapsing
// (remove repeats, then blanks).  Exponential: guarded to V^T <= 1e6.
template <typename Scalar>
Scalar ctc_brute_force(const Tensor<Scalar>& log_probs, Index item,
                       const std::vector<Index>& target, Index blank) {
  const Scalar kLogZero = detail::log_zero<Scalar>();
  const Index v_n = log_probs.dim(1), t_n = log_probs.dim(2);
  double combos = 1;
  for (Index t = 0; t < t_n; ++t) {
    combos *= static_cast<double>(v_n);
    if (combos > 1e6) throw DataError("ctc_brute_force: instance too large (V^T > 1e6)");
  }
  std::vector<Index> path(static_cast<std::size_t>(t_n), 0);
  Scalar acc = kLogZero;
  while (true) {
    // Collapse: drop repeats, then blanks.
    std::vector<Index> collapsed;
    for (Index t = 0; t < t_n; ++t) {
      if (t > 0 && path[static_cast<std::size_t>(t)] == path[static_cast<std::size_t>(t - 1)]) continue;
      if (path[static_cast<std::size_t>(t)] == blank) continue;
      collapsed.push_back(path[static_cast<std::size_t>(t)]);
    }
    if (collapsed == target) {
      Scalar lp = 0;
      for (Index t = 0; t < t_n; ++t) lp += log_probs.at(item, path[static_cast<std::size_t>(t)], t);
      acc = detail::log_add(acc, lp);
    }
    // Odometer increment over V^T paths.
    Index pos = t_n - 1;
    while (pos >= 0) {
      if (++path[static_cast<std::size_t>(pos)] < v_n) break;
      path[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return acc == kLogZero ? std::numeric_limits<Scalar>::infinity() : -acc;
}

// Per-frame argmax (lowest index wins ties), collapse repeats, strip blanks.
template <typename Scalar>
std::vector<std::string> greedy_decode(const Tensor<Scalar>& log_probs,
                                       const std::vector<Index>& out_lengths,
                                       const Alphabet& alphabet) {
  if (log_probs.rank() != 3) throw ShapeError("greedy_decode: expected [B,V,T]");
  const Index b_n = log_probs.dim(0), v_n = log_probs.dim(1);
  if (v_n != alphabet.size()) throw ShapeError("greedy_decode: alphabet size mismatch");
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(b_n));
  for (Index b = 0; b < b_n; ++b) {
    const Index t_n = out_lengths[static_cast<std::size_t>(b)];
    std::string text;
    Index prev = -1;
    for (Index t = 0; t < t_n; ++t) {
      Index best = 0;
      for (Index v = 1; v < v_n; ++v) {
        if (log_probs.at(b, v, t) > log_probs.at(b, best, t)) best = v;
      }
      if (best != prev && best != alphabet.blank()) {
        text.push_back(alphabet.graphemes[static_cast<std::size_t>(best)]);
      }
      prev = best;
    }
    out.push_back(std::move(text));
  }
  return out;
}

}  // namespace jasper::ctc

#endif  // JASPER_CTC_H_
