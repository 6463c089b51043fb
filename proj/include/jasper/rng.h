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

#ifndef JASPER_RNG_H_
#define JASPER_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace jasper {

// Counter-based generator (SplitMix64).  Every random decision in the
// toolkit draws from a stream keyed by (seed, purpose tag, integer salts),
// never from shared mutable state, so dropout masks, shuffles and speed
// factors are reproducible across platforms and across training resumes.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n must be positive.
  std::uint64_t uniform_int(std::uint64_t n) {
    // Desk-scale n makes modulo bias negligible; determinism matters more.
    return next_u64() % n;
  }

 private:
  std::uint64_t state_;
};

// Derives a stream key from a seed, a purpose tag and integer salts.
inline std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag,
                                   std::initializer_list<std::uint64_t> salts = {}) {
  std::uint64_t h = SplitMix64::mix(seed ^ 0xA0761D6478BD642FULL);
  for (char c : tag) {
    h = SplitMix64::mix(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
  }
  for (std::uint64_t s : salts) {
    h = SplitMix64::mix(h ^ s);
  }
  return h;
}

}  // namespace jasper

#endif  // JASPER_RNG_H_
