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

#ifndef JASPER_FEATURES_H_
#define JASPER_FEATURES_H_

#include <string>
#include <vector>

#include "jasper/tensor.h"

namespace jasper {

// Mono audio in [-1, 1].  Samples are kept at double precision so the
// whole feature pipeline carries one rounding regime; PCM16 quantization
// happens only at the WAV boundary.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;
};

// Log-mel extraction parameters.  Defaults follow the common 16 kHz recipe:
// 20 ms Hann windows hopped by 10 ms, pre-emphasis 0.97, FFT sized to the
// next power of two >= window (512 at 16 kHz), HTK mel scale with
// area-unnormalized triangular filters, log floor 1e-20.
struct FeatureConfig {
  int n_mels = 64;
  double window_ms = 20.0;
  double hop_ms = 10.0;
  int fft_size = 0;  // 0 = next power of two >= window samples
  double preemphasis = 0.97;
  bool normalize = true;  // per-coefficient mean/variance over the utterance
  double log_floor = 1e-20;
};

// PCM16 mono RIFF/WAVE reader; samples scaled by 1/32768.
AudioClip read_wav(const std::string& path);

// Writer for the same format (used by tests and the synthetic corpus).
void write_wav(const std::string& path, const AudioClip& clip);

// Resamples by linear interpolation; output length = round(N/factor).
// factor must lie in [0.85, 1.15]; factor 1.0 is the identity.
AudioClip speed_perturb(const AudioClip& clip, double factor);

// Log-mel filterbank features, shape [1, n_mels, T] with
// T = 1 + floor((N - W)/H); no center padding.  Deterministic.
Tensor<double> mel_features(const AudioClip& clip, const FeatureConfig& cfg);

// Precomputed-feature file: u32 n_mels, u32 T, then n_mels*T little-endian
// f32 values, row-major (coefficient-major).
void write_features(const std::string& path, const Tensor<double>& feats);
Tensor<double> read_features(const std::string& path);

// In-place radix-2 FFT over power-of-two length (helper exposed for tests).
void fft_radix2(std::vector<double>& re, std::vector<double>& im);

}  // namespace jasper

#endif  // JASPER_FEATURES_H_
