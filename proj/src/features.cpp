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

#include "jasper/features.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "jasper/error.h"

namespace jasper {

namespace {

constexpr double kPi = 3.14159265358979323846;

// --- little-endian binary helpers -----------------------------------------

std::uint32_t read_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("truncated file reading " + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in, const std::string& what) {
  unsigned char b[2];
  if (!in.read(reinterpret_cast<char*>(b), 2)) throw DataError("truncated file reading " + what);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

std::string read_tag(std::istream& in) {
  char t[5] = {0, 0, 0, 0, 0};
  if (!in.read(t, 4)) throw DataError("truncated RIFF file while reading a chunk tag");
  return std::string(t, 4);
}

// HTK mel scale.
double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

// --- WAV I/O ---------------------------------------------------------------

AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open wav file: " + path);
  if (read_tag(in) != "RIFF") throw DataError(path + ": not a RIFF file");
  read_u32(in, "riff size");
  if (read_tag(in) != "WAVE") throw DataError(path + ": not a WAVE file");

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0, format = 0;
  std::uint32_t sample_rate = 0;
  AudioClip clip;
  bool have_data = false;

  // Walk chunks; tolerate extras (LIST, fact, ...) by skipping them.
  while (true) {
    char t[4];
    if (!in.read(t, 4)) break;  // clean EOF after the last chunk
    const std::string tag(t, 4);
    const std::uint32_t size = read_u32(in, "chunk size of '" + tag + "'");
    if (tag == "fmt ") {
      if (size < 16) throw DataError(path + ": fmt chunk too small");
      format = read_u16(in, "audio format");
      channels = read_u16(in, "channel count");
      sample_rate = read_u32(in, "sample rate");
      read_u32(in, "byte rate");
      read_u16(in, "block align");
      bits = read_u16(in, "bits per sample");
      in.ignore(size - 16);
      have_fmt = true;
    } else if (tag == "data") {
      if (!have_fmt) throw DataError(path + ": data chunk before fmt chunk");
      if (format != 1) throw DataError(path + ": only PCM encoding is supported");
      if (channels != 1) throw DataError(path + ": only mono audio is supported");
      if (bits != 16) throw DataError(path + ": only 16-bit samples are supported");
      if (size % 2 != 0) throw DataError(path + ": odd PCM16 data size");
      const std::size_t n = size / 2;
      clip.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        unsigned char b[2];
        if (!in.read(reinterpret_cast<char*>(b), 2)) {
          throw DataError(path + ": truncated data chunk");
        }
        const std::int16_t v = static_cast<std::int16_t>(b[0] | (b[1] << 8));
        clip.samples[i] = static_cast<double>(v) / 32768.0;
      }
      have_data = true;
    } else {
      in.ignore(size);
    }
    if (size % 2 != 0) in.ignore(1);  // RIFF chunks are word-aligned
  }
  if (!have_fmt || !have_data) throw DataError(path + ": missing fmt or data chunk");
  if (sample_rate == 0) throw DataError(path + ": zero sample rate");
  clip.sample_rate = static_cast<int>(sample_rate);
  return clip;
}

void write_wav(const std::string& path, const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw DataError("write_wav: sample rate must be positive");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot create wav file: " + path);
  const std::uint32_t data_size = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  write_u32(out, static_cast<std::uint32_t>(clip.sample_rate * 2));
  write_u16(out, 2);   // block align
  write_u16(out, 16);  // bits
  out.write("data", 4);
  write_u32(out, data_size);
  for (double s : clip.samples) {
    double v = std::lround(s * 32768.0);
    v = std::min(32767.0, std::max(-32768.0, v));
    const std::int16_t q = static_cast<std::int16_t>(v);
    write_u16(out, static_cast<std::uint16_t>(q));
  }
  if (!out) throw DataError("failed writing wav file: " + path);
}

// --- speed perturbation ------------------------------------------------------

AudioClip speed_perturb(const AudioClip& clip, double factor) {
  if (factor < 0.85 || factor > 1.15) {
    throw DataError("speed_perturb: factor " + std::to_string(factor) + " outside [0.85, 1.15]");
  }
  const std::size_t n = clip.samples.size();
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  if (n == 0) return out;
  const std::size_t m = static_cast<std::size_t>(std::llround(static_cast<double>(n) / factor));
  out.samples.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double pos = static_cast<double>(i) * factor;
    std::size_t lo = static_cast<std::size_t>(pos);
    if (lo >= n - 1) {
      out.samples[i] = clip.samples[n - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(lo);
    out.samples[i] = (1.0 - frac) * clip.samples[lo] + frac * clip.samples[lo + 1];
  }
  return out;
}

// --- FFT ---------------------------------------------------------------------

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  if (n == 0 || (n & (n - 1)) != 0 || im.size() != n) {
    throw ShapeError("fft_radix2: length must be a power of two");
  }
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  // Danielson-Lanczos butterflies.
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::size_t a = i + k, b = i + k + len / 2;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

// --- log-mel features ---------------------------------------------------------

Tensor<double> mel_features(const AudioClip& clip, const FeatureConfig& cfg) {
  if (clip.sample_rate <= 0) throw DataError("mel_features: sample rate must be positive");
  if (cfg.n_mels <= 0) throw DataError("mel_features: n_mels must be positive");
  if (cfg.hop_ms > cfg.window_ms) throw DataError("mel_features: hop must not exceed window");
  const Index n = static_cast<Index>(clip.samples.size());
  const Index win = static_cast<Index>(std::lround(clip.sample_rate * cfg.window_ms / 1000.0));
  const Index hop = static_cast<Index>(std::lround(clip.sample_rate * cfg.hop_ms / 1000.0));
  if (win <= 0 || hop <= 0) throw DataError("mel_features: window/hop too small for sample rate");
  if (n < win) {
    throw DataError("mel_features: clip of " + std::to_string(n) +
                    " samples is shorter than one window (" + std::to_string(win) + ")");
  }
  const int fft = cfg.fft_size > 0 ? cfg.fft_size : next_pow2(static_cast<int>(win));
  if ((fft & (fft - 1)) != 0 || fft < win) {
    throw DataError("mel_features: fft_size must be a power of two >= window");
  }
  const int n_bins = fft / 2 + 1;
  if (cfg.n_mels > fft / 2) throw DataError("mel_features: n_mels must be <= fft_size/2");

  // Pre-emphasis over the whole utterance: y[0]=x[0], y[t]=x[t]-a*x[t-1].
  std::vector<double> x(static_cast<std::size_t>(n));
  x[0] = clip.samples[0];
  for (Index t = 1; t < n; ++t) {
    x[static_cast<std::size_t>(t)] =
        clip.samples[static_cast<std::size_t>(t)] - cfg.preemphasis * clip.samples[static_cast<std::size_t>(t - 1)];
  }

  // Periodic Hann window.
  std::vector<double> window(static_cast<std::size_t>(win));
  for (Index i = 0; i < win; ++i) {
    window[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / static_cast<double>(win));
  }

  // Triangular mel filters with HTK spacing over [0, sr/2], peak 1.
  const double mel_lo = hz_to_mel(0.0), mel_hi = hz_to_mel(clip.sample_rate / 2.0);
  std::vector<double> centers(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (std::size_t m = 0; m < centers.size(); ++m) {
    centers[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(m) /
                                        static_cast<double>(cfg.n_mels + 1));
  }
  std::vector<std::vector<double>> filters(static_cast<std::size_t>(cfg.n_mels),
                                           std::vector<double>(static_cast<std::size_t>(n_bins), 0.0));
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = centers[static_cast<std::size_t>(m)];
    const double mid = centers[static_cast<std::size_t>(m) + 1];
    const double right = centers[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * clip.sample_rate / static_cast<double>(fft);
      double v = 0.0;
      if (f > left && f < mid) {
        v = (f - left) / (mid - left);
      } else if (f >= mid && f < right) {
        v = (right - f) / (right - mid);
      }
      filters[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] = v;
    }
  }

  const Index t_frames = 1 + (n - win) / hop;
  Tensor<double> feats = Tensor<double>::zeros({1, cfg.n_mels, t_frames});
  std::vector<double> re(static_cast<std::size_t>(fft)), im(static_cast<std::size_t>(fft));
  for (Index t = 0; t < t_frames; ++t) {
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    const Index start = t * hop;
    for (Index i = 0; i < win; ++i) {
      re[static_cast<std::size_t>(i)] =
          x[static_cast<std::size_t>(start + i)] * window[static_cast<std::size_t>(i)];
    }
    fft_radix2(re, im);
    for (int m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      const std::vector<double>& filt = filters[static_cast<std::size_t>(m)];
      for (int k = 0; k < n_bins; ++k) {
        const double p = re[static_cast<std::size_t>(k)] * re[static_cast<std::size_t>(k)] +
                         im[static_cast<std::size_t>(k)] * im[static_cast<std::size_t>(k)];
        e += filt[static_cast<std::size_t>(k)] * p;
      }
      feats.at(0, m, t) = std::log(std::max(e, cfg.log_floor));
    }
  }

  if (cfg.normalize) {
    // Center twice before scaling: the second pass removes the O(eps*|x|)
    // rounding residue of the first, which 1/sigma would otherwise amplify
    // for nearly-constant coefficients.
    for (int m = 0; m < cfg.n_mels; ++m) {
      for (int pass = 0; pass < 2; ++pass) {
        double mean = 0.0;
        for (Index t = 0; t < t_frames; ++t) mean += feats.at(0, m, t);
        mean /= static_cast<double>(t_frames);
        for (Index t = 0; t < t_frames; ++t) feats.at(0, m, t) -= mean;
      }
      double var = 0.0;
      for (Index t = 0; t < t_frames; ++t) var += feats.at(0, m, t) * feats.at(0, m, t);
      var /= static_cast<double>(t_frames);
      const double inv = var < 1e-20 ? 1.0 : 1.0 / std::sqrt(var);
      for (Index t = 0; t < t_frames; ++t) feats.at(0, m, t) *= inv;
    }
  }
  return feats;
}

// --- precomputed-feature files -------------------------------------------------

void write_features(const std::string& path, const Tensor<double>& feats) {
  if (feats.rank() != 3 || feats.dim(0) != 1) {
    throw DataError("write_features: expected a [1, n_mels, T] tensor");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot create feature file: " + path);
  write_u32(out, static_cast<std::uint32_t>(feats.dim(1)));
  write_u32(out, static_cast<std::uint32_t>(feats.dim(2)));
  for (Index i = 0; i < feats.numel(); ++i) {
    const float v = static_cast<float>(feats[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
  }
  if (!out) throw DataError("failed writing feature file: " + path);
}

Tensor<double> read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file: " + path);
  const std::uint32_t n_mels = read_u32(in, "n_mels");
  const std::uint32_t t_frames = read_u32(in, "frame count");
  if (n_mels == 0 || t_frames == 0) throw DataError(path + ": empty feature file");
  Tensor<double> feats = Tensor<double>::zeros({1, static_cast<Index>(n_mels), static_cast<Index>(t_frames)});
  for (Index i = 0; i < feats.numel(); ++i) {
    const std::uint32_t bits = read_u32(in, "feature value");
    float v;
    std::memcpy(&v, &bits, 4);
    feats[i] = static_cast<double>(v);
  }
  return feats;
}

}  // namespace jasper
