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

// Checkpoint container, little-endian throughout:
//
//   magic "JSPRCKPT" (8 bytes)
//   u32  version (currently 1)
//   u8   scalar width in bytes (4 = float, 8 = double)
//   u64  global step
//   u32  config text length, followed by the canonical model config text
//   u32  parameter count, then per tensor:
//        u16 name length, name bytes, u8 rank, u64 dims[rank], payload
//   u32  buffer count, same tensor encoding (batch-norm running statistics)
//   u8   optimizer flag; if 1:
//        u16+bytes optimizer kind ("novograd" or "sgd"), u64 step,
//        u32 layer count, then per layer: u16+bytes name,
//        u8 scalar-state flag (+ scalar payload), tensor state
//
// Files are written to "<path>.tmp" and renamed into place, so a crash
// mid-write never leaves a truncated file at the final path.

#ifndef JASPER_CHECKPOINT_H_
#define JASPER_CHECKPOINT_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jasper/error.h"
#include "jasper/model.h"
#include "jasper/optim.h"
#include "jasper/tensor.h"

namespace jasper {
namespace model {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

// Optimizer state in checkpoint form.  NovoGrad layers carry a scalar second
// moment and the first-moment tensor; SGD layers carry the velocity tensor.
template <typename Scalar>
struct OptimizerSnapshot {
  struct Layer {
    bool has_scalar = false;
    Scalar scalar = Scalar(0);
    Tensor<Scalar> tensor;
  };
  std::string kind;  // "novograd" or "sgd"
  std::int64_t step = 0;
  std::map<std::string, Layer> layers;
};

template <typename Scalar>
OptimizerSnapshot<Scalar> snapshot_optimizer(
    const optim::NovoGrad<Scalar>& opt) {
  OptimizerSnapshot<Scalar> snap;
  snap.kind = "novograd";
  snap.step = opt.step_count();
  for (const auto& [name, state] : opt.layers()) {
    snap.layers[name] = {true, state.v, state.m};
  }
  return snap;
}

template <typename Scalar>
OptimizerSnapshot<Scalar> snapshot_optimizer(
    const optim::SgdMomentum<Scalar>& opt) {
  OptimizerSnapshot<Scalar> snap;
  snap.kind = "sgd";
  snap.step = opt.step_count();
  for (const auto& [name, state] : opt.layers()) {
    snap.layers[name] = {false, Scalar(0), state.velocity};
  }
  return snap;
}

template <typename Scalar>
void restore_optimizer(const OptimizerSnapshot<Scalar>& snap,
                       optim::NovoGrad<Scalar>& opt) {
  if (snap.kind != "novograd") {
    throw DataError("checkpoint holds '" + snap.kind +
                    "' optimizer state, expected 'novograd'");
  }
  std::map<std::string, typename optim::NovoGrad<Scalar>::LayerState> layers;
  for (const auto& [name, layer] : snap.layers) {
    layers[name] = {layer.scalar, layer.tensor};
  }
  opt.restore(snap.step, std::move(layers));
}

template <typename Scalar>
void restore_optimizer(const OptimizerSnapshot<Scalar>& snap,
                       optim::SgdMomentum<Scalar>& opt) {
  if (snap.kind != "sgd") {
    throw DataError("checkpoint holds '" + snap.kind +
                    "' optimizer state, expected 'sgd'");
  }
  std::map<std::string, typename optim::SgdMomentum<Scalar>::LayerState>
      layers;
  for (const auto& [name, layer] : snap.layers) {
    layers[name] = {layer.tensor};
  }
  opt.restore(snap.step, std::move(layers));
}

namespace detail {

constexpr char kMagic[8] = {'J', 'S', 'P', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw DataError("cannot write '" + path.string() + "'");
  }
  void bytes(const void* p, size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) { bytes(&v, 2); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void str16(const std::string& s) {
    if (s.size() > 0xFFFF) throw DataError("checkpoint name too long");
    u16(static_cast<std::uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void close() {
    out_.flush();
    if (!out_) throw DataError("failed writing '" + path_.string() + "'");
    out_.close();
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path)
      : in_(path, std::ios::binary) {
    if (!in_) throw DataError("cannot open '" + path.string() + "'");
  }
  void bytes(void* p, size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw DataError("truncated checkpoint");
    }
  }
  std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
  std::uint16_t u16() { std::uint16_t v; bytes(&v, 2); return v; }
  std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
  std::string str16() {
    std::string s(u16(), '\0');
    bytes(s.data(), s.size());
    return s;
  }
  bool at_eof() {
    in_.peek();
    return in_.eof();
  }

 private:
  std::ifstream in_;
};

template <typename Scalar>
void write_tensor(Writer& w, const std::string& name,
                  const Tensor<Scalar>& t) {
  w.str16(name);
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (Index d : t.shape()) w.u64(static_cast<std::uint64_t>(d));
  w.bytes(t.data(), sizeof(Scalar) * static_cast<size_t>(t.numel()));
}

template <typename Scalar>
std::pair<std::string, Tensor<Scalar>> read_tensor(Reader& r) {
  const std::string name = r.str16();
  const int rank = r.u8();
  Shape shape;
  std::int64_t numel = 1;
  for (int i = 0; i < rank; ++i) {
    const std::uint64_t d = r.u64();
    // Guard against absurd dims from corrupt files before allocating.
    if (d == 0 || d > (1ull << 40)) throw DataError("corrupt tensor shape");
    shape.push_back(static_cast<Index>(d));
    numel *= static_cast<std::int64_t>(d);
    if (numel > (std::int64_t{1} << 40)) {
      throw DataError("corrupt tensor shape");
    }
  }
  Tensor<Scalar> t = Tensor<Scalar>::zeros(shape);
  r.bytes(t.data(), sizeof(Scalar) * static_cast<size_t>(t.numel()));
  return {name, std::move(t)};
}

}  // namespace detail

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path,
                     const Model<Scalar>& model, std::uint64_t global_step,
                     const OptimizerSnapshot<Scalar>* optimizer = nullptr) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    detail::Writer w(tmp);
    w.bytes(detail::kMagic, sizeof(detail::kMagic));
    w.u32(detail::kVersion);
    w.u8(static_cast<std::uint8_t>(sizeof(Scalar)));
    w.u64(global_step);
    const std::string cfg = config_text(model.config());
    w.u32(static_cast<std::uint32_t>(cfg.size()));
    w.bytes(cfg.data(), cfg.size());

    w.u32(static_cast<std::uint32_t>(model.params().size()));
    for (const auto& [name, tensor] : model.params()) {
      detail::write_tensor(w, name, tensor);
    }
    w.u32(static_cast<std::uint32_t>(model.buffers().size()));
    for (const auto& [name, tensor] : model.buffers()) {
      detail::write_tensor(w, name, tensor);
    }

    w.u8(optimizer != nullptr ? 1 : 0);
    if (optimizer != nullptr) {
      w.str16(optimizer->kind);
      w.u64(static_cast<std::uint64_t>(optimizer->step));
      w.u32(static_cast<std::uint32_t>(optimizer->layers.size()));
      for (const auto& [name, layer] : optimizer->layers) {
        w.str16(name);
        w.u8(layer.has_scalar ? 1 : 0);
        if (layer.has_scalar) w.bytes(&layer.scalar, sizeof(Scalar));
        detail::write_tensor(w, "", layer.tensor);
      }
    }
    w.close();
  }
  std::filesystem::rename(tmp, path);
}

template <typename Scalar>
struct LoadedCheckpoint {
  Model<Scalar> model;
  std::uint64_t global_step = 0;
  std::optional<OptimizerSnapshot<Scalar>> optimizer;
};

template <typename Scalar>
LoadedCheckpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
  detail::Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, detail::kMagic, sizeof(magic)) != 0) {
    throw DataError("'" + path.string() + "' is not a checkpoint file");
  }
  const std::uint32_t version = r.u32();
  if (version != detail::kVersion) {
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version) + " (expected " +
                    std::to_string(detail::kVersion) + ")");
  }
  const std::uint8_t width = r.u8();
  if (width != sizeof(Scalar)) {
    throw DataError("checkpoint stores " + std::to_string(width * 8) +
                    "-bit scalars, expected " +
                    std::to_string(sizeof(Scalar) * 8) + "-bit");
  }
  const std::uint64_t global_step = r.u64();
  std::string cfg_text(r.u32(), '\0');
  r.bytes(cfg_text.data(), cfg_text.size());
  const ModelConfig cfg = parse_config(cfg_text);

  std::map<std::string, Tensor<Scalar>> params;
  const std::uint32_t n_params = r.u32();
  for (std::uint32_t i = 0; i < n_params; ++i) {
    auto [name, tensor] = detail::read_tensor<Scalar>(r);
    if (!params.emplace(name, std::move(tensor)).second) {
      throw DataError("duplicate parameter '" + name + "' in checkpoint");
    }
  }
  std::map<std::string, Tensor<Scalar>> buffers;
  const std::uint32_t n_buffers = r.u32();
  for (std::uint32_t i = 0; i < n_buffers; ++i) {
    auto [name, tensor] = detail::read_tensor<Scalar>(r);
    if (!buffers.emplace(name, std::move(tensor)).second) {
      throw DataError("duplicate buffer '" + name + "' in checkpoint");
    }
  }

  LoadedCheckpoint<Scalar> out{
      Model<Scalar>(cfg, std::move(params), std::move(buffers)), global_step,
      std::nullopt};

  if (r.u8() != 0) {
    OptimizerSnapshot<Scalar> snap;
    snap.kind = r.str16();
    snap.step = static_cast<std::int64_t>(r.u64());
    const std::uint32_t n_layers = r.u32();
    for (std::uint32_t i = 0; i < n_layers; ++i) {
      const std::string name = r.str16();
      typename OptimizerSnapshot<Scalar>::Layer layer;
      layer.has_scalar = r.u8() != 0;
      if (layer.has_scalar) r.bytes(&layer.scalar, sizeof(Scalar));
      auto [unused, tensor] = detail::read_tensor<Scalar>(r);
      layer.tensor = std::move(tensor);
      snap.layers.emplace(name, std::move(layer));
    }
    out.optimizer = std::move(snap);
  }
  if (!r.at_eof()) {
    throw DataError("trailing bytes after checkpoint payload");
  }
  return out;
}

}  // namespace model
}  // namespace jasper

#endif  // JASPER_CHECKPOINT_H_
