#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "qrnn/param.h"

namespace qrnn {

// On-disk layout:
//   u8      format version (kCheckpointVersion)
//   u32 LE  manifest length in bytes
//   bytes   manifest, UTF-8 JSON:
//           {"meta": {...}, "tensors": [{"name", "shape", "dtype",
//            "quantizable", "trainable"}, ...]}
//   payload raw little-endian tensor data, one block per manifest entry,
//           in manifest order (f32 = 4 bytes, f64 = 8 bytes per element)
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  DType dtype = DType::kF32;
  bool quantizable = false;
  bool trainable = true;
  // Held in double; f32 payloads convert exactly.
  Tensor<double> value;
};

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry& at(const std::string& name) const;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

template <Real T>
Checkpoint snapshot(const ParamStore<T>& store, nlohmann::json meta);

// Copies matching entries into the store; every store parameter must be
// present with the same shape.
template <Real T>
void restore(const Checkpoint& ckpt, ParamStore<T>& store);

}  // namespace qrnn
