#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qrnn/tensor.h"

namespace qrnn {

// Raw contents of an IDX file with an unsigned-byte payload:
//   0x00 0x00 0x08 rank, then rank big-endian u32 dims, then the bytes.
struct IdxArray {
  Shape shape;
  std::vector<std::uint8_t> bytes;
};

IdxArray read_idx(const std::string& path);
void write_idx(const std::string& path, const IdxArray& array);

// Payload scaled to [0, 1].
Tensor<float> load_idx(const std::string& path);

}  // namespace qrnn
