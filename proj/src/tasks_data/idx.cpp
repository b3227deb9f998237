#include "qrnn/idx.h"

#include <fstream>
#include <iterator>

namespace qrnn {

namespace {

constexpr std::uint8_t kUnsignedByte = 0x08;

}  // namespace

IdxArray read_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open IDX file " + path);
  const std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(in)),
                                       std::istreambuf_iterator<char>());
  if (blob.size() < 4) throw ParseError(path + ": IDX header truncated", long(blob.size()));
  if (blob[0] != 0 || blob[1] != 0) throw ParseError(path + ": bad IDX magic", 0);
  if (blob[2] != kUnsignedByte) {
    throw ParseError(path + ": unsupported IDX element type " + std::to_string(blob[2]), 2);
  }
  const std::size_t rank = blob[3];
  if (rank == 0) throw ParseError(path + ": IDX rank must be at least 1", 3);
  const std::size_t header = 4 + 4 * rank;
  if (blob.size() < header) throw ParseError(path + ": IDX dims truncated", long(blob.size()));
  IdxArray a;
  std::size_t count = 1;
  for (std::size_t d = 0; d < rank; ++d) {
    const std::size_t o = 4 + 4 * d;
    const std::size_t dim = (std::size_t(blob[o]) << 24) | (std::size_t(blob[o + 1]) << 16) |
                            (std::size_t(blob[o + 2]) << 8) | std::size_t(blob[o + 3]);
    if (dim == 0) throw ParseError(path + ": IDX dimension " + std::to_string(d) + " is zero", long(o));
    a.shape.push_back(dim);
    count *= dim;
  }
  if (blob.size() < header + count) {
    throw ParseError(path + ": IDX payload truncated", long(blob.size()));
  }
  if (blob.size() > header + count) {
    throw ParseError(path + ": trailing bytes after IDX payload", long(header + count));
  }
  a.bytes.assign(blob.begin() + long(header), blob.end());
  return a;
}

void write_idx(const std::string& path, const IdxArray& array) {
  if (array.shape.empty() || array.shape.size() > 255) {
    throw ShapeError("IDX rank must be in [1, 255]");
  }
  if (shape_size(array.shape) != array.bytes.size()) {
    throw ShapeError("IDX payload of " + std::to_string(array.bytes.size()) +
                     " bytes does not fill " + shape_string(array.shape));
  }
  std::vector<std::uint8_t> blob{0, 0, kUnsignedByte, std::uint8_t(array.shape.size())};
  for (std::size_t d : array.shape) {
    if (d > 0xffffffffu) throw ShapeError("IDX dimension exceeds 32 bits");
    for (int s = 24; s >= 0; s -= 8) blob.push_back(std::uint8_t((d >> s) & 0xff));
  }
  blob.insert(blob.end(), array.bytes.begin(), array.bytes.end());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(blob.data()), std::streamsize(blob.size()));
  if (!out) throw IoError("failed writing " + path);
}

Tensor<float> load_idx(const std::string& path) {
  IdxArray a = read_idx(path);
  Tensor<float> t(a.shape);
  for (std::size_t i = 0; i < a.bytes.size(); ++i) t[i] = float(a.bytes[i]) / 255.0f;
  return t;
}

}  // namespace qrnn
