#include "qrnn/checkpoint.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace qrnn {

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian hosts are not supported");

template <typename U>
void put_le(std::string& out, U value) {
  unsigned char bytes[sizeof(U)];
  std::memcpy(bytes, &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(std::begin(bytes), std::end(bytes));
  }
  out.append(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get_le(const std::string& in, std::size_t offset) {
  unsigned char bytes[sizeof(U)];
  std::memcpy(bytes, in.data() + offset, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(std::begin(bytes), std::end(bytes));
  }
  U value;
  std::memcpy(&value, bytes, sizeof(U));
  return value;
}

std::size_t element_bytes(DType d) { return d == DType::kF32 ? 4 : 8; }

}  // namespace

const CheckpointEntry& Checkpoint::at(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw DataError("checkpoint has no tensor named " + name);
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["meta"] = ckpt.meta;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& e : ckpt.entries) {
    manifest["tensors"].push_back({{"name", e.name},
                                   {"shape", e.value.shape()},
                                   {"dtype", dtype_name(e.dtype)},
                                   {"quantizable", e.quantizable},
                                   {"trainable", e.trainable}});
  }
  const std::string text = manifest.dump();
  std::string blob;
  blob.push_back(char(kCheckpointVersion));
  put_le<std::uint32_t>(blob, std::uint32_t(text.size()));
  blob += text;
  for (const auto& e : ckpt.entries) {
    for (double v : e.value.data()) {
      if (e.dtype == DType::kF32) {
        put_le<float>(blob, float(v));
      } else {
        put_le<double>(blob, v);
      }
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(blob.data(), std::streamsize(blob.size()));
  if (!out) throw IoError("failed writing " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  const std::string blob((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  if (blob.size() < 5) throw ParseError("checkpoint header truncated", long(blob.size()));
  if (std::uint8_t(blob[0]) != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " +
                         std::to_string(int(std::uint8_t(blob[0]))),
                     0);
  }
  const std::uint32_t length = get_le<std::uint32_t>(blob, 1);
  if (blob.size() < 5 + std::size_t(length)) {
    throw ParseError("checkpoint manifest truncated", long(blob.size()));
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(blob.substr(5, length));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint manifest: ") + e.what(), 5);
  }
  Checkpoint ckpt;
  ckpt.meta = manifest.value("meta", nlohmann::json::object());
  std::size_t offset = 5 + length;
  for (const auto& t : manifest.at("tensors")) {
    CheckpointEntry e;
    e.name = t.at("name").get<std::string>();
    const std::string dtype = t.at("dtype").get<std::string>();
    if (dtype == "f32") {
      e.dtype = DType::kF32;
    } else if (dtype == "f64") {
      e.dtype = DType::kF64;
    } else {
      throw ParseError("unknown dtype " + dtype + " for " + e.name, long(offset));
    }
    e.quantizable = t.at("quantizable").get<bool>();
    e.trainable = t.value("trainable", true);
    const Shape shape = t.at("shape").get<Shape>();
    const std::size_t count = shape_size(shape);
    const std::size_t bytes = count * element_bytes(e.dtype);
    if (offset + bytes > blob.size()) {
      throw ParseError("checkpoint payload truncated in " + e.name, long(blob.size()));
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
      data[i] = e.dtype == DType::kF32
                    ? double(get_le<float>(blob, offset + 4 * i))
                    : get_le<double>(blob, offset + 8 * i);
    }
    offset += bytes;
    e.value = Tensor<double>(shape, std::move(data));
    ckpt.entries.push_back(std::move(e));
  }
  if (offset != blob.size()) {
    throw ParseError("trailing bytes after checkpoint payload", long(offset));
  }
  return ckpt;
}

template <Real T>
Checkpoint snapshot(const ParamStore<T>& store, nlohmann::json meta) {
  Checkpoint ckpt;
  ckpt.meta = std::move(meta);
  for (const auto& p : store.params()) {
    CheckpointEntry e;
    e.name = p.name;
    e.dtype = dtype_of<T>();
    e.quantizable = p.quantizable;
    e.trainable = p.trainable;
    e.value = p.value.template cast<double>();
    ckpt.entries.push_back(std::move(e));
  }
  return ckpt;
}

template <Real T>
void restore(const Checkpoint& ckpt, ParamStore<T>& store) {
  for (auto& p : store.params()) {
    const CheckpointEntry& e = ckpt.at(p.name);
    if (e.value.shape() != p.value.shape()) {
      throw DataError("checkpoint tensor " + p.name + " has shape " +
                      shape_string(e.value.shape()) + ", model expects " +
                      shape_string(p.value.shape()));
    }
    p.value = e.value.template cast<T>();
  }
}

template Checkpoint snapshot(const ParamStore<float>&, nlohmann::json);
template Checkpoint snapshot(const ParamStore<double>&, nlohmann::json);
template void restore(const Checkpoint&, ParamStore<float>&);
template void restore(const Checkpoint&, ParamStore<double>&);

}  // namespace qrnn
