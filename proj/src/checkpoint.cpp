#include "hanet/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "hanet/binary_io.hpp"
#include "hanet/error.hpp"

namespace hanet {

namespace binary {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Code::kIo, path + ": cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataError::Code::kIo, path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(DataError::Code::kIo, path + ": write failed");
}

}  // namespace binary

namespace {

struct Entry {
  Shape shape;
  std::vector<float> values;
};

template <typename Seq>
void put_entry(std::string& out, const std::string& name, const Shape& shape,
               const Seq& values) {
  binary::put_u32(out, static_cast<std::uint32_t>(name.size()));
  binary::put_bytes(out, name);
  binary::put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t e : shape) binary::put_u32(out, static_cast<std::uint32_t>(e));
  for (auto v : values) binary::put_f32(out, static_cast<float>(v));
}

template <typename Dtype>
void assign(const Entry& e, const std::string& name, const Shape& shape,
            std::span<Dtype> dst, const std::string& source) {
  if (e.shape != shape) {
    throw DataError(DataError::Code::kInvalidRecord,
                    source + ": entry '" + name + "' has shape " + shape_str(e.shape) +
                        ", expected " + shape_str(shape));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Dtype>(e.values[i]);
}

}  // namespace

template <typename Dtype>
std::string serialize_checkpoint(const ParamStore<Dtype>& store) {
  std::string out = "HANC";
  binary::put_u32(out, kCheckpointVersion);
  const auto& params = store.parameter_names();
  const auto& buffers = store.buffer_names();
  binary::put_u32(out, static_cast<std::uint32_t>(params.size() * 3 + buffers.size() + 1));
  for (const auto& name : params) {
    const auto& p = store.parameter(name);
    put_entry(out, name, p.shape(), p.values());
  }
  for (const auto& name : buffers) {
    const auto& b = store.buffer(name);
    put_entry(out, "@buffer/" + name, b.shape(), b.values());
  }
  for (const auto& name : params) {
    const auto& m = store.moments(name);
    put_entry(out, "@adam.m/" + name, store.parameter(name).shape(), m.m);
    put_entry(out, "@adam.v/" + name, store.parameter(name).shape(), m.v);
  }
  put_entry(out, "@adam.step", Shape{1},
            std::vector<double>{static_cast<double>(store.step())});
  return out;
}

template <typename Dtype>
void deserialize_checkpoint(std::string_view image, const std::string& source,
                            ParamStore<Dtype>& store) {
  binary::Reader in(image, source);
  if (in.remaining() < 4 || in.bytes(4) != "HANC") {
    throw DataError(DataError::Code::kBadMagic, source + ": not a checkpoint (bad magic)");
  }
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw DataError(DataError::Code::kBadVersion,
                    source + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  std::map<std::string, Entry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = in.u32();
    std::string name(in.bytes(len));
    Entry e;
    const std::uint32_t rank = in.u32();
    for (std::uint32_t r = 0; r < rank; ++r) e.shape.push_back(in.u32());
    e.values.resize(shape_numel(e.shape));
    in.floats(e.values);
    if (!entries.emplace(name, std::move(e)).second) {
      throw DataError(DataError::Code::kDuplicateId, source + ": duplicate entry '" + name + "'");
    }
  }
  if (in.remaining() != 0) {
    throw DataError(DataError::Code::kTrailingData,
                    source + ": " + std::to_string(in.remaining()) + " trailing bytes");
  }
  auto find = [&](const std::string& name) -> const Entry& {
    auto it = entries.find(name);
    if (it == entries.end()) {
      throw DataError(DataError::Code::kMissing, source + ": missing entry '" + name + "'");
    }
    return it->second;
  };
  for (const auto& name : store.parameter_names()) {
    Tensor<Dtype> p = store.parameter(name);
    assign(find(name), name, p.shape(), p.mutable_values(), source);
    auto& m = store.moments(name);
    assign<Dtype>(find("@adam.m/" + name), name, p.shape(), m.m, source);
    assign<Dtype>(find("@adam.v/" + name), name, p.shape(), m.v, source);
  }
  for (const auto& name : store.buffer_names()) {
    Tensor<Dtype>& b = store.buffer(name);
    assign(find("@buffer/" + name), name, b.shape(), b.mutable_values(), source);
  }
  store.set_step(static_cast<std::uint64_t>(find("@adam.step").values.at(0)));
}

template <typename Dtype>
void save_checkpoint(const std::string& path, const ParamStore<Dtype>& store) {
  binary::write_file(path, serialize_checkpoint(store));
}

template <typename Dtype>
void load_checkpoint(const std::string& path, ParamStore<Dtype>& store) {
  const std::string image = binary::read_file(path);
  deserialize_checkpoint(image, path, store);
}

#define HANET_INSTANTIATE_CHECKPOINT(T)                                          \
  template std::string serialize_checkpoint(const ParamStore<T>&);             \
  template void deserialize_checkpoint(std::string_view, const std::string&,   \
                                       ParamStore<T>&);                        \
  template void save_checkpoint(const std::string&, const ParamStore<T>&);     \
  template void load_checkpoint(const std::string&, ParamStore<T>&);

HANET_FOR_EACH_DTYPE(HANET_INSTANTIATE_CHECKPOINT)

}  // namespace hanet
