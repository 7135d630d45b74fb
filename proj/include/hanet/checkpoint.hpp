#pragma once

#include <string>

#include "hanet/param_store.hpp"

namespace hanet {

// Checkpoint layout (little-endian):
//   "HANC", version u32, entry count u32, then per entry:
//   name length u32, UTF-8 name, rank u32, extents u32[rank], float32 values.
// Parameters use their own names. Reserved prefixes:
//   "@buffer/<name>"  batch-norm running statistics
//   "@adam.m/<name>", "@adam.v/<name>"  Adam moments
//   "@adam.step"      step counter stored as a one-element tensor
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Dtype>
std::string serialize_checkpoint(const ParamStore<Dtype>& store);

// Restores into a store with the same layout. Every parameter and buffer in
// the store must be present in the image with the same shape.
template <typename Dtype>
void deserialize_checkpoint(std::string_view image, const std::string& source,
                            ParamStore<Dtype>& store);

template <typename Dtype>
void save_checkpoint(const std::string& path, const ParamStore<Dtype>& store);
template <typename Dtype>
void load_checkpoint(const std::string& path, ParamStore<Dtype>& store);

}  // namespace hanet
