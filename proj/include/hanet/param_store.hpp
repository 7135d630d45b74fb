#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hanet/tensor.hpp"

namespace hanet {

using Rng = std::mt19937_64;

// Named trainable parameters plus non-trainable buffers (batch-norm running
// statistics) and the Adam state for every parameter.
//
// Names are unique across parameters and buffers, and shapes never change
// after creation. Concurrent readers are fine; training needs exclusive
// access.
template <typename Dtype>
class ParamStore {
 public:
  // Uniform Glorot initialization: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
  Tensor<Dtype> glorot(const std::string& name, const Shape& shape,
                       std::size_t fan_in, std::size_t fan_out, Rng& rng);
  Tensor<Dtype> constant(const std::string& name, const Shape& shape, Dtype value);
  Tensor<Dtype> add_parameter(const std::string& name, Tensor<Dtype> value);
  Tensor<Dtype> add_buffer(const std::string& name, Tensor<Dtype> value);

  bool contains(const std::string& name) const;
  const Tensor<Dtype>& parameter(const std::string& name) const;
  Tensor<Dtype>& buffer(const std::string& name);
  const Tensor<Dtype>& buffer(const std::string& name) const;

  // Insertion order.
  const std::vector<std::string>& parameter_names() const { return param_order_; }
  const std::vector<std::string>& buffer_names() const { return buffer_order_; }

  // Allocates every gradient buffer and fills it with zeros.
  void zero_grad();

  struct Moments {
    std::vector<Dtype> m, v;
  };
  Moments& moments(const std::string& name);
  const Moments& moments(const std::string& name) const;
  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t step) { step_ = step; }
  void advance_step() { ++step_; }

  // Copies values (not moments) from another store with identical layout.
  void copy_values_from(const ParamStore& other);

  std::size_t parameter_count() const;

 private:
  void check_new_name(const std::string& name) const;

  std::map<std::string, Tensor<Dtype>> params_;
  std::map<std::string, Tensor<Dtype>> buffers_;
  std::map<std::string, Moments> moments_;
  std::vector<std::string> param_order_;
  std::vector<std::string> buffer_order_;
  std::uint64_t step_ = 0;
};

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update over every parameter, then zeroes the
// gradients. Throws if a parameter has no gradient buffer.
template <typename Dtype>
void adam_step(ParamStore<Dtype>& store, const AdamOptions& options);

}  // namespace hanet
