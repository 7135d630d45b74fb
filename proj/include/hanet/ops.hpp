#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hanet/tensor.hpp"

// Differentiable primitives. Every op records what it needs for an exact
// reverse pass; shape errors name the op and the offending shapes.
namespace hanet::ops {

// Elementwise arithmetic with numpy-style broadcasting.
template <typename Dtype>
Tensor<Dtype> add(const Tensor<Dtype>& a, const Tensor<Dtype>& b);
template <typename Dtype>
Tensor<Dtype> sub(const Tensor<Dtype>& a, const Tensor<Dtype>& b);
template <typename Dtype>
Tensor<Dtype> mul(const Tensor<Dtype>& a, const Tensor<Dtype>& b);
template <typename Dtype>
Tensor<Dtype> div(const Tensor<Dtype>& a, const Tensor<Dtype>& b);
// Ties send the gradient to `a`.
template <typename Dtype>
Tensor<Dtype> minimum(const Tensor<Dtype>& a, const Tensor<Dtype>& b);
template <typename Dtype>
Tensor<Dtype> maximum(const Tensor<Dtype>& a, const Tensor<Dtype>& b);

template <typename Dtype>
Tensor<Dtype> add_scalar(const Tensor<Dtype>& x, Dtype value);
template <typename Dtype>
Tensor<Dtype> scale(const Tensor<Dtype>& x, Dtype factor);

template <typename Dtype>
Tensor<Dtype> relu(const Tensor<Dtype>& x);
template <typename Dtype>
Tensor<Dtype> sigmoid(const Tensor<Dtype>& x);
template <typename Dtype>
Tensor<Dtype> tanh(const Tensor<Dtype>& x);
template <typename Dtype>
Tensor<Dtype> exp(const Tensor<Dtype>& x);
template <typename Dtype>
Tensor<Dtype> log(const Tensor<Dtype>& x);
template <typename Dtype>
Tensor<Dtype> sqrt(const Tensor<Dtype>& x);
// Gradient passes through strictly inside [lo, hi] and is zero outside.
template <typename Dtype>
Tensor<Dtype> clamp(const Tensor<Dtype>& x, Dtype lo, Dtype hi);

template <typename Dtype>
Tensor<Dtype> matmul(const Tensor<Dtype>& a, const Tensor<Dtype>& b);
template <typename Dtype>
Tensor<Dtype> transpose(const Tensor<Dtype>& x);
template <typename Dtype>
Tensor<Dtype> reshape(const Tensor<Dtype>& x, Shape shape);

// Reductions. The full reductions return shape [1].
template <typename Dtype>
Tensor<Dtype> sum(const Tensor<Dtype>& x);
template <typename Dtype>
Tensor<Dtype> sum(const Tensor<Dtype>& x, std::size_t axis, bool keepdim = false);
template <typename Dtype>
Tensor<Dtype> mean(const Tensor<Dtype>& x);
template <typename Dtype>
Tensor<Dtype> mean(const Tensor<Dtype>& x, std::size_t axis, bool keepdim = false);

template <typename Dtype>
Tensor<Dtype> softmax(const Tensor<Dtype>& x, std::size_t axis);

// Row-wise softmax of a 2-D tensor restricted to entries where mask != 0.
// Rows with no admissible entry produce zeros.
template <typename Dtype>
Tensor<Dtype> masked_softmax(const Tensor<Dtype>& x,
                             const std::vector<std::uint8_t>& mask);

// The k largest values along `axis`, in descending order; ties prefer the
// lower index.
template <typename Dtype>
Tensor<Dtype> topk(const Tensor<Dtype>& x, std::size_t k, std::size_t axis);

// Indices of the k largest entries of `values`, descending, ties by index.
template <typename Dtype>
std::vector<std::size_t> topk_indices(std::span<const Dtype> values,
                                      std::size_t k);

template <typename Dtype>
Tensor<Dtype> concat(const std::vector<Tensor<Dtype>>& parts, std::size_t axis);
template <typename Dtype>
Tensor<Dtype> slice(const Tensor<Dtype>& x, std::size_t axis, std::size_t start,
                    std::size_t length);
template <typename Dtype>
Tensor<Dtype> gather_rows(const Tensor<Dtype>& x,
                          const std::vector<std::size_t>& rows);
// Packs single-element tensors into a 1-D tensor.
template <typename Dtype>
Tensor<Dtype> stack_scalars(const std::vector<Tensor<Dtype>>& scalars);

// Temporal convolution over a (time x in_channels) input with zero "same"
// padding. weight is [kernel, in_channels, out_channels]; kernel must be odd.
template <typename Dtype>
Tensor<Dtype> conv1d(const Tensor<Dtype>& x, const Tensor<Dtype>& weight,
                     const Tensor<Dtype>& bias);

struct BatchNormOptions {
  bool training = true;
  double momentum = 0.9;  // weight kept by the running statistics
  double eps = 1e-5;
};

// Per-channel normalization of a (rows x channels) input. In training mode
// statistics come from the rows and the running buffers are updated; in
// eval mode the running buffers are used.
template <typename Dtype>
Tensor<Dtype> batch_norm(const Tensor<Dtype>& x, const Tensor<Dtype>& gamma,
                         const Tensor<Dtype>& beta, Tensor<Dtype>& running_mean,
                         Tensor<Dtype>& running_var,
                         const BatchNormOptions& options);

// Divides each row by its L2 norm; rows with norm below eps are divided by
// eps instead, so an all-zero row maps to zero.
template <typename Dtype>
Tensor<Dtype> l2_normalize_rows(const Tensor<Dtype>& x, Dtype eps = Dtype(1e-8));

}  // namespace hanet::ops
