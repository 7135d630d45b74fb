#include "hanet/param_store.hpp"

#include <cmath>

#include "hanet/error.hpp"

namespace hanet {

template <typename Dtype>
void ParamStore<Dtype>::check_new_name(const std::string& name) const {
  if (name.empty() || name[0] == '@') {
    throw ConfigError("param store: invalid name '" + name + "'");
  }
  if (params_.count(name) || buffers_.count(name)) {
    throw ConfigError("param store: duplicate name '" + name + "'");
  }
}

template <typename Dtype>
Tensor<Dtype> ParamStore<Dtype>::glorot(const std::string& name,
                                        const Shape& shape, std::size_t fan_in,
                                        std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<Dtype> values(shape_numel(shape));
  for (Dtype& v : values) v = static_cast<Dtype>(dist(rng));
  return add_parameter(name, Tensor<Dtype>(shape, std::move(values)));
}

template <typename Dtype>
Tensor<Dtype> ParamStore<Dtype>::constant(const std::string& name,
                                          const Shape& shape, Dtype value) {
  return add_parameter(name, Tensor<Dtype>::full(shape, value));
}

template <typename Dtype>
Tensor<Dtype> ParamStore<Dtype>::add_parameter(const std::string& name,
                                               Tensor<Dtype> value) {
  check_new_name(name);
  value.set_requires_grad(true);
  params_.emplace(name, value);
  param_order_.push_back(name);
  moments_[name] = Moments{std::vector<Dtype>(value.numel(), Dtype(0)),
                           std::vector<Dtype>(value.numel(), Dtype(0))};
  return value;
}

template <typename Dtype>
Tensor<Dtype> ParamStore<Dtype>::add_buffer(const std::string& name,
                                            Tensor<Dtype> value) {
  check_new_name(name);
  buffers_.emplace(name, value);
  buffer_order_.push_back(name);
  return value;
}

template <typename Dtype>
bool ParamStore<Dtype>::contains(const std::string& name) const {
  return params_.count(name) > 0 || buffers_.count(name) > 0;
}

template <typename Dtype>
const Tensor<Dtype>& ParamStore<Dtype>::parameter(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("param store: no parameter '" + name + "'");
  return it->second;
}

template <typename Dtype>
Tensor<Dtype>& ParamStore<Dtype>::buffer(const std::string& name) {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw ConfigError("param store: no buffer '" + name + "'");
  return it->second;
}

template <typename Dtype>
const Tensor<Dtype>& ParamStore<Dtype>::buffer(const std::string& name) const {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw ConfigError("param store: no buffer '" + name + "'");
  return it->second;
}

template <typename Dtype>
void ParamStore<Dtype>::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

template <typename Dtype>
typename ParamStore<Dtype>::Moments& ParamStore<Dtype>::moments(
    const std::string& name) {
  auto it = moments_.find(name);
  if (it == moments_.end()) throw ConfigError("param store: no parameter '" + name + "'");
  return it->second;
}

template <typename Dtype>
const typename ParamStore<Dtype>::Moments& ParamStore<Dtype>::moments(
    const std::string& name) const {
  auto it = moments_.find(name);
  if (it == moments_.end()) throw ConfigError("param store: no parameter '" + name + "'");
  return it->second;
}

template <typename Dtype>
void ParamStore<Dtype>::copy_values_from(const ParamStore& other) {
  auto copy = [](const Tensor<Dtype>& src, Tensor<Dtype>& dst, const std::string& name) {
    if (src.shape() != dst.shape()) {
      throw ShapeError("param store: shape mismatch for '" + name + "': " +
                       shape_str(src.shape()) + " vs " + shape_str(dst.shape()));
    }
    auto out = dst.mutable_values();
    std::copy(src.values().begin(), src.values().end(), out.begin());
  };
  for (auto& [name, p] : params_) copy(other.parameter(name), p, name);
  for (auto& [name, b] : buffers_) copy(other.buffer(name), b, name);
}

template <typename Dtype>
std::size_t ParamStore<Dtype>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += p.numel();
  return n;
}

HANET_INSTANTIATE_CLASS(ParamStore);

template <typename Dtype>
void adam_step(ParamStore<Dtype>& store, const AdamOptions& options) {
  for (const std::string& name : store.parameter_names()) {
    if (!store.parameter(name).has_grad()) {
      throw NumericError("adam_step: parameter '" + name + "' has no gradient");
    }
  }
  store.advance_step();
  const double t = static_cast<double>(store.step());
  const double bc1 = 1.0 - std::pow(options.beta1, t);
  const double bc2 = 1.0 - std::pow(options.beta2, t);
  for (const std::string& name : store.parameter_names()) {
    Tensor<Dtype> p = store.parameter(name);
    auto& mom = store.moments(name);
    auto values = p.mutable_values();
    auto grad = p.mutable_grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      const double m = options.beta1 * mom.m[i] + (1.0 - options.beta1) * g;
      const double v = options.beta2 * mom.v[i] + (1.0 - options.beta2) * g * g;
      mom.m[i] = static_cast<Dtype>(m);
      mom.v[i] = static_cast<Dtype>(v);
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      values[i] = static_cast<Dtype>(values[i] - options.lr * m_hat / (std::sqrt(v_hat) + options.eps));
      grad[i] = Dtype(0);
    }
  }
}

template void adam_step(ParamStore<float>&, const AdamOptions&);
template void adam_step(ParamStore<double>&, const AdamOptions&);

}  // namespace hanet
