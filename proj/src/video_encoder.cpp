#include "hanet/video_encoder.hpp"

#include <algorithm>

#include "hanet/error.hpp"
#include "hanet/ops.hpp"

namespace hanet {

std::size_t mil_tau(std::size_t n) { return std::max<std::size_t>(1, n / 8); }

template <typename Dtype>
Tensor<Dtype> mil_pool(const Tensor<Dtype>& l) {
  if (l.rank() != 2) throw ShapeError("mil_pool: expected N x K, got " + shape_str(l.shape()));
  return ops::mean(ops::topk(l, mil_tau(l.dim(0)), 0), 0);
}

template <typename Dtype>
std::vector<std::size_t> select_reliable_concepts(std::span<const Dtype> p, std::size_t n) {
  return ops::topk_indices(p, n);
}

std::vector<std::size_t> action_window(std::size_t center, std::size_t n) {
  const std::size_t lo = center >= 2 ? center - 2 : 0;
  const std::size_t hi = std::min(n - 1, center + 2);
  std::vector<std::size_t> out;
  for (std::size_t t = lo; t <= hi; ++t) out.push_back(t);
  return out;
}

template <typename Dtype>
Tensor<Dtype> se_block(const Tensor<Dtype>& x, const Tensor<Dtype>& w1, const Tensor<Dtype>& b1,
                       const Tensor<Dtype>& w2, const Tensor<Dtype>& b2) {
  const Tensor<Dtype> squeeze = ops::mean(x, 0, true);
  const Tensor<Dtype> hidden = ops::relu(ops::add(ops::matmul(squeeze, w1), b1));
  const Tensor<Dtype> gate = ops::sigmoid(ops::add(ops::matmul(hidden, w2), b2));
  return ops::mul(x, gate);
}

namespace {

std::vector<double> column(std::span<const double> v, std::size_t rows, std::size_t cols,
                           std::size_t c) {
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = v[r * cols + c];
  return out;
}

template <typename Dtype>
std::vector<double> as_double(const Tensor<Dtype>& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

// Rows of `frames` averaged by a constant selection matrix, so gradients
// reach v_se but not the (non-differentiable) frame choice.
template <typename Dtype>
Tensor<Dtype> average_frames(const Tensor<Dtype>& v_se,
                             const std::vector<std::vector<std::size_t>>& frames) {
  const std::size_t n = v_se.dim(0);
  std::vector<Dtype> weights(frames.size() * n, Dtype(0));
  for (std::size_t r = 0; r < frames.size(); ++r) {
    for (std::size_t t : frames[r]) {
      weights[r * n + t] = Dtype(1) / static_cast<Dtype>(frames[r].size());
    }
  }
  return ops::matmul(Tensor<Dtype>({frames.size(), n}, std::move(weights)), v_se);
}

template <typename Dtype>
void check_local_inputs(const Tensor<Dtype>& v_se, const Tensor<Dtype>& l,
                        const std::vector<std::size_t>& reliable, const char* op) {
  if (v_se.rank() != 2 || l.rank() != 2 || v_se.dim(0) != l.dim(0)) {
    throw ShapeError(std::string(op) + ": frame counts differ, " + shape_str(v_se.shape()) +
                     " vs " + shape_str(l.shape()));
  }
  if (reliable.empty()) throw ShapeError(std::string(op) + ": no reliable concepts");
  for (std::size_t c : reliable) {
    if (c >= l.dim(1)) {
      throw ShapeError(std::string(op) + ": concept " + std::to_string(c) + " out of range");
    }
  }
}

}  // namespace

template <typename Dtype>
Tensor<Dtype> build_local_action(const Tensor<Dtype>& v_se, const Tensor<Dtype>& l,
                                 const std::vector<std::size_t>& reliable) {
  check_local_inputs(v_se, l, reliable, "build_local_action");
  const std::size_t n = l.dim(0), k = l.dim(1);
  const auto lv = as_double(l);
  std::vector<std::vector<std::size_t>> frames;
  for (std::size_t c : reliable) {
    const auto col = column(lv, n, k, c);
    const std::size_t center = ops::topk_indices<double>(col, 1).front();
    frames.push_back(action_window(center, n));
  }
  return average_frames(v_se, frames);
}

template <typename Dtype>
Tensor<Dtype> build_local_entity(const Tensor<Dtype>& v_se, const Tensor<Dtype>& l,
                                 const std::vector<std::size_t>& reliable) {
  check_local_inputs(v_se, l, reliable, "build_local_entity");
  const std::size_t n = l.dim(0), k = l.dim(1);
  const auto lv = as_double(l);
  std::vector<std::vector<std::size_t>> frames;
  for (std::size_t c : reliable) {
    frames.push_back(ops::topk_indices<double>(column(lv, n, k, c), 3));
  }
  return average_frames(v_se, frames);
}

template <typename Dtype>
std::pair<Tensor<Dtype>, Tensor<Dtype>> attention_pool(const Tensor<Dtype>& x,
                                                       const Tensor<Dtype>& w) {
  const Tensor<Dtype> alpha = ops::softmax(ops::matmul(x, w), 0);
  return {ops::matmul(ops::transpose(alpha), x), alpha};
}

template <typename Dtype>
VideoEncoder<Dtype>::VideoEncoder(ParamStore<Dtype>& store, const ModelConfig& config, Rng& rng)
    : store_(store), config_(config) {
  const std::size_t din = config.feature_dim, d = config.dim, r = config.se_width();
  for (const char* level : {"a", "e", "g"}) {
    const std::string name = std::string("video.fc_") + level;
    store.glorot(name + ".w", {din, d}, din, d, rng);
    store.constant(name + ".b", {d}, Dtype(0));
  }
  const std::pair<const char*, std::size_t> heads[] = {{"a", config.k_actions},
                                                       {"e", config.k_entities}};
  for (const auto& [level, k] : heads) {
    const std::size_t kernel = std::string(level) == "a" ? 5 : 1;
    const std::string head = std::string("video.head_") + level;
    // No bias: the batch normalization that follows would cancel it.
    store.glorot(head + ".w", {kernel, d, k}, kernel * d, kernel * k, rng);
    const std::string bn = std::string("video.bn_") + level;
    store.constant(bn + ".gamma", {k}, Dtype(1));
    store.constant(bn + ".beta", {k}, Dtype(0));
    store.add_buffer(bn + ".running_mean", Tensor<Dtype>::full({k}, Dtype(0)));
    store.add_buffer(bn + ".running_var", Tensor<Dtype>::full({k}, Dtype(1)));
    const std::string se = std::string("video.se_") + level;
    store.glorot(se + ".w1", {d, r}, d, r, rng);
    store.constant(se + ".b1", {r}, Dtype(0));
    store.glorot(se + ".w2", {r, d}, r, d, rng);
    store.constant(se + ".b2", {d}, Dtype(0));
  }
  store.glorot("video.att.w", {d, 1}, d, 1, rng);
}

template <typename Dtype>
Tensor<Dtype> VideoEncoder<Dtype>::affine(const Tensor<Dtype>& x, const std::string& name) const {
  return ops::add(ops::matmul(x, p(name + ".w")), p(name + ".b"));
}

template <typename Dtype>
std::vector<VideoEncodings<Dtype>> VideoEncoder<Dtype>::encode(
    const std::vector<Tensor<Dtype>>& features, bool training) {
  if (features.empty()) return {};
  std::vector<VideoEncodings<Dtype>> out(features.size());
  std::vector<Tensor<Dtype>> pre_a, pre_e;
  const auto zero_a = Tensor<Dtype>::full({config_.k_actions}, Dtype(0));
  const auto zero_e = Tensor<Dtype>::full({config_.k_entities}, Dtype(0));
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& x = features[i];
    if (x.rank() != 2 || x.dim(1) != config_.feature_dim) {
      throw ShapeError("video encoder: expected N x " + std::to_string(config_.feature_dim) +
                       " features, got " + shape_str(x.shape()));
    }
    auto& enc = out[i];
    enc.v_ind_a = affine(x, "video.fc_a");
    enc.v_ind_e = affine(x, "video.fc_e");
    enc.v_ind_g = affine(x, "video.fc_g");
    pre_a.push_back(ops::conv1d(enc.v_ind_a, p("video.head_a.w"), zero_a));
    pre_e.push_back(ops::conv1d(enc.v_ind_e, p("video.head_e.w"), zero_e));
  }

  ops::BatchNormOptions bn;
  bn.training = training;
  auto heads = [&](const std::vector<Tensor<Dtype>>& pre, const std::string& level) {
    const Tensor<Dtype> normed = ops::batch_norm(
        ops::concat(pre, 0), p("video.bn_" + level + ".gamma"), p("video.bn_" + level + ".beta"),
        store_.buffer("video.bn_" + level + ".running_mean"),
        store_.buffer("video.bn_" + level + ".running_var"), bn);
    return ops::sigmoid(normed);
  };
  const Tensor<Dtype> conf_a = heads(pre_a, "a");
  const Tensor<Dtype> conf_e = heads(pre_e, "e");

  std::size_t offset = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    auto& enc = out[i];
    const std::size_t n = features[i].dim(0);
    enc.l_v_a = ops::slice(conf_a, 0, offset, n);
    enc.l_v_e = ops::slice(conf_e, 0, offset, n);
    offset += n;

    enc.v_se_a = se_block(enc.v_ind_a, p("video.se_a.w1"), p("video.se_a.b1"),
                          p("video.se_a.w2"), p("video.se_a.b2"));
    enc.v_se_e = se_block(enc.v_ind_e, p("video.se_e.w1"), p("video.se_e.b1"),
                          p("video.se_e.w2"), p("video.se_e.b2"));
    enc.p_v_a = mil_pool(enc.l_v_a);
    enc.p_v_e = mil_pool(enc.l_v_e);
    enc.reliable_a = select_reliable_concepts(enc.p_v_a.values(), config_.n_actions);
    enc.reliable_e = select_reliable_concepts(enc.p_v_e.values(), config_.n_entities);
    enc.v_loc_a = build_local_action(enc.v_se_a, enc.l_v_a, enc.reliable_a);
    enc.v_loc_e = build_local_entity(enc.v_se_e, enc.l_v_e, enc.reliable_e);
    std::tie(enc.v_glo_g, enc.alpha) = attention_pool(enc.v_ind_g, p("video.att.w"));
  }
  return out;
}

#define HANET_INSTANTIATE_VIDEO(T)                                                          \
  template Tensor<T> mil_pool(const Tensor<T>&);                                            \
  template std::vector<std::size_t> select_reliable_concepts(std::span<const T>,            \
                                                             std::size_t);                  \
  template Tensor<T> se_block(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                              const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> build_local_action(const Tensor<T>&, const Tensor<T>&,                 \
                                        const std::vector<std::size_t>&);                   \
  template Tensor<T> build_local_entity(const Tensor<T>&, const Tensor<T>&,                 \
                                        const std::vector<std::size_t>&);                   \
  template std::pair<Tensor<T>, Tensor<T>> attention_pool(const Tensor<T>&, const Tensor<T>&);

HANET_FOR_EACH_DTYPE(HANET_INSTANTIATE_VIDEO)
HANET_INSTANTIATE_CLASS(VideoEncoder);

}  // namespace hanet
