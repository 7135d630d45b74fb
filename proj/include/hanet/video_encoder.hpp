#pragma once

#include <span>
#include <string>
#include <vector>

#include "hanet/model_config.hpp"
#include "hanet/param_store.hpp"
#include "hanet/tensor.hpp"

namespace hanet {

// All representations of one video. Row counts: N frames, n_a / n_e
// reliable concepts. v_glo_g is stored as a 1 x D row.
template <typename Dtype>
struct VideoEncodings {
  Tensor<Dtype> v_ind_a, v_ind_e, v_ind_g;  // N x D
  Tensor<Dtype> l_v_a, l_v_e;               // N x K_a, N x K_e
  Tensor<Dtype> v_se_a, v_se_e;             // N x D
  Tensor<Dtype> p_v_a, p_v_e;               // K_a, K_e
  Tensor<Dtype> v_loc_a, v_loc_e;           // n_a x D, n_e x D
  Tensor<Dtype> v_glo_g;                    // 1 x D
  Tensor<Dtype> alpha;                      // N x 1 frame attention
  std::vector<std::size_t> reliable_a, reliable_e;
};

// tau = max(1, floor(N / 8)).
std::size_t mil_tau(std::size_t n);

// Mean of the tau largest entries of every column: N x K -> K.
template <typename Dtype>
Tensor<Dtype> mil_pool(const Tensor<Dtype>& l);

// Indices of the n largest confidences, descending, ties by lower index.
// n is clipped to the number of concepts.
template <typename Dtype>
std::vector<std::size_t> select_reliable_concepts(std::span<const Dtype> p, std::size_t n);

// Frames [t-2, t+2] clipped to [0, n).
std::vector<std::size_t> action_window(std::size_t center, std::size_t n);

template <typename Dtype>
Tensor<Dtype> se_block(const Tensor<Dtype>& x, const Tensor<Dtype>& w1, const Tensor<Dtype>& b1,
                       const Tensor<Dtype>& w2, const Tensor<Dtype>& b2);

// One row per reliable concept: mean of v_se over the 5-frame window around
// the frame where that concept's confidence peaks.
template <typename Dtype>
Tensor<Dtype> build_local_action(const Tensor<Dtype>& v_se, const Tensor<Dtype>& l,
                                 const std::vector<std::size_t>& reliable);

// One row per reliable concept: mean of v_se over the 3 most confident
// frames (all frames when N < 3).
template <typename Dtype>
Tensor<Dtype> build_local_entity(const Tensor<Dtype>& v_se, const Tensor<Dtype>& l,
                                 const std::vector<std::size_t>& reliable);

// Attention pooling over rows: returns (1 x D pooled row, N x 1 weights).
template <typename Dtype>
std::pair<Tensor<Dtype>, Tensor<Dtype>> attention_pool(const Tensor<Dtype>& x,
                                                       const Tensor<Dtype>& w);

template <typename Dtype>
class VideoEncoder {
 public:
  VideoEncoder(ParamStore<Dtype>& store, const ModelConfig& config, Rng& rng);

  // Encodes a batch of N_i x D_in feature matrices. Batch normalization in
  // the concept heads pools statistics over all frames of the batch; in
  // training mode the running statistics are updated.
  std::vector<VideoEncodings<Dtype>> encode(const std::vector<Tensor<Dtype>>& features,
                                            bool training);

 private:
  Tensor<Dtype> affine(const Tensor<Dtype>& x, const std::string& name) const;
  const Tensor<Dtype>& p(const std::string& name) const { return store_.parameter(name); }

  ParamStore<Dtype>& store_;
  ModelConfig config_;
};

}  // namespace hanet
