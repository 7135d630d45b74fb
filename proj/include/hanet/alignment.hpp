#pragma once

#include "hanet/model_config.hpp"
#include "hanet/tensor.hpp"
#include "hanet/text_encoder.hpp"
#include "hanet/video_encoder.hpp"

namespace hanet {

// Cosine similarity of every row of a against every row of b; zero rows
// give 0.
template <typename Dtype>
Tensor<Dtype> cosine_matrix(const Tensor<Dtype>& a, const Tensor<Dtype>& b);

// Stacked attention over a P x Q cosine matrix c: positive parts are
// L2-normalized across each row, gamma = softmax_j(lambda * c_hat), and the
// result is sum_ij gamma_ij c_ij, divided by P when `normalize` is set.
template <typename Dtype>
Tensor<Dtype> stacked_attention_from_cosine(const Tensor<Dtype>& c, double lambda, bool normalize);

template <typename Dtype>
Tensor<Dtype> stacked_attention_similarity(const Tensor<Dtype>& video_rows,
                                           const Tensor<Dtype>& text_rows, double lambda,
                                           bool normalize);

// sum(min) / sum(max); 0 when both vectors are all zero. Throws
// NumericError on a negative entry.
template <typename Dtype>
Tensor<Dtype> jaccard_similarity(const Tensor<Dtype>& p_v, const Tensor<Dtype>& p_s);

template <typename Dtype>
Tensor<Dtype> global_similarity(const Tensor<Dtype>& v, const Tensor<Dtype>& s);

// Mean of the given scalar tensors.
template <typename Dtype>
Tensor<Dtype> mean_of(const std::vector<Tensor<Dtype>>& parts);

// Row-normalized representations, computed once per encoding and shared by
// every pair the encoding takes part in. Text-side matrices are transposed.
template <typename Dtype>
struct VideoView {
  Tensor<Dtype> ind_a, ind_e, loc_a, loc_e, glo;
  Tensor<Dtype> p_a, p_e;
};

template <typename Dtype>
struct TextView {
  Tensor<Dtype> ind_a_t, ind_e_t, loc_a_t, loc_e_t, glo_t;  // undefined when empty
  Tensor<Dtype> p_a, p_e;
};

template <typename Dtype>
VideoView<Dtype> make_video_view(const VideoEncodings<Dtype>& enc, const LevelToggles& levels);
template <typename Dtype>
TextView<Dtype> make_text_view(const TextEncodings<Dtype>& enc, const LevelToggles& levels);

// Per-pair similarity components. A latent component is undefined when its
// level is switched off or the caption has no verbs / nouns for it.
template <typename Dtype>
struct SimilarityBundle {
  Tensor<Dtype> c_ind_a, c_ind_e, c_loc_a, c_loc_e, c_glo_g;
  Tensor<Dtype> c_p_a, c_p_e;
  Tensor<Dtype> c_l, c_p;

  // (c_l + c_p) / 2
  Dtype score() const { return (c_l.item() + c_p.item()) / Dtype(2); }
};

// Throws ConfigError when every level is disabled.
template <typename Dtype>
SimilarityBundle<Dtype> align(const VideoView<Dtype>& video, const TextView<Dtype>& text,
                              const AlignmentOptions& options);

}  // namespace hanet
