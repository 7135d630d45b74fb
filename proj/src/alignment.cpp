#include "hanet/alignment.hpp"

#include "hanet/error.hpp"
#include "hanet/ops.hpp"

namespace hanet {

namespace {

template <typename Dtype>
Tensor<Dtype> as_row(const Tensor<Dtype>& x) {
  return x.rank() == 2 ? x : ops::reshape(x, {1, x.numel()});
}

template <typename Dtype>
Tensor<Dtype> normalized_t(const Tensor<Dtype>& x) {
  return x.defined() ? ops::transpose(ops::l2_normalize_rows(x)) : Tensor<Dtype>();
}

}  // namespace

template <typename Dtype>
Tensor<Dtype> cosine_matrix(const Tensor<Dtype>& a, const Tensor<Dtype>& b) {
  return ops::matmul(ops::l2_normalize_rows(a), ops::transpose(ops::l2_normalize_rows(b)));
}

template <typename Dtype>
Tensor<Dtype> stacked_attention_from_cosine(const Tensor<Dtype>& c, double lambda, bool normalize) {
  if (c.rank() != 2) {
    throw ShapeError("stacked_attention: expected a P x Q matrix, got " + shape_str(c.shape()));
  }
  const Tensor<Dtype> pos = ops::relu(c);
  const Tensor<Dtype> norm =
      ops::sqrt(ops::add_scalar(ops::sum(ops::mul(pos, pos), 1, true), Dtype(1e-12)));
  const Tensor<Dtype> gamma =
      ops::softmax(ops::scale(ops::div(pos, norm), static_cast<Dtype>(lambda)), 1);
  const Tensor<Dtype> total = ops::sum(ops::mul(gamma, c));
  return normalize ? ops::scale(total, Dtype(1) / static_cast<Dtype>(c.dim(0))) : total;
}

template <typename Dtype>
Tensor<Dtype> stacked_attention_similarity(const Tensor<Dtype>& video_rows,
                                           const Tensor<Dtype>& text_rows, double lambda,
                                           bool normalize) {
  return stacked_attention_from_cosine(cosine_matrix(video_rows, text_rows), lambda, normalize);
}

template <typename Dtype>
Tensor<Dtype> jaccard_similarity(const Tensor<Dtype>& p_v, const Tensor<Dtype>& p_s) {
  if (p_v.shape() != p_s.shape()) {
    throw ShapeError("jaccard_similarity: shapes differ, " + shape_str(p_v.shape()) + " vs " +
                     shape_str(p_s.shape()));
  }
  double denom = 0.0;
  for (auto* t : {&p_v, &p_s}) {
    for (Dtype v : t->values()) {
      if (v < Dtype(0)) throw NumericError("jaccard_similarity: negative confidence");
    }
  }
  for (std::size_t i = 0; i < p_v.numel(); ++i) denom += std::max(p_v.at(i), p_s.at(i));
  if (denom == 0.0) return Tensor<Dtype>::scalar(Dtype(0));
  return ops::div(ops::sum(ops::minimum(p_v, p_s)), ops::sum(ops::maximum(p_v, p_s)));
}

template <typename Dtype>
Tensor<Dtype> global_similarity(const Tensor<Dtype>& v, const Tensor<Dtype>& s) {
  return ops::reshape(cosine_matrix(as_row(v), as_row(s)), {1});
}

template <typename Dtype>
Tensor<Dtype> mean_of(const std::vector<Tensor<Dtype>>& parts) {
  if (parts.empty()) throw ShapeError("mean_of: no parts");
  if (parts.size() == 1) return parts.front();
  return ops::mean(ops::stack_scalars(parts));
}

template <typename Dtype>
VideoView<Dtype> make_video_view(const VideoEncodings<Dtype>& enc, const LevelToggles& levels) {
  VideoView<Dtype> view;
  if (levels.individual) {
    view.ind_a = ops::l2_normalize_rows(enc.v_ind_a);
    view.ind_e = ops::l2_normalize_rows(enc.v_ind_e);
  }
  if (levels.local) {
    view.loc_a = ops::l2_normalize_rows(enc.v_loc_a);
    view.loc_e = ops::l2_normalize_rows(enc.v_loc_e);
  }
  if (levels.global) view.glo = ops::l2_normalize_rows(enc.v_glo_g);
  view.p_a = enc.p_v_a;
  view.p_e = enc.p_v_e;
  return view;
}

template <typename Dtype>
TextView<Dtype> make_text_view(const TextEncodings<Dtype>& enc, const LevelToggles& levels) {
  TextView<Dtype> view;
  if (levels.individual) {
    view.ind_a_t = normalized_t(enc.s_ind_a);
    view.ind_e_t = normalized_t(enc.s_ind_e);
  }
  if (levels.local) {
    view.loc_a_t = normalized_t(enc.s_loc_a);
    view.loc_e_t = normalized_t(enc.s_loc_e);
  }
  if (levels.global) view.glo_t = normalized_t(enc.s_glo_g);
  view.p_a = enc.p_s_a;
  view.p_e = enc.p_s_e;
  return view;
}

template <typename Dtype>
SimilarityBundle<Dtype> align(const VideoView<Dtype>& video, const TextView<Dtype>& text,
                              const AlignmentOptions& options) {
  if (!options.levels.any()) throw ConfigError("alignment: every level is disabled");
  SimilarityBundle<Dtype> out;
  auto stacked = [&](const Tensor<Dtype>& v, const Tensor<Dtype>& t_t) {
    if (!v.defined() || !t_t.defined()) return Tensor<Dtype>();
    return stacked_attention_from_cosine(ops::matmul(v, t_t), options.lambda,
                                         options.stack_sum_normalize);
  };
  out.c_ind_a = stacked(video.ind_a, text.ind_a_t);
  out.c_ind_e = stacked(video.ind_e, text.ind_e_t);
  out.c_loc_a = stacked(video.loc_a, text.loc_a_t);
  out.c_loc_e = stacked(video.loc_e, text.loc_e_t);
  if (video.glo.defined() && text.glo_t.defined()) {
    out.c_glo_g = ops::reshape(ops::matmul(video.glo, text.glo_t), {1});
  }
  std::vector<Tensor<Dtype>> latent;
  for (const auto* c : {&out.c_ind_a, &out.c_ind_e, &out.c_loc_a, &out.c_loc_e, &out.c_glo_g}) {
    if (c->defined()) latent.push_back(*c);
  }
  out.c_l = latent.empty() ? Tensor<Dtype>::scalar(Dtype(0)) : mean_of(latent);
  out.c_p_a = jaccard_similarity(video.p_a, text.p_a);
  out.c_p_e = jaccard_similarity(video.p_e, text.p_e);
  out.c_p = mean_of(std::vector<Tensor<Dtype>>{out.c_p_a, out.c_p_e});
  return out;
}

#define HANET_INSTANTIATE_ALIGN(T)                                                       \
  template Tensor<T> cosine_matrix(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> stacked_attention_from_cosine(const Tensor<T>&, double, bool);      \
  template Tensor<T> stacked_attention_similarity(const Tensor<T>&, const Tensor<T>&,    \
                                                  double, bool);                         \
  template Tensor<T> jaccard_similarity(const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> global_similarity(const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> mean_of(const std::vector<Tensor<T>>&);                             \
  template VideoView<T> make_video_view(const VideoEncodings<T>&, const LevelToggles&);  \
  template TextView<T> make_text_view(const TextEncodings<T>&, const LevelToggles&);     \
  template SimilarityBundle<T> align(const VideoView<T>&, const TextView<T>&,            \
                                     const AlignmentOptions&);

HANET_FOR_EACH_DTYPE(HANET_INSTANTIATE_ALIGN)

}  // namespace hanet
