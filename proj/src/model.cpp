#include "hanet/model.hpp"

#include "hanet/error.hpp"
#include "hanet/parallel.hpp"

namespace hanet {

template <typename Dtype>
Tensor<Dtype> features_tensor(const VideoItem& video, std::size_t dim) {
  if (video.features.size() != video.frames * dim) {
    throw ShapeError("video '" + video.id + "': " + std::to_string(video.features.size()) +
                     " feature values for " + std::to_string(video.frames) + " frames of width " +
                     std::to_string(dim));
  }
  return Tensor<Dtype>({video.frames, dim},
                       std::vector<Dtype>(video.features.begin(), video.features.end()));
}

template <typename Dtype>
HanetModel<Dtype>::HanetModel(const ModelConfig& config, const WordEmbeddings& embeddings,
                              const RoleDictionary& roles)
    : config_(config),
      rng_(config.seed),
      video_(store_, config_, rng_),
      text_(store_, config_, embeddings, roles, rng_) {}

template <typename Dtype>
std::vector<VideoEncodings<Dtype>> HanetModel<Dtype>::encode_videos(
    const std::vector<const VideoItem*>& videos, bool training) {
  std::vector<Tensor<Dtype>> features;
  features.reserve(videos.size());
  for (const VideoItem* v : videos) features.push_back(features_tensor<Dtype>(*v, config_.feature_dim));
  return video_.encode(features, training);
}

template <typename Dtype>
std::vector<TextEncodings<Dtype>> HanetModel<Dtype>::encode_captions(
    const std::vector<const CaptionAnnotation*>& captions, bool training) {
  return text_.encode(captions, training);
}

template <typename Dtype>
SimilarityBundle<Dtype> HanetModel<Dtype>::similarity(const VideoEncodings<Dtype>& video,
                                                      const TextEncodings<Dtype>& text) const {
  return align(make_video_view(video, config_.align.levels),
               make_text_view(text, config_.align.levels), config_.align);
}

template <typename Dtype>
ScoreMatrix HanetModel<Dtype>::score_matrix(const Split& split, std::size_t threads) {
  const std::size_t nv = split.videos.size(), nc = split.captions.size();
  std::vector<VideoView<Dtype>> vviews(nv);
  std::vector<TextView<Dtype>> tviews(nc);
  parallel_for(nv, threads, [&](std::size_t i) {
    NoGradGuard guard;
    vviews[i] = make_video_view(encode_videos({&split.videos[i]}, false).front(),
                                config_.align.levels);
  });
  parallel_for(nc, threads, [&](std::size_t i) {
    NoGradGuard guard;
    tviews[i] = make_text_view(encode_captions({&split.captions[i].ann}, false).front(),
                               config_.align.levels);
  });
  ScoreMatrix scores(nv, nc);
  parallel_for(nv, threads, [&](std::size_t v) {
    NoGradGuard guard;
    for (std::size_t c = 0; c < nc; ++c) {
      scores.at(v, c) = static_cast<double>(align(vviews[v], tviews[c], config_.align).score());
    }
  });
  return scores;
}

#define HANET_INSTANTIATE_FEATURES(T) template Tensor<T> features_tensor(const VideoItem&, std::size_t);
HANET_FOR_EACH_DTYPE(HANET_INSTANTIATE_FEATURES)
HANET_INSTANTIATE_CLASS(HanetModel);

}  // namespace hanet
