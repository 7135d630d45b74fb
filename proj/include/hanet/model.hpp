#pragma once

#include <vector>

#include "hanet/alignment.hpp"
#include "hanet/dataset.hpp"
#include "hanet/param_store.hpp"
#include "hanet/retrieval.hpp"
#include "hanet/text_encoder.hpp"
#include "hanet/video_encoder.hpp"

namespace hanet {

template <typename Dtype>
Tensor<Dtype> features_tensor(const VideoItem& video, std::size_t dim);

template <typename Dtype>
class HanetModel {
 public:
  HanetModel(const ModelConfig& config, const WordEmbeddings& embeddings,
             const RoleDictionary& roles);
  HanetModel(const HanetModel&) = delete;
  HanetModel& operator=(const HanetModel&) = delete;

  const ModelConfig& config() const { return config_; }
  void set_alignment(const AlignmentOptions& align) { config_.align = align; }
  ParamStore<Dtype>& store() { return store_; }
  const ParamStore<Dtype>& store() const { return store_; }

  std::vector<VideoEncodings<Dtype>> encode_videos(const std::vector<const VideoItem*>& videos,
                                                   bool training);
  std::vector<TextEncodings<Dtype>> encode_captions(
      const std::vector<const CaptionAnnotation*>& captions, bool training);

  SimilarityBundle<Dtype> similarity(const VideoEncodings<Dtype>& video,
                                     const TextEncodings<Dtype>& text) const;

  // Inference scores (c_l + c_p) / 2 for every video/caption pair of a split,
  // in eval mode without gradient recording, spread over `threads` workers.
  ScoreMatrix score_matrix(const Split& split, std::size_t threads);

 private:
  ModelConfig config_;
  ParamStore<Dtype> store_;
  Rng rng_;
  VideoEncoder<Dtype> video_;
  TextEncoder<Dtype> text_;
};

}  // namespace hanet
