#pragma once

#include <string>
#include <vector>

#include "hanet/corpus.hpp"
#include "hanet/data_io.hpp"

namespace hanet {

struct VideoItem {
  std::string id;
  std::size_t frames = 0;
  std::vector<float> features;  // frames x feature_dim
};

struct CaptionItem {
  CaptionAnnotation ann;
  ConceptLabels labels;
  std::size_t video = 0;  // index into Split::videos
};

struct Split {
  std::vector<VideoItem> videos;
  std::vector<CaptionItem> captions;

  std::vector<std::size_t> caption_to_video() const;
  // Index of the item with this id; throws DataError(kMissing) when absent.
  std::size_t video_index(const std::string& id) const;
  std::size_t caption_index(const std::string& id) const;
};

// Pairs every caption with its video and derives concept labels. A caption
// whose video is not in `features` is a data error.
Split make_split(const FeatureFile& features, const std::vector<CaptionAnnotation>& captions,
                 const ConceptVocabulary& vocab);

struct Dataset {
  std::size_t feature_dim = 0;
  Split train, val;
  WordEmbeddings embeddings;
  ConceptVocabulary vocab;
  RoleDictionary roles;
};

struct DatasetOptions {
  std::size_t k_actions = 512;
  std::size_t k_entities = 1024;
  std::size_t role_types = 16;
  bool lenient = false;
  std::vector<std::string>* diagnostics = nullptr;
};

// Reads a dataset directory: train.hanf, val.hanf, embeddings.hanf,
// train.jsonl, val.jsonl and optionally vocab.tsv and stopwords.txt. Without
// vocab.tsv the vocabulary is built from the training captions. The
// vocabulary is truncated to the requested K.
Dataset load_dataset(const std::string& dir, const DatasetOptions& options);

}  // namespace hanet
