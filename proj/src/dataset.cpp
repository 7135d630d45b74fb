#include "hanet/dataset.hpp"

#include <filesystem>

#include "hanet/error.hpp"

namespace hanet {

std::vector<std::size_t> Split::caption_to_video() const {
  std::vector<std::size_t> out;
  out.reserve(captions.size());
  for (const auto& c : captions) out.push_back(c.video);
  return out;
}

std::size_t Split::video_index(const std::string& id) const {
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (videos[i].id == id) return i;
  }
  throw DataError(DataError::Code::kMissing, "unknown video id '" + id + "'");
}

std::size_t Split::caption_index(const std::string& id) const {
  for (std::size_t i = 0; i < captions.size(); ++i) {
    if (captions[i].ann.caption_id == id) return i;
  }
  throw DataError(DataError::Code::kMissing, "unknown caption id '" + id + "'");
}

Split make_split(const FeatureFile& features, const std::vector<CaptionAnnotation>& captions,
                 const ConceptVocabulary& vocab) {
  Split split;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& s : features.samples) {
    index[s.id] = split.videos.size();
    split.videos.push_back({s.id, s.frames, s.values});
  }
  for (const auto& ann : captions) {
    auto it = index.find(ann.video_id);
    if (it == index.end()) {
      throw DataError(DataError::Code::kMissing, "caption '" + ann.caption_id +
                                                     "' refers to unknown video '" +
                                                     ann.video_id + "'");
    }
    split.captions.push_back({ann, derive_concept_labels(ann, vocab), it->second});
  }
  return split;
}

Dataset load_dataset(const std::string& dir, const DatasetOptions& options) {
  namespace fs = std::filesystem;
  Dataset data;
  const FeatureFile train_f = load_features(dir + "/train.hanf");
  const FeatureFile val_f = load_features(dir + "/val.hanf");
  if (train_f.dim != val_f.dim) {
    throw DataError(DataError::Code::kInvalidHeader,
                    dir + ": train and val feature dims differ (" + std::to_string(train_f.dim) +
                        " vs " + std::to_string(val_f.dim) + ")");
  }
  data.feature_dim = train_f.dim;
  data.embeddings = load_embeddings(dir + "/embeddings.hanf");
  const auto train_a = load_annotations(dir + "/train.jsonl", options.lenient, options.diagnostics);
  const auto val_a = load_annotations(dir + "/val.jsonl", options.lenient, options.diagnostics);
  if (train_a.empty()) throw DataError(DataError::Code::kMissing, dir + ": empty training split");
  if (val_a.empty()) throw DataError(DataError::Code::kMissing, dir + ": empty validation split");

  if (fs::exists(dir + "/vocab.tsv")) {
    data.vocab = load_vocabulary(dir + "/vocab.tsv");
    data.vocab.truncate(options.k_actions, options.k_entities);
  } else {
    const auto stop = fs::exists(dir + "/stopwords.txt") ? load_word_set(dir + "/stopwords.txt")
                                                         : default_stopwords();
    data.vocab = build_vocabulary(train_a, options.k_actions, options.k_entities, stop);
  }
  if (data.vocab.num_actions() == 0 || data.vocab.num_entities() == 0) {
    throw DataError(DataError::Code::kMissing, dir + ": empty concept vocabulary");
  }
  data.roles = RoleDictionary::build(train_a, options.role_types);
  data.train = make_split(train_f, train_a, data.vocab);
  data.val = make_split(val_f, val_a, data.vocab);
  return data;
}

}  // namespace hanet
