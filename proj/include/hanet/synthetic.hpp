#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hanet/corpus.hpp"
#include "hanet/data_io.hpp"
#include "hanet/dataset.hpp"

namespace hanet {

struct SyntheticSpec {
  std::size_t k_actions = 8;
  std::size_t k_entities = 16;
  std::size_t train_samples = 200;
  std::size_t val_samples = 50;
  std::size_t min_frames = 12;
  std::size_t max_frames = 24;
  std::size_t dim = 64;  // prototype, feature and word-embedding width
  double sigma = 0.05;
  std::size_t min_actions = 1, max_actions = 2;
  std::size_t min_entities = 2, max_entities = 3;
  std::uint64_t seed = 7;

  // Throws ConfigError on an inconsistent spec.
  void validate() const;
};

// Planted concepts of one sample, as indices into the generator's word lists.
struct PlantedConcepts {
  std::vector<std::size_t> actions;
  std::vector<std::size_t> entities;
};

struct SyntheticSplit {
  FeatureFile features;
  std::vector<CaptionAnnotation> captions;  // caption i describes video i
  std::vector<PlantedConcepts> planted;
};

struct SyntheticDataset {
  std::vector<std::string> action_words;  // verb lemmas
  std::vector<std::string> entity_words;  // noun lemmas
  WordEmbeddings embeddings;
  PosLexicon lexicon;
  SyntheticSplit train, val;
  ConceptVocabulary vocab;  // built from the training captions
};

// Third-person singular form that the lemmatizer maps back to `lemma`.
std::string third_person(const std::string& lemma);

// Frame features are the mean of the prototypes hosted by each frame plus
// Gaussian noise; captions follow "a <noun> <verb>s a <noun>" with an
// optional "and <verb>s" and "with a <noun>" and are parsed with the
// fallback role parser.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

// Writes train.hanf, val.hanf, embeddings.hanf, train.jsonl, val.jsonl,
// vocab.tsv, stopwords.txt and pos_lexicon.txt into `dir` (created if needed).
void write_synthetic(const SyntheticDataset& data, const std::string& dir);

// The in-memory equivalent of write_synthetic followed by load_dataset.
Dataset to_dataset(const SyntheticDataset& data, const DatasetOptions& options);

}  // namespace hanet
