#pragma once

#include <cstdint>
#include <istream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hanet/corpus.hpp"

namespace hanet {

// Feature file layout (little-endian):
//   "HANF", version u32, sample count u32, dim u32, then per sample:
//   id length u32, UTF-8 id, frame count u32, float32[frames * dim].
inline constexpr std::uint32_t kFeatureVersion = 1;

struct FeatureSample {
  std::string id;
  std::size_t frames = 0;
  std::vector<float> values;  // frames x dim, row-major
};

struct FeatureFile {
  std::size_t dim = 0;
  std::vector<FeatureSample> samples;

  // Index of the sample with this id, or samples.size() when absent.
  std::size_t find(const std::string& id) const;
};

std::string serialize_features(const FeatureFile& file);
FeatureFile parse_features(std::string_view image, const std::string& source);
FeatureFile load_features(const std::string& path);
void save_features(const std::string& path, const FeatureFile& file);

// Word embeddings share the feature layout with one 1 x dim row per word.
struct WordEmbeddings {
  std::size_t dim = 0;
  std::vector<std::string> words;
  std::vector<float> values;  // words.size() x dim
  std::unordered_map<std::string, std::size_t> index;

  void rebuild_index();
};

WordEmbeddings embeddings_from_features(const FeatureFile& file);
FeatureFile embeddings_to_features(const WordEmbeddings& emb);
WordEmbeddings load_embeddings(const std::string& path);
void save_embeddings(const std::string& path, const WordEmbeddings& emb);

// One JSON object per line:
//   {"video_id", "caption_id", "tokens": [...], "verbs": [{"idx"}],
//    "nouns": [{"idx", "verb_idx" (int or null), "role"}]}
// Blank lines are ignored. In lenient mode malformed lines are reported
// through `diagnostics` and skipped; otherwise the first one throws.
std::vector<CaptionAnnotation> parse_annotations(std::istream& in, const std::string& source,
                                                 bool lenient = false,
                                                 std::vector<std::string>* diagnostics = nullptr);
std::vector<CaptionAnnotation> load_annotations(const std::string& path, bool lenient = false,
                                                std::vector<std::string>* diagnostics = nullptr);
std::string annotation_to_json(const CaptionAnnotation& ann);
void save_annotations(const std::string& path, const std::vector<CaptionAnnotation>& anns);

// Vocabulary TSV: header "rank\tlemma\tfrequency\tkind", ranks start at 0
// within each kind, kind is "action" or "entity".
std::string vocabulary_to_tsv(const ConceptVocabulary& vocab);
ConceptVocabulary parse_vocabulary(std::istream& in, const std::string& source);
ConceptVocabulary load_vocabulary(const std::string& path);
void save_vocabulary(const std::string& path, const ConceptVocabulary& vocab);

// One word per line; blank lines and lines starting with '#' are skipped.
std::set<std::string> load_word_set(const std::string& path);
// "word<TAB>verb|noun" per line.
PosLexicon load_pos_lexicon(const std::string& path);
void save_pos_lexicon(const std::string& path, const PosLexicon& lexicon);

// Directory holding the shipped stopword list and POS lexicon.
std::string default_data_dir();
std::set<std::string> default_stopwords();

}  // namespace hanet
