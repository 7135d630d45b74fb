#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace hanet {

struct NounRecord {
  std::size_t index = 0;
  std::optional<std::size_t> verb_index;  // governing verb token, if any
  std::string role;                       // semantic role label; empty if no governor
};

// A tokenized caption with its semantic-role parse.
struct CaptionAnnotation {
  std::string video_id;
  std::string caption_id;
  std::vector<std::string> tokens;
  std::vector<std::size_t> verb_positions;
  std::vector<NounRecord> nouns;

  std::size_t length() const { return tokens.size(); }
  std::vector<std::size_t> noun_positions() const;
};

// Throws DataError when an index is out of range, a noun coincides with a
// verb, or a governing verb is not listed among the verbs.
void validate_annotation(const CaptionAnnotation& ann);

enum class PartOfSpeech { kVerb, kNoun };

// Rule-based lemma: irregular table, then suffix rules, repeated until the
// word stops changing. Input is expected lowercase.
std::string lemmatize(const std::string& word, PartOfSpeech pos);

std::string to_lower(std::string word);
bool is_punctuation(const std::string& token);

struct ConceptVocabulary {
  std::vector<std::string> actions;   // ranked verb lemmas
  std::vector<std::string> entities;  // ranked noun lemmas
  std::vector<std::uint64_t> action_frequency;
  std::vector<std::uint64_t> entity_frequency;
  std::unordered_map<std::string, std::size_t> action_index;
  std::unordered_map<std::string, std::size_t> entity_index;
  std::vector<std::string> warnings;

  std::size_t num_actions() const { return actions.size(); }
  std::size_t num_entities() const { return entities.size(); }
  void rebuild_index();
  // Keeps the first k entries of each list.
  void truncate(std::size_t k_actions, std::size_t k_entities);
};

// Counts verb and noun lemmas over the annotations (stopwords and
// punctuation removed) and keeps the most frequent k of each, ties broken
// lexicographically. Requesting more than available truncates with a
// warning.
ConceptVocabulary build_vocabulary(const std::vector<CaptionAnnotation>& annotations,
                                   std::size_t k_actions, std::size_t k_entities,
                                   const std::set<std::string>& stopwords);

struct ConceptLabels {
  std::vector<float> actions;   // multi-hot, length K_a
  std::vector<float> entities;  // multi-hot, length K_e
};

ConceptLabels derive_concept_labels(const CaptionAnnotation& ann,
                                    const ConceptVocabulary& vocab);

// word -> part of speech, used only by the fallback parser.
using PosLexicon = std::unordered_map<std::string, PartOfSpeech>;

// Tags tokens through the lexicon (direct form, then lemma) and links each
// noun to the nearest preceding verb, or the nearest following verb when
// none precedes, with role "arg". Punctuation and stopwords are never tagged.
CaptionAnnotation fallback_role_parse(const std::vector<std::string>& tokens,
                                      const PosLexicon& lexicon,
                                      const std::set<std::string>& stopwords = {});

// Edge-type dictionary for the role graph. Type 0 is reserved for
// event-verb edges (and event-noun edges for ungoverned nouns), types
// 1..K-2 are the most frequent role labels, type K-1 is the catch-all.
class RoleDictionary {
 public:
  static constexpr std::size_t kEventType = 0;

  RoleDictionary() = default;
  RoleDictionary(std::size_t num_types, std::vector<std::string> labels);

  static RoleDictionary build(const std::vector<CaptionAnnotation>& annotations,
                              std::size_t num_types);

  std::size_t num_types() const { return num_types_; }
  std::size_t catch_all() const { return num_types_ - 1; }
  std::size_t type_of(const std::string& role) const;
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::size_t num_types_ = 3;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace hanet
