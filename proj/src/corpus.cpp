#include "hanet/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "hanet/error.hpp"

namespace hanet {

std::vector<std::size_t> CaptionAnnotation::noun_positions() const {
  std::vector<std::size_t> out;
  out.reserve(nouns.size());
  for (const auto& n : nouns) out.push_back(n.index);
  return out;
}

void validate_annotation(const CaptionAnnotation& ann) {
  auto fail = [&](const std::string& what) {
    throw DataError(DataError::Code::kInvalidRecord,
                    "caption '" + ann.caption_id + "': " + what);
  };
  const std::size_t m = ann.tokens.size();
  std::unordered_set<std::size_t> verbs;
  for (std::size_t v : ann.verb_positions) {
    if (v >= m) fail("verb index " + std::to_string(v) + " out of token range");
    if (!verbs.insert(v).second) fail("duplicate verb index " + std::to_string(v));
  }
  std::unordered_set<std::size_t> nouns;
  for (const auto& n : ann.nouns) {
    if (n.index >= m) fail("noun index " + std::to_string(n.index) + " out of token range");
    if (verbs.count(n.index)) fail("token " + std::to_string(n.index) + " is both verb and noun");
    if (!nouns.insert(n.index).second) fail("duplicate noun index " + std::to_string(n.index));
    if (n.verb_index && !verbs.count(*n.verb_index)) {
      fail("noun " + std::to_string(n.index) + " governed by non-verb index " +
           std::to_string(*n.verb_index));
    }
  }
}

std::string to_lower(std::string word) {
  for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return word;
}

bool is_punctuation(const std::string& token) {
  if (token.empty()) return true;
  return std::all_of(token.begin(), token.end(), [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
  });
}

namespace {

const std::unordered_map<std::string, std::string>& irregular_verbs() {
  static const std::unordered_map<std::string, std::string> table = {
      {"is", "be"}, {"are", "be"}, {"was", "be"}, {"were", "be"}, {"am", "be"},
      {"been", "be"}, {"being", "be"}, {"has", "have"}, {"had", "have"},
      {"having", "have"}, {"does", "do"}, {"did", "do"}, {"done", "do"},
      {"doing", "do"}, {"goes", "go"}, {"went", "go"}, {"gone", "go"},
      {"going", "go"}, {"ran", "run"}, {"sang", "sing"}, {"sung", "sing"},
      {"swam", "swim"}, {"ate", "eat"}, {"eaten", "eat"}, {"drank", "drink"},
      {"drunk", "drink"}, {"drove", "drive"}, {"driven", "drive"},
      {"rode", "ride"}, {"ridden", "ride"}, {"threw", "throw"},
      {"thrown", "throw"}, {"caught", "catch"}, {"wrote", "write"},
      {"written", "write"}, {"took", "take"}, {"taken", "take"},
      {"made", "make"}, {"saw", "see"}, {"seen", "see"}, {"came", "come"},
      {"gave", "give"}, {"given", "give"}, {"got", "get"}, {"gotten", "get"},
      {"sat", "sit"}, {"stood", "stand"}, {"held", "hold"}, {"told", "tell"},
      {"said", "say"}, {"fell", "fall"}, {"fallen", "fall"}, {"fought", "fight"},
      {"flew", "fly"}, {"flown", "fly"}, {"kept", "keep"}, {"left", "leave"},
      {"met", "meet"}, {"paid", "pay"}, {"shot", "shoot"}, {"spoke", "speak"},
      {"spoken", "speak"}, {"taught", "teach"}, {"thought", "think"},
      {"wore", "wear"}, {"worn", "wear"}, {"won", "win"}, {"dies", "die"},
      {"died", "die"}, {"dying", "die"}, {"lies", "lie"}, {"lied", "lie"},
      {"lying", "lie"}, {"ties", "tie"}, {"tied", "tie"}, {"tying", "tie"},
      {"uses", "use"}, {"used", "use"}, {"using", "use"}, {"added", "add"},
      {"bought", "buy"}, {"brought", "bring"}, {"built", "build"},
      {"began", "begin"}, {"begun", "begin"}, {"broke", "break"},
      {"broken", "break"}, {"chose", "choose"}, {"chosen", "choose"},
      {"drew", "draw"}, {"drawn", "draw"}, {"felt", "feel"}, {"found", "find"},
      {"grew", "grow"}, {"grown", "grow"}, {"heard", "hear"}, {"knew", "know"},
      {"known", "know"}, {"led", "lead"}, {"lost", "lose"}, {"sold", "sell"},
      {"sent", "send"}, {"slept", "sleep"}, {"spent", "spend"},
      {"stole", "steal"}, {"stolen", "steal"}, {"swung", "swing"},
      {"woke", "wake"}, {"hid", "hide"}, {"hidden", "hide"}, {"blew", "blow"},
      {"blown", "blow"}, {"dug", "dig"}, {"fed", "feed"}, {"shook", "shake"},
      {"shaken", "shake"}, {"shone", "shine"}, {"sank", "sink"}, {"slid", "slide"},
      {"spun", "spin"}, {"struck", "strike"}, {"tore", "tear"}, {"torn", "tear"},
      {"bit", "bite"}, {"bitten", "bite"}, {"ran", "run"}};
  return table;
}

const std::unordered_map<std::string, std::string>& irregular_nouns() {
  static const std::unordered_map<std::string, std::string> table = {
      {"men", "man"}, {"women", "woman"}, {"children", "child"},
      {"people", "person"}, {"feet", "foot"}, {"teeth", "tooth"},
      {"mice", "mouse"}, {"geese", "goose"}, {"knives", "knife"},
      {"wives", "wife"}, {"lives", "life"}, {"oxen", "ox"}, {"buses", "bus"},
      {"horses", "horse"}, {"houses", "house"}, {"nurses", "nurse"},
      {"vases", "vase"}, {"cases", "case"}, {"bases", "base"}};
  return table;
}

const std::unordered_set<std::string>& protected_words() {
  static const std::unordered_set<std::string> words = {
      "news", "species", "series", "clothes", "pants", "jeans", "gymnastics",
      "physics", "politics", "mathematics", "athletics", "embed", "this", "always"};
  return words;
}

bool is_vowel(const std::string& w, std::size_t i) {
  const char c = w[i];
  if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') return true;
  return c == 'y' && i > 0 && !is_vowel(w, i - 1);
}

bool has_vowel(const std::string& w) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (is_vowel(w, i)) return true;
  }
  return false;
}

std::size_t vowel_groups(const std::string& w) {
  std::size_t groups = 0;
  bool in_group = false;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const bool v = is_vowel(w, i);
    if (v && !in_group) ++groups;
    in_group = v;
  }
  return groups;
}

bool ends_with(const std::string& w, const std::string& suffix) {
  return w.size() >= suffix.size() &&
         w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Repairs a verb stem after removing -ing or -ed.
std::string repair_stem(std::string stem) {
  const std::size_t n = stem.size();
  if (n >= 2 && stem[n - 1] == stem[n - 2] && !is_vowel(stem, n - 1)) {
    const char c = stem[n - 1];
    if (c != 'l' && c != 's' && c != 'z') stem.pop_back();
    return stem;
  }
  const char last = stem.back();
  if (last == 'c' || last == 'v' || last == 'z' || last == 'u') return stem + "e";
  // Single-syllable consonant-vowel-consonant endings take back their "e"
  // (mak -> make, smil -> smile).
  if (n >= 3 && !is_vowel(stem, n - 3) && is_vowel(stem, n - 2) &&
      !is_vowel(stem, n - 1) && last != 'w' && last != 'x' && last != 'y' &&
      vowel_groups(stem) == 1) {
    return stem + "e";
  }
  return stem;
}

bool strips_plain_s(const std::string& w) {
  return ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") &&
         !ends_with(w, "is");
}

std::string sibilant_es(const std::string& w) {
  for (const char* s : {"sses", "ches", "shes", "xes", "zzes", "oes"}) {
    if (ends_with(w, s)) return w.substr(0, w.size() - 2);
  }
  return {};
}

std::string verb_rule(const std::string& w) {
  if (w.size() <= 3) return w;
  if (w.size() > 4 && ends_with(w, "ies")) return w.substr(0, w.size() - 3) + "y";
  if (auto s = sibilant_es(w); !s.empty()) return s;
  if (strips_plain_s(w)) return w.substr(0, w.size() - 1);
  if (w.size() > 4 && ends_with(w, "ing")) {
    const std::string stem = w.substr(0, w.size() - 3);
    if (stem.size() >= 2 && has_vowel(stem)) return repair_stem(stem);
    return w;
  }
  if (w.size() > 4 && ends_with(w, "ed")) {
    if (ends_with(w, "eed")) return w;
    if (ends_with(w, "ied")) return w.substr(0, w.size() - 3) + "y";
    const std::string stem = w.substr(0, w.size() - 2);
    if (stem.size() >= 2 && has_vowel(stem)) return repair_stem(stem);
  }
  return w;
}

std::string noun_rule(const std::string& w) {
  if (w.size() <= 3) return w;
  if (w.size() > 4 && ends_with(w, "ies")) return w.substr(0, w.size() - 3) + "y";
  if (w.size() > 4 && ends_with(w, "ves")) return w.substr(0, w.size() - 3) + "f";
  if (auto s = sibilant_es(w); !s.empty()) return s;
  if (strips_plain_s(w)) return w.substr(0, w.size() - 1);
  return w;
}

}  // namespace

std::string lemmatize(const std::string& word, PartOfSpeech pos) {
  const auto& irregular = pos == PartOfSpeech::kVerb ? irregular_verbs() : irregular_nouns();
  std::string w = word;
  // Every rule shortens the word, so the loop terminates; iterating to a
  // fixed point keeps the lemmatizer idempotent.
  while (true) {
    if (auto it = irregular.find(w); it != irregular.end()) return it->second;
    if (protected_words().count(w)) return w;
    std::string next = pos == PartOfSpeech::kVerb ? verb_rule(w) : noun_rule(w);
    if (next == w) return w;
    w = std::move(next);
  }
}

void ConceptVocabulary::rebuild_index() {
  action_index.clear();
  entity_index.clear();
  for (std::size_t i = 0; i < actions.size(); ++i) action_index[actions[i]] = i;
  for (std::size_t i = 0; i < entities.size(); ++i) entity_index[entities[i]] = i;
}

void ConceptVocabulary::truncate(std::size_t k_actions, std::size_t k_entities) {
  if (actions.size() > k_actions) {
    actions.resize(k_actions);
    action_frequency.resize(k_actions);
  }
  if (entities.size() > k_entities) {
    entities.resize(k_entities);
    entity_frequency.resize(k_entities);
  }
  rebuild_index();
}

namespace {

void rank_top(const std::map<std::string, std::uint64_t>& counts, std::size_t k,
              std::vector<std::string>& lemmas, std::vector<std::uint64_t>& freq) {
  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > k) ranked.resize(k);
  for (auto& [lemma, n] : ranked) {
    lemmas.push_back(lemma);
    freq.push_back(n);
  }
}

}  // namespace

ConceptVocabulary build_vocabulary(const std::vector<CaptionAnnotation>& annotations,
                                   std::size_t k_actions, std::size_t k_entities,
                                   const std::set<std::string>& stopwords) {
  if (annotations.empty()) {
    throw DataError(DataError::Code::kMissing, "build_vocabulary: no annotations");
  }
  std::map<std::string, std::uint64_t> verbs, nouns;
  auto count = [&](const std::string& token, PartOfSpeech pos,
                   std::map<std::string, std::uint64_t>& into) {
    const std::string lower = to_lower(token);
    if (is_punctuation(lower) || stopwords.count(lower)) return;
    const std::string lemma = lemmatize(lower, pos);
    if (lemma.empty() || stopwords.count(lemma)) return;
    ++into[lemma];
  };
  for (const auto& ann : annotations) {
    for (std::size_t v : ann.verb_positions) count(ann.tokens.at(v), PartOfSpeech::kVerb, verbs);
    for (const auto& n : ann.nouns) count(ann.tokens.at(n.index), PartOfSpeech::kNoun, nouns);
  }
  ConceptVocabulary vocab;
  rank_top(verbs, k_actions, vocab.actions, vocab.action_frequency);
  rank_top(nouns, k_entities, vocab.entities, vocab.entity_frequency);
  if (vocab.actions.size() < k_actions) {
    vocab.warnings.push_back("requested " + std::to_string(k_actions) +
                             " action concepts, only " +
                             std::to_string(vocab.actions.size()) + " distinct verbs");
  }
  if (vocab.entities.size() < k_entities) {
    vocab.warnings.push_back("requested " + std::to_string(k_entities) +
                             " entity concepts, only " +
                             std::to_string(vocab.entities.size()) + " distinct nouns");
  }
  vocab.rebuild_index();
  return vocab;
}

ConceptLabels derive_concept_labels(const CaptionAnnotation& ann,
                                    const ConceptVocabulary& vocab) {
  ConceptLabels labels;
  labels.actions.assign(vocab.num_actions(), 0.0f);
  labels.entities.assign(vocab.num_entities(), 0.0f);
  for (std::size_t v : ann.verb_positions) {
    const auto lemma = lemmatize(to_lower(ann.tokens.at(v)), PartOfSpeech::kVerb);
    if (auto it = vocab.action_index.find(lemma); it != vocab.action_index.end()) {
      labels.actions[it->second] = 1.0f;
    }
  }
  for (const auto& n : ann.nouns) {
    const auto lemma = lemmatize(to_lower(ann.tokens.at(n.index)), PartOfSpeech::kNoun);
    if (auto it = vocab.entity_index.find(lemma); it != vocab.entity_index.end()) {
      labels.entities[it->second] = 1.0f;
    }
  }
  return labels;
}

CaptionAnnotation fallback_role_parse(const std::vector<std::string>& tokens,
                                      const PosLexicon& lexicon,
                                      const std::set<std::string>& stopwords) {
  if (tokens.empty()) {
    throw DataError(DataError::Code::kInvalidRecord, "fallback_role_parse: empty caption");
  }
  CaptionAnnotation ann;
  ann.tokens = tokens;
  std::vector<std::size_t> noun_idx;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string w = to_lower(tokens[i]);
    if (is_punctuation(w) || stopwords.count(w)) continue;
    std::optional<PartOfSpeech> tag;
    if (auto it = lexicon.find(w); it != lexicon.end()) {
      tag = it->second;
    } else if (auto v = lexicon.find(lemmatize(w, PartOfSpeech::kVerb));
               v != lexicon.end() && v->second == PartOfSpeech::kVerb) {
      tag = PartOfSpeech::kVerb;
    } else if (auto n = lexicon.find(lemmatize(w, PartOfSpeech::kNoun));
               n != lexicon.end() && n->second == PartOfSpeech::kNoun) {
      tag = PartOfSpeech::kNoun;
    }
    if (!tag) continue;
    if (*tag == PartOfSpeech::kVerb) {
      ann.verb_positions.push_back(i);
    } else {
      noun_idx.push_back(i);
    }
  }
  for (std::size_t i : noun_idx) {
    NounRecord rec;
    rec.index = i;
    for (std::size_t v : ann.verb_positions) {
      if (v < i) rec.verb_index = v;
    }
    if (!rec.verb_index) {
      for (std::size_t v : ann.verb_positions) {
        if (v > i) {
          rec.verb_index = v;
          break;
        }
      }
    }
    if (rec.verb_index) rec.role = "arg";
    ann.nouns.push_back(rec);
  }
  return ann;
}

RoleDictionary::RoleDictionary(std::size_t num_types, std::vector<std::string> labels)
    : num_types_(num_types), labels_(std::move(labels)) {
  if (num_types_ < 2) {
    throw ConfigError("role dictionary: need at least 2 edge types, got " +
                      std::to_string(num_types_));
  }
  if (labels_.size() > num_types_ - 2) labels_.resize(num_types_ - 2);
  for (std::size_t i = 0; i < labels_.size(); ++i) index_[labels_[i]] = i + 1;
}

RoleDictionary RoleDictionary::build(const std::vector<CaptionAnnotation>& annotations,
                                     std::size_t num_types) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& ann : annotations) {
    for (const auto& n : ann.nouns) {
      if (n.verb_index && !n.role.empty()) ++counts[n.role];
    }
  }
  std::vector<std::string> labels;
  std::vector<std::uint64_t> freq;
  rank_top(counts, num_types >= 2 ? num_types - 2 : 0, labels, freq);
  return RoleDictionary(num_types, std::move(labels));
}

std::size_t RoleDictionary::type_of(const std::string& role) const {
  auto it = index_.find(role);
  return it == index_.end() ? catch_all() : it->second;
}

}  // namespace hanet
