#include "hanet/data_io.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "hanet/binary_io.hpp"
#include "hanet/error.hpp"

namespace hanet {

using nlohmann::json;

std::size_t FeatureFile::find(const std::string& id) const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].id == id) return i;
  }
  return samples.size();
}

std::string serialize_features(const FeatureFile& file) {
  std::string out = "HANF";
  binary::put_u32(out, kFeatureVersion);
  binary::put_u32(out, static_cast<std::uint32_t>(file.samples.size()));
  binary::put_u32(out, static_cast<std::uint32_t>(file.dim));
  for (const auto& s : file.samples) {
    if (s.values.size() != s.frames * file.dim) {
      throw DataError(DataError::Code::kInvalidRecord,
                      "sample '" + s.id + "' has " + std::to_string(s.values.size()) +
                          " values, expected " + std::to_string(s.frames * file.dim));
    }
    binary::put_u32(out, static_cast<std::uint32_t>(s.id.size()));
    binary::put_bytes(out, s.id);
    binary::put_u32(out, static_cast<std::uint32_t>(s.frames));
    for (float v : s.values) binary::put_f32(out, v);
  }
  return out;
}

FeatureFile parse_features(std::string_view image, const std::string& source) {
  binary::Reader in(image, source);
  if (in.remaining() < 4 || in.bytes(4) != "HANF") {
    throw DataError(DataError::Code::kBadMagic, source + ": not a feature file (bad magic)");
  }
  const std::uint32_t version = in.u32();
  if (version != kFeatureVersion) {
    throw DataError(DataError::Code::kBadVersion,
                    source + ": unsupported feature file version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  FeatureFile file;
  file.dim = in.u32();
  if (file.dim == 0) {
    throw DataError(DataError::Code::kInvalidHeader, source + ": feature dim is 0");
  }
  std::unordered_set<std::string> seen;
  file.samples.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureSample s;
    s.id = std::string(in.bytes(in.u32()));
    s.frames = in.u32();
    if (s.frames == 0) {
      throw DataError(DataError::Code::kInvalidHeader,
                      source + ": sample '" + s.id + "' has zero frames");
    }
    if (!seen.insert(s.id).second) {
      throw DataError(DataError::Code::kDuplicateId,
                      source + ": duplicate sample id '" + s.id + "'");
    }
    s.values.resize(s.frames * file.dim);
    in.floats(s.values);
    file.samples.push_back(std::move(s));
  }
  if (in.remaining() != 0) {
    throw DataError(DataError::Code::kTrailingData,
                    source + ": " + std::to_string(in.remaining()) +
                        " trailing bytes after the declared samples");
  }
  return file;
}

FeatureFile load_features(const std::string& path) {
  return parse_features(binary::read_file(path), path);
}

void save_features(const std::string& path, const FeatureFile& file) {
  binary::write_file(path, serialize_features(file));
}

void WordEmbeddings::rebuild_index() {
  index.clear();
  for (std::size_t i = 0; i < words.size(); ++i) index[words[i]] = i;
}

WordEmbeddings embeddings_from_features(const FeatureFile& file) {
  WordEmbeddings emb;
  emb.dim = file.dim;
  emb.words.reserve(file.samples.size());
  emb.values.reserve(file.samples.size() * file.dim);
  for (const auto& s : file.samples) {
    if (s.frames != 1) {
      throw DataError(DataError::Code::kInvalidRecord,
                      "embedding '" + s.id + "' has " + std::to_string(s.frames) +
                          " rows, expected 1");
    }
    emb.words.push_back(s.id);
    emb.values.insert(emb.values.end(), s.values.begin(), s.values.end());
  }
  emb.rebuild_index();
  return emb;
}

FeatureFile embeddings_to_features(const WordEmbeddings& emb) {
  FeatureFile file;
  file.dim = emb.dim;
  for (std::size_t i = 0; i < emb.words.size(); ++i) {
    FeatureSample s;
    s.id = emb.words[i];
    s.frames = 1;
    s.values.assign(emb.values.begin() + i * emb.dim, emb.values.begin() + (i + 1) * emb.dim);
    file.samples.push_back(std::move(s));
  }
  return file;
}

WordEmbeddings load_embeddings(const std::string& path) {
  return embeddings_from_features(load_features(path));
}

void save_embeddings(const std::string& path, const WordEmbeddings& emb) {
  save_features(path, embeddings_to_features(emb));
}

namespace {

std::size_t index_field(const json& obj, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw DataError(DataError::Code::kInvalidRecord,
                    std::string("field '") + key + "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

CaptionAnnotation annotation_from_json(const json& obj) {
  CaptionAnnotation ann;
  ann.video_id = obj.at("video_id").get<std::string>();
  ann.caption_id = obj.at("caption_id").get<std::string>();
  ann.tokens = obj.at("tokens").get<std::vector<std::string>>();
  if (ann.tokens.empty()) {
    throw DataError(DataError::Code::kInvalidRecord, "caption has no tokens");
  }
  if (obj.contains("verbs")) {
    for (const auto& v : obj.at("verbs")) ann.verb_positions.push_back(index_field(v, "idx"));
  }
  if (obj.contains("nouns")) {
    for (const auto& n : obj.at("nouns")) {
      NounRecord rec;
      rec.index = index_field(n, "idx");
      if (n.contains("verb_idx") && !n.at("verb_idx").is_null()) {
        rec.verb_index = index_field(n, "verb_idx");
        rec.role = n.value("role", std::string());
      }
      ann.nouns.push_back(std::move(rec));
    }
  }
  validate_annotation(ann);
  return ann;
}

}  // namespace

std::vector<CaptionAnnotation> parse_annotations(std::istream& in, const std::string& source,
                                                 bool lenient,
                                                 std::vector<std::string>* diagnostics) {
  std::vector<CaptionAnnotation> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    try {
      CaptionAnnotation ann = annotation_from_json(json::parse(line));
      if (!ids.insert(ann.caption_id).second) {
        throw DataError(DataError::Code::kDuplicateId,
                        "duplicate caption_id '" + ann.caption_id + "'");
      }
      out.push_back(std::move(ann));
    } catch (const std::exception& e) {
      const std::string msg = where + ": " + e.what();
      if (!lenient) {
        auto code = DataError::Code::kInvalidRecord;
        if (auto* de = dynamic_cast<const DataError*>(&e)) code = de->code();
        throw DataError(code, msg);
      }
      if (diagnostics) diagnostics->push_back(msg);
    }
  }
  return out;
}

std::vector<CaptionAnnotation> load_annotations(const std::string& path, bool lenient,
                                                std::vector<std::string>* diagnostics) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Code::kIo, path + ": cannot open for reading");
  return parse_annotations(in, path, lenient, diagnostics);
}

std::string annotation_to_json(const CaptionAnnotation& ann) {
  json obj;
  obj["video_id"] = ann.video_id;
  obj["caption_id"] = ann.caption_id;
  obj["tokens"] = ann.tokens;
  obj["verbs"] = json::array();
  for (std::size_t v : ann.verb_positions) obj["verbs"].push_back({{"idx", v}});
  obj["nouns"] = json::array();
  for (const auto& n : ann.nouns) {
    json rec = {{"idx", n.index}};
    if (n.verb_index) {
      rec["verb_idx"] = *n.verb_index;
      rec["role"] = n.role;
    } else {
      rec["verb_idx"] = nullptr;
    }
    obj["nouns"].push_back(std::move(rec));
  }
  return obj.dump();
}

void save_annotations(const std::string& path, const std::vector<CaptionAnnotation>& anns) {
  std::string text;
  for (const auto& a : anns) text += annotation_to_json(a) + "\n";
  binary::write_file(path, text);
}

std::string vocabulary_to_tsv(const ConceptVocabulary& vocab) {
  std::ostringstream out;
  out << "rank\tlemma\tfrequency\tkind\n";
  for (std::size_t i = 0; i < vocab.actions.size(); ++i) {
    out << i << '\t' << vocab.actions[i] << '\t' << vocab.action_frequency[i] << "\taction\n";
  }
  for (std::size_t i = 0; i < vocab.entities.size(); ++i) {
    out << i << '\t' << vocab.entities[i] << '\t' << vocab.entity_frequency[i] << "\tentity\n";
  }
  return out.str();
}

ConceptVocabulary parse_vocabulary(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || line != "rank\tlemma\tfrequency\tkind") {
    throw DataError(DataError::Code::kInvalidHeader, source + ": missing vocabulary header");
  }
  ConceptVocabulary vocab;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string rank, lemma, freq, kind;
    if (!std::getline(fields, rank, '\t') || !std::getline(fields, lemma, '\t') ||
        !std::getline(fields, freq, '\t') || !std::getline(fields, kind)) {
      throw DataError(DataError::Code::kInvalidRecord,
                      source + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields");
    }
    auto& list = kind == "action" ? vocab.actions : vocab.entities;
    auto& counts = kind == "action" ? vocab.action_frequency : vocab.entity_frequency;
    if (kind != "action" && kind != "entity") {
      throw DataError(DataError::Code::kInvalidRecord,
                      source + ":" + std::to_string(lineno) + ": unknown kind '" + kind + "'");
    }
    if (std::stoul(rank) != list.size()) {
      throw DataError(DataError::Code::kInvalidRecord,
                      source + ":" + std::to_string(lineno) + ": rank out of sequence");
    }
    list.push_back(lemma);
    counts.push_back(std::stoull(freq));
  }
  vocab.rebuild_index();
  if (vocab.action_index.size() != vocab.actions.size() ||
      vocab.entity_index.size() != vocab.entities.size()) {
    throw DataError(DataError::Code::kDuplicateId, source + ": duplicate lemma");
  }
  return vocab;
}

ConceptVocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Code::kIo, path + ": cannot open for reading");
  return parse_vocabulary(in, path);
}

void save_vocabulary(const std::string& path, const ConceptVocabulary& vocab) {
  binary::write_file(path, vocabulary_to_tsv(vocab));
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::set<std::string> load_word_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Code::kIo, path + ": cannot open for reading");
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    words.insert(to_lower(line));
  }
  return words;
}

PosLexicon load_pos_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataError::Code::kIo, path + ": cannot open for reading");
  PosLexicon lexicon;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    const std::string tag = tab == std::string::npos ? "" : trim(line.substr(tab + 1));
    if (tag != "verb" && tag != "noun") {
      throw DataError(DataError::Code::kInvalidRecord,
                      path + ":" + std::to_string(lineno) + ": expected 'word<TAB>verb|noun'");
    }
    lexicon[to_lower(line.substr(0, tab))] =
        tag == "verb" ? PartOfSpeech::kVerb : PartOfSpeech::kNoun;
  }
  return lexicon;
}

void save_pos_lexicon(const std::string& path, const PosLexicon& lexicon) {
  std::vector<std::pair<std::string, PartOfSpeech>> entries(lexicon.begin(), lexicon.end());
  std::sort(entries.begin(), entries.end());
  std::string text;
  for (const auto& [word, pos] : entries) {
    text += word + (pos == PartOfSpeech::kVerb ? "\tverb\n" : "\tnoun\n");
  }
  binary::write_file(path, text);
}

std::string default_data_dir() {
  if (const char* env = std::getenv("HANET_DATA_DIR"); env && *env) return env;
  return HANET_DATA_DIR;
}

std::set<std::string> default_stopwords() {
  return load_word_set(default_data_dir() + "/stopwords.txt");
}

}  // namespace hanet
