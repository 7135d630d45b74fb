#include "hanet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>

#include "hanet/binary_io.hpp"
#include "hanet/error.hpp"
#include "hanet/param_store.hpp"

namespace hanet {

namespace {

const std::vector<std::string> kVerbs = {
    "run",  "sing",  "dance", "cook",  "play", "jump", "swim", "drive",
    "ride", "throw", "catch", "eat",   "drink", "walk", "talk", "climb",
    "paint", "read", "write", "kick",  "push", "pull", "wash", "cut"};

const std::vector<std::string> kNouns = {
    "man",    "woman",  "dog",      "cat",    "ball",   "car",    "guitar", "piano",
    "horse",  "bike",   "cake",     "tree",   "boat",   "phone",  "book",   "table",
    "chair",  "door",   "window",   "road",   "kitchen", "field", "river",  "beach",
    "camera", "hat",    "shirt",    "cup",    "plate",  "knife",  "child",  "baby",
    "girl",   "boy",    "bird",     "flower", "computer", "song", "stage",  "bottle"};

const std::vector<std::string> kGlue = {"a", "and", "with"};

std::vector<std::string> word_list(const std::vector<std::string>& base,
                                   const std::string& stem, std::size_t k) {
  std::vector<std::string> out(base.begin(), base.begin() + std::min(k, base.size()));
  for (std::size_t i = out.size(); i < k; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

std::vector<float> unit_vector(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

std::vector<std::size_t> pick_distinct(std::size_t k, std::size_t count,
                                       std::optional<std::size_t> first, Rng& rng) {
  std::vector<std::size_t> pool(k);
  for (std::size_t i = 0; i < k; ++i) pool[i] = i;
  std::vector<std::size_t> out;
  if (first) {
    out.push_back(*first);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(*first));
  }
  while (out.size() < count) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    const std::size_t j = pick(rng);
    out.push_back(pool[j]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
  }
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("synthetic spec: " + what); };
  if (sigma < 0.0 || !std::isfinite(sigma)) fail("sigma must be finite and >= 0");
  if (dim == 0) fail("dim must be positive");
  if (min_frames == 0 || min_frames > max_frames) fail("need 1 <= min_frames <= max_frames");
  if (min_actions == 0 || min_actions > max_actions || max_actions > 2) {
    fail("actions per sample must lie in 1..2");
  }
  if (min_entities < 2 || min_entities > max_entities || max_entities > 3) {
    fail("entities per sample must lie in 2..3");
  }
  if (k_actions < max_actions) fail("k_actions smaller than actions per sample");
  if (k_entities < max_entities) fail("k_entities smaller than entities per sample");
  if (train_samples < 2) fail("need at least 2 training samples");
}

std::string third_person(const std::string& lemma) {
  for (const char* s : {"ch", "sh", "ss", "x", "zz"}) {
    const std::string suf(s);
    if (lemma.size() >= suf.size() &&
        lemma.compare(lemma.size() - suf.size(), suf.size(), suf) == 0) {
      return lemma + "es";
    }
  }
  return lemma + "s";
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticDataset data;
  data.action_words = word_list(kVerbs, "act", spec.k_actions);
  data.entity_words = word_list(kNouns, "thing", spec.k_entities);

  std::vector<std::vector<float>> action_proto, entity_proto;
  for (std::size_t i = 0; i < spec.k_actions; ++i) action_proto.push_back(unit_vector(spec.dim, rng));
  for (std::size_t i = 0; i < spec.k_entities; ++i) entity_proto.push_back(unit_vector(spec.dim, rng));

  std::normal_distribution<double> noise(0.0, 1.0);
  auto noisy = [&](const std::vector<float>& base) {
    std::vector<float> out(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      out[i] = static_cast<float>(base[i] + spec.sigma * noise(rng));
    }
    return out;
  };

  data.embeddings.dim = spec.dim;
  for (const auto& w : kGlue) {
    data.embeddings.words.push_back(w);
    const auto v = unit_vector(spec.dim, rng);
    data.embeddings.values.insert(data.embeddings.values.end(), v.begin(), v.end());
  }
  auto add_word = [&](const std::string& w, const std::vector<float>& proto) {
    data.embeddings.words.push_back(w);
    const auto v = noisy(proto);
    data.embeddings.values.insert(data.embeddings.values.end(), v.begin(), v.end());
  };
  for (std::size_t i = 0; i < spec.k_actions; ++i) {
    data.lexicon[data.action_words[i]] = PartOfSpeech::kVerb;
    add_word(third_person(data.action_words[i]), action_proto[i]);
  }
  for (std::size_t i = 0; i < spec.k_entities; ++i) {
    data.lexicon[data.entity_words[i]] = PartOfSpeech::kNoun;
    add_word(data.entity_words[i], entity_proto[i]);
  }
  data.embeddings.rebuild_index();

  const auto stopwords = default_stopwords();
  auto make_split = [&](const std::string& prefix, std::size_t count, bool cover) {
    SyntheticSplit split;
    split.features.dim = spec.dim;
    std::uniform_int_distribution<std::size_t> n_frames(spec.min_frames, spec.max_frames);
    std::uniform_int_distribution<std::size_t> n_actions(spec.min_actions, spec.max_actions);
    std::uniform_int_distribution<std::size_t> n_entities(spec.min_entities, spec.max_entities);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t s = 0; s < count; ++s) {
      // The first samples of the training split cycle through every concept
      // so the vocabulary built from training captions covers all of them.
      std::optional<std::size_t> first_a, first_e;
      if (cover && s < spec.k_actions) first_a = s;
      if (cover && s < spec.k_entities) first_e = s;
      PlantedConcepts planted;
      planted.actions = pick_distinct(spec.k_actions, n_actions(rng), first_a, rng);
      planted.entities = pick_distinct(spec.k_entities, n_entities(rng), first_e, rng);

      std::vector<const std::vector<float>*> protos;
      for (std::size_t a : planted.actions) protos.push_back(&action_proto[a]);
      for (std::size_t e : planted.entities) protos.push_back(&entity_proto[e]);

      const std::size_t frames = n_frames(rng);
      std::vector<std::vector<std::uint8_t>> hosts(frames, std::vector<std::uint8_t>(protos.size()));
      for (auto& h : hosts) {
        bool any = false;
        for (auto& bit : h) any |= (bit = coin(rng));
        if (!any) {
          std::uniform_int_distribution<std::size_t> pick(0, protos.size() - 1);
          h[pick(rng)] = 1;
        }
      }
      for (std::size_t c = 0; c < protos.size(); ++c) {
        bool covered = false;
        for (const auto& h : hosts) covered |= h[c] != 0;
        if (!covered) {
          std::uniform_int_distribution<std::size_t> pick(0, frames - 1);
          hosts[pick(rng)][c] = 1;
        }
      }

      FeatureSample sample;
      char id[32];
      std::snprintf(id, sizeof(id), "%s%04zu", prefix.c_str(), s);
      sample.id = id;
      sample.frames = frames;
      sample.values.reserve(frames * spec.dim);
      for (const auto& h : hosts) {
        std::vector<double> mean(spec.dim, 0.0);
        std::size_t hosted = 0;
        for (std::size_t c = 0; c < protos.size(); ++c) {
          if (!h[c]) continue;
          ++hosted;
          for (std::size_t d = 0; d < spec.dim; ++d) mean[d] += (*protos[c])[d];
        }
        for (std::size_t d = 0; d < spec.dim; ++d) {
          sample.values.push_back(
              static_cast<float>(mean[d] / static_cast<double>(hosted) + spec.sigma * noise(rng)));
        }
      }

      std::vector<std::string> tokens = {"a", data.entity_words[planted.entities[0]],
                                         third_person(data.action_words[planted.actions[0]]), "a",
                                         data.entity_words[planted.entities[1]]};
      if (planted.actions.size() > 1) {
        tokens.push_back("and");
        tokens.push_back(third_person(data.action_words[planted.actions[1]]));
      }
      if (planted.entities.size() > 2) {
        tokens.push_back("with");
        tokens.push_back("a");
        tokens.push_back(data.entity_words[planted.entities[2]]);
      }
      CaptionAnnotation ann = fallback_role_parse(tokens, data.lexicon, stopwords);
      ann.video_id = sample.id;
      ann.caption_id = sample.id + "#0";

      split.features.samples.push_back(std::move(sample));
      split.captions.push_back(std::move(ann));
      split.planted.push_back(std::move(planted));
    }
    return split;
  };

  data.train = make_split("train", spec.train_samples, true);
  data.val = make_split("val", spec.val_samples, false);
  data.vocab = build_vocabulary(data.train.captions, spec.k_actions, spec.k_entities, stopwords);
  return data;
}

void write_synthetic(const SyntheticDataset& data, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_features(dir + "/train.hanf", data.train.features);
  save_features(dir + "/val.hanf", data.val.features);
  save_embeddings(dir + "/embeddings.hanf", data.embeddings);
  save_annotations(dir + "/train.jsonl", data.train.captions);
  save_annotations(dir + "/val.jsonl", data.val.captions);
  save_vocabulary(dir + "/vocab.tsv", data.vocab);
  save_pos_lexicon(dir + "/pos_lexicon.txt", data.lexicon);
  fs::copy_file(default_data_dir() + "/stopwords.txt", dir + "/stopwords.txt",
                fs::copy_options::overwrite_existing);
}

Dataset to_dataset(const SyntheticDataset& data, const DatasetOptions& options) {
  Dataset out;
  out.feature_dim = data.train.features.dim;
  out.embeddings = data.embeddings;
  out.vocab = data.vocab;
  out.vocab.truncate(options.k_actions, options.k_entities);
  out.roles = RoleDictionary::build(data.train.captions, options.role_types);
  out.train = make_split(data.train.features, data.train.captions, out.vocab);
  out.val = make_split(data.val.features, data.val.captions, out.vocab);
  return out;
}

}  // namespace hanet
