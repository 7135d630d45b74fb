#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hanet/binary_io.hpp"
#include "hanet/checkpoint.hpp"
#include "hanet/data_io.hpp"
#include "hanet/error.hpp"
#include "hanet/retrieval.hpp"
#include "hanet/run_config.hpp"
#include "hanet/synthetic.hpp"
#include "support.hpp"

using namespace hanet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("hanet_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run_cli(const std::string& args) {
  const std::string cmd = std::string(HANET_CLI_PATH) + " " + args + " 2>/dev/null";
  Outcome o;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[512];
  while (std::fgets(buf, sizeof(buf), pipe)) o.out += buf;
  const int status = ::pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

}  // namespace

TEST_CASE("rank of the positive") {
  const std::vector<double> a = {0.9, 0.5, 0.7};
  CHECK(rank_of_positive(a, 0) == 1);
  CHECK(rank_of_positive(a, 1) == 3);
  const std::vector<double> flat = {0.4, 0.4, 0.4, 0.4};
  CHECK(rank_of_positive(flat, 2) == 1);
}

TEST_CASE("identity scores give perfect recall") {
  ScoreMatrix m(3, 3);
  for (std::size_t i = 0; i < 3; ++i) m.at(i, i) = 1.0;
  const EvalReport r = evaluate(m, {0, 1, 2});
  CHECK(r.t2v.r1 == 100.0);
  CHECK(r.v2t.r1 == 100.0);
  CHECK(r.t2v.median_rank == 1.0);
  CHECK(r.v2t.median_rank == 1.0);
  CHECK(r.sumr == 600.0);
}

TEST_CASE("two by two example") {
  ScoreMatrix m(2, 2);
  m.values = {0.9, 0.8, 0.1, 0.95};
  const EvalReport r = evaluate(m, {0, 1});
  CHECK(r.t2v.ranks == std::vector<std::size_t>{1, 1});
  CHECK(r.v2t.ranks == std::vector<std::size_t>{1, 1});
  CHECK(r.t2v.r1 == 100.0);
  CHECK(r.v2t.r1 == 100.0);
}

TEST_CASE("random matrices match the brute-force oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    ScoreMatrix m(10, 10);
    for (auto& v : m.values) v = std::uniform_real_distribution<double>(0, 1)(rng);
    std::vector<std::size_t> pairs(10);
    for (std::size_t i = 0; i < 10; ++i) pairs[i] = i;
    const EvalReport got = evaluate(m, pairs);
    const EvalReport want = testing::oracle_evaluate(m, pairs);
    CHECK(got.t2v.ranks == want.t2v.ranks);
    CHECK(got.v2t.ranks == want.v2t.ranks);
    CHECK(got.sumr == want.sumr);
    CHECK(got.t2v.median_rank == want.t2v.median_rank);
  }
}

TEST_CASE("score matrix text parsing") {
  const ScoreMatrix m = parse_score_matrix("1 0.5\n0.25 1\n", "inline");
  CHECK(m.videos == 2);
  CHECK(m.captions == 2);
  CHECK(m.at(1, 0) == 0.25);
  CHECK_THROWS_AS(parse_score_matrix("1 2\n3\n", "ragged"), DataError);
}

TEST_CASE("feature files") {
  FeatureFile f;
  f.dim = 3;
  f.samples.push_back({"a", 2, {1, 2, 3, 4, 5, 6}});
  f.samples.push_back({"b", 1, {-1, 0.5f, 7}});
  const std::string image = serialize_features(f);

  const FeatureFile back = parse_features(image, "mem");
  REQUIRE(back.samples.size() == 2);
  CHECK(back.dim == 3);
  CHECK(back.samples[0].values == f.samples[0].values);
  CHECK(back.samples[1].id == "b");
  CHECK(back.find("b") == 1);
  CHECK(back.find("zz") == 2);

  SUBCASE("truncated payload") {
    try {
      parse_features(image.substr(0, image.size() - 5), "cut");
      FAIL("truncated image accepted");
    } catch (const DataError& e) {
      CHECK(e.code() == DataError::Code::kTruncated);
    }
  }
  SUBCASE("dim header disagrees with the payload") {
    std::string bad = image;
    bad[12] = 4;  // dim field follows magic, version and count
    CHECK_THROWS_AS(parse_features(bad, "dim"), DataError);
  }
  SUBCASE("bad magic") {
    std::string bad = image;
    bad[0] = 'X';
    try {
      parse_features(bad, "magic");
      FAIL("bad magic accepted");
    } catch (const DataError& e) {
      CHECK(e.code() == DataError::Code::kBadMagic);
    }
  }
  SUBCASE("duplicate ids") {
    FeatureFile dup = f;
    dup.samples[1].id = "a";
    CHECK_THROWS_AS(parse_features(serialize_features(dup), "dup"), DataError);
  }
}

TEST_CASE("annotation lines") {
  const std::string good =
      R"({"video_id":"v1","caption_id":"c1","tokens":["man","sings","song"],)"
      R"("verbs":[{"idx":1}],"nouns":[{"idx":0,"verb_idx":1,"role":"arg"},)"
      R"({"idx":2,"verb_idx":null,"role":""}]})";
  const std::string bad_governor =
      R"({"video_id":"v1","caption_id":"c2","tokens":["man","sings","song"],)"
      R"("verbs":[{"idx":1}],"nouns":[{"idx":0,"verb_idx":2,"role":"arg"}]})";

  std::istringstream one(good + "\n\n");
  const auto anns = parse_annotations(one, "one");
  REQUIRE(anns.size() == 1);
  CHECK(anns[0].tokens.size() == 3);
  CHECK(anns[0].verb_positions == std::vector<std::size_t>{1});
  CHECK(anns[0].nouns[0].verb_index == std::optional<std::size_t>(1));
  CHECK_FALSE(anns[0].nouns[1].verb_index.has_value());

  std::istringstream strict(good + "\n" + bad_governor + "\n");
  CHECK_THROWS_AS(parse_annotations(strict, "strict"), DataError);

  std::istringstream lenient(good + "\n" + bad_governor + "\n{not json\n");
  std::vector<std::string> diagnostics;
  const auto kept = parse_annotations(lenient, "lenient", true, &diagnostics);
  CHECK(kept.size() == 1);
  CHECK(diagnostics.size() == 2);

  std::istringstream empty("");
  CHECK(parse_annotations(empty, "empty").empty());

  std::istringstream round(annotation_to_json(anns[0]) + "\n");
  const auto again = parse_annotations(round, "round");
  CHECK(again[0].nouns.size() == 2);
  CHECK(again[0].caption_id == "c1");
}

TEST_CASE("vocabulary TSV round trip") {
  ConceptVocabulary v;
  v.actions = {"run", "cook"};
  v.action_frequency = {5, 3};
  v.entities = {"man"};
  v.entity_frequency = {2};
  v.rebuild_index();
  std::istringstream in(vocabulary_to_tsv(v));
  const auto back = parse_vocabulary(in, "tsv");
  CHECK(back.actions == v.actions);
  CHECK(back.entities == v.entities);
  CHECK(back.action_frequency == v.action_frequency);
  CHECK(back.entity_index.at("man") == 0);
}

TEST_CASE("checkpoint round trip") {
  ParamStore<float> a, b;
  Rng ra(1), rb(2);
  a.glorot("w", {3, 2}, 3, 2, ra);
  a.add_buffer("bn.mean", Tensor<float>({2}, {0.5f, -1.0f}));
  b.glorot("w", {3, 2}, 3, 2, rb);
  b.add_buffer("bn.mean", Tensor<float>({2}, {0.0f, 0.0f}));
  a.zero_grad();
  adam_step(a, AdamOptions{});
  deserialize_checkpoint(serialize_checkpoint(a), "mem", b);
  const auto wa = a.parameter("w").values();
  const auto wb = b.parameter("w").values();
  CHECK(std::equal(wa.begin(), wa.end(), wb.begin()));
  CHECK(b.buffer("bn.mean").at(1) == -1.0f);
  CHECK(b.step() == 1);

  ParamStore<float> other;
  other.constant("v", {1}, 0.0f);
  CHECK_THROWS_AS(deserialize_checkpoint(serialize_checkpoint(a), "mem", other), DataError);
}

TEST_CASE("synthetic sample counts match the generator settings") {
  const SyntheticSpec spec;
  const SyntheticDataset data = generate_synthetic(spec);
  CHECK(data.train.features.samples.size() == 200);
  CHECK(data.val.features.samples.size() == 50);
  CHECK(data.train.captions.size() == 200);
  CHECK(data.vocab.num_actions() == 8);
  CHECK(data.vocab.num_entities() == 16);
  for (const auto& s : data.train.features.samples) {
    CHECK(s.frames >= 12);
    CHECK(s.frames <= 24);
  }

  TempDir dir;
  write_synthetic(data, dir.path.string());
  CHECK(load_features(dir.file("train.hanf")).samples.size() == 200);
  CHECK(load_features(dir.file("val.hanf")).samples.size() == 50);
  CHECK(load_annotations(dir.file("val.jsonl")).size() == 50);
}

TEST_CASE("noise-free frames are recognised by the nearest prototype") {
  SyntheticSpec spec;
  spec.sigma = 0.0;
  spec.dim = 256;
  spec.train_samples = 40;
  spec.val_samples = 10;
  const SyntheticDataset data = generate_synthetic(spec);

  // With zero noise the concept word embeddings are the prototypes.
  std::vector<const float*> protos;
  std::vector<std::pair<bool, std::size_t>> owner;  // (is_action, index)
  for (std::size_t a = 0; a < spec.k_actions; ++a) {
    const std::size_t row = data.embeddings.index.at(third_person(data.action_words[a]));
    protos.push_back(&data.embeddings.values[row * spec.dim]);
    owner.emplace_back(true, a);
  }
  for (std::size_t e = 0; e < spec.k_entities; ++e) {
    const std::size_t row = data.embeddings.index.at(data.entity_words[e]);
    protos.push_back(&data.embeddings.values[row * spec.dim]);
    owner.emplace_back(false, e);
  }

  std::size_t frames = 0;
  for (std::size_t s = 0; s < data.train.features.samples.size(); ++s) {
    const auto& sample = data.train.features.samples[s];
    const auto& planted = data.train.planted[s];
    for (std::size_t t = 0; t < sample.frames; ++t, ++frames) {
      const float* x = &sample.values[t * spec.dim];
      std::size_t best = 0;
      double best_dot = -1e9;
      for (std::size_t k = 0; k < protos.size(); ++k) {
        double dot = 0;
        for (std::size_t d = 0; d < spec.dim; ++d) dot += x[d] * protos[k][d];
        if (dot > best_dot) {
          best_dot = dot;
          best = k;
        }
      }
      const auto& list = owner[best].first ? planted.actions : planted.entities;
      CHECK(std::find(list.begin(), list.end(), owner[best].second) != list.end());
    }
  }
  CHECK(frames > 0);
}

TEST_CASE("run configuration") {
  RunConfig rc;
  CHECK_THROWS_AS(rc.set("learning_rate", "0.1"), ConfigError);
  CHECK_THROWS_AS(rc.set("lr", "fast"), ConfigError);
  CHECK_THROWS_AS(rc.assign("no equals sign"), ConfigError);
  rc.parse("# comment\n\nlr=0.001\nbatch_size = 8\n", "inline");
  const TrainConfig c = rc.train_config();
  CHECK(c.lr == 0.001);
  CHECK(c.batch_size == 8);

  RunConfig echo;
  echo.parse(rc.dump(), "dump");
  CHECK(echo.dump() == rc.dump());
}

TEST_CASE("command line tool") {
  TempDir dir;
  {
    std::ofstream f(dir.file("scores.txt"));
    f << "1 0 0\n0 1 0\n0 0 1\n";
  }
  const Outcome ok = run_cli("eval --scores " + dir.file("scores.txt"));
  CHECK(ok.code == 0);
  CHECK(ok.out.find("\"SumR\": 600") != std::string::npos);

  CHECK(run_cli("eval --bogus-flag").code == 1);
  CHECK(run_cli("").code == 1);
  CHECK(run_cli("eval --scores " + dir.file("missing.txt")).code == 2);
  CHECK(run_cli("train --data " + dir.file("nowhere") + " --set lr=abc").code == 1);
}
