#include <cmath>
#include <set>

#include "doctest.h"
#include "hanet/alignment.hpp"
#include "hanet/error.hpp"
#include "hanet/model.hpp"
#include "hanet/ops.hpp"
#include "hanet/training.hpp"
#include "support.hpp"

using namespace hanet;
using T = Tensor<double>;

namespace {

std::vector<T> scalars(std::initializer_list<double> values) {
  std::vector<T> out;
  for (double v : values) out.push_back(T::scalar(v));
  return out;
}

}  // namespace

TEST_CASE("stacked attention examples") {
  const T u({1, 2}, {0.6, 0.8});
  CHECK(stacked_attention_similarity(u, u, 4.0, true).item() == doctest::Approx(1.0));

  const T v({2, 3}, {1, 0, 0, 0, 1, 0});
  const T s({2, 3}, {0, 0, 1, 0, 0, -2});
  CHECK(stacked_attention_similarity(v, s, 4.0, true).item() == doctest::Approx(0.0));

  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = testing::random_matrix(2, 5, rng, -1, 1);
    const auto b = testing::random_matrix(2, 5, rng, -1, 1);
    for (bool normalize : {true, false}) {
      const double got =
          stacked_attention_similarity(testing::to_tensor(a), testing::to_tensor(b), 4.0, normalize)
              .item();
      CHECK(got == doctest::Approx(testing::oracle_stacked_attention(a, b, 4.0, normalize))
                       .epsilon(1e-9));
    }
  }
}

TEST_CASE("zero rows have zero cosine") {
  const T c = cosine_matrix(T({1, 2}, {0.0, 0.0}), T({1, 2}, {1.0, 1.0}));
  CHECK(c.item() == 0.0);
}

TEST_CASE("jaccard examples") {
  const T a({2}, {0.2, 0.8});
  CHECK(jaccard_similarity(a, a).item() == doctest::Approx(1.0));
  CHECK(jaccard_similarity(a, T({2}, {0.4, 0.4})).item() == doctest::Approx(0.5));
  CHECK(jaccard_similarity(T({2}, {1.0, 0.0}), T({2}, {0.0, 1.0})).item() == 0.0);
  CHECK(jaccard_similarity(T({2}, {0.0, 0.0}), T({2}, {0.0, 0.0})).item() == 0.0);
  CHECK_THROWS_AS(jaccard_similarity(T({2}, {-0.1, 0.3}), a), NumericError);
}

TEST_CASE("global similarity examples") {
  const T v({1, 3}, {1.0, -2.0, 0.5});
  CHECK(global_similarity(v, v).item() == doctest::Approx(1.0));
  CHECK(global_similarity(v, ops::scale(v, -1.0)).item() == doctest::Approx(-1.0));
  Rng rng(2);
  const auto a = testing::random_matrix(1, 8, rng, -1, 1);
  const auto b = testing::random_matrix(1, 8, rng, -1, 1);
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    dot += a[0][i] * b[0][i];
    na += a[0][i] * a[0][i];
    nb += b[0][i] * b[0][i];
  }
  CHECK(global_similarity(testing::to_tensor(a), testing::to_tensor(b)).item() ==
        doctest::Approx(dot / std::sqrt(na * nb)).epsilon(1e-9));
}

TEST_CASE("latent aggregation is a plain mean") {
  CHECK(mean_of(scalars({0.5, 0.5, 0.5, 0.5, 0.5})).item() == doctest::Approx(0.5));
  CHECK(mean_of(scalars({0.1, 0.2, 0.3, 0.4, 0.5})).item() == doctest::Approx(0.3));
}

TEST_CASE("alignment toggles") {
  const Dataset data = testing::tiny_dataset();
  TrainConfig config = testing::tiny_train_config();
  HanetModel<double> model(config.model_config(data), data.embeddings, data.roles);
  const auto videos = model.encode_videos({&data.val.videos[0]}, false);
  const auto texts = model.encode_captions({&data.val.captions[0].ann}, false);

  LevelToggles only_global;
  only_global.individual = false;
  only_global.local = false;
  const auto bundle = align(make_video_view(videos[0], only_global),
                            make_text_view(texts[0], only_global), AlignmentOptions{4.0, true, only_global});
  CHECK(bundle.c_l.item() == doctest::Approx(bundle.c_glo_g.item()));
  CHECK(bundle.c_p.item() ==
        doctest::Approx((bundle.c_p_a.item() + bundle.c_p_e.item()) / 2.0));
  CHECK(bundle.score() == doctest::Approx((bundle.c_l.item() + bundle.c_p.item()) / 2.0));

  LevelToggles none;
  none.individual = none.local = none.global = false;
  CHECK_THROWS_AS(align(make_video_view(videos[0], none), make_text_view(texts[0], none),
                        AlignmentOptions{4.0, true, none}),
                  ConfigError);
}

TEST_CASE("ranking loss examples") {
  const T identity({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(ranking_loss(identity, 0.2).item() == doctest::Approx(0.0));

  const T s({2, 2}, {0.5, 0.9, 0.1, 0.5});
  CHECK(ranking_loss(s, 0.2).item() == doctest::Approx(0.6));

  const T flat({4, 4}, std::vector<double>(16, 0.3));
  CHECK(ranking_loss(flat, 0.2).item() == doctest::Approx(0.4));

  CHECK_THROWS_AS(ranking_loss(T({1, 1}, std::vector<double>{1.0}), 0.2), ShapeError);
}

TEST_CASE("concept cross-entropy") {
  const T half({4}, std::vector<double>(4, 0.5));
  const std::vector<float> y = {1, 0, 1, 0};
  const double both = concept_bce(half, y).item() + concept_bce(half, y).item();
  CHECK(both == doctest::Approx(2.0 * std::log(2.0)));

  const double eps = 1e-4;
  const T perfect({4}, {1 - eps, eps, 1 - eps, eps});
  CHECK(2.0 * concept_bce(perfect, y).item() <= 2.0 * eps * std::log(1.0 / eps) * 2.0);
}

TEST_CASE("total loss weighting") {
  const T one = T::scalar(1.0);
  CHECK(total_loss(one, one, one, one, 0.1, 0.01).item() == doctest::Approx(1.12));
  CHECK(total_loss(T::scalar(0.7), one, one, one, 0.0, 0.0).item() == doctest::Approx(0.7));
  const T zero = T::scalar(0.0);
  CHECK(total_loss(zero, zero, zero, zero, 0.1, 0.01).item() == 0.0);
}

TEST_CASE("batches never repeat a video") {
  const Dataset data = testing::tiny_dataset();
  Rng rng(3);
  const auto batches = make_batches(data.train, 4, rng);
  CHECK_FALSE(batches.empty());
  for (const auto& b : batches) {
    CHECK(b.size() >= 2);
    std::set<std::size_t> videos;
    for (std::size_t c : b) videos.insert(data.train.captions[c].video);
    CHECK(videos.size() == b.size());
  }
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.patience = c.max_epochs + 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

namespace {

TrainResult run_training(const Dataset& data, const TrainConfig& config,
                     std::vector<double>* train_sumr = nullptr) {
  HanetModel<float> model(config.model_config(data), data.embeddings, data.roles);
  return train(model, data, config, [&](const EpochLog&) {
    if (train_sumr) {
      train_sumr->push_back(
          evaluate(model.score_matrix(data.train, 1), data.train.caption_to_video()).sumr);
    }
  });
}

}  // namespace

TEST_CASE("training is deterministic for a fixed seed") {
  const Dataset data = testing::tiny_dataset();
  const TrainConfig config = testing::tiny_train_config();
  const TrainResult a = run_training(data, config);
  const TrainResult b = run_training(data, config);
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    CHECK(a.epochs[i].loss == b.epochs[i].loss);
    CHECK(a.epochs[i].val.sumr == b.epochs[i].val.sumr);
  }
  CHECK(a.best_checkpoint == b.best_checkpoint);
}

TEST_CASE("early stopping follows the patience rule") {
  const Dataset data = testing::tiny_dataset();
  TrainConfig config = testing::tiny_train_config();
  config.max_epochs = 12;
  config.patience = 1;
  config.lr = 0.05;
  const TrainResult r = run_training(data, config);
  REQUIRE_FALSE(r.epochs.empty());
  // The run stops right after the first epoch that fails to improve, and the
  // best epoch is the last improving one.
  std::size_t expected_stop = config.max_epochs;
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const auto& e : r.epochs) {
    CHECK(e.improved == (e.val.sumr > best));
    if (e.val.sumr > best) {
      best = e.val.sumr;
      best_epoch = e.epoch;
    } else {
      expected_stop = std::min(expected_stop, e.epoch);
    }
  }
  CHECK(r.epochs.back().epoch == expected_stop);
  CHECK(r.best_epoch == best_epoch);
  CHECK(r.best_sumr == best);
  CHECK(r.epochs.size() < config.max_epochs);
}

TEST_CASE("training retrieval improves over the first epochs on planted data") {
  const SyntheticSpec spec;
  DatasetOptions options;
  options.k_actions = spec.k_actions;
  options.k_entities = spec.k_entities;
  const Dataset data = to_dataset(generate_synthetic(spec), options);
  TrainConfig config;
  config.dim = spec.dim;
  config.k_actions = spec.k_actions;
  config.k_entities = spec.k_entities;
  config.n_actions = 2;
  config.n_entities = 3;
  config.batch_size = 16;
  config.max_epochs = 5;
  config.patience = 5;
  config.seed = 7;
  std::vector<double> sumr;
  run_training(data, config, &sumr);
  REQUIRE(sumr.size() == 5);
  for (std::size_t i = 1; i < sumr.size(); ++i) {
    CAPTURE(i);
    CHECK(sumr[i] > sumr[i - 1]);
  }
}
