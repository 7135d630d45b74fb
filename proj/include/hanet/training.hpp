#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hanet/dataset.hpp"
#include "hanet/model.hpp"
#include "hanet/retrieval.hpp"

namespace hanet {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;
  double margin = 0.2;
  double lambda = 4.0;
  double eta = 0.1;
  double mu = 0.01;
  std::size_t n_actions = 10;
  std::size_t n_entities = 20;
  std::size_t k_actions = 512;
  std::size_t k_entities = 1024;
  std::size_t dim = 256;
  std::uint64_t seed = 0;
  bool use_individual = true;
  bool use_local = true;
  bool use_global = true;
  bool stack_sum_normalize = true;
  std::size_t se_ratio = 16;
  std::size_t role_types = 16;

  // Throws ConfigError on non-positive values or patience > max_epochs.
  void validate() const;
  AlignmentOptions alignment() const;
  // K_a / K_e come from the loaded vocabulary, which may be smaller than
  // requested.
  ModelConfig model_config(const Dataset& data) const;
};

// Hinge loss with the hardest in-batch negative per row (caption side) and
// per column (video side), averaged over the B positives on the diagonal.
// Throws ShapeError when B < 2.
template <typename Dtype>
Tensor<Dtype> ranking_loss(const Tensor<Dtype>& scores, Dtype margin);

// Mean binary cross-entropy over concepts, with p clamped to [1e-7, 1-1e-7].
template <typename Dtype>
Tensor<Dtype> concept_bce(const Tensor<Dtype>& p, const std::vector<float>& y);

template <typename Dtype>
Tensor<Dtype> total_loss(const Tensor<Dtype>& l_l, const Tensor<Dtype>& l_p,
                         const Tensor<Dtype>& l_a, const Tensor<Dtype>& l_e, Dtype eta, Dtype mu);

template <typename Dtype>
struct BatchLoss {
  Tensor<Dtype> total, latent, concept_rank, action, entity;
};

// Encodes the captions of `batch` (indices into split.captions) together with
// their videos and evaluates the full objective on the B x B score matrices.
template <typename Dtype>
BatchLoss<Dtype> batch_loss(HanetModel<Dtype>& model, const Split& split,
                            const std::vector<std::size_t>& batch, const TrainConfig& config,
                            bool training);

// Shuffled batches of caption indices in which no video repeats. Batches
// with fewer than two captions are dropped.
std::vector<std::vector<std::size_t>> make_batches(const Split& split, std::size_t batch_size,
                                                   Rng& rng);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0, latent = 0.0, concept_rank = 0.0, action = 0.0, entity = 0.0;
  EvalReport val;
  double seconds = 0.0;
  bool improved = false;
};

std::string epoch_log_json(const EpochLog& log);

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_sumr = -1.0;
  std::string best_checkpoint;  // serialized parameter store of the best epoch
};

// Runs the optimization loop with validation SumR early stopping. On return
// the model holds the best epoch's parameters. A non-finite loss throws
// NumericError naming the offending caption ids.
TrainResult train(HanetModel<float>& model, const Dataset& data, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch = {},
                  std::size_t threads = 1);

}  // namespace hanet
