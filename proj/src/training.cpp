#include "hanet/training.hpp"

#include <chrono>
#include <cmath>
#include <unordered_set>

#include <json.hpp>

#include "hanet/checkpoint.hpp"
#include "hanet/error.hpp"
#include "hanet/ops.hpp"

namespace hanet {

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("config: ") + name + " must be positive");
    }
  };
  positive(lr, "lr");
  positive(static_cast<double>(batch_size), "batch_size");
  positive(static_cast<double>(max_epochs), "max_epochs");
  positive(static_cast<double>(patience), "patience");
  positive(margin, "margin");
  positive(lambda, "lambda");
  positive(eta, "eta");
  positive(mu, "mu");
  positive(static_cast<double>(n_actions), "n_actions");
  positive(static_cast<double>(n_entities), "n_entities");
  positive(static_cast<double>(k_actions), "k_actions");
  positive(static_cast<double>(k_entities), "k_entities");
  positive(static_cast<double>(dim), "dim");
  positive(static_cast<double>(se_ratio), "se_ratio");
  if (batch_size < 2) throw ConfigError("config: batch_size must be at least 2");
  if (role_types < 2) throw ConfigError("config: role_types must be at least 2");
  if (patience > max_epochs) throw ConfigError("config: patience exceeds max_epochs");
  if (!use_individual && !use_local && !use_global) {
    throw ConfigError("config: every alignment level is disabled");
  }
}

AlignmentOptions TrainConfig::alignment() const {
  AlignmentOptions a;
  a.lambda = lambda;
  a.stack_sum_normalize = stack_sum_normalize;
  a.levels = {use_individual, use_local, use_global};
  return a;
}

ModelConfig TrainConfig::model_config(const Dataset& data) const {
  ModelConfig m;
  m.feature_dim = data.feature_dim;
  m.embed_dim = data.embeddings.dim;
  m.dim = dim;
  m.k_actions = data.vocab.num_actions();
  m.k_entities = data.vocab.num_entities();
  m.n_actions = n_actions;
  m.n_entities = n_entities;
  m.se_ratio = se_ratio;
  m.role_types = role_types;
  m.seed = seed;
  m.align = alignment();
  return m;
}

template <typename Dtype>
Tensor<Dtype> ranking_loss(const Tensor<Dtype>& scores, Dtype margin) {
  if (scores.rank() != 2 || scores.dim(0) != scores.dim(1)) {
    throw ShapeError("ranking_loss: expected a square score matrix, got " +
                     shape_str(scores.shape()));
  }
  const std::size_t b = scores.dim(0);
  if (b < 2) throw ShapeError("ranking_loss: need at least 2 pairs for in-batch negatives");
  const auto s = scores.values();
  // (positive index, hardest negative flat index, active) per hinge
  struct Hinge {
    std::size_t pos, neg;
    bool active;
  };
  std::vector<Hinge> hinges;
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t best = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < b; ++j) {
      if (j != i && s[i * b + j] > s[i * b + best]) best = j;
    }
    const double h = margin + s[i * b + best] - s[i * b + i];
    hinges.push_back({i * b + i, i * b + best, h > 0.0});
    total += std::max(0.0, h);
  }
  for (std::size_t j = 0; j < b; ++j) {
    std::size_t best = j == 0 ? 1 : 0;
    for (std::size_t i = 0; i < b; ++i) {
      if (i != j && s[i * b + j] > s[best * b + j]) best = i;
    }
    const double h = margin + s[best * b + j] - s[j * b + j];
    hinges.push_back({j * b + j, best * b + j, h > 0.0});
    total += std::max(0.0, h);
  }
  detail::Node<Dtype>* px = scores.raw();
  const Dtype inv_b = Dtype(1) / static_cast<Dtype>(b);
  return Tensor<Dtype>::make_result(
      {1}, {static_cast<Dtype>(total / static_cast<double>(b))}, {scores},
      [px, inv_b, hinges = std::move(hinges)](detail::Node<Dtype>& self) {
        if (!px->requires_grad) return;
        const Dtype g = self.grad[0] * inv_b;
        for (const auto& h : hinges) {
          if (!h.active) continue;
          px->grad[h.neg] += g;
          px->grad[h.pos] -= g;
        }
      },
      "ranking_loss");
}

template <typename Dtype>
Tensor<Dtype> concept_bce(const Tensor<Dtype>& p, const std::vector<float>& y) {
  if (p.numel() != y.size()) {
    throw ShapeError("concept_bce: " + std::to_string(p.numel()) + " confidences vs " +
                     std::to_string(y.size()) + " labels");
  }
  const Tensor<Dtype> target(p.shape(), std::vector<Dtype>(y.begin(), y.end()));
  std::vector<Dtype> inv(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) inv[i] = Dtype(1) - static_cast<Dtype>(y[i]);
  const Tensor<Dtype> not_target(p.shape(), std::move(inv));
  const Tensor<Dtype> pc = ops::clamp(p, Dtype(1e-7), Dtype(1) - Dtype(1e-7));
  const Tensor<Dtype> log_p = ops::log(pc);
  const Tensor<Dtype> log_q = ops::log(ops::add_scalar(ops::scale(pc, Dtype(-1)), Dtype(1)));
  const Tensor<Dtype> ll = ops::add(ops::mul(target, log_p), ops::mul(not_target, log_q));
  return ops::scale(ops::mean(ll), Dtype(-1));
}

template <typename Dtype>
Tensor<Dtype> total_loss(const Tensor<Dtype>& l_l, const Tensor<Dtype>& l_p,
                         const Tensor<Dtype>& l_a, const Tensor<Dtype>& l_e, Dtype eta, Dtype mu) {
  return ops::add(ops::add(l_l, ops::scale(l_p, eta)), ops::scale(ops::add(l_a, l_e), mu));
}

template <typename Dtype>
BatchLoss<Dtype> batch_loss(HanetModel<Dtype>& model, const Split& split,
                            const std::vector<std::size_t>& batch, const TrainConfig& config,
                            bool training) {
  const std::size_t b = batch.size();
  std::vector<const VideoItem*> videos;
  std::vector<const CaptionAnnotation*> captions;
  for (std::size_t c : batch) {
    captions.push_back(&split.captions.at(c).ann);
    videos.push_back(&split.videos.at(split.captions[c].video));
  }
  const auto venc = model.encode_videos(videos, training);
  const auto tenc = model.encode_captions(captions, training);
  const auto& levels = model.config().align.levels;
  std::vector<VideoView<Dtype>> vviews;
  std::vector<TextView<Dtype>> tviews;
  for (const auto& v : venc) vviews.push_back(make_video_view(v, levels));
  for (const auto& t : tenc) tviews.push_back(make_text_view(t, levels));

  std::vector<Tensor<Dtype>> c_l, c_p;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      auto bundle = align(vviews[i], tviews[j], model.config().align);
      c_l.push_back(bundle.c_l);
      c_p.push_back(bundle.c_p);
    }
  }
  BatchLoss<Dtype> out;
  const Dtype margin = static_cast<Dtype>(config.margin);
  out.latent = ranking_loss(ops::reshape(ops::stack_scalars(c_l), {b, b}), margin);
  out.concept_rank = ranking_loss(ops::reshape(ops::stack_scalars(c_p), {b, b}), margin);

  std::vector<Tensor<Dtype>> terms_a, terms_e;
  for (std::size_t i = 0; i < b; ++i) {
    const auto& labels = split.captions[batch[i]].labels;
    terms_a.push_back(concept_bce(venc[i].p_v_a, labels.actions));
    if (tenc[i].has_verbs()) terms_a.push_back(concept_bce(tenc[i].p_s_a, labels.actions));
    terms_e.push_back(concept_bce(venc[i].p_v_e, labels.entities));
    if (tenc[i].has_nouns()) terms_e.push_back(concept_bce(tenc[i].p_s_e, labels.entities));
  }
  const Dtype inv_b = Dtype(1) / static_cast<Dtype>(b);
  out.action = ops::scale(ops::sum(ops::stack_scalars(terms_a)), inv_b);
  out.entity = ops::scale(ops::sum(ops::stack_scalars(terms_e)), inv_b);
  out.total = total_loss(out.latent, out.concept_rank, out.action, out.entity,
                         static_cast<Dtype>(config.eta), static_cast<Dtype>(config.mu));
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(const Split& split, std::size_t batch_size,
                                                   Rng& rng) {
  std::vector<std::size_t> pending(split.captions.size());
  for (std::size_t i = 0; i < pending.size(); ++i) pending[i] = i;
  std::shuffle(pending.begin(), pending.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  while (!pending.empty()) {
    std::vector<std::size_t> batch, rest;
    std::unordered_set<std::size_t> used;
    for (std::size_t c : pending) {
      if (batch.size() < batch_size && used.insert(split.captions[c].video).second) {
        batch.push_back(c);
      } else {
        rest.push_back(c);
      }
    }
    if (batch.size() >= 2) batches.push_back(std::move(batch));
    pending = std::move(rest);
  }
  return batches;
}

std::string epoch_log_json(const EpochLog& log) {
  nlohmann::json j;
  j["epoch"] = log.epoch;
  j["train_loss"] = {{"total", log.loss},   {"latent", log.latent}, {"concept", log.concept_rank},
                     {"action", log.action}, {"entity", log.entity}};
  j["val"] = {{"t2v", {{"R@1", log.val.t2v.r1}, {"R@5", log.val.t2v.r5},
                       {"R@10", log.val.t2v.r10}, {"MdR", log.val.t2v.median_rank}}},
              {"v2t", {{"R@1", log.val.v2t.r1}, {"R@5", log.val.v2t.r5},
                       {"R@10", log.val.v2t.r10}, {"MdR", log.val.v2t.median_rank}}},
              {"SumR", log.val.sumr}};
  j["seconds"] = log.seconds;
  j["improved"] = log.improved;
  return j.dump();
}

TrainResult train(HanetModel<float>& model, const Dataset& data, const TrainConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch, std::size_t threads) {
  config.validate();
  if (data.train.captions.empty()) throw DataError(DataError::Code::kMissing, "empty training split");
  if (data.val.captions.empty()) throw DataError(DataError::Code::kMissing, "empty validation split");
  Rng rng(config.seed + 1);
  AdamOptions adam;
  adam.lr = config.lr;
  TrainResult result;
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochLog log;
    log.epoch = epoch;
    const auto batches = make_batches(data.train, config.batch_size, rng);
    if (batches.empty()) {
      throw DataError(DataError::Code::kMissing, "training split yields no batch of 2 or more");
    }
    for (const auto& batch : batches) {
      model.store().zero_grad();
      const BatchLoss<float> loss = batch_loss(model, data.train, batch, config, true);
      const double value = loss.total.item();
      if (!std::isfinite(value)) {
        std::string ids;
        for (std::size_t c : batch) ids += (ids.empty() ? "" : ", ") + data.train.captions[c].ann.caption_id;
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch) +
                           " on captions [" + ids + "]");
      }
      loss.total.backward();
      adam_step(model.store(), adam);
      log.loss += value;
      log.latent += loss.latent.item();
      log.concept_rank += loss.concept_rank.item();
      log.action += loss.action.item();
      log.entity += loss.entity.item();
    }
    const double nb = static_cast<double>(batches.size());
    log.loss /= nb;
    log.latent /= nb;
    log.concept_rank /= nb;
    log.action /= nb;
    log.entity /= nb;

    log.val = evaluate(model.score_matrix(data.val, threads), data.val.caption_to_video());
    log.improved = log.val.sumr > result.best_sumr;
    if (log.improved) {
      result.best_sumr = log.val.sumr;
      result.best_epoch = epoch;
      result.best_checkpoint = serialize_checkpoint(model.store());
      stale = 0;
    } else {
      ++stale;
    }
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
    if (stale >= config.patience) break;
  }
  deserialize_checkpoint(result.best_checkpoint, "best epoch", model.store());
  return result;
}

#define HANET_INSTANTIATE_TRAINING(T)                                                       \
  template Tensor<T> ranking_loss(const Tensor<T>&, T);                                     \
  template Tensor<T> concept_bce(const Tensor<T>&, const std::vector<float>&);              \
  template Tensor<T> total_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                const Tensor<T>&, T, T);                                    \
  template BatchLoss<T> batch_loss(HanetModel<T>&, const Split&,                            \
                                   const std::vector<std::size_t>&, const TrainConfig&, bool);

HANET_FOR_EACH_DTYPE(HANET_INSTANTIATE_TRAINING)

}  // namespace hanet
