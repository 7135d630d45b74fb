#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hanet/model.hpp"
#include "hanet/param_store.hpp"
#include "hanet/retrieval.hpp"
#include "hanet/synthetic.hpp"
#include "hanet/tensor.hpp"
#include "hanet/training.hpp"

namespace hanet::testing {

using Matrix = std::vector<std::vector<double>>;

// Uniform values in [lo, hi).
Tensor<double> uniform(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                       bool requires_grad = true);
// Uniform values whose magnitude is at least `gap`, so kinks at zero are
// never within finite-difference reach.
Tensor<double> away_from_zero(const Shape& shape, Rng& rng, double gap = 0.05);
Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi);
Tensor<double> to_tensor(const Matrix& m, bool requires_grad = false);

struct GradCheckReport {
  bool ok = true;
  std::size_t checked = 0;
  double worst_ratio = 0.0;  // |analytic - numeric| / allowed, maximized
  std::string worst;         // description of the worst entry
};

// Compares analytic gradients of the scalar f() w.r.t. every element of
// `inputs` with central differences. An entry passes when
// |a - n| <= max(abs_floor, rel * max(|a|, |n|)).
GradCheckReport grad_check(const std::function<Tensor<double>()>& f,
                           const std::vector<Tensor<double>>& inputs, double eps = 1e-6,
                           double rel = 1e-3, double abs_floor = 1e-5);

// sum(out * weights) with fixed random weights, so every output element
// contributes a distinct gradient.
Tensor<double> weighted_sum(const Tensor<double>& out, Rng& rng);

struct GradCase {
  std::string name;
  // Builds fresh inputs from rng and returns the scalar objective together
  // with the tensors to differentiate.
  std::function<std::pair<std::function<Tensor<double>()>, std::vector<Tensor<double>>>(Rng&)>
      build;
};

// One case per differentiable primitive and per composite building block.
const std::vector<GradCase>& gradient_cases();

// Tiny planted dataset and model for tests that exercise the whole stack.
SyntheticSpec tiny_spec(std::uint64_t seed = 3);
Dataset tiny_dataset(std::uint64_t seed = 3);
TrainConfig tiny_train_config();

// Finite-difference check of the full objective over every parameter of
// the model on the given caption batch.
GradCheckReport full_loss_grad_check(HanetModel<double>& model, const Split& split,
                                     const std::vector<std::size_t>& batch,
                                     const TrainConfig& config);

// Independent straight-line oracles.
std::vector<double> oracle_mil_pool(const Matrix& l);
double oracle_jaccard(const std::vector<double>& a, const std::vector<double>& b);
double oracle_stacked_attention(const Matrix& video, const Matrix& text, double lambda,
                                bool normalize);
double oracle_ranking_loss(const Matrix& s, double margin);
EvalReport oracle_evaluate(const ScoreMatrix& m, const std::vector<std::size_t>& caption_to_video);

}  // namespace hanet::testing
