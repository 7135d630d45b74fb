#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "hanet/alignment.hpp"
#include "hanet/ops.hpp"
#include "hanet/text_encoder.hpp"
#include "hanet/video_encoder.hpp"

namespace hanet::testing {

Tensor<double> uniform(const Shape& shape, Rng& rng, double lo, double hi, bool requires_grad) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = dist(rng);
  return Tensor<double>(shape, std::move(v), requires_grad);
}

Tensor<double> away_from_zero(const Shape& shape, Rng& rng, double gap) {
  std::uniform_real_distribution<double> dist(gap, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = sign(rng) ? dist(rng) : -dist(rng);
  return Tensor<double>(shape, std::move(v), true);
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, std::vector<double>(cols));
  for (auto& row : m) {
    for (double& x : row) x = dist(rng);
  }
  return m;
}

Tensor<double> to_tensor(const Matrix& m, bool requires_grad) {
  std::vector<double> v;
  for (const auto& row : m) v.insert(v.end(), row.begin(), row.end());
  return Tensor<double>({m.size(), m.empty() ? 0 : m[0].size()}, std::move(v), requires_grad);
}

GradCheckReport grad_check(const std::function<Tensor<double>()>& f,
                           const std::vector<Tensor<double>>& inputs, double eps, double rel,
                           double abs_floor) {
  std::vector<Tensor<double>> xs = inputs;
  for (auto& x : xs) x.zero_grad();
  f().backward();
  std::vector<std::vector<double>> analytic;
  for (auto& x : xs) analytic.emplace_back(x.grad().begin(), x.grad().end());

  GradCheckReport report;
  NoGradGuard guard;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    auto values = xs[k].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = f().item();
      values[i] = saved - eps;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double allowed = std::max(abs_floor, rel * std::max(std::abs(a), std::abs(numeric)));
      const double ratio = std::abs(a - numeric) / allowed;
      ++report.checked;
      if (!(ratio <= 1.0)) report.ok = false;
      if (!(ratio <= report.worst_ratio)) {
        report.worst_ratio = ratio;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "input %zu[%zu]: analytic %.8g numeric %.8g", k, i, a,
                      numeric);
        report.worst = buf;
      }
    }
  }
  return report;
}

Tensor<double> weighted_sum(const Tensor<double>& out, Rng& rng) {
  const Tensor<double> w = uniform(out.shape(), rng, -1.0, 1.0, false);
  return ops::sum(ops::mul(out, w));
}

namespace {

using Inputs = std::vector<Tensor<double>>;
using Built = std::pair<std::function<Tensor<double>()>, Inputs>;

// Wraps an op with one weighted-sum readout; the weights are drawn once.
Built readout(std::function<Tensor<double>()> op, Inputs inputs, Rng& rng) {
  const Tensor<double> probe = op();
  const Tensor<double> w = uniform(probe.shape(), rng, -1.0, 1.0, false);
  return {[op, w] { return ops::sum(ops::mul(op(), w)); }, std::move(inputs)};
}

RoleGraph sample_graph() {
  CaptionAnnotation ann;
  ann.tokens = {"a", "man", "cuts", "bread", "and", "eats", "it", "quickly"};
  ann.verb_positions = {2, 5};
  ann.nouns = {{1, 2, "ARG0"}, {3, 2, "ARG1"}, {6, 5, "ARG1"}, {7, std::nullopt, ""}};
  return build_role_graph(ann, RoleDictionary(4, {"ARG0", "ARG1"}));
}

std::vector<GradCase> make_cases() {
  std::vector<GradCase> cases;
  auto add = [&](std::string name, std::function<Built(Rng&)> build) {
    cases.push_back({std::move(name), std::move(build)});
  };

  add("add_broadcast", [](Rng& r) {
    auto a = uniform({3, 4}, r), b = uniform({1, 4}, r);
    return readout([=] { return ops::add(a, b); }, {a, b}, r);
  });
  add("sub_broadcast", [](Rng& r) {
    auto a = uniform({3, 4}, r), b = uniform({3, 1}, r);
    return readout([=] { return ops::sub(a, b); }, {a, b}, r);
  });
  add("mul_broadcast", [](Rng& r) {
    auto a = uniform({2, 3, 4}, r), b = uniform({4}, r);
    return readout([=] { return ops::mul(a, b); }, {a, b}, r);
  });
  add("div", [](Rng& r) {
    auto a = uniform({3, 4}, r), b = uniform({3, 4}, r, 0.5, 2.0);
    return readout([=] { return ops::div(a, b); }, {a, b}, r);
  });
  add("minimum", [](Rng& r) {
    auto a = uniform({3, 4}, r), b = uniform({3, 4}, r);
    return readout([=] { return ops::minimum(a, b); }, {a, b}, r);
  });
  add("maximum", [](Rng& r) {
    auto a = uniform({3, 4}, r), b = uniform({1, 4}, r);
    return readout([=] { return ops::maximum(a, b); }, {a, b}, r);
  });
  add("add_scalar", [](Rng& r) {
    auto a = uniform({5}, r);
    return readout([=] { return ops::add_scalar(a, 0.3); }, {a}, r);
  });
  add("scale", [](Rng& r) {
    auto a = uniform({2, 3}, r);
    return readout([=] { return ops::scale(a, -1.7); }, {a}, r);
  });
  add("relu", [](Rng& r) {
    auto a = away_from_zero({4, 3}, r);
    return readout([=] { return ops::relu(a); }, {a}, r);
  });
  add("sigmoid", [](Rng& r) {
    auto a = uniform({4, 3}, r, -3.0, 3.0);
    return readout([=] { return ops::sigmoid(a); }, {a}, r);
  });
  add("tanh", [](Rng& r) {
    auto a = uniform({4, 3}, r, -2.0, 2.0);
    return readout([=] { return ops::tanh(a); }, {a}, r);
  });
  add("exp", [](Rng& r) {
    auto a = uniform({6}, r);
    return readout([=] { return ops::exp(a); }, {a}, r);
  });
  add("log", [](Rng& r) {
    auto a = uniform({6}, r, 0.2, 3.0);
    return readout([=] { return ops::log(a); }, {a}, r);
  });
  add("sqrt", [](Rng& r) {
    auto a = uniform({6}, r, 0.2, 3.0);
    return readout([=] { return ops::sqrt(a); }, {a}, r);
  });
  add("clamp", [](Rng& r) {
    auto a = away_from_zero({8}, r);
    for (double& v : a.mutable_values()) {
      if (std::abs(std::abs(v) - 0.5) < 0.05) v = v > 0 ? 0.7 : -0.7;
    }
    return readout([=] { return ops::clamp(a, -0.5, 0.5); }, {a}, r);
  });
  add("matmul", [](Rng& r) {
    auto a = uniform({3, 4}, r), b = uniform({4, 5}, r);
    return readout([=] { return ops::matmul(a, b); }, {a, b}, r);
  });
  add("transpose", [](Rng& r) {
    auto a = uniform({3, 4}, r);
    return readout([=] { return ops::transpose(a); }, {a}, r);
  });
  add("reshape", [](Rng& r) {
    auto a = uniform({3, 4}, r);
    return readout([=] { return ops::reshape(a, {2, 6}); }, {a}, r);
  });
  add("sum_all", [](Rng& r) {
    auto a = uniform({3, 4}, r);
    return readout([=] { return ops::sum(a); }, {a}, r);
  });
  add("sum_axis0", [](Rng& r) {
    auto a = uniform({3, 4}, r);
    return readout([=] { return ops::sum(a, 0, false); }, {a}, r);
  });
  add("sum_axis1_keepdim", [](Rng& r) {
    auto a = uniform({3, 4}, r);
    return readout([=] { return ops::sum(a, 1, true); }, {a}, r);
  });
  add("mean_all", [](Rng& r) {
    auto a = uniform({3, 4}, r);
    return readout([=] { return ops::mean(a); }, {a}, r);
  });
  add("mean_axis1", [](Rng& r) {
    auto a = uniform({2, 3, 4}, r);
    return readout([=] { return ops::mean(a, 1, false); }, {a}, r);
  });
  add("softmax_axis0", [](Rng& r) {
    auto a = uniform({4, 3}, r, -2.0, 2.0);
    return readout([=] { return ops::softmax(a, 0); }, {a}, r);
  });
  add("softmax_axis1", [](Rng& r) {
    auto a = uniform({3, 5}, r, -2.0, 2.0);
    return readout([=] { return ops::softmax(a, 1); }, {a}, r);
  });
  add("masked_softmax", [](Rng& r) {
    auto a = uniform({3, 4}, r, -2.0, 2.0);
    const std::vector<std::uint8_t> mask = {1, 0, 1, 1, 0, 0, 0, 0, 0, 1, 1, 0};
    return readout([=] { return ops::masked_softmax(a, mask); }, {a}, r);
  });
  add("topk_axis0", [](Rng& r) {
    auto a = uniform({6, 3}, r);
    return readout([=] { return ops::topk(a, 2, 0); }, {a}, r);
  });
  add("topk_axis1", [](Rng& r) {
    auto a = uniform({3, 6}, r);
    return readout([=] { return ops::topk(a, 3, 1); }, {a}, r);
  });
  add("concat_axis0", [](Rng& r) {
    auto a = uniform({2, 3}, r), b = uniform({1, 3}, r);
    return readout([=] { return ops::concat<double>({a, b}, 0); }, {a, b}, r);
  });
  add("concat_axis1", [](Rng& r) {
    auto a = uniform({2, 3}, r), b = uniform({2, 2}, r);
    return readout([=] { return ops::concat<double>({a, b}, 1); }, {a, b}, r);
  });
  add("slice", [](Rng& r) {
    auto a = uniform({5, 4}, r);
    return readout([=] { return ops::slice(a, 1, 1, 2); }, {a}, r);
  });
  add("gather_rows", [](Rng& r) {
    auto a = uniform({4, 3}, r);
    return readout([=] { return ops::gather_rows(a, {2, 0, 2, 3}); }, {a}, r);
  });
  add("stack_scalars", [](Rng& r) {
    auto a = uniform({1}, r), b = uniform({1}, r);
    return readout([=] { return ops::stack_scalars<double>({a, b, a}); }, {a, b}, r);
  });
  add("conv1d_k5", [](Rng& r) {
    auto x = uniform({7, 3}, r), w = uniform({5, 3, 4}, r), b = uniform({4}, r);
    return readout([=] { return ops::conv1d(x, w, b); }, {x, w, b}, r);
  });
  add("conv1d_k3_short", [](Rng& r) {
    auto x = uniform({2, 3}, r), w = uniform({3, 3, 2}, r), b = uniform({2}, r);
    return readout([=] { return ops::conv1d(x, w, b); }, {x, w, b}, r);
  });
  add("batch_norm_train", [](Rng& r) {
    auto x = uniform({6, 3}, r, -2.0, 2.0), g = uniform({3}, r, 0.5, 1.5), b = uniform({3}, r);
    return readout(
        [=] {
          Tensor<double> rm = Tensor<double>::full({3}, 0.0), rv = Tensor<double>::full({3}, 1.0);
          return ops::batch_norm(x, g, b, rm, rv, {});
        },
        {x, g, b}, r);
  });
  add("batch_norm_eval", [](Rng& r) {
    auto x = uniform({4, 3}, r), g = uniform({3}, r), b = uniform({3}, r);
    return readout(
        [=] {
          Tensor<double> rm({3}, std::vector<double>{0.1, -0.2, 0.3});
          Tensor<double> rv({3}, std::vector<double>{0.5, 1.5, 2.0});
          return ops::batch_norm(x, g, b, rm, rv, {.training = false});
        },
        {x, g, b}, r);
  });
  add("l2_normalize_rows", [](Rng& r) {
    auto x = uniform({3, 4}, r);
    return readout([=] { return ops::l2_normalize_rows(x); }, {x}, r);
  });
  add("mil_pool", [](Rng& r) {
    auto l = uniform({17, 3}, r, 0.0, 1.0);
    return readout([=] { return mil_pool(l); }, {l}, r);
  });
  add("se_block", [](Rng& r) {
    auto x = uniform({5, 8}, r), w1 = uniform({8, 4}, r), b1 = uniform({4}, r, 0.1, 0.3),
         w2 = uniform({4, 8}, r), b2 = uniform({8}, r);
    return readout([=] { return se_block(x, w1, b1, w2, b2); }, {x, w1, b1, w2, b2}, r);
  });
  add("attention_pool", [](Rng& r) {
    auto x = uniform({5, 4}, r), w = uniform({4, 1}, r);
    return readout([=] { return attention_pool(x, w).first; }, {x, w}, r);
  });
  add("local_action", [](Rng& r) {
    auto v = uniform({9, 4}, r);
    const Tensor<double> l = uniform({9, 3}, r, 0.0, 1.0, false);
    return readout([=] { return build_local_action(v, l, {2, 0}); }, {v}, r);
  });
  add("local_entity", [](Rng& r) {
    auto v = uniform({6, 4}, r);
    const Tensor<double> l = uniform({6, 3}, r, 0.0, 1.0, false);
    return readout([=] { return build_local_entity(v, l, {1, 2}); }, {v}, r);
  });
  add("gru_forward", [](Rng& r) {
    auto x = uniform({4, 3}, r), w = uniform({3, 6}, r), u = uniform({2, 6}, r),
         bi = uniform({6}, r), bh = uniform({6}, r);
    return readout([=] { return gru_direction(x, w, u, bi, bh, false); }, {x, w, u, bi, bh}, r);
  });
  add("gru_backward", [](Rng& r) {
    auto x = uniform({3, 3}, r), w = uniform({3, 6}, r), u = uniform({2, 6}, r),
         bi = uniform({6}, r), bh = uniform({6}, r);
    return readout([=] { return gru_direction(x, w, u, bi, bh, true); }, {x, w, u, bi, bh}, r);
  });
  add("relational_gcn", [](Rng& r) {
    const RoleGraph graph = sample_graph();
    auto g = uniform({graph.num_nodes(), 4}, r), wq = uniform({4, 4}, r),
         wk = uniform({4, 4}, r), wm = uniform({4, 4}, r), role = uniform({4, 4}, r);
    return readout([=] { return relational_gcn(g, graph, wq, wk, wm, role).first; },
                   {g, wq, wk, wm, role}, r);
  });
  add("stacked_attention", [](Rng& r) {
    auto v = uniform({3, 5}, r), t = uniform({4, 5}, r);
    return readout([=] { return stacked_attention_similarity(v, t, 4.0, true); }, {v, t}, r);
  });
  add("jaccard", [](Rng& r) {
    auto a = uniform({6}, r, 0.0, 1.0), b = uniform({6}, r, 0.0, 1.0);
    return readout([=] { return jaccard_similarity(a, b); }, {a, b}, r);
  });
  add("global_similarity", [](Rng& r) {
    auto a = uniform({1, 5}, r), b = uniform({1, 5}, r);
    return readout([=] { return global_similarity(a, b); }, {a, b}, r);
  });
  add("ranking_loss", [](Rng& r) {
    auto s = uniform({4, 4}, r, -0.5, 0.5);
    return readout([=] { return ranking_loss(s, 0.2); }, {s}, r);
  });
  add("concept_bce", [](Rng& r) {
    auto p = uniform({5}, r, 0.05, 0.95);
    const std::vector<float> y = {1, 0, 0, 1, 0};
    return readout([=] { return concept_bce(p, y); }, {p}, r);
  });
  add("total_loss", [](Rng& r) {
    auto a = uniform({1}, r), b = uniform({1}, r), c = uniform({1}, r), d = uniform({1}, r);
    return readout([=] { return total_loss(a, b, c, d, 0.1, 0.01); }, {a, b, c, d}, r);
  });
  return cases;
}

}  // namespace

const std::vector<GradCase>& gradient_cases() {
  static const std::vector<GradCase> cases = make_cases();
  return cases;
}

SyntheticSpec tiny_spec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.k_actions = 4;
  spec.k_entities = 6;
  spec.train_samples = 12;
  spec.val_samples = 6;
  spec.min_frames = 3;
  spec.max_frames = 9;
  spec.dim = 6;
  spec.seed = seed;
  return spec;
}

Dataset tiny_dataset(std::uint64_t seed) {
  DatasetOptions options;
  options.k_actions = 4;
  options.k_entities = 6;
  options.role_types = 4;
  return to_dataset(generate_synthetic(tiny_spec(seed)), options);
}

TrainConfig tiny_train_config() {
  TrainConfig c;
  c.dim = 6;
  c.n_actions = 2;
  c.n_entities = 3;
  c.k_actions = 4;
  c.k_entities = 6;
  c.role_types = 4;
  c.batch_size = 4;
  c.max_epochs = 5;
  c.patience = 5;
  c.lr = 1e-3;
  c.seed = 11;
  return c;
}

GradCheckReport full_loss_grad_check(HanetModel<double>& model, const Split& split,
                                     const std::vector<std::size_t>& batch,
                                     const TrainConfig& config) {
  std::vector<Tensor<double>> params;
  for (const auto& name : model.store().parameter_names()) {
    params.push_back(model.store().parameter(name));
  }
  auto f = [&] { return batch_loss(model, split, batch, config, true).total; };
  return grad_check(f, params);
}

std::vector<double> oracle_mil_pool(const Matrix& l) {
  const std::size_t n = l.size(), k = l[0].size();
  const std::size_t tau = std::max<std::size_t>(1, n / 8);
  std::vector<double> p(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> col;
    for (const auto& row : l) col.push_back(row[c]);
    std::sort(col.begin(), col.end(), std::greater<>());
    p[c] = std::accumulate(col.begin(), col.begin() + tau, 0.0) / static_cast<double>(tau);
  }
  return p;
}

double oracle_jaccard(const std::vector<double>& a, const std::vector<double>& b) {
  double lo = 0, hi = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    lo += std::min(a[i], b[i]);
    hi += std::max(a[i], b[i]);
  }
  return hi == 0 ? 0.0 : lo / hi;
}

double oracle_stacked_attention(const Matrix& video, const Matrix& text, double lambda,
                                bool normalize) {
  auto norm = [](const std::vector<double>& x) {
    double s = 0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
  };
  double total = 0;
  for (const auto& v : video) {
    std::vector<double> c;
    for (const auto& t : text) {
      double dot = 0;
      for (std::size_t d = 0; d < v.size(); ++d) dot += v[d] * t[d];
      const double nv = norm(v), nt = norm(t);
      c.push_back(nv == 0 || nt == 0 ? 0.0 : dot / (nv * nt));
    }
    double sq = 0;
    for (double x : c) sq += std::max(x, 0.0) * std::max(x, 0.0);
    std::vector<double> e;
    double z = 0;
    for (double x : c) {
      e.push_back(std::exp(lambda * std::max(x, 0.0) / std::sqrt(sq + 1e-12)));
      z += e.back();
    }
    for (std::size_t j = 0; j < c.size(); ++j) total += e[j] / z * c[j];
  }
  return normalize ? total / static_cast<double>(video.size()) : total;
}

double oracle_ranking_loss(const Matrix& s, double margin) {
  const std::size_t b = s.size();
  double total = 0;
  for (std::size_t i = 0; i < b; ++i) {
    double row = -1e300, col = -1e300;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      row = std::max(row, s[i][j]);
      col = std::max(col, s[j][i]);
    }
    total += std::max(0.0, margin + row - s[i][i]) + std::max(0.0, margin + col - s[i][i]);
  }
  return total / static_cast<double>(b);
}

EvalReport oracle_evaluate(const ScoreMatrix& m, const std::vector<std::size_t>& caption_to_video) {
  // Rank = position in a stable descending sort where the positive is placed
  // ahead of every candidate with an equal score.
  auto rank_in = [](std::vector<std::pair<double, int>> items) {
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second > b.second;
    });
    for (std::size_t r = 0; r < items.size(); ++r) {
      if (items[r].second == 1) return r + 1;
    }
    return items.size() + 1;
  };
  auto summarize = [](std::vector<std::size_t> ranks, const char* dir) {
    RankReport rep;
    rep.direction = dir;
    rep.ranks = ranks;
    const double n = static_cast<double>(ranks.size());
    auto recall = [&](std::size_t k) {
      return 100.0 * static_cast<double>(std::count_if(ranks.begin(), ranks.end(),
                                                       [k](std::size_t x) { return x <= k; })) /
             n;
    };
    rep.r1 = recall(1);
    rep.r5 = recall(5);
    rep.r10 = recall(10);
    std::sort(ranks.begin(), ranks.end());
    rep.median_rank = static_cast<double>(ranks[(ranks.size() - 1) / 2]);
    return rep;
  };
  std::vector<std::size_t> t2v, v2t;
  for (std::size_t c = 0; c < m.captions; ++c) {
    std::vector<std::pair<double, int>> items;
    for (std::size_t v = 0; v < m.videos; ++v) {
      items.push_back({m.at(v, c), v == caption_to_video[c] ? 1 : 0});
    }
    t2v.push_back(rank_in(items));
  }
  for (std::size_t v = 0; v < m.videos; ++v) {
    std::size_t best = 0;
    for (std::size_t c = 0; c < m.captions; ++c) {
      if (caption_to_video[c] != v) continue;
      std::vector<std::pair<double, int>> items;
      for (std::size_t c2 = 0; c2 < m.captions; ++c2) {
        items.push_back({m.at(v, c2), c2 == c ? 1 : 0});
      }
      const std::size_t r = rank_in(items);
      best = best == 0 ? r : std::min(best, r);
    }
    if (best != 0) v2t.push_back(best);
  }
  EvalReport out;
  out.t2v = summarize(t2v, "t2v");
  out.v2t = summarize(v2t, "v2t");
  out.sumr = out.t2v.r1 + out.t2v.r5 + out.t2v.r10 + out.v2t.r1 + out.v2t.r5 + out.v2t.r10;
  return out;
}

}  // namespace hanet::testing
