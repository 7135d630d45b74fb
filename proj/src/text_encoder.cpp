#include "hanet/text_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hanet/error.hpp"
#include "hanet/ops.hpp"
#include "hanet/video_encoder.hpp"

namespace hanet {

std::vector<std::uint8_t> RoleGraph::adjacency() const {
  const std::size_t n = num_nodes();
  std::vector<std::uint8_t> mask(n * n, 0);
  for (const auto& e : edges) mask[e.dst * n + e.src] = 1;
  return mask;
}

std::vector<std::uint8_t> RoleGraph::type_mask(std::size_t type) const {
  const std::size_t n = num_nodes();
  std::vector<std::uint8_t> mask(n * n, 0);
  for (const auto& e : edges) {
    if (e.type == type) mask[e.dst * n + e.src] = 1;
  }
  return mask;
}

RoleGraph build_role_graph(const CaptionAnnotation& ann, const RoleDictionary& roles) {
  RoleGraph g;
  g.num_verbs = ann.verb_positions.size();
  g.num_nouns = ann.nouns.size();
  g.num_types = roles.num_types();
  auto link = [&](std::size_t a, std::size_t b, std::size_t type) {
    g.edges.push_back({a, b, type});
    g.edges.push_back({b, a, type});
  };
  for (std::size_t v = 0; v < g.num_verbs; ++v) link(0, 1 + v, RoleDictionary::kEventType);
  for (std::size_t k = 0; k < g.num_nouns; ++k) {
    const auto& noun = ann.nouns[k];
    const std::size_t node = 1 + g.num_verbs + k;
    if (!noun.verb_index) {
      link(0, node, RoleDictionary::kEventType);
      continue;
    }
    const auto it = std::find(ann.verb_positions.begin(), ann.verb_positions.end(),
                              *noun.verb_index);
    if (it == ann.verb_positions.end()) {
      throw DataError(DataError::Code::kInvalidRecord,
                      "caption '" + ann.caption_id + "': noun governed by a non-verb token");
    }
    const std::size_t verb_node =
        1 + static_cast<std::size_t>(std::distance(ann.verb_positions.begin(), it));
    link(verb_node, node, roles.type_of(noun.role));
  }
  return g;
}

template <typename Dtype>
std::pair<Tensor<Dtype>, Tensor<Dtype>> relational_gcn(const Tensor<Dtype>& g,
                                                       const RoleGraph& graph,
                                                       const Tensor<Dtype>& w_query,
                                                       const Tensor<Dtype>& w_key,
                                                       const Tensor<Dtype>& w_message,
                                                       const Tensor<Dtype>& role_embedding) {
  const std::size_t n = graph.num_nodes();
  if (g.rank() != 2 || g.dim(0) != n) {
    throw ShapeError("relational_gcn: expected " + std::to_string(n) + " node rows, got " +
                     shape_str(g.shape()));
  }
  const Dtype inv_sqrt_d = Dtype(1) / std::sqrt(static_cast<Dtype>(g.dim(1)));
  const Tensor<Dtype> q = ops::matmul(g, w_query);
  const Tensor<Dtype> k = ops::matmul(g, w_key);
  const Tensor<Dtype> beta =
      ops::masked_softmax(ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt_d),
                          graph.adjacency());
  const Tensor<Dtype> h = ops::matmul(g, w_message);
  std::set<std::size_t> types;
  for (const auto& e : graph.edges) types.insert(e.type);
  Tensor<Dtype> out = g;
  for (std::size_t t : types) {
    const auto mask = graph.type_mask(t);
    std::vector<Dtype> mask_values(mask.begin(), mask.end());
    const Tensor<Dtype> beta_t = ops::mul(beta, Tensor<Dtype>({n, n}, std::move(mask_values)));
    const Tensor<Dtype> message = ops::mul(ops::matmul(beta_t, h), ops::slice(role_embedding, 0, t, 1));
    out = ops::add(out, message);
  }
  return {out, beta};
}

template <typename Dtype>
Tensor<Dtype> gru_direction(const Tensor<Dtype>& x, const Tensor<Dtype>& w,
                            const Tensor<Dtype>& u, const Tensor<Dtype>& b_i,
                            const Tensor<Dtype>& b_h, bool reverse) {
  const std::size_t m = x.dim(0), d = u.dim(0);
  const Tensor<Dtype> gi = ops::add(ops::matmul(x, w), b_i);
  Tensor<Dtype> h = Tensor<Dtype>::full({1, d}, Dtype(0));
  std::vector<Tensor<Dtype>> states(m);
  for (std::size_t step = 0; step < m; ++step) {
    const std::size_t t = reverse ? m - 1 - step : step;
    const Tensor<Dtype> xt = ops::slice(gi, 0, t, 1);
    const Tensor<Dtype> gh = ops::add(ops::matmul(h, u), b_h);
    const Tensor<Dtype> z = ops::sigmoid(ops::add(ops::slice(xt, 1, 0, d), ops::slice(gh, 1, 0, d)));
    const Tensor<Dtype> r = ops::sigmoid(ops::add(ops::slice(xt, 1, d, d), ops::slice(gh, 1, d, d)));
    const Tensor<Dtype> cand =
        ops::tanh(ops::add(ops::slice(xt, 1, 2 * d, d), ops::mul(r, ops::slice(gh, 1, 2 * d, d))));
    // h' = (1 - z) * n + z * h
    h = ops::add(cand, ops::mul(z, ops::sub(h, cand)));
    states[t] = h;
  }
  return ops::concat(states, 0);
}

template <typename Dtype>
TextEncoder<Dtype>::TextEncoder(ParamStore<Dtype>& store, const ModelConfig& config,
                                const WordEmbeddings& embeddings, const RoleDictionary& roles,
                                Rng& rng)
    : store_(store), config_(config), roles_(roles) {
  const std::size_t e = config.embed_dim, d = config.dim;
  if (embeddings.dim != e) {
    throw ConfigError("text encoder: embedding width " + std::to_string(embeddings.dim) +
                      " does not match embed_dim " + std::to_string(e));
  }
  if (roles.num_types() != config.role_types) {
    throw ConfigError("text encoder: role dictionary has " + std::to_string(roles.num_types()) +
                      " types, config expects " + std::to_string(config.role_types));
  }
  vocab_size_ = embeddings.words.size();
  for (std::size_t i = 0; i < vocab_size_; ++i) word_index_.emplace(embeddings.words[i], i);
  std::vector<Dtype> table(embeddings.values.begin(), embeddings.values.end());
  std::uniform_real_distribution<double> oov(-0.1, 0.1);
  for (std::size_t i = 0; i < e; ++i) table.push_back(static_cast<Dtype>(oov(rng)));
  store.add_parameter("text.embed", Tensor<Dtype>({vocab_size_ + 1, e}, std::move(table)));

  for (const char* dir : {"fwd", "bwd"}) {
    const std::string gru = std::string("text.gru_") + dir;
    store.glorot(gru + ".w", {e, 3 * d}, e, d, rng);
    store.glorot(gru + ".u", {d, 3 * d}, d, d, rng);
    store.constant(gru + ".b_i", {3 * d}, Dtype(0));
    store.constant(gru + ".b_h", {3 * d}, Dtype(0));
  }
  store.glorot("text.att.w", {d, 1}, d, 1, rng);
  const std::pair<const char*, std::size_t> heads[] = {{"a", config.k_actions},
                                                       {"e", config.k_entities}};
  for (const auto& [level, k] : heads) {
    const std::string head = std::string("text.head_") + level;
    store.glorot(head + ".w", {1, d, k}, d, k, rng);
    const std::string bn = std::string("text.bn_") + level;
    store.constant(bn + ".gamma", {k}, Dtype(1));
    store.constant(bn + ".beta", {k}, Dtype(0));
    store.add_buffer(bn + ".running_mean", Tensor<Dtype>::full({k}, Dtype(0)));
    store.add_buffer(bn + ".running_var", Tensor<Dtype>::full({k}, Dtype(1)));
  }
  store.glorot("text.gcn.w_query", {d, d}, d, d, rng);
  store.glorot("text.gcn.w_key", {d, d}, d, d, rng);
  store.glorot("text.gcn.w_message", {d, d}, d, d, rng);
  store.glorot("text.gcn.role", {config.role_types, d}, config.role_types, d, rng);
}

template <typename Dtype>
std::size_t TextEncoder<Dtype>::token_index(const std::string& token) const {
  if (auto it = word_index_.find(token); it != word_index_.end()) return it->second;
  if (auto it = word_index_.find(to_lower(token)); it != word_index_.end()) return it->second;
  return vocab_size_;
}

template <typename Dtype>
Tensor<Dtype> TextEncoder<Dtype>::embed_tokens(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw DataError(DataError::Code::kInvalidRecord, "embed_tokens: empty caption");
  std::vector<std::size_t> rows;
  rows.reserve(tokens.size());
  for (const auto& t : tokens) rows.push_back(token_index(t));
  return ops::gather_rows(p("text.embed"), rows);
}

template <typename Dtype>
Tensor<Dtype> TextEncoder<Dtype>::bigru_encode(const Tensor<Dtype>& embedded) const {
  const Tensor<Dtype> fwd = gru_direction(embedded, p("text.gru_fwd.w"), p("text.gru_fwd.u"),
                                          p("text.gru_fwd.b_i"), p("text.gru_fwd.b_h"), false);
  const Tensor<Dtype> bwd = gru_direction(embedded, p("text.gru_bwd.w"), p("text.gru_bwd.u"),
                                          p("text.gru_bwd.b_i"), p("text.gru_bwd.b_h"), true);
  return ops::scale(ops::add(fwd, bwd), Dtype(0.5));
}

template <typename Dtype>
std::vector<TextEncodings<Dtype>> TextEncoder<Dtype>::encode(
    const std::vector<const CaptionAnnotation*>& captions, bool training) {
  std::vector<TextEncodings<Dtype>> out(captions.size());
  std::vector<Tensor<Dtype>> pre_a, pre_e;
  const auto zero_a = Tensor<Dtype>::full({config_.k_actions}, Dtype(0));
  const auto zero_e = Tensor<Dtype>::full({config_.k_entities}, Dtype(0));
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const CaptionAnnotation& ann = *captions[i];
    auto& enc = out[i];
    enc.s_ind = bigru_encode(embed_tokens(ann.tokens));
    if (!ann.verb_positions.empty()) {
      enc.s_ind_a = ops::gather_rows(enc.s_ind, ann.verb_positions);
      pre_a.push_back(ops::conv1d(enc.s_ind_a, p("text.head_a.w"), zero_a));
    }
    if (!ann.nouns.empty()) {
      enc.s_ind_e = ops::gather_rows(enc.s_ind, ann.noun_positions());
      pre_e.push_back(ops::conv1d(enc.s_ind_e, p("text.head_e.w"), zero_e));
    }
    std::tie(enc.s_ind_g, enc.alpha) = attention_pool(enc.s_ind, p("text.att.w"));
  }

  ops::BatchNormOptions bn;
  bn.training = training;
  auto heads = [&](const std::vector<Tensor<Dtype>>& pre, const std::string& level) {
    if (pre.empty()) return Tensor<Dtype>();
    return ops::sigmoid(ops::batch_norm(
        ops::concat(pre, 0), p("text.bn_" + level + ".gamma"), p("text.bn_" + level + ".beta"),
        store_.buffer("text.bn_" + level + ".running_mean"),
        store_.buffer("text.bn_" + level + ".running_var"), bn));
  };
  const Tensor<Dtype> conf_a = heads(pre_a, "a");
  const Tensor<Dtype> conf_e = heads(pre_e, "e");

  std::size_t off_a = 0, off_e = 0;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const CaptionAnnotation& ann = *captions[i];
    auto& enc = out[i];
    const std::size_t ma = ann.verb_positions.size(), me = ann.nouns.size();
    std::vector<Tensor<Dtype>> nodes = {enc.s_ind_g};
    if (ma > 0) {
      enc.l_s_a = ops::slice(conf_a, 0, off_a, ma);
      off_a += ma;
      enc.p_s_a = mil_pool(enc.l_s_a);
      nodes.push_back(enc.s_ind_a);
    } else {
      enc.p_s_a = Tensor<Dtype>::full({config_.k_actions}, Dtype(0));
    }
    if (me > 0) {
      enc.l_s_e = ops::slice(conf_e, 0, off_e, me);
      off_e += me;
      enc.p_s_e = mil_pool(enc.l_s_e);
      nodes.push_back(enc.s_ind_e);
    } else {
      enc.p_s_e = Tensor<Dtype>::full({config_.k_entities}, Dtype(0));
    }
    enc.graph = build_role_graph(ann, roles_);
    Tensor<Dtype> g_out;
    std::tie(g_out, enc.beta) =
        relational_gcn(ops::concat(nodes, 0), enc.graph, p("text.gcn.w_query"),
                       p("text.gcn.w_key"), p("text.gcn.w_message"), p("text.gcn.role"));
    enc.s_glo_g = ops::slice(g_out, 0, 0, 1);
    if (ma > 0) enc.s_loc_a = ops::slice(g_out, 0, 1, ma);
    if (me > 0) enc.s_loc_e = ops::slice(g_out, 0, 1 + ma, me);
  }
  return out;
}

#define HANET_INSTANTIATE_TEXT(T)                                                           \
  template std::pair<Tensor<T>, Tensor<T>> relational_gcn(                                  \
      const Tensor<T>&, const RoleGraph&, const Tensor<T>&, const Tensor<T>&,               \
      const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> gru_direction(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                   const Tensor<T>&, const Tensor<T>&, bool);

HANET_FOR_EACH_DTYPE(HANET_INSTANTIATE_TEXT)
HANET_INSTANTIATE_CLASS(TextEncoder);

}  // namespace hanet
