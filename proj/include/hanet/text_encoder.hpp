#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "hanet/corpus.hpp"
#include "hanet/data_io.hpp"
#include "hanet/model_config.hpp"
#include "hanet/param_store.hpp"
#include "hanet/tensor.hpp"

namespace hanet {

struct RoleEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  std::size_t type = 0;
};

// Node 0 is the event, then one node per verb (annotation order), then one
// per noun (annotation order). Edges come in both directions.
struct RoleGraph {
  std::size_t num_verbs = 0;
  std::size_t num_nouns = 0;
  std::size_t num_types = 0;
  std::vector<RoleEdge> edges;

  std::size_t num_nodes() const { return 1 + num_verbs + num_nouns; }
  // mask[i * n + j] = 1 when j is a neighbour of i.
  std::vector<std::uint8_t> adjacency() const;
  std::vector<std::uint8_t> type_mask(std::size_t type) const;
};

RoleGraph build_role_graph(const CaptionAnnotation& ann, const RoleDictionary& roles);

// Empty tensors (defined() == false) stand for empty verb or noun sets.
template <typename Dtype>
struct TextEncodings {
  Tensor<Dtype> s_ind;             // M x D
  Tensor<Dtype> s_ind_a, s_ind_e;  // M^a x D, M^e x D
  Tensor<Dtype> s_ind_g;           // 1 x D
  Tensor<Dtype> alpha;             // M x 1 word attention
  Tensor<Dtype> l_s_a, l_s_e;      // M^a x K_a, M^e x K_e
  Tensor<Dtype> p_s_a, p_s_e;      // K_a, K_e (zeros for an empty set)
  Tensor<Dtype> s_loc_a, s_loc_e;  // M^a x D, M^e x D
  Tensor<Dtype> s_glo_g;           // 1 x D
  Tensor<Dtype> beta;              // nodes x nodes graph attention
  RoleGraph graph;

  bool has_verbs() const { return s_ind_a.defined(); }
  bool has_nouns() const { return s_ind_e.defined(); }
};

// One GCN layer with typed, attention-weighted messages and a residual:
// out_i = g_i + sum_j beta_ij * (g_j W_t) * e_{type(i,j)}.
// Returns (out, beta).
template <typename Dtype>
std::pair<Tensor<Dtype>, Tensor<Dtype>> relational_gcn(const Tensor<Dtype>& g,
                                                       const RoleGraph& graph,
                                                       const Tensor<Dtype>& w_query,
                                                       const Tensor<Dtype>& w_key,
                                                       const Tensor<Dtype>& w_message,
                                                       const Tensor<Dtype>& role_embedding);

// Bidirectional GRU with zero initial states; the output row t is the mean
// of the forward and backward states at t. Each direction uses
// w [E, 3D], u [D, 3D], b_i [3D], b_h [3D] with gates ordered (z, r, n).
template <typename Dtype>
Tensor<Dtype> gru_direction(const Tensor<Dtype>& x, const Tensor<Dtype>& w,
                            const Tensor<Dtype>& u, const Tensor<Dtype>& b_i,
                            const Tensor<Dtype>& b_h, bool reverse);

template <typename Dtype>
class TextEncoder {
 public:
  // The embedding table is initialized from `embeddings` plus one shared
  // out-of-vocabulary row; all rows are trainable.
  TextEncoder(ParamStore<Dtype>& store, const ModelConfig& config,
              const WordEmbeddings& embeddings, const RoleDictionary& roles, Rng& rng);

  std::size_t token_index(const std::string& token) const;
  std::size_t oov_index() const { return vocab_size_; }

  Tensor<Dtype> embed_tokens(const std::vector<std::string>& tokens) const;
  Tensor<Dtype> bigru_encode(const Tensor<Dtype>& embedded) const;

  std::vector<TextEncodings<Dtype>> encode(const std::vector<const CaptionAnnotation*>& captions,
                                           bool training);

 private:
  const Tensor<Dtype>& p(const std::string& name) const { return store_.parameter(name); }

  ParamStore<Dtype>& store_;
  ModelConfig config_;
  RoleDictionary roles_;
  std::unordered_map<std::string, std::size_t> word_index_;
  std::size_t vocab_size_ = 0;
};

}  // namespace hanet
