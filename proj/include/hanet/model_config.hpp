#pragma once

#include <cstddef>
#include <cstdint>

namespace hanet {

// Which latent levels enter c_l; switching levels off gives the ablations.
struct LevelToggles {
  bool individual = true;
  bool local = true;
  bool global = true;

  bool any() const { return individual || local || global; }
};

struct AlignmentOptions {
  double lambda = 4.0;               // softmax temperature of the stacked attention
  bool stack_sum_normalize = true;   // divide the attention sum by the video row count
  LevelToggles levels;
};

struct ModelConfig {
  std::size_t feature_dim = 0;  // D_in of the frame features
  std::size_t embed_dim = 0;    // word embedding width
  std::size_t dim = 256;        // shared latent width D
  std::size_t k_actions = 512;
  std::size_t k_entities = 1024;
  std::size_t n_actions = 10;   // reliable action concepts per video
  std::size_t n_entities = 20;  // reliable entity concepts per video
  std::size_t se_ratio = 16;
  std::size_t role_types = 16;
  std::uint64_t seed = 0;
  AlignmentOptions align;

  // SE bottleneck width: ceil(D / r), at least 4.
  std::size_t se_width() const {
    const std::size_t w = (dim + se_ratio - 1) / se_ratio;
    return w < 4 ? 4 : w;
  }
};

}  // namespace hanet
