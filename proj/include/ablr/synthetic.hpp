#pragma once

#include <cstdint>

#include "ablr/meta_store.hpp"

namespace ablr {

struct SyntheticConfig {
    std::int32_t n_pipelines = 50;
    std::int32_t n_datasets = 20;
    std::int32_t latent_dim = 4;
    double noise_std = 0.02;
    double missing_rate = 0.0;   // in [0,1)
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
};

// Seeded stand-in meta-dataset: scores are clip(sigmoid(u_i.v_j + b_j) +
// noise, 0, 1) from latent factors, and the meta-features are v_j plus noisy
// nonlinear transforms of v_j, so they genuinely predict the scores. Entries
// are dropped independently at missing_rate; a dataset that would lose every
// entry keeps its lowest-index one so each column stays non-empty.
MetaDataset generate_synthetic(const SyntheticConfig& config);

}  // namespace ablr
