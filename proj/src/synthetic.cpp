#include "ablr/synthetic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ablr/errors.hpp"
#include "ablr/rng.hpp"

namespace ablr {
namespace {

constexpr std::uint64_t kFactorStream = 0x01;
constexpr std::uint64_t kNoiseStream = 0x02;
constexpr std::uint64_t kMissingStream = 0x03;
constexpr std::uint64_t kFeatureStream = 0x04;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string dataset_name(std::int32_t index, std::int32_t total) {
    int width = 1;
    for (std::int32_t v = total - 1; v >= 10; v /= 10) ++width;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth_%0*d", width, index);
    return std::string(buf);
}

}  // namespace

MetaDataset generate_synthetic(const SyntheticConfig& config) {
    if (config.n_pipelines < 1 || config.n_datasets < 2) {
        throw ValidationError("synthetic generator needs at least 1 pipeline and 2 datasets");
    }
    if (config.latent_dim < 1) {
        throw ValidationError("synthetic latent_dim must be at least 1");
    }
    if (!(config.missing_rate >= 0.0) || config.missing_rate >= 1.0) {
        throw ValidationError("synthetic missing_rate must lie in [0, 1)");
    }

    const std::int32_t n = config.n_pipelines;
    const std::int32_t d = config.n_datasets;
    const std::int32_t k = config.latent_dim;

    Rng factor_rng(derive_seed(config.seed, {kFactorStream}));
    Eigen::MatrixXd u(n, k);
    for (std::int32_t i = 0; i < n; ++i) {
        for (std::int32_t c = 0; c < k; ++c) u(i, c) = factor_rng.normal();
    }
    Eigen::MatrixXd v(d, k);
    for (std::int32_t j = 0; j < d; ++j) {
        for (std::int32_t c = 0; c < k; ++c) v(j, c) = factor_rng.normal();
    }
    Eigen::VectorXd b(d);
    for (std::int32_t j = 0; j < d; ++j) b(j) = 0.5 * factor_rng.normal();

    Rng noise_rng(derive_seed(config.seed, {kNoiseStream}));
    Eigen::MatrixXd scores(n, d);
    for (std::int32_t i = 0; i < n; ++i) {
        for (std::int32_t j = 0; j < d; ++j) {
            double y = sigmoid(u.row(i).dot(v.row(j)) + b(j));
            y += config.noise_std * noise_rng.normal();
            scores(i, j) = std::clamp(y, 0.0, 1.0);
        }
    }

    // Missingness mask, drawn cell by cell so the score draws above are
    // unaffected by the rate.
    Rng missing_rng(derive_seed(config.seed, {kMissingStream}));
    std::vector<char> keep(static_cast<std::size_t>(n) * d, 1);
    for (std::int32_t i = 0; i < n; ++i) {
        for (std::int32_t j = 0; j < d; ++j) {
            if (missing_rng.uniform() < config.missing_rate) {
                keep[static_cast<std::size_t>(i) * d + j] = 0;
            }
        }
    }
    for (std::int32_t j = 0; j < d; ++j) {
        bool any = false;
        for (std::int32_t i = 0; i < n && !any; ++i) {
            any = keep[static_cast<std::size_t>(i) * d + j] != 0;
        }
        if (!any) keep[static_cast<std::size_t>(0) * d + j] = 1;
    }

    MetaDataset md;
    md.dataset_names.reserve(static_cast<std::size_t>(d));
    for (std::int32_t j = 0; j < d; ++j) {
        md.dataset_names.push_back(dataset_name(j, d));
    }
    md.performance = PerformanceMatrix(n, d);
    for (std::int32_t i = 0; i < n; ++i) {
        for (std::int32_t j = 0; j < d; ++j) {
            if (keep[static_cast<std::size_t>(i) * d + j] != 0) {
                md.performance.add_entry(i, j, scores(i, j));
            }
        }
    }

    Rng feature_rng(derive_seed(config.seed, {kFeatureStream}));
    md.meta_features.version = "metafeatures-synthetic-v1";
    md.meta_features.feature_names.reserve(static_cast<std::size_t>(3) * k);
    for (std::int32_t c = 0; c < k; ++c) {
        md.meta_features.feature_names.push_back("latent_lin_" + std::to_string(c));
    }
    for (std::int32_t c = 0; c < k; ++c) {
        md.meta_features.feature_names.push_back("latent_tanh_" + std::to_string(c));
    }
    for (std::int32_t c = 0; c < k; ++c) {
        md.meta_features.feature_names.push_back("latent_sq_" + std::to_string(c));
    }
    md.meta_features.rows.resize(d, 3 * k);
    for (std::int32_t j = 0; j < d; ++j) {
        for (std::int32_t c = 0; c < k; ++c) {
            md.meta_features.rows(j, c) = v(j, c) + 0.01 * feature_rng.normal();
        }
        for (std::int32_t c = 0; c < k; ++c) {
            md.meta_features.rows(j, k + c) = std::tanh(2.0 * v(j, c)) + 0.01 * feature_rng.normal();
        }
        for (std::int32_t c = 0; c < k; ++c) {
            md.meta_features.rows(j, 2 * k + c) = v(j, c) * v(j, c) + 0.01 * feature_rng.normal();
        }
    }

    assign_random_split(md, config.seed, config.train_fraction);
    return md;
}

}  // namespace ablr
