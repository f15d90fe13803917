#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ablr/meta_store.hpp"

namespace ablr {

enum class Activation { tanh };

struct NetworkConfig {
    std::int32_t embedding_dim = 20;                        // L
    std::vector<std::int32_t> hidden_sizes = {500, 200, 100, 50, 50};
    Activation activation = Activation::tanh;
    double learning_rate = 1e-2;
    std::int32_t batch_size = 64;
    std::int32_t epochs = 200;
    std::uint64_t seed = 0;
};

struct TrainingTriple {
    Eigen::VectorXd dataset_features;  // length F, already standardized
    PipelineId pipeline;
    double target;                     // accuracy fraction in [0,1]
};

struct TrainingReport {
    double final_loss = 0.0;               // full-data MSE after the last epoch
    std::vector<double> epoch_losses;      // per-epoch mean squared error
    std::vector<std::int32_t> untrained_pipelines;  // embedding rows left at init
};

struct DenseLayer {
    Eigen::MatrixXd w;  // out x in
    Eigen::VectorXd b;
};

// Feed-forward net over [meta-features; pipeline embedding] with tanh hidden
// layers. The last hidden activation is the basis vector; the linear output
// head exists only for squared-loss training.
struct BasisNetwork {
    Eigen::MatrixXd embeddings;      // N x L
    std::vector<DenseLayer> hidden;  // first layer input width = F + L
    Eigen::VectorXd output_w;        // length M = last hidden size
    double output_b = 0.0;
    std::int32_t n_features = 0;

    std::int32_t n_pipelines() const { return static_cast<std::int32_t>(embeddings.rows()); }
    std::int32_t embedding_dim() const { return static_cast<std::int32_t>(embeddings.cols()); }
    std::int32_t basis_dim() const { return static_cast<std::int32_t>(output_w.size()); }

    struct ForwardResult {
        double prediction = 0.0;
        Eigen::VectorXd basis;
    };
    // Throws UnknownPipeline for an out-of-range index.
    ForwardResult forward(const Eigen::VectorXd& features, PipelineId pipeline) const;

    // Row q = basis of forward(inputs[q]).
    Eigen::MatrixXd basis_matrix(const std::vector<std::pair<Eigen::VectorXd, PipelineId>>& inputs) const;

    // Mini-batch SGD on mean squared error; mutates the network. Shuffling is
    // deterministic in config.seed. Throws NonFiniteLoss on divergence.
    TrainingReport train(const std::vector<TrainingTriple>& data, const NetworkConfig& config);

    // Full-data MSE and its analytic gradient in flatten_parameters() order.
    double mse_loss(const std::vector<TrainingTriple>& data) const;
    Eigen::VectorXd loss_gradient(const std::vector<TrainingTriple>& data) const;

    // Parameter vector layout: embeddings (row-major), per hidden layer W
    // (row-major) then b, output weights, output bias.
    Eigen::VectorXd flatten_parameters() const;
    void set_parameters(const Eigen::VectorXd& params);
    Eigen::Index parameter_count() const;
};

// Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero, embeddings
// Gaussian(0, 0.1^2); fully determined by config.seed.
BasisNetwork init_network(const NetworkConfig& config, std::int32_t n_pipelines,
                          std::int32_t n_features);

}  // namespace ablr
