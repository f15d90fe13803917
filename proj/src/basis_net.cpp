#include "ablr/basis_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ablr/csv.hpp"
#include "ablr/errors.hpp"
#include "ablr/rng.hpp"

namespace ablr {

namespace {

constexpr std::uint64_t kInitStream = 0x11;
constexpr std::uint64_t kShuffleStream = 0x22;

void check_config(const NetworkConfig& config) {
    if (config.embedding_dim < 1) throw ValidationError("embedding_dim must be >= 1");
    if (config.hidden_sizes.empty()) throw ValidationError("hidden_sizes must be non-empty");
    for (std::int32_t h : config.hidden_sizes) {
        if (h < 1) throw ValidationError("hidden sizes must be >= 1");
    }
    if (!(config.learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
    if (config.batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (config.epochs < 0) throw ValidationError("epochs must be >= 0");
}

// Gradient accumulator matching the network's parameter layout.
struct Gradients {
    Eigen::MatrixXd embeddings;
    std::vector<DenseLayer> hidden;
    Eigen::VectorXd output_w;
    double output_b = 0.0;

    explicit Gradients(const BasisNetwork& net) {
        embeddings = Eigen::MatrixXd::Zero(net.embeddings.rows(), net.embeddings.cols());
        hidden.reserve(net.hidden.size());
        for (const auto& layer : net.hidden)
            hidden.push_back({Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()),
                              Eigen::VectorXd::Zero(layer.b.size())});
        output_w = Eigen::VectorXd::Zero(net.output_w.size());
    }
};

}  // namespace

BasisNetwork init_network(const NetworkConfig& config, std::int32_t n_pipelines,
                          std::int32_t n_features) {
    check_config(config);
    if (n_pipelines < 1) throw ValidationError("n_pipelines must be >= 1");
    if (n_features < 1) throw ValidationError("n_features must be >= 1");

    Rng rng(derive_seed(config.seed, {kInitStream}));
    BasisNetwork net;
    net.n_features = n_features;

    net.embeddings = Eigen::MatrixXd(n_pipelines, config.embedding_dim);
    for (Eigen::Index i = 0; i < net.embeddings.rows(); ++i)
        for (Eigen::Index j = 0; j < net.embeddings.cols(); ++j)
            net.embeddings(i, j) = rng.normal(0.0, 0.1);

    std::int32_t fan_in = n_features + config.embedding_dim;
    for (std::int32_t h : config.hidden_sizes) {
        DenseLayer layer;
        layer.w = Eigen::MatrixXd(h, fan_in);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + h));
        for (Eigen::Index i = 0; i < layer.w.rows(); ++i)
            for (Eigen::Index j = 0; j < layer.w.cols(); ++j)
                layer.w(i, j) = rng.uniform(-bound, bound);
        layer.b = Eigen::VectorXd::Zero(h);
        net.hidden.push_back(std::move(layer));
        fan_in = h;
    }

    const std::int32_t m = config.hidden_sizes.back();
    const double bound = std::sqrt(6.0 / static_cast<double>(m + 1));
    net.output_w = Eigen::VectorXd(m);
    for (Eigen::Index j = 0; j < m; ++j) net.output_w(j) = rng.uniform(-bound, bound);
    net.output_b = 0.0;
    return net;
}

BasisNetwork::ForwardResult BasisNetwork::forward(const Eigen::VectorXd& features,
                                                  PipelineId pipeline) const {
    if (pipeline.index < 0 || pipeline.index >= n_pipelines())
        throw UnknownPipeline("pipeline index " + std::to_string(pipeline.index));
    if (features.size() != n_features)
        throw DimensionMismatch("expected " + std::to_string(n_features) + " features, got " +
                                std::to_string(features.size()));

    Eigen::VectorXd act(features.size() + embedding_dim());
    act << features, embeddings.row(pipeline.index).transpose();
    for (const auto& layer : hidden) {
        Eigen::VectorXd pre = layer.w * act + layer.b;
        act = pre.array().tanh();
    }

    ForwardResult out;
    out.prediction = output_w.dot(act) + output_b;
    out.basis = std::move(act);
    return out;
}

Eigen::MatrixXd BasisNetwork::basis_matrix(
    const std::vector<std::pair<Eigen::VectorXd, PipelineId>>& inputs) const {
    Eigen::MatrixXd phi(static_cast<Eigen::Index>(inputs.size()), basis_dim());
    for (std::size_t q = 0; q < inputs.size(); ++q)
        phi.row(static_cast<Eigen::Index>(q)) = forward(inputs[q].first, inputs[q].second).basis;
    return phi;
}

namespace {

// Squared error and gradient accumulation for one sample; dloss_dpred is the
// factor applied to d(pred)/d(param).
double backprop_sample(const BasisNetwork& net, const TrainingTriple& triple, double weight,
                       Gradients& grads) {
    // forward, keeping activations
    Eigen::VectorXd input(net.n_features + net.embedding_dim());
    input << triple.dataset_features, net.embeddings.row(triple.pipeline.index).transpose();
    std::vector<Eigen::VectorXd> acts;
    acts.reserve(net.hidden.size() + 1);
    acts.push_back(input);
    for (const auto& layer : net.hidden) {
        Eigen::VectorXd pre = layer.w * acts.back() + layer.b;
        acts.emplace_back(pre.array().tanh());
    }

    const double pred = net.output_w.dot(acts.back()) + net.output_b;
    const double err = pred - triple.target;
    const double dpred = 2.0 * err * weight;

    grads.output_w += dpred * acts.back();
    grads.output_b += dpred;

    // delta = dL/d(pre-activation) of the current layer
    Eigen::VectorXd delta =
        (dpred * net.output_w.array() * (1.0 - acts.back().array().square())).matrix();
    for (std::size_t k = net.hidden.size(); k-- > 0;) {
        grads.hidden[k].w += delta * acts[k].transpose();
        grads.hidden[k].b += delta;
        if (k > 0) {
            const Eigen::VectorXd back = net.hidden[k].w.transpose() * delta;
            delta = back.array() * (1.0 - acts[k].array().square());
        } else {
            const Eigen::VectorXd dinput = net.hidden[0].w.transpose() * delta;
            grads.embeddings.row(triple.pipeline.index) +=
                dinput.tail(net.embedding_dim()).transpose();
        }
    }
    return err * err;
}

void apply_update(BasisNetwork& net, const Gradients& grads, double lr) {
    net.embeddings -= lr * grads.embeddings;
    for (std::size_t k = 0; k < net.hidden.size(); ++k) {
        net.hidden[k].w -= lr * grads.hidden[k].w;
        net.hidden[k].b -= lr * grads.hidden[k].b;
    }
    net.output_w -= lr * grads.output_w;
    net.output_b -= lr * grads.output_b;
}

}  // namespace

TrainingReport BasisNetwork::train(const std::vector<TrainingTriple>& data,
                                   const NetworkConfig& config) {
    check_config(config);
    if (data.empty()) throw ValidationError("training data must be non-empty");
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(n_pipelines()), 0);
    for (const auto& t : data) {
        if (t.pipeline.index < 0 || t.pipeline.index >= n_pipelines())
            throw UnknownPipeline("pipeline index " + std::to_string(t.pipeline.index));
        if (t.dataset_features.size() != n_features)
            throw DimensionMismatch("triple feature length mismatch");
        if (!std::isfinite(t.target)) throw ValidationError("non-finite training target");
        seen[static_cast<std::size_t>(t.pipeline.index)] = 1;
    }

    TrainingReport report;
    for (std::int32_t i = 0; i < n_pipelines(); ++i)
        if (!seen[static_cast<std::size_t>(i)]) report.untrained_pipelines.push_back(i);

    Rng rng(derive_seed(config.seed, {kShuffleStream}));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::int32_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_sq_sum = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t batch_end =
                std::min(order.size(), pos + static_cast<std::size_t>(config.batch_size));
            const double weight = 1.0 / static_cast<double>(batch_end - pos);
            Gradients grads(*this);
            for (std::size_t k = pos; k < batch_end; ++k)
                epoch_sq_sum += backprop_sample(*this, data[order[k]], weight, grads);
            apply_update(*this, grads, config.learning_rate);
            pos = batch_end;
        }
        const double epoch_loss = epoch_sq_sum / static_cast<double>(data.size());
        if (!std::isfinite(epoch_loss))
            throw NonFiniteLoss("training diverged at epoch " + std::to_string(epoch) +
                                "; try a smaller learning_rate (current " +
                                csv::format_double(config.learning_rate) + ")");
        report.epoch_losses.push_back(epoch_loss);
    }
    report.final_loss = mse_loss(data);
    return report;
}

double BasisNetwork::mse_loss(const std::vector<TrainingTriple>& data) const {
    double sum = 0.0;
    for (const auto& t : data) {
        const double err = forward(t.dataset_features, t.pipeline).prediction - t.target;
        sum += err * err;
    }
    return data.empty() ? 0.0 : sum / static_cast<double>(data.size());
}

Eigen::VectorXd BasisNetwork::loss_gradient(const std::vector<TrainingTriple>& data) const {
    Gradients grads(*this);
    const double weight = 1.0 / static_cast<double>(data.size());
    for (const auto& t : data) backprop_sample(*this, t, weight, grads);

    Eigen::VectorXd flat(parameter_count());
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < grads.embeddings.rows(); ++i)
        for (Eigen::Index j = 0; j < grads.embeddings.cols(); ++j) flat(pos++) = grads.embeddings(i, j);
    for (const auto& layer : grads.hidden) {
        for (Eigen::Index i = 0; i < layer.w.rows(); ++i)
            for (Eigen::Index j = 0; j < layer.w.cols(); ++j) flat(pos++) = layer.w(i, j);
        for (Eigen::Index i = 0; i < layer.b.size(); ++i) flat(pos++) = layer.b(i);
    }
    for (Eigen::Index i = 0; i < grads.output_w.size(); ++i) flat(pos++) = grads.output_w(i);
    flat(pos++) = grads.output_b;
    return flat;
}

Eigen::Index BasisNetwork::parameter_count() const {
    Eigen::Index count = embeddings.size();
    for (const auto& layer : hidden) count += layer.w.size() + layer.b.size();
    return count + output_w.size() + 1;
}

Eigen::VectorXd BasisNetwork::flatten_parameters() const {
    Eigen::VectorXd flat(parameter_count());
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i)
        for (Eigen::Index j = 0; j < embeddings.cols(); ++j) flat(pos++) = embeddings(i, j);
    for (const auto& layer : hidden) {
        for (Eigen::Index i = 0; i < layer.w.rows(); ++i)
            for (Eigen::Index j = 0; j < layer.w.cols(); ++j) flat(pos++) = layer.w(i, j);
        for (Eigen::Index i = 0; i < layer.b.size(); ++i) flat(pos++) = layer.b(i);
    }
    for (Eigen::Index i = 0; i < output_w.size(); ++i) flat(pos++) = output_w(i);
    flat(pos++) = output_b;
    return flat;
}

void BasisNetwork::set_parameters(const Eigen::VectorXd& params) {
    if (params.size() != parameter_count()) throw DimensionMismatch("parameter vector size mismatch");
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < embeddings.rows(); ++i)
        for (Eigen::Index j = 0; j < embeddings.cols(); ++j) embeddings(i, j) = params(pos++);
    for (auto& layer : hidden) {
        for (Eigen::Index i = 0; i < layer.w.rows(); ++i)
            for (Eigen::Index j = 0; j < layer.w.cols(); ++j) layer.w(i, j) = params(pos++);
        for (Eigen::Index i = 0; i < layer.b.size(); ++i) layer.b(i) = params(pos++);
    }
    for (Eigen::Index i = 0; i < output_w.size(); ++i) output_w(i) = params(pos++);
    output_b = params(pos++);
}

}  // namespace ablr
