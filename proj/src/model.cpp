#include "ablr/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <utility>

#include "ablr/errors.hpp"

namespace ablr {

bool FittedModel::trained_on(const std::string& dataset_name) const {
    return std::find(train_dataset_names.begin(), train_dataset_names.end(), dataset_name) !=
           train_dataset_names.end();
}

FittedModel fit_ablr(const MetaDataset& md, const NetworkConfig& config,
                     const BlrHyperparams& blr_init, FitReport* report) {
    if (md.train_datasets.empty()) throw EmptyTrainingSet("split has no training datasets");

    // Standardization statistics from the training rows only; test rows must
    // not influence the scaling.
    MetaFeatureTable train_rows;
    train_rows.feature_names = md.meta_features.feature_names;
    train_rows.version = md.meta_features.version;
    train_rows.rows.resize(static_cast<Eigen::Index>(md.train_datasets.size()),
                           md.meta_features.rows.cols());
    for (std::size_t r = 0; r < md.train_datasets.size(); ++r) {
        train_rows.rows.row(static_cast<Eigen::Index>(r)) =
            md.meta_features.rows.row(md.train_datasets[r]);
    }
    StandardizationStats stats;
    standardize(train_rows, nullptr, &stats);

    std::vector<Eigen::VectorXd> std_features(md.dataset_names.size());
    for (std::int32_t j : md.train_datasets) {
        std_features[static_cast<std::size_t>(j)] =
            apply_standardization(stats, md.meta_features.rows.row(j).transpose());
    }

    std::vector<TrainingTriple> triples;
    for (const auto& e : md.performance.entries()) {
        if (!md.is_train(e.dataset)) continue;
        triples.push_back({std_features[static_cast<std::size_t>(e.dataset)],
                           PipelineId{e.pipeline}, e.score});
    }
    if (triples.empty()) throw EmptyTrainingSet("training datasets have no performance entries");

    FittedModel model;
    model.config = config;
    model.stats = stats;
    model.feature_version = md.meta_features.version;
    for (std::int32_t j : md.train_datasets) {
        model.train_dataset_names.push_back(md.dataset_names[static_cast<std::size_t>(j)]);
    }

    model.net = init_network(config, md.performance.n_pipelines(),
                             static_cast<std::int32_t>(md.meta_features.rows.cols()));
    const TrainingReport training = model.net.train(triples, config);

    std::vector<std::pair<Eigen::VectorXd, PipelineId>> inputs;
    inputs.reserve(triples.size());
    Eigen::VectorXd y(static_cast<Eigen::Index>(triples.size()));
    for (std::size_t i = 0; i < triples.size(); ++i) {
        inputs.emplace_back(triples[i].dataset_features, triples[i].pipeline);
        y(static_cast<Eigen::Index>(i)) = triples[i].target;
    }
    const Eigen::MatrixXd phi = model.net.basis_matrix(inputs);
    const BlrHyperparams hp = optimize_hyperparams(phi, y, blr_init);
    model.posterior = fit(phi, y, hp);

    if (report) {
        report->training = training;
        report->alpha = hp.alpha;
        report->beta = hp.beta;
        report->log_marginal_likelihood = log_marginal_likelihood(phi, y, hp);
        report->n_observations = static_cast<std::int64_t>(triples.size());
    }
    return model;
}

Eigen::VectorXd model_basis(const FittedModel& model, const Eigen::VectorXd& raw_features,
                            PipelineId pipeline) {
    const Eigen::VectorXd z = apply_standardization(model.stats, raw_features);
    return model.net.forward(z, pipeline).basis;
}

BlrPrediction model_predict(const FittedModel& model, const Eigen::VectorXd& raw_features,
                            PipelineId pipeline) {
    return predict(model.posterior, model_basis(model, raw_features, pipeline));
}

std::vector<CandidatePrediction> model_predict_candidates(const FittedModel& model,
                                                          const Eigen::VectorXd& raw_features,
                                                          const std::vector<std::int32_t>& pipelines) {
    const Eigen::VectorXd z = apply_standardization(model.stats, raw_features);
    std::vector<CandidatePrediction> out;
    out.reserve(pipelines.size());
    for (std::int32_t p : pipelines) {
        const auto fwd = model.net.forward(z, PipelineId{p});
        const BlrPrediction pred = predict(model.posterior, fwd.basis);
        out.push_back({PipelineId{p}, pred.mu, std::sqrt(std::max(0.0, pred.sigma2))});
    }
    return out;
}

namespace {

constexpr char kMagic[6] = {'A', 'B', 'L', 'R', '1', '\n'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw RuntimeError("cannot write model file " + path);
    }

    void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void i32(std::int32_t v) { raw(&v, 4); }
    void i64(std::int64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void vec(const Eigen::VectorXd& v) {
        u64(static_cast<std::uint64_t>(v.size()));
        raw(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
    }
    void mat(const Eigen::MatrixXd& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        raw(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
    }
    void close() {
        out_.close();
        if (!out_) throw RuntimeError("short write to model file " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw MalformedFile(path, "cannot open model file");
    }

    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n)) throw MalformedFile(path_, "truncated model file");
    }
    std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
    std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
    std::int32_t i32() { std::int32_t v; raw(&v, 4); return v; }
    std::int64_t i64() { std::int64_t v; raw(&v, 8); return v; }
    double f64() { double v; raw(&v, 8); return v; }
    std::string str() {
        const std::uint32_t n = u32();
        if (n > (1u << 20)) throw MalformedFile(path_, "implausible string length in model file");
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    Eigen::VectorXd vec() {
        const std::uint64_t n = u64();
        if (n > (1ull << 32)) throw MalformedFile(path_, "implausible vector length in model file");
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        raw(v.data(), static_cast<std::size_t>(n) * sizeof(double));
        return v;
    }
    Eigen::MatrixXd mat() {
        const std::uint64_t r = u64();
        const std::uint64_t c = u64();
        if (r > (1ull << 31) || c > (1ull << 31) || r * c > (1ull << 32))
            throw MalformedFile(path_, "implausible matrix shape in model file");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        raw(m.data(), static_cast<std::size_t>(r * c) * sizeof(double));
        return m;
    }
    const std::string& path() const { return path_; }

private:
    std::ifstream in_;
    std::string path_;
};

}  // namespace

void save_model(const FittedModel& model, const std::string& path) {
    Writer w(path);
    w.raw(kMagic, sizeof(kMagic));
    w.u32(kFormatVersion);

    w.i32(model.config.embedding_dim);
    w.u32(static_cast<std::uint32_t>(model.config.hidden_sizes.size()));
    for (std::int32_t h : model.config.hidden_sizes) w.i32(h);
    w.u8(0);  // activation: tanh
    w.f64(model.config.learning_rate);
    w.i32(model.config.batch_size);
    w.i32(model.config.epochs);
    w.u64(model.config.seed);

    w.i32(model.net.n_pipelines());
    w.i32(model.net.n_features);
    w.str(model.feature_version);
    w.u32(static_cast<std::uint32_t>(model.train_dataset_names.size()));
    for (const auto& n : model.train_dataset_names) w.str(n);

    w.vec(model.stats.mean);
    w.vec(model.stats.std);

    w.mat(model.net.embeddings);
    w.u32(static_cast<std::uint32_t>(model.net.hidden.size()));
    for (const auto& layer : model.net.hidden) {
        w.mat(layer.w);
        w.vec(layer.b);
    }
    w.vec(model.net.output_w);
    w.f64(model.net.output_b);

    w.vec(model.posterior.m);
    w.mat(model.posterior.k_chol);
    w.vec(model.posterior.phi_t_y);
    w.f64(model.posterior.hp.alpha);
    w.f64(model.posterior.hp.beta);
    w.i64(model.posterior.q);
    w.u8(model.posterior.include_noise ? 1 : 0);
    w.close();
}

FittedModel load_model(const std::string& path) {
    Reader r(path);
    char magic[6];
    r.raw(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw MalformedFile(path, "not a model file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion)
        throw MalformedFile(path, "unsupported model format version " + std::to_string(version));

    FittedModel model;
    model.config.embedding_dim = r.i32();
    const std::uint32_t n_hidden_cfg = r.u32();
    model.config.hidden_sizes.clear();
    for (std::uint32_t i = 0; i < n_hidden_cfg; ++i) model.config.hidden_sizes.push_back(r.i32());
    if (r.u8() != 0) throw MalformedFile(path, "unknown activation id in model file");
    model.config.activation = Activation::tanh;
    model.config.learning_rate = r.f64();
    model.config.batch_size = r.i32();
    model.config.epochs = r.i32();
    model.config.seed = r.u64();

    const std::int32_t n_pipelines = r.i32();
    model.net.n_features = r.i32();
    model.feature_version = r.str();
    const std::uint32_t n_train = r.u32();
    for (std::uint32_t i = 0; i < n_train; ++i) model.train_dataset_names.push_back(r.str());

    model.stats.mean = r.vec();
    model.stats.std = r.vec();

    model.net.embeddings = r.mat();
    const std::uint32_t n_layers = r.u32();
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        DenseLayer layer;
        layer.w = r.mat();
        layer.b = r.vec();
        model.net.hidden.push_back(std::move(layer));
    }
    model.net.output_w = r.vec();
    model.net.output_b = r.f64();

    model.posterior.m = r.vec();
    model.posterior.k_chol = r.mat();
    model.posterior.phi_t_y = r.vec();
    model.posterior.hp.alpha = r.f64();
    model.posterior.hp.beta = r.f64();
    model.posterior.q = r.i64();
    model.posterior.include_noise = r.u8() != 0;

    if (model.net.embeddings.rows() != n_pipelines)
        throw MalformedFile(path, "embedding table does not match pipeline count");
    if (model.stats.mean.size() != model.stats.std.size() ||
        model.stats.mean.size() != model.net.n_features)
        throw MalformedFile(path, "standardization statistics do not match feature count");
    if (!model.net.hidden.empty()) {
        const Eigen::Index in0 = model.net.hidden.front().w.cols();
        if (in0 != model.net.n_features + model.net.embeddings.cols())
            throw MalformedFile(path, "first layer width does not match feature and embedding dims");
        const Eigen::Index m_dim = model.net.hidden.back().w.rows();
        if (model.posterior.m.size() != m_dim || model.net.output_w.size() != m_dim)
            throw MalformedFile(path, "posterior dimension does not match basis width");
    }
    return model;
}

}  // namespace ablr
