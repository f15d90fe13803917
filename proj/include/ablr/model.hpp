#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ablr/acquisition.hpp"
#include "ablr/basis_net.hpp"
#include "ablr/blr.hpp"
#include "ablr/meta_features.hpp"
#include "ablr/meta_store.hpp"

namespace ablr {

// Trained surrogate: frozen basis network plus the Bayesian linear head on
// its last hidden layer, with the feature standardization fitted on the
// training datasets.
struct FittedModel {
    BasisNetwork net;
    BlrPosterior posterior;
    StandardizationStats stats;
    NetworkConfig config;                      // echo of the training config
    std::vector<std::string> train_dataset_names;
    std::string feature_version;

    bool trained_on(const std::string& dataset_name) const;
};

struct FitReport {
    TrainingReport training;
    double alpha = 0.0;
    double beta = 0.0;
    double log_marginal_likelihood = 0.0;
    std::int64_t n_observations = 0;
};

// Two-step fit: SGD on the network under squared loss over every (pipeline,
// train dataset) entry, then alpha/beta by maximizing the log-marginal
// likelihood of the same targets under the frozen basis, starting from
// blr_init. Standardization statistics come from the training rows only.
// Throws EmptyTrainingSet when the split leaves no training entries.
FittedModel fit_ablr(const MetaDataset& md, const NetworkConfig& config,
                     const BlrHyperparams& blr_init = BlrHyperparams{}, FitReport* report = nullptr);

// Basis vector for one (dataset, pipeline) pair; `raw_features` is the
// unstandardized meta-feature row.
Eigen::VectorXd model_basis(const FittedModel& model, const Eigen::VectorXd& raw_features,
                            PipelineId pipeline);

BlrPrediction model_predict(const FittedModel& model, const Eigen::VectorXd& raw_features,
                            PipelineId pipeline);

// Predictions for a candidate set on one dataset, in the given order.
std::vector<CandidatePrediction> model_predict_candidates(const FittedModel& model,
                                                          const Eigen::VectorXd& raw_features,
                                                          const std::vector<std::int32_t>& pipelines);

// Binary model file, magic "ABLR1". Writing the same model twice produces
// byte-identical files.
void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

}  // namespace ablr
