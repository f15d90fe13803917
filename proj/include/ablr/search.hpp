#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ablr/acquisition.hpp"
#include "ablr/meta_store.hpp"
#include "ablr/model.hpp"

namespace ablr {

enum class PolicyKind { ablr_static, ablr_online, random1x, random2x };

std::string policy_name(PolicyKind kind);
PolicyKind parse_policy(const std::string& name);  // throws ValidationError

struct SearchPolicy {
    PolicyKind kind = PolicyKind::ablr_static;
    AcquisitionConfig acquisition;
    std::uint64_t seed = 0;
};

struct SearchStep {
    std::int32_t iteration = 0;
    std::vector<std::int32_t> chosen;  // one pipeline, or two for random2x
    std::vector<double> observed;
    double best_so_far = 0.0;
    double regret = 0.0;  // best_score(dataset) - best_so_far
};

struct SearchTrace {
    std::int32_t dataset = -1;
    std::string dataset_name;
    PolicyKind policy = PolicyKind::ablr_static;
    std::int32_t replicate = 0;
    std::vector<SearchStep> steps;
    bool truncated = false;  // budget exceeded the candidate pool
};

// Replays stored scores as if they were fresh evaluations, logging every
// lookup so tests can prove the search never reads a score it did not choose.
class ReplayOracle {
public:
    explicit ReplayOracle(const MetaDataset& md) : md_(&md) {}

    std::vector<std::int32_t> candidates(std::int32_t dataset) const;
    double observe(std::int32_t pipeline, std::int32_t dataset);

    // y* for the regret metric; computed by the harness, not the policy.
    double reference_best(std::int32_t dataset) const;

    const std::vector<std::pair<std::int32_t, std::int32_t>>& access_log() const { return log_; }

private:
    const MetaDataset* md_;
    std::vector<std::pair<std::int32_t, std::int32_t>> log_;  // (pipeline, dataset)
};

// Sequential search on one dataset. Candidates are the pipelines with stored
// scores there. `model` may be null for the random policies. A budget larger
// than the candidate pool truncates the trace and sets its flag. For the ABLR
// policies the model must not have been trained on this dataset
// (ModelTrainedOnTestDataset otherwise).
SearchTrace run_search(const MetaDataset& md, const FittedModel* model, std::int32_t dataset,
                       const SearchPolicy& policy, std::int32_t iterations, ReplayOracle& oracle);

SearchTrace run_search(const MetaDataset& md, const FittedModel* model, std::int32_t dataset,
                       const SearchPolicy& policy, std::int32_t iterations);

struct AggregateRow {
    std::string policy;
    std::int32_t iteration = 0;
    double mean_regret = 0.0;
    double stderr_regret = 0.0;
    double mean_rank = 0.0;
};

struct EvaluationResult {
    std::vector<SearchTrace> traces;   // ordered by (policy, dataset, replicate)
    std::vector<AggregateRow> rows;    // ordered by (policy, iteration)
};

// Runs every policy on every test dataset for n_seeds replicates and
// aggregates per-iteration regret and fractional policy ranks. Replicate
// RNG streams are derived from (policy seed, policy position, dataset,
// replicate), so results do not depend on jobs.
EvaluationResult evaluate_policies(const MetaDataset& md, const FittedModel* model,
                                   const std::vector<SearchPolicy>& policies,
                                   std::int32_t iterations, std::int32_t n_seeds, int jobs);

void write_trace_csv(const std::string& path, const EvaluationResult& result);
void write_aggregate_csv(const std::string& path, const EvaluationResult& result);

}  // namespace ablr
