#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ablr {

struct PipelineId {
    std::int32_t index = -1;

    friend bool operator==(const PipelineId& a, const PipelineId& b) { return a.index == b.index; }
    friend bool operator<(const PipelineId& a, const PipelineId& b) { return a.index < b.index; }
};

struct DatasetId {
    std::int32_t index = -1;
    std::string name;

    friend bool operator==(const DatasetId& a, const DatasetId& b) { return a.index == b.index; }
};

struct PerformanceEntry {
    std::int32_t pipeline = 0;
    std::int32_t dataset = 0;
    double score = 0.0;
};

// Sparse N×D table of pipeline-on-dataset scores. Scores are fractions in
// [0,1]; absent cells are first-class and never imputed.
class PerformanceMatrix {
public:
    PerformanceMatrix() = default;
    PerformanceMatrix(std::int32_t n_pipelines, std::int32_t n_datasets);

    // Throws ScoreOutOfRange / DuplicateEntry. `context` prefixes error messages.
    void add_entry(std::int32_t pipeline, std::int32_t dataset, double score,
                   const std::string& context = {});

    bool has(std::int32_t pipeline, std::int32_t dataset) const;
    std::optional<double> score(std::int32_t pipeline, std::int32_t dataset) const;

    std::int32_t n_pipelines() const { return n_pipelines_; }
    std::int32_t n_datasets() const { return n_datasets_; }
    std::size_t n_entries() const { return n_entries_; }

    // All entries, sorted by (pipeline, dataset).
    std::vector<PerformanceEntry> entries() const;

    // Pipelines with a stored score on the dataset, ascending.
    std::vector<std::int32_t> tested_pipelines(std::int32_t dataset) const;

private:
    std::int32_t n_pipelines_ = 0;
    std::int32_t n_datasets_ = 0;
    std::size_t n_entries_ = 0;
    std::vector<double> cells_;  // NaN marks an absent cell
};

struct MetaFeatureTable {
    std::vector<std::string> feature_names;
    std::string version;   // from the "# metafeatures-..." comment line, may be empty
    Eigen::MatrixXd rows;  // one row per dataset index, F columns

    std::int32_t n_features() const { return static_cast<std::int32_t>(feature_names.size()); }
};

// Split descriptor: an explicit list file takes priority over (seed, fraction).
struct SplitSpec {
    std::optional<std::string> list_path;
    std::uint64_t seed = 0;
    double train_fraction = 0.7;
};

struct MetaDataset {
    PerformanceMatrix performance;
    MetaFeatureTable meta_features;
    std::vector<std::string> dataset_names;
    std::vector<std::int32_t> train_datasets;  // sorted dataset indices
    std::vector<std::int32_t> test_datasets;

    DatasetId dataset(std::int32_t index) const;
    std::optional<std::int32_t> find_dataset(const std::string& name) const;
    bool is_train(std::int32_t dataset) const;
    bool is_test(std::int32_t dataset) const;
};

MetaDataset load_meta_dataset(const std::string& perf_path, const std::string& metafeat_path,
                              const SplitSpec& split);

// Seeded shuffle split over md.dataset_names. Both sides end up non-empty
// whenever there are at least two datasets.
void assign_random_split(MetaDataset& md, std::uint64_t seed, double train_fraction);

void save_meta_dataset(const MetaDataset& md, const std::string& perf_path,
                       const std::string& metafeat_path, const std::string& split_path);

// Position i holds the score of pipeline i, or nullopt if untested.
std::vector<std::optional<double>> dense_view(const MetaDataset& md, const DatasetId& dataset);

// Maximum score over all tested pipelines (the regret reference y*).
// Throws EmptyColumn if the dataset has no entries.
double best_score(const MetaDataset& md, const DatasetId& dataset);

}  // namespace ablr
