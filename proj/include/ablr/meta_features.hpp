#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "ablr/meta_store.hpp"

namespace ablr {

// One attribute column of a raw tabular dataset. A column is numeric iff
// every non-missing cell parses as a decimal number; a fully missing column
// counts as numeric and is treated as constant 0.
struct Column {
    std::string name;
    bool numeric = false;
    std::vector<double> values;        // numeric columns; NaN = missing
    std::vector<std::string> labels;   // categorical columns
    std::vector<std::uint8_t> missing; // categorical missing mask
};

struct TabularDataset {
    std::vector<Column> columns;      // attribute columns, target excluded
    std::vector<std::string> labels;  // class label per row
};

// The canonical meta-feature set. Order is frozen per version.
struct MetaFeatureSpec {
    static const std::vector<std::string>& names();
    static constexpr const char* version = "metafeatures-v1";
};

// Loads a CSV with a header row; `target_column` supplies the class labels
// and is excluded from the attribute columns. Rows with a missing target are
// dropped. Missing cells: empty, "?", "NA", "N/A", "nan".
TabularDataset load_tabular_csv(const std::string& path, const std::string& target_column);

// Fixed-order meta-feature vector (see MetaFeatureSpec::names()). Undefined
// statistics (moments of a constant column, ratios with zero denominator)
// are imputed as 0, so the output is always finite.
// Throws DegenerateDataset for <2 rows, zero columns, or a single class.
Eigen::VectorXd extract(const TabularDataset& ds);

struct StandardizationStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;  // 0 marks a frozen (zero-variance) column

    Eigen::Index dim() const { return mean.size(); }
};

// Per-column z-score with population std. If `stats` is null they are
// computed from `table` (training mode). Zero-variance columns map to 0.
MetaFeatureTable standardize(const MetaFeatureTable& table, const StandardizationStats* stats,
                             StandardizationStats* out_stats);

// Applies training stats to a single raw feature vector.
Eigen::VectorXd apply_standardization(const StandardizationStats& stats, const Eigen::VectorXd& raw);

}  // namespace ablr
