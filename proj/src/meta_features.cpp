#include "ablr/meta_features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "ablr/csv.hpp"
#include "ablr/errors.hpp"

namespace ablr {

const std::vector<std::string>& MetaFeatureSpec::names() {
    static const std::vector<std::string> kNames = {
        "number_of_instances",
        "log_number_of_instances",
        "number_of_attributes",
        "log_number_of_attributes",
        "dataset_ratio",
        "number_of_classes",
        "class_entropy",
        "class_imbalance",
        "percentage_of_missing_values",
        "number_of_numeric_attributes",
        "number_of_categorical_attributes",
        "ratio_numeric_to_total",
        "coefficient_of_variation_mean",
        "coefficient_of_variation_std",
        "coefficient_of_variation_min",
        "coefficient_of_variation_max",
        "skewness_mean",
        "skewness_std",
        "kurtosis_mean",
        "kurtosis_std",
        "mean_categorical_cardinality",
    };
    return kNames;
}

TabularDataset load_tabular_csv(const std::string& path, const std::string& target_column) {
    const csv::Table table = csv::read_table(path);
    std::size_t target_idx = table.header.size();
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (table.header[c] == target_column) {
            target_idx = c;
            break;
        }
    }
    if (target_idx == table.header.size())
        throw MalformedFile(path, "target column '" + target_column + "' not found");

    // Rows with a missing target carry no class label and are dropped.
    std::vector<std::size_t> kept;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (!csv::is_missing_cell(table.rows[r].cells[target_idx])) kept.push_back(r);
    }

    TabularDataset ds;
    ds.labels.reserve(kept.size());
    for (std::size_t r : kept) ds.labels.push_back(csv::trim(table.rows[r].cells[target_idx]));

    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c == target_idx) continue;
        bool numeric = true;
        for (std::size_t r : kept) {
            const std::string& cell = table.rows[r].cells[c];
            if (csv::is_missing_cell(cell)) continue;
            if (!csv::parse_double(cell)) {
                numeric = false;
                break;
            }
        }
        Column col;
        col.name = table.header[c];
        col.numeric = numeric;
        if (numeric) {
            col.values.reserve(kept.size());
            for (std::size_t r : kept) {
                const std::string& cell = table.rows[r].cells[c];
                if (csv::is_missing_cell(cell)) {
                    col.values.push_back(std::numeric_limits<double>::quiet_NaN());
                } else {
                    col.values.push_back(*csv::parse_double(cell));
                }
            }
        } else {
            col.labels.reserve(kept.size());
            col.missing.reserve(kept.size());
            for (std::size_t r : kept) {
                const std::string& cell = table.rows[r].cells[c];
                const bool miss = csv::is_missing_cell(cell);
                col.missing.push_back(miss ? 1 : 0);
                col.labels.push_back(miss ? std::string() : csv::trim(cell));
            }
        }
        ds.columns.push_back(std::move(col));
    }
    return ds;
}

namespace {

struct ColumnMoments {
    double cv = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;  // excess
};

// Population moments over the non-missing values; a column with no values is
// treated as constant 0.
ColumnMoments numeric_moments(const Column& col) {
    ColumnMoments m;
    std::vector<double> xs;
    xs.reserve(col.values.size());
    for (double v : col.values) {
        if (!std::isnan(v)) xs.push_back(v);
    }
    if (xs.empty()) return m;
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (double v : xs) mean += v;
    mean /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : xs) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    const double sd = std::sqrt(m2);
    if (m2 > 0.0) {
        if (mean != 0.0) m.cv = sd / mean;
        m.skewness = m3 / (m2 * sd);
        m.kurtosis = m4 / (m2 * m2) - 3.0;
    }
    return m;
}

struct Aggregate {
    double mean = 0.0;
    double std = 0.0;
    double min = 0.0;
    double max = 0.0;
};

Aggregate aggregate(const std::vector<double>& xs) {
    Aggregate a;
    if (xs.empty()) return a;
    const double n = static_cast<double>(xs.size());
    for (double v : xs) a.mean += v;
    a.mean /= n;
    double var = 0.0;
    for (double v : xs) var += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(var / n);
    a.min = *std::min_element(xs.begin(), xs.end());
    a.max = *std::max_element(xs.begin(), xs.end());
    return a;
}

}  // namespace

Eigen::VectorXd extract(const TabularDataset& ds) {
    const std::size_t n_rows = ds.labels.size();
    const std::size_t n_cols = ds.columns.size();
    if (n_rows < 2) throw DegenerateDataset("fewer than 2 instances");
    if (n_cols < 1) throw DegenerateDataset("no attribute columns");
    for (const auto& col : ds.columns) {
        const std::size_t len = col.numeric ? col.values.size() : col.labels.size();
        if (len != n_rows) throw DimensionMismatch("column " + col.name + " length mismatch");
    }

    std::map<std::string, std::size_t> class_counts;
    for (const auto& label : ds.labels) ++class_counts[label];
    if (class_counts.size() < 2) throw DegenerateDataset("single class");

    const double r = static_cast<double>(n_rows);
    const double c = static_cast<double>(n_cols);

    double entropy = 0.0;
    std::size_t max_count = 0;
    std::size_t min_count = n_rows;
    for (const auto& [label, count] : class_counts) {
        const double p = static_cast<double>(count) / r;
        entropy -= p * std::log2(p);
        max_count = std::max(max_count, count);
        min_count = std::min(min_count, count);
    }

    std::size_t missing_cells = 0;
    std::size_t n_numeric = 0;
    std::vector<double> cvs, skews, kurts, cardinalities;
    for (const auto& col : ds.columns) {
        if (col.numeric) {
            ++n_numeric;
            for (double v : col.values) {
                if (std::isnan(v)) ++missing_cells;
            }
            const ColumnMoments m = numeric_moments(col);
            cvs.push_back(m.cv);
            skews.push_back(m.skewness);
            kurts.push_back(m.kurtosis);
        } else {
            std::set<std::string> distinct;
            for (std::size_t i = 0; i < col.labels.size(); ++i) {
                if (col.missing[i]) ++missing_cells;
                else distinct.insert(col.labels[i]);
            }
            cardinalities.push_back(static_cast<double>(distinct.size()));
        }
    }
    const std::size_t n_categorical = n_cols - n_numeric;

    const Aggregate cv_agg = aggregate(cvs);
    const Aggregate skew_agg = aggregate(skews);
    const Aggregate kurt_agg = aggregate(kurts);
    const Aggregate card_agg = aggregate(cardinalities);

    Eigen::VectorXd f(static_cast<Eigen::Index>(MetaFeatureSpec::names().size()));
    Eigen::Index k = 0;
    f(k++) = r;
    f(k++) = std::log(r);
    f(k++) = c;
    f(k++) = std::log(c);
    f(k++) = c / r;
    f(k++) = static_cast<double>(class_counts.size());
    f(k++) = entropy;
    f(k++) = static_cast<double>(max_count - min_count) / r;
    f(k++) = 100.0 * static_cast<double>(missing_cells) / (r * c);
    f(k++) = static_cast<double>(n_numeric);
    f(k++) = static_cast<double>(n_categorical);
    f(k++) = static_cast<double>(n_numeric) / c;
    f(k++) = cv_agg.mean;
    f(k++) = cv_agg.std;
    f(k++) = cv_agg.min;
    f(k++) = cv_agg.max;
    f(k++) = skew_agg.mean;
    f(k++) = skew_agg.std;
    f(k++) = kurt_agg.mean;
    f(k++) = kurt_agg.std;
    f(k++) = card_agg.mean;
    return f;
}

MetaFeatureTable standardize(const MetaFeatureTable& table, const StandardizationStats* stats,
                             StandardizationStats* out_stats) {
    const Eigen::Index n = table.rows.rows();
    const Eigen::Index f = table.rows.cols();
    StandardizationStats computed;
    if (stats) {
        if (stats->dim() != f)
            throw DimensionMismatch("standardization stats dimension " + std::to_string(stats->dim()) +
                                    " != table features " + std::to_string(f));
        computed = *stats;
    } else {
        computed.mean = table.rows.colwise().mean();
        computed.std = Eigen::VectorXd::Zero(f);
        for (Eigen::Index j = 0; j < f; ++j) {
            const double var = (table.rows.col(j).array() - computed.mean(j)).square().sum() /
                               static_cast<double>(n);
            const double sd = std::sqrt(var);
            // Treat numerically constant columns as zero-variance.
            computed.std(j) = (sd <= 1e-12 * std::max(1.0, std::abs(computed.mean(j)))) ? 0.0 : sd;
        }
    }

    MetaFeatureTable out = table;
    for (Eigen::Index j = 0; j < f; ++j) {
        if (computed.std(j) > 0.0) {
            out.rows.col(j) = (table.rows.col(j).array() - computed.mean(j)) / computed.std(j);
        } else {
            out.rows.col(j).setZero();
        }
    }
    if (out_stats) *out_stats = computed;
    return out;
}

Eigen::VectorXd apply_standardization(const StandardizationStats& stats, const Eigen::VectorXd& raw) {
    if (stats.dim() != raw.size())
        throw DimensionMismatch("standardization stats dimension " + std::to_string(stats.dim()) +
                                " != vector size " + std::to_string(raw.size()));
    Eigen::VectorXd out(raw.size());
    for (Eigen::Index j = 0; j < raw.size(); ++j)
        out(j) = stats.std(j) > 0.0 ? (raw(j) - stats.mean(j)) / stats.std(j) : 0.0;
    return out;
}

}  // namespace ablr
