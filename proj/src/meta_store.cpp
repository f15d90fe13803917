#include "ablr/meta_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "ablr/csv.hpp"
#include "ablr/errors.hpp"
#include "ablr/rng.hpp"

namespace ablr {

PerformanceMatrix::PerformanceMatrix(std::int32_t n_pipelines, std::int32_t n_datasets)
    : n_pipelines_(n_pipelines),
      n_datasets_(n_datasets),
      cells_(static_cast<std::size_t>(n_pipelines) * static_cast<std::size_t>(n_datasets),
             std::numeric_limits<double>::quiet_NaN()) {}

void PerformanceMatrix::add_entry(std::int32_t pipeline, std::int32_t dataset, double score,
                                  const std::string& context) {
    if (!(score >= 0.0 && score <= 1.0)) {
        std::string msg = context + "score " + csv::format_double(score) + " outside [0,1]";
        if (score > 1.0 && score <= 100.0) msg += " (looks like a percentage; scores must be fractions)";
        throw ScoreOutOfRange(msg);
    }
    const std::size_t idx =
        static_cast<std::size_t>(pipeline) * static_cast<std::size_t>(n_datasets_) + dataset;
    if (!std::isnan(cells_[idx])) {
        throw DuplicateEntry(context + "duplicate entry for pipeline " + std::to_string(pipeline) +
                             ", dataset " + std::to_string(dataset));
    }
    cells_[idx] = score;
    ++n_entries_;
}

bool PerformanceMatrix::has(std::int32_t pipeline, std::int32_t dataset) const {
    return score(pipeline, dataset).has_value();
}

std::optional<double> PerformanceMatrix::score(std::int32_t pipeline, std::int32_t dataset) const {
    if (pipeline < 0 || pipeline >= n_pipelines_) throw UnknownPipeline("pipeline index " + std::to_string(pipeline));
    if (dataset < 0 || dataset >= n_datasets_) throw UnknownDataset("dataset index " + std::to_string(dataset));
    const double v =
        cells_[static_cast<std::size_t>(pipeline) * static_cast<std::size_t>(n_datasets_) + dataset];
    if (std::isnan(v)) return std::nullopt;
    return v;
}

std::vector<PerformanceEntry> PerformanceMatrix::entries() const {
    std::vector<PerformanceEntry> out;
    out.reserve(n_entries_);
    for (std::int32_t i = 0; i < n_pipelines_; ++i) {
        for (std::int32_t j = 0; j < n_datasets_; ++j) {
            const double v = cells_[static_cast<std::size_t>(i) * n_datasets_ + j];
            if (!std::isnan(v)) out.push_back({i, j, v});
        }
    }
    return out;
}

std::vector<std::int32_t> PerformanceMatrix::tested_pipelines(std::int32_t dataset) const {
    std::vector<std::int32_t> out;
    for (std::int32_t i = 0; i < n_pipelines_; ++i) {
        if (!std::isnan(cells_[static_cast<std::size_t>(i) * n_datasets_ + dataset])) out.push_back(i);
    }
    return out;
}

DatasetId MetaDataset::dataset(std::int32_t index) const {
    if (index < 0 || index >= static_cast<std::int32_t>(dataset_names.size()))
        throw UnknownDataset("dataset index " + std::to_string(index));
    return DatasetId{index, dataset_names[index]};
}

std::optional<std::int32_t> MetaDataset::find_dataset(const std::string& name) const {
    for (std::size_t i = 0; i < dataset_names.size(); ++i) {
        if (dataset_names[i] == name) return static_cast<std::int32_t>(i);
    }
    return std::nullopt;
}

bool MetaDataset::is_train(std::int32_t dataset) const {
    return std::binary_search(train_datasets.begin(), train_datasets.end(), dataset);
}

bool MetaDataset::is_test(std::int32_t dataset) const {
    return std::binary_search(test_datasets.begin(), test_datasets.end(), dataset);
}

namespace {

struct RawEntry {
    std::int64_t pipeline;
    std::string dataset;
    double score;
    std::size_t line;
};

void parse_split_file(const std::string& path, std::vector<std::string>& train_names,
                      std::vector<std::string>& test_names) {
    std::ifstream in(path);
    if (!in) throw MalformedFile(path, "cannot open file");
    std::vector<std::string>* current = nullptr;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string s = csv::trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s == "[train]") {
            current = &train_names;
        } else if (s == "[test]") {
            current = &test_names;
        } else if (s[0] == '[') {
            throw MalformedFile(path, line_no, "unknown section " + s);
        } else {
            if (!current) throw MalformedFile(path, line_no, "dataset name before [train]/[test] header");
            current->push_back(s);
        }
    }
}

}  // namespace

MetaDataset load_meta_dataset(const std::string& perf_path, const std::string& metafeat_path,
                              const SplitSpec& split) {
    const csv::Table perf = csv::read_table(perf_path);
    const std::vector<std::string> expected_header = {"pipeline_id", "dataset_name", "score"};
    if (perf.header != expected_header) {
        throw MalformedFile(perf_path, "header must be 'pipeline_id,dataset_name,score', got '" +
                                           csv::join(perf.header) + "'");
    }

    std::vector<RawEntry> raw;
    raw.reserve(perf.rows.size());
    std::unordered_map<std::string, std::int32_t> dataset_index;
    std::vector<std::string> dataset_names;
    std::int64_t max_pipeline = -1;
    for (const auto& row : perf.rows) {
        const auto pid = csv::parse_int(row.cells[0]);
        if (!pid || *pid < 0) throw MalformedFile(perf_path, row.line_number, "invalid pipeline_id '" + row.cells[0] + "'");
        const std::string& name = row.cells[1];
        if (name.empty()) throw MalformedFile(perf_path, row.line_number, "empty dataset_name");
        const auto score = csv::parse_double(row.cells[2]);
        if (!score || !std::isfinite(*score))
            throw MalformedFile(perf_path, row.line_number, "invalid score '" + row.cells[2] + "'");
        if (dataset_index.find(name) == dataset_index.end()) {
            dataset_index.emplace(name, static_cast<std::int32_t>(dataset_names.size()));
            dataset_names.push_back(name);
        }
        max_pipeline = std::max<std::int64_t>(max_pipeline, *pid);
        raw.push_back({*pid, name, *score, row.line_number});
    }
    if (raw.empty()) throw MalformedFile(perf_path, "no performance entries");

    MetaDataset md;
    md.dataset_names = dataset_names;
    md.performance = PerformanceMatrix(static_cast<std::int32_t>(max_pipeline + 1),
                                       static_cast<std::int32_t>(dataset_names.size()));
    for (const auto& e : raw) {
        md.performance.add_entry(static_cast<std::int32_t>(e.pipeline), dataset_index.at(e.dataset),
                                 e.score, perf_path + ":" + std::to_string(e.line) + ": ");
    }

    // Meta-feature table, aligned to the dataset indices above. Rows for
    // datasets absent from the performance matrix are ignored.
    const csv::Table mf = csv::read_table(metafeat_path);
    if (mf.header.empty() || mf.header[0] != "dataset_name")
        throw MalformedFile(metafeat_path, "first header column must be 'dataset_name'");
    if (mf.header.size() < 2) throw MalformedFile(metafeat_path, "no feature columns");
    md.meta_features.feature_names.assign(mf.header.begin() + 1, mf.header.end());
    for (const auto& c : mf.comments) {
        if (c.rfind("# metafeatures", 0) == 0) {
            md.meta_features.version = csv::trim(c.substr(1));
            break;
        }
    }
    const std::int32_t n_features = md.meta_features.n_features();
    const std::int32_t n_datasets = md.performance.n_datasets();
    md.meta_features.rows = Eigen::MatrixXd::Zero(n_datasets, n_features);
    std::vector<bool> seen(static_cast<std::size_t>(n_datasets), false);
    for (const auto& row : mf.rows) {
        const auto it = dataset_index.find(row.cells[0]);
        if (it == dataset_index.end()) continue;
        if (seen[static_cast<std::size_t>(it->second)])
            throw DuplicateEntry(metafeat_path + ":" + std::to_string(row.line_number) +
                                 ": duplicate meta-feature row for dataset " + row.cells[0]);
        seen[static_cast<std::size_t>(it->second)] = true;
        for (std::int32_t f = 0; f < n_features; ++f) {
            const auto v = csv::parse_double(row.cells[static_cast<std::size_t>(f) + 1]);
            if (!v || !std::isfinite(*v))
                throw MalformedFile(metafeat_path, row.line_number,
                                    "non-numeric meta-feature '" + row.cells[static_cast<std::size_t>(f) + 1] + "'");
            md.meta_features.rows(it->second, f) = *v;
        }
    }
    for (std::int32_t j = 0; j < n_datasets; ++j) {
        if (!seen[static_cast<std::size_t>(j)])
            throw MalformedFile(metafeat_path, "missing meta-feature row for dataset " + dataset_names[static_cast<std::size_t>(j)]);
    }

    // Split: explicit list file takes priority over (seed, fraction).
    if (split.list_path) {
        std::vector<std::string> train_names;
        std::vector<std::string> test_names;
        parse_split_file(*split.list_path, train_names, test_names);
        std::unordered_set<std::int32_t> train_set;
        std::unordered_set<std::int32_t> test_set;
        for (const auto& n : train_names) {
            const auto it = dataset_index.find(n);
            if (it == dataset_index.end()) throw UnknownDatasetInSplit("UnknownDatasetInSplit: " + n);
            if (!train_set.insert(it->second).second)
                throw MalformedFile(*split.list_path, "dataset " + n + " listed twice in [train]");
        }
        for (const auto& n : test_names) {
            const auto it = dataset_index.find(n);
            if (it == dataset_index.end()) throw UnknownDatasetInSplit("UnknownDatasetInSplit: " + n);
            if (train_set.count(it->second))
                throw MalformedFile(*split.list_path, "dataset " + n + " in both [train] and [test]");
            if (!test_set.insert(it->second).second)
                throw MalformedFile(*split.list_path, "dataset " + n + " listed twice in [test]");
        }
        for (std::int32_t j = 0; j < n_datasets; ++j) {
            if (!train_set.count(j) && !test_set.count(j))
                throw MalformedFile(*split.list_path, "split does not cover dataset " + dataset_names[static_cast<std::size_t>(j)]);
        }
        md.train_datasets.assign(train_set.begin(), train_set.end());
        md.test_datasets.assign(test_set.begin(), test_set.end());
    } else {
        assign_random_split(md, split.seed, split.train_fraction);
    }
    std::sort(md.train_datasets.begin(), md.train_datasets.end());
    std::sort(md.test_datasets.begin(), md.test_datasets.end());
    return md;
}

void assign_random_split(MetaDataset& md, std::uint64_t seed, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ValidationError("train_fraction must be in (0,1)");
    const std::int32_t n_datasets = static_cast<std::int32_t>(md.dataset_names.size());
    std::vector<std::int32_t> order(static_cast<std::size_t>(n_datasets));
    for (std::int32_t j = 0; j < n_datasets; ++j) order[static_cast<std::size_t>(j)] = j;
    Rng rng(derive_seed(seed, {0x5311ULL}));
    rng.shuffle(order);
    std::int64_t n_train = std::llround(train_fraction * n_datasets);
    if (n_datasets >= 2) n_train = std::clamp<std::int64_t>(n_train, 1, n_datasets - 1);
    else n_train = 1;
    md.train_datasets.assign(order.begin(), order.begin() + n_train);
    md.test_datasets.assign(order.begin() + n_train, order.end());
    std::sort(md.train_datasets.begin(), md.train_datasets.end());
    std::sort(md.test_datasets.begin(), md.test_datasets.end());
}

void save_meta_dataset(const MetaDataset& md, const std::string& perf_path,
                       const std::string& metafeat_path, const std::string& split_path) {
    {
        std::ofstream out(perf_path);
        if (!out) throw RuntimeError("cannot write " + perf_path);
        out << "pipeline_id,dataset_name,score\n";
        for (const auto& e : md.performance.entries()) {
            out << e.pipeline << ',' << md.dataset_names[static_cast<std::size_t>(e.dataset)] << ','
                << csv::format_double(e.score) << '\n';
        }
    }
    {
        std::ofstream out(metafeat_path);
        if (!out) throw RuntimeError("cannot write " + metafeat_path);
        if (!md.meta_features.version.empty()) out << "# " << md.meta_features.version << '\n';
        out << "dataset_name," << csv::join(md.meta_features.feature_names) << '\n';
        for (std::size_t j = 0; j < md.dataset_names.size(); ++j) {
            out << md.dataset_names[j];
            for (std::int32_t f = 0; f < md.meta_features.n_features(); ++f)
                out << ',' << csv::format_double(md.meta_features.rows(static_cast<Eigen::Index>(j), f));
            out << '\n';
        }
    }
    {
        std::ofstream out(split_path);
        if (!out) throw RuntimeError("cannot write " + split_path);
        out << "[train]\n";
        for (std::int32_t j : md.train_datasets) out << md.dataset_names[static_cast<std::size_t>(j)] << '\n';
        out << "[test]\n";
        for (std::int32_t j : md.test_datasets) out << md.dataset_names[static_cast<std::size_t>(j)] << '\n';
    }
}

std::vector<std::optional<double>> dense_view(const MetaDataset& md, const DatasetId& dataset) {
    if (dataset.index < 0 || dataset.index >= md.performance.n_datasets())
        throw UnknownDataset("dataset index " + std::to_string(dataset.index));
    std::vector<std::optional<double>> out(static_cast<std::size_t>(md.performance.n_pipelines()));
    for (std::int32_t i = 0; i < md.performance.n_pipelines(); ++i)
        out[static_cast<std::size_t>(i)] = md.performance.score(i, dataset.index);
    return out;
}

double best_score(const MetaDataset& md, const DatasetId& dataset) {
    if (dataset.index < 0 || dataset.index >= md.performance.n_datasets())
        throw UnknownDataset("dataset index " + std::to_string(dataset.index));
    bool any = false;
    double best = 0.0;
    for (std::int32_t i = 0; i < md.performance.n_pipelines(); ++i) {
        const auto s = md.performance.score(i, dataset.index);
        if (s && (!any || *s > best)) {
            best = *s;
            any = true;
        }
    }
    if (!any) throw EmptyColumn("dataset " + dataset.name + " has no entries");
    return best;
}

}  // namespace ablr
