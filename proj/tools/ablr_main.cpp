#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ablr/acquisition.hpp"
#include "ablr/csv.hpp"
#include "ablr/errors.hpp"
#include "ablr/meta_features.hpp"
#include "ablr/meta_store.hpp"
#include "ablr/model.hpp"
#include "ablr/search.hpp"
#include "ablr/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Effective settings: built-in defaults, overlaid by the config file,
// overlaid by command-line flags (flags win).
struct RunConfig {
    std::string performance_path;
    std::string metafeatures_path;
    std::optional<std::string> split_path;
    std::string model_path;
    ablr::NetworkConfig network;
    ablr::BlrHyperparams blr_init;
    ablr::AcquisitionConfig acquisition;
    std::int32_t iterations = 50;
    std::int32_t n_seeds = 1;
    std::vector<std::string> policies = {"ablr_static"};
    std::string output_dir = ".";
    std::uint64_t seed = 0;
    int jobs = 1;
    double train_fraction = 0.7;
    ablr::SyntheticConfig synth;
};

void require_keys(const json& j, const char* section, const std::set<std::string>& known) {
    for (const auto& item : j.items()) {
        if (!known.count(item.key())) {
            throw ablr::ValidationError(std::string("config: unknown key '") + section + item.key() + "'");
        }
    }
}

template <typename T>
void read_field(const json& j, const char* section, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ablr::ValidationError(std::string("config: key '") + section + key + "' has the wrong type");
    }
}

void check_input_path(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw ablr::ValidationError(what + " does not exist: " + path);
}

void apply_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw ablr::ValidationError("cannot open config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ablr::ValidationError("config file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ablr::ValidationError("config file " + path + " must hold a JSON object");
    require_keys(j, "", {"paths", "network", "blr_init", "acquisition", "iterations", "seeds",
                         "policies", "output_dir", "seed", "jobs", "train_fraction", "synth"});

    if (j.contains("paths")) {
        const json& p = j.at("paths");
        require_keys(p, "paths.", {"performance", "metafeatures", "split", "model"});
        read_field(p, "paths.", "performance", cfg.performance_path);
        read_field(p, "paths.", "metafeatures", cfg.metafeatures_path);
        std::string split;
        read_field(p, "paths.", "split", split);
        if (!split.empty()) cfg.split_path = split;
        read_field(p, "paths.", "model", cfg.model_path);
        if (!cfg.performance_path.empty()) check_input_path(cfg.performance_path, "config paths.performance");
        if (!cfg.metafeatures_path.empty()) check_input_path(cfg.metafeatures_path, "config paths.metafeatures");
        if (cfg.split_path) check_input_path(*cfg.split_path, "config paths.split");
    }
    if (j.contains("network")) {
        const json& n = j.at("network");
        require_keys(n, "network.", {"embedding_dim", "hidden_sizes", "activation", "learning_rate",
                                     "batch_size", "epochs"});
        read_field(n, "network.", "embedding_dim", cfg.network.embedding_dim);
        read_field(n, "network.", "hidden_sizes", cfg.network.hidden_sizes);
        std::string act = "tanh";
        read_field(n, "network.", "activation", act);
        if (act != "tanh") throw ablr::ValidationError("config: network.activation must be 'tanh'");
        read_field(n, "network.", "learning_rate", cfg.network.learning_rate);
        read_field(n, "network.", "batch_size", cfg.network.batch_size);
        read_field(n, "network.", "epochs", cfg.network.epochs);
    }
    if (j.contains("blr_init")) {
        const json& b = j.at("blr_init");
        require_keys(b, "blr_init.", {"alpha", "beta"});
        read_field(b, "blr_init.", "alpha", cfg.blr_init.alpha);
        read_field(b, "blr_init.", "beta", cfg.blr_init.beta);
        if (!(cfg.blr_init.alpha > 0.0) || !(cfg.blr_init.beta > 0.0))
            throw ablr::ValidationError("config: blr_init precisions must be positive");
    }
    if (j.contains("acquisition")) {
        const json& a = j.at("acquisition");
        require_keys(a, "acquisition.", {"kind", "xi", "tie_break", "tie_seed"});
        std::string kind = "expected_improvement";
        read_field(a, "acquisition.", "kind", kind);
        if (kind == "expected_improvement") {
            cfg.acquisition.kind = ablr::AcquisitionKind::expected_improvement;
        } else if (kind == "greedy_mean") {
            cfg.acquisition.kind = ablr::AcquisitionKind::greedy_mean;
        } else {
            throw ablr::ValidationError("config: unknown acquisition.kind '" + kind + "'");
        }
        read_field(a, "acquisition.", "xi", cfg.acquisition.xi);
        std::string tie = "lowest_index";
        read_field(a, "acquisition.", "tie_break", tie);
        if (tie == "lowest_index") {
            cfg.acquisition.tie_break = ablr::TieBreak::lowest_index;
        } else if (tie == "seeded_random") {
            cfg.acquisition.tie_break = ablr::TieBreak::seeded_random;
        } else {
            throw ablr::ValidationError("config: unknown acquisition.tie_break '" + tie + "'");
        }
        std::uint64_t tie_seed = 0;
        read_field(a, "acquisition.", "tie_seed", tie_seed);
        cfg.acquisition.tie_seed = tie_seed;
    }
    if (j.contains("synth")) {
        const json& s = j.at("synth");
        require_keys(s, "synth.", {"n_pipelines", "n_datasets", "latent_dim", "noise_std", "missing_rate"});
        read_field(s, "synth.", "n_pipelines", cfg.synth.n_pipelines);
        read_field(s, "synth.", "n_datasets", cfg.synth.n_datasets);
        read_field(s, "synth.", "latent_dim", cfg.synth.latent_dim);
        read_field(s, "synth.", "noise_std", cfg.synth.noise_std);
        read_field(s, "synth.", "missing_rate", cfg.synth.missing_rate);
    }
    read_field(j, "", "iterations", cfg.iterations);
    read_field(j, "", "seeds", cfg.n_seeds);
    read_field(j, "", "policies", cfg.policies);
    read_field(j, "", "output_dir", cfg.output_dir);
    read_field(j, "", "seed", cfg.seed);
    read_field(j, "", "jobs", cfg.jobs);
    read_field(j, "", "train_fraction", cfg.train_fraction);
}

fs::path ensure_output_dir(const RunConfig& cfg) {
    fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ablr::RuntimeError("cannot create output directory " + dir.string());
    return dir;
}

ablr::MetaDataset load_from_config(const RunConfig& cfg) {
    if (cfg.performance_path.empty())
        throw ablr::ValidationError("missing performance matrix path (flag --performance or config paths.performance)");
    if (cfg.metafeatures_path.empty())
        throw ablr::ValidationError("missing meta-feature path (flag --metafeatures or config paths.metafeatures)");
    check_input_path(cfg.performance_path, "performance matrix");
    check_input_path(cfg.metafeatures_path, "meta-feature table");
    ablr::SplitSpec split;
    split.list_path = cfg.split_path;
    if (split.list_path) check_input_path(*split.list_path, "split file");
    split.seed = cfg.seed;
    split.train_fraction = cfg.train_fraction;
    return ablr::load_meta_dataset(cfg.performance_path, cfg.metafeatures_path, split);
}

int cmd_extract_meta(const RunConfig& cfg, const std::string& input_dir, const std::string& target,
                     std::string out_path, bool keep_going) {
    check_input_path(input_dir, "input directory");
    if (!fs::is_directory(input_dir)) throw ablr::ValidationError(input_dir + " is not a directory");

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(input_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        std::cerr << "error: no input datasets in " << input_dir << "\n";
        return 2;
    }

    const auto& names = ablr::MetaFeatureSpec::names();
    std::vector<std::pair<std::string, Eigen::VectorXd>> rows;
    bool any_failed = false;
    for (const auto& file : files) {
        try {
            const ablr::TabularDataset ds = ablr::load_tabular_csv(file.string(), target);
            rows.emplace_back(file.stem().string(), ablr::extract(ds));
        } catch (const ablr::Error& e) {
            std::cerr << file.string() << ": " << e.what() << "\n";
            any_failed = true;
            if (!keep_going) return 2;
        }
    }

    if (out_path.empty()) out_path = (ensure_output_dir(cfg) / "metafeatures.csv").string();
    std::ofstream out(out_path);
    if (!out) throw ablr::RuntimeError("cannot write " + out_path);
    out << "# " << ablr::MetaFeatureSpec::version << "\n";
    out << "dataset_name";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (const auto& [name, vec] : rows) {
        out << name;
        for (Eigen::Index i = 0; i < vec.size(); ++i) out << ',' << ablr::csv::format_double(vec(i));
        out << '\n';
    }
    out.close();
    std::cout << "wrote " << rows.size() << " meta-feature rows to " << out_path << "\n";
    return any_failed ? 2 : 0;
}

int cmd_fit(const RunConfig& cfg, std::string model_out, std::string report_out) {
    const ablr::MetaDataset md = load_from_config(cfg);
    ablr::NetworkConfig net_config = cfg.network;
    net_config.seed = cfg.seed;

    ablr::FitReport report;
    const ablr::FittedModel model = ablr::fit_ablr(md, net_config, cfg.blr_init, &report);

    const fs::path dir = ensure_output_dir(cfg);
    if (model_out.empty()) model_out = (dir / "model.ablr").string();
    if (report_out.empty()) report_out = (dir / "fit_report.json").string();
    ablr::save_model(model, model_out);

    json rep;
    rep["alpha"] = report.alpha;
    rep["beta"] = report.beta;
    rep["log_marginal_likelihood"] = report.log_marginal_likelihood;
    rep["final_nn_loss"] = report.training.final_loss;
    rep["epochs"] = static_cast<std::int64_t>(report.training.epoch_losses.size());
    rep["n_observations"] = report.n_observations;
    rep["n_train_datasets"] = static_cast<std::int64_t>(model.train_dataset_names.size());
    rep["n_untrained_pipelines"] = static_cast<std::int64_t>(report.training.untrained_pipelines.size());
    std::ofstream rout(report_out);
    if (!rout) throw ablr::RuntimeError("cannot write " + report_out);
    rout << rep.dump(2) << '\n';
    rout.close();

    std::cout << "model written to " << model_out << "\n"
              << "alpha=" << ablr::csv::format_double(report.alpha)
              << " beta=" << ablr::csv::format_double(report.beta)
              << " lml=" << ablr::csv::format_double(report.log_marginal_likelihood)
              << " nn_loss=" << ablr::csv::format_double(report.training.final_loss) << "\n";
    return 0;
}

int cmd_replay(const RunConfig& cfg, std::string traces_out, std::string aggregate_out) {
    const ablr::MetaDataset md = load_from_config(cfg);

    if (cfg.policies.empty()) throw ablr::ValidationError("no policies given");
    std::vector<ablr::SearchPolicy> policies;
    bool needs_model = false;
    for (const auto& name : cfg.policies) {
        ablr::SearchPolicy p;
        p.kind = ablr::parse_policy(name);
        p.acquisition = cfg.acquisition;
        p.seed = cfg.seed;
        needs_model = needs_model || p.kind == ablr::PolicyKind::ablr_static ||
                      p.kind == ablr::PolicyKind::ablr_online;
        policies.push_back(p);
    }

    std::optional<ablr::FittedModel> model;
    if (needs_model) {
        if (cfg.model_path.empty())
            throw ablr::RuntimeError("ABLR policies need a model file (flag --model or config paths.model)");
        model = ablr::load_model(cfg.model_path);
    }

    const ablr::EvaluationResult result = ablr::evaluate_policies(
        md, model ? &*model : nullptr, policies, cfg.iterations, cfg.n_seeds, cfg.jobs);

    const fs::path dir = ensure_output_dir(cfg);
    if (traces_out.empty()) traces_out = (dir / "traces.csv").string();
    if (aggregate_out.empty()) aggregate_out = (dir / "aggregate.csv").string();
    ablr::write_trace_csv(traces_out, result);
    ablr::write_aggregate_csv(aggregate_out, result);
    std::cout << "wrote " << result.traces.size() << " traces to " << traces_out << "\n"
              << "wrote " << result.rows.size() << " aggregate rows to " << aggregate_out << "\n";
    return 0;
}

int cmd_synth(const RunConfig& cfg) {
    ablr::SyntheticConfig sc = cfg.synth;
    sc.seed = cfg.seed;
    sc.train_fraction = cfg.train_fraction;
    const ablr::MetaDataset md = ablr::generate_synthetic(sc);

    const fs::path dir = ensure_output_dir(cfg);
    const std::string perf = (dir / "performance.csv").string();
    const std::string feats = (dir / "metafeatures.csv").string();
    const std::string split = (dir / "split.txt").string();
    ablr::save_meta_dataset(md, perf, feats, split);
    std::cout << "wrote " << md.performance.n_entries() << " entries for "
              << md.performance.n_pipelines() << " pipelines x " << md.performance.n_datasets()
              << " datasets under " << dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Meta-learned pipeline search: ABLR surrogate fitting and replayed evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    std::uint64_t seed_flag = 0;
    auto* seed_opt = app.add_option("--seed", seed_flag, "master seed (default 0)");
    int jobs_flag = 1;
    auto* jobs_opt = app.add_option("--jobs", jobs_flag, "worker threads for replay (default 1)");
    std::string output_dir_flag;
    auto* outdir_opt = app.add_option("--output-dir", output_dir_flag, "directory for outputs (default .)");

    auto* extract = app.add_subcommand("extract-meta", "compute meta-features for a directory of dataset CSVs");
    extract->fallthrough();
    std::string input_dir;
    extract->add_option("input_dir", input_dir, "directory of dataset CSV files")->required();
    std::string target_column = "class";
    extract->add_option("--target", target_column, "target column name (default 'class')");
    std::string extract_out;
    extract->add_option("--out", extract_out, "output meta-feature CSV path");
    bool keep_going = false;
    extract->add_flag("--keep-going", keep_going, "skip malformed datasets instead of stopping");

    auto* fit = app.add_subcommand("fit", "train the surrogate on the training split");
    fit->fallthrough();
    std::string perf_flag, feats_flag, split_flag, model_out_flag, report_out_flag;
    auto* fit_perf = fit->add_option("--performance", perf_flag, "performance matrix CSV");
    auto* fit_feats = fit->add_option("--metafeatures", feats_flag, "meta-feature CSV");
    auto* fit_split = fit->add_option("--split", split_flag, "split list file");
    fit->add_option("--model-out", model_out_flag, "model file path (default <output-dir>/model.ablr)");
    fit->add_option("--report-out", report_out_flag, "fit report path (default <output-dir>/fit_report.json)");
    double train_fraction_flag = 0.7;
    auto* fit_frac = fit->add_option("--train-fraction", train_fraction_flag, "seeded split fraction (default 0.7)");
    std::int32_t epochs_flag = 0;
    auto* fit_epochs = fit->add_option("--epochs", epochs_flag, "training epochs override");

    auto* replay = app.add_subcommand("replay", "run sequential search policies against stored scores");
    replay->fallthrough();
    std::string rp_perf, rp_feats, rp_split, rp_model, rp_policies, rp_traces, rp_aggregate;
    auto* rp_perf_opt = replay->add_option("--performance", rp_perf, "performance matrix CSV");
    auto* rp_feats_opt = replay->add_option("--metafeatures", rp_feats, "meta-feature CSV");
    auto* rp_split_opt = replay->add_option("--split", rp_split, "split list file");
    auto* rp_model_opt = replay->add_option("--model", rp_model, "fitted model file");
    auto* rp_policies_opt = replay->add_option("--policies", rp_policies,
                                               "comma list: ablr_static,ablr_online,random1x,random2x");
    std::int32_t iterations_flag = 50;
    auto* rp_iters = replay->add_option("--iterations", iterations_flag, "search iterations (default 50)");
    std::int32_t seeds_flag = 1;
    auto* rp_seeds = replay->add_option("--seeds", seeds_flag, "replicates per dataset (default 1)");
    replay->add_option("--traces-out", rp_traces, "trace CSV path (default <output-dir>/traces.csv)");
    replay->add_option("--aggregate-out", rp_aggregate, "aggregate CSV path (default <output-dir>/aggregate.csv)");
    auto* rp_frac = replay->add_option("--train-fraction", train_fraction_flag, "seeded split fraction (default 0.7)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic meta-dataset");
    synth->fallthrough();
    std::int32_t sy_pipelines = 50, sy_datasets = 20, sy_latent = 4;
    double sy_noise = 0.02, sy_missing = 0.0;
    auto* sy_p = synth->add_option("--pipelines", sy_pipelines, "pipeline count (default 50)");
    auto* sy_d = synth->add_option("--datasets", sy_datasets, "dataset count (default 20)");
    auto* sy_l = synth->add_option("--latent-dim", sy_latent, "latent factor dimension (default 4)");
    auto* sy_n = synth->add_option("--noise-std", sy_noise, "score noise std (default 0.02)");
    auto* sy_m = synth->add_option("--missing-rate", sy_missing, "entry drop probability (default 0)");
    auto* sy_frac = synth->add_option("--train-fraction", train_fraction_flag, "split fraction (default 0.7)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) apply_config_file(config_path, cfg);
        if (seed_opt->count() > 0) cfg.seed = seed_flag;
        if (jobs_opt->count() > 0) cfg.jobs = jobs_flag;
        if (outdir_opt->count() > 0) cfg.output_dir = output_dir_flag;
        if (cfg.jobs < 1) throw ablr::ValidationError("--jobs must be at least 1");

        if (extract->parsed()) {
            return cmd_extract_meta(cfg, input_dir, target_column, extract_out, keep_going);
        }
        if (fit->parsed()) {
            if (fit_perf->count() > 0) cfg.performance_path = perf_flag;
            if (fit_feats->count() > 0) cfg.metafeatures_path = feats_flag;
            if (fit_split->count() > 0) cfg.split_path = split_flag;
            if (fit_frac->count() > 0) cfg.train_fraction = train_fraction_flag;
            if (fit_epochs->count() > 0) cfg.network.epochs = epochs_flag;
            return cmd_fit(cfg, model_out_flag, report_out_flag);
        }
        if (replay->parsed()) {
            if (rp_perf_opt->count() > 0) cfg.performance_path = rp_perf;
            if (rp_feats_opt->count() > 0) cfg.metafeatures_path = rp_feats;
            if (rp_split_opt->count() > 0) cfg.split_path = rp_split;
            if (rp_model_opt->count() > 0) cfg.model_path = rp_model;
            if (rp_frac->count() > 0) cfg.train_fraction = train_fraction_flag;
            if (rp_iters->count() > 0) cfg.iterations = iterations_flag;
            if (rp_seeds->count() > 0) cfg.n_seeds = seeds_flag;
            if (rp_policies_opt->count() > 0) {
                cfg.policies.clear();
                std::string token;
                for (char c : rp_policies + ",") {
                    if (c == ',') {
                        const std::string t = ablr::csv::trim(token);
                        if (!t.empty()) cfg.policies.push_back(t);
                        token.clear();
                    } else {
                        token.push_back(c);
                    }
                }
            }
            return cmd_replay(cfg, rp_traces, rp_aggregate);
        }
        if (synth->parsed()) {
            if (sy_p->count() > 0) cfg.synth.n_pipelines = sy_pipelines;
            if (sy_d->count() > 0) cfg.synth.n_datasets = sy_datasets;
            if (sy_l->count() > 0) cfg.synth.latent_dim = sy_latent;
            if (sy_n->count() > 0) cfg.synth.noise_std = sy_noise;
            if (sy_m->count() > 0) cfg.synth.missing_rate = sy_missing;
            if (sy_frac->count() > 0) cfg.train_fraction = train_fraction_flag;
            return cmd_synth(cfg);
        }
        throw ablr::ValidationError("no subcommand given");
    } catch (const ablr::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ablr::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
