#include "ablr/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>
#include <unordered_set>

#include "ablr/csv.hpp"
#include "ablr/errors.hpp"
#include "ablr/rng.hpp"

namespace ablr {
namespace {

constexpr std::uint64_t kSearchStream = 0x6a0b;

}  // namespace

std::string policy_name(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::ablr_static: return "ablr_static";
        case PolicyKind::ablr_online: return "ablr_online";
        case PolicyKind::random1x: return "random1x";
        case PolicyKind::random2x: return "random2x";
    }
    throw RuntimeError("invalid policy kind");
}

PolicyKind parse_policy(const std::string& name) {
    if (name == "ablr_static") return PolicyKind::ablr_static;
    if (name == "ablr_online") return PolicyKind::ablr_online;
    if (name == "random1x") return PolicyKind::random1x;
    if (name == "random2x") return PolicyKind::random2x;
    throw ValidationError("unknown policy '" + name +
                          "' (expected ablr_static, ablr_online, random1x or random2x)");
}

std::vector<std::int32_t> ReplayOracle::candidates(std::int32_t dataset) const {
    return md_->performance.tested_pipelines(dataset);
}

double ReplayOracle::observe(std::int32_t pipeline, std::int32_t dataset) {
    const auto s = md_->performance.score(pipeline, dataset);
    if (!s) {
        throw UnknownPipeline("pipeline " + std::to_string(pipeline) + " has no stored score on dataset " +
                              std::to_string(dataset));
    }
    log_.emplace_back(pipeline, dataset);
    return *s;
}

double ReplayOracle::reference_best(std::int32_t dataset) const {
    return best_score(*md_, md_->dataset(dataset));
}

SearchTrace run_search(const MetaDataset& md, const FittedModel* model, std::int32_t dataset,
                       const SearchPolicy& policy, std::int32_t iterations, ReplayOracle& oracle) {
    if (dataset < 0 || dataset >= md.performance.n_datasets())
        throw UnknownDataset("dataset index " + std::to_string(dataset));
    if (iterations < 0) throw ValidationError("iterations must be non-negative");

    const bool uses_model =
        policy.kind == PolicyKind::ablr_static || policy.kind == PolicyKind::ablr_online;
    const std::string& name = md.dataset_names[static_cast<std::size_t>(dataset)];
    if (uses_model) {
        if (!model) throw RuntimeError("policy " + policy_name(policy.kind) + " needs a fitted model");
        if (model->trained_on(name))
            throw ModelTrainedOnTestDataset("model was trained on dataset " + name);
    }

    SearchTrace trace;
    trace.dataset = dataset;
    trace.dataset_name = name;
    trace.policy = policy.kind;

    const std::vector<std::int32_t> candidates = oracle.candidates(dataset);
    if (candidates.empty()) throw EmptyColumn("dataset " + name + " has no entries");
    const double y_star = oracle.reference_best(dataset);

    const int picks_per_iter = policy.kind == PolicyKind::random2x ? 2 : 1;
    const std::int64_t budget = static_cast<std::int64_t>(iterations) * picks_per_iter;
    if (budget > static_cast<std::int64_t>(candidates.size())) trace.truncated = true;

    std::optional<double> y_best;
    auto push_step = [&](std::int32_t iteration, std::vector<std::int32_t> chosen,
                         std::vector<double> observed) {
        SearchStep step;
        step.iteration = iteration;
        step.chosen = std::move(chosen);
        step.observed = std::move(observed);
        step.best_so_far = *y_best;
        step.regret = y_star - *y_best;
        trace.steps.push_back(std::move(step));
    };

    if (uses_model) {
        const Eigen::VectorXd raw = md.meta_features.rows.row(dataset).transpose();
        std::vector<Eigen::VectorXd> bases(candidates.size());
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            bases[i] = model_basis(*model, raw, PipelineId{candidates[i]});
        }
        BlrPosterior post = model->posterior;
        std::vector<CandidatePrediction> preds(candidates.size());
        auto refresh = [&]() {
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                const BlrPrediction p = predict(post, bases[i]);
                preds[i] = {PipelineId{candidates[i]}, p.mu, std::sqrt(std::max(0.0, p.sigma2))};
            }
        };
        refresh();

        std::unordered_set<std::int32_t> evaluated;
        for (std::int32_t t = 0; t < iterations; ++t) {
            if (evaluated.size() == candidates.size()) break;
            const PipelineId pick = select_next(preds, evaluated, y_best, policy.acquisition);
            const double y = oracle.observe(pick.index, dataset);
            evaluated.insert(pick.index);
            y_best = y_best ? std::max(*y_best, y) : y;
            if (policy.kind == PolicyKind::ablr_online) {
                const std::size_t ci = static_cast<std::size_t>(
                    std::lower_bound(candidates.begin(), candidates.end(), pick.index) -
                    candidates.begin());
                post = append_observation(post, bases[ci], y);
                refresh();
            }
            push_step(t, {pick.index}, {y});
        }
    } else {
        Rng rng(derive_seed(policy.seed, {kSearchStream}));
        std::vector<std::int32_t> pool = candidates;
        for (std::int32_t t = 0; t < iterations; ++t) {
            if (pool.empty()) break;
            std::vector<std::int32_t> chosen;
            std::vector<double> observed;
            for (int k = 0; k < picks_per_iter && !pool.empty(); ++k) {
                const std::size_t idx = static_cast<std::size_t>(rng.bounded(pool.size()));
                const std::int32_t pick = pool[idx];
                pool[idx] = pool.back();
                pool.pop_back();
                const double y = oracle.observe(pick, dataset);
                y_best = y_best ? std::max(*y_best, y) : y;
                chosen.push_back(pick);
                observed.push_back(y);
            }
            push_step(t, std::move(chosen), std::move(observed));
        }
    }
    return trace;
}

SearchTrace run_search(const MetaDataset& md, const FittedModel* model, std::int32_t dataset,
                       const SearchPolicy& policy, std::int32_t iterations) {
    ReplayOracle oracle(md);
    return run_search(md, model, dataset, policy, iterations, oracle);
}

namespace {

// Fractional (competition-free) ranks: ties share the mean of the 1-based
// positions they occupy. Lower value = rank closer to 1.
std::vector<double> fractional_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double mean_pos = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_pos;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

EvaluationResult evaluate_policies(const MetaDataset& md, const FittedModel* model,
                                   const std::vector<SearchPolicy>& policies,
                                   std::int32_t iterations, std::int32_t n_seeds, int jobs) {
    if (policies.empty()) throw ValidationError("no policies to evaluate");
    if (iterations < 1) throw ValidationError("iterations must be at least 1");
    if (n_seeds < 1) throw ValidationError("seeds must be at least 1");
    if (md.test_datasets.empty()) throw ValidationError("split has no test datasets");

    const std::size_t n_policies = policies.size();
    const std::size_t n_data = md.test_datasets.size();
    const std::size_t n_reps = static_cast<std::size_t>(n_seeds);
    const std::size_t n_tasks = n_policies * n_data * n_reps;

    EvaluationResult result;
    result.traces.resize(n_tasks);

    auto run_task = [&](std::size_t task) {
        const std::size_t p = task / (n_data * n_reps);
        const std::size_t d = (task / n_reps) % n_data;
        const std::size_t r = task % n_reps;
        const std::int32_t dataset = md.test_datasets[d];
        SearchPolicy run_policy = policies[p];
        run_policy.seed = derive_seed(policies[p].seed,
                                      {static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(dataset),
                                       static_cast<std::uint64_t>(r)});
        ReplayOracle oracle(md);
        SearchTrace trace = run_search(md, model, dataset, run_policy, iterations, oracle);
        trace.replicate = static_cast<std::int32_t>(r);
        result.traces[task] = std::move(trace);
    };

    const int workers = std::min<int>(std::max(jobs, 1), static_cast<int>(n_tasks));
    if (workers <= 1) {
        for (std::size_t task = 0; task < n_tasks; ++task) run_task(task);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&]() {
            for (;;) {
                const std::size_t task = next.fetch_add(1);
                if (task >= n_tasks) return;
                try {
                    run_task(task);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    // Per (policy, dataset, iteration): regret averaged over replicates, with
    // exhausted traces carrying their final value forward.
    const std::size_t T = static_cast<std::size_t>(iterations);
    std::vector<double> mean_pd(n_policies * n_data * T, 0.0);
    for (std::size_t p = 0; p < n_policies; ++p) {
        for (std::size_t d = 0; d < n_data; ++d) {
            for (std::size_t r = 0; r < n_reps; ++r) {
                const SearchTrace& trace = result.traces[(p * n_data + d) * n_reps + r];
                for (std::size_t t = 0; t < T; ++t) {
                    const std::size_t s = std::min(t, trace.steps.size() - 1);
                    mean_pd[(p * n_data + d) * T + t] += trace.steps[s].regret / static_cast<double>(n_reps);
                }
            }
        }
    }

    result.rows.reserve(n_policies * T);
    for (std::size_t p = 0; p < n_policies; ++p) {
        for (std::size_t t = 0; t < T; ++t) {
            AggregateRow row;
            row.policy = policy_name(policies[p].kind);
            row.iteration = static_cast<std::int32_t>(t);
            double sum = 0.0;
            for (std::size_t d = 0; d < n_data; ++d) sum += mean_pd[(p * n_data + d) * T + t];
            row.mean_regret = sum / static_cast<double>(n_data);
            double ss = 0.0;
            for (std::size_t d = 0; d < n_data; ++d) {
                const double dev = mean_pd[(p * n_data + d) * T + t] - row.mean_regret;
                ss += dev * dev;
            }
            row.stderr_regret = n_data > 1 ? std::sqrt(ss / static_cast<double>(n_data - 1)) /
                                                 std::sqrt(static_cast<double>(n_data))
                                           : 0.0;
            row.mean_rank = 0.0;  // filled below
            result.rows.push_back(std::move(row));
        }
    }

    // Fractional ranks of the policies within each (dataset, iteration) cell,
    // averaged over datasets.
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> rank_sum(n_policies, 0.0);
        std::vector<double> cell(n_policies);
        for (std::size_t d = 0; d < n_data; ++d) {
            for (std::size_t p = 0; p < n_policies; ++p) cell[p] = mean_pd[(p * n_data + d) * T + t];
            const std::vector<double> ranks = fractional_ranks(cell);
            for (std::size_t p = 0; p < n_policies; ++p) rank_sum[p] += ranks[p];
        }
        for (std::size_t p = 0; p < n_policies; ++p) {
            result.rows[p * T + t].mean_rank = rank_sum[p] / static_cast<double>(n_data);
        }
    }
    return result;
}

void write_trace_csv(const std::string& path, const EvaluationResult& result) {
    std::ofstream out(path);
    if (!out) throw RuntimeError("cannot write " + path);
    out << "dataset,policy,seed,iteration,pipeline_id,observed,best_so_far,regret\n";
    for (const SearchTrace& trace : result.traces) {
        for (const SearchStep& step : trace.steps) {
            for (std::size_t k = 0; k < step.chosen.size(); ++k) {
                out << trace.dataset_name << ',' << policy_name(trace.policy) << ','
                    << trace.replicate << ',' << step.iteration << ',' << step.chosen[k] << ','
                    << csv::format_double(step.observed[k]) << ','
                    << csv::format_double(step.best_so_far) << ','
                    << csv::format_double(step.regret) << '\n';
            }
        }
    }
    if (!out) throw RuntimeError("short write to " + path);
}

void write_aggregate_csv(const std::string& path, const EvaluationResult& result) {
    std::ofstream out(path);
    if (!out) throw RuntimeError("cannot write " + path);
    out << "policy,iteration,mean_regret,stderr_regret,mean_rank\n";
    for (const AggregateRow& row : result.rows) {
        out << row.policy << ',' << row.iteration << ',' << csv::format_double(row.mean_regret)
            << ',' << csv::format_double(row.stderr_regret) << ','
            << csv::format_double(row.mean_rank) << '\n';
    }
    if (!out) throw RuntimeError("short write to " + path);
}

}  // namespace ablr
