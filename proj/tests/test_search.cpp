#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "ablr/errors.hpp"
#include "ablr/search.hpp"
#include "oracle_utils.hpp"

namespace {

// One train dataset ("other", index 0) plus one test dataset ("target",
// index 1); every pipeline has a stored score on both.
ablr::MetaDataset make_md(const std::vector<double>& target_scores,
                          const std::vector<double>& other_scores) {
    REQUIRE(target_scores.size() == other_scores.size());
    ablr::MetaDataset md;
    const auto n = static_cast<std::int32_t>(target_scores.size());
    md.performance = ablr::PerformanceMatrix(n, 2);
    for (std::int32_t i = 0; i < n; ++i) {
        md.performance.add_entry(i, 0, other_scores[static_cast<std::size_t>(i)]);
        md.performance.add_entry(i, 1, target_scores[static_cast<std::size_t>(i)]);
    }
    md.dataset_names = {"other", "target"};
    md.meta_features.feature_names = {"f0", "f1"};
    md.meta_features.version = "metafeatures-v1";
    md.meta_features.rows.resize(2, 2);
    md.meta_features.rows << 0.1, 0.2, 0.3, -0.1;
    md.train_datasets = {0};
    md.test_datasets = {1};
    return md;
}

// Surrogate that predicts the target column exactly: the single hidden unit
// reads only the pipeline embedding, which holds atanh(score), and the head
// weight is 1, so mu(pipeline i) = tanh(atanh(y_i)) = y_i.
ablr::FittedModel make_exact_model(const std::vector<double>& target_scores) {
    ablr::NetworkConfig cfg;
    cfg.embedding_dim = 1;
    cfg.hidden_sizes = {1};
    const auto n = static_cast<std::int32_t>(target_scores.size());
    ablr::FittedModel model;
    model.config = cfg;
    model.net = ablr::init_network(cfg, n, 2);
    for (std::int32_t i = 0; i < n; ++i) {
        model.net.embeddings(i, 0) = std::atanh(target_scores[static_cast<std::size_t>(i)]);
    }
    model.net.hidden[0].w.setZero();
    model.net.hidden[0].w(0, 2) = 1.0;
    model.net.hidden[0].b.setZero();
    model.net.output_w.setOnes();
    model.net.output_b = 0.0;
    model.posterior.m = Eigen::VectorXd::Ones(1);
    model.posterior.k_chol = Eigen::MatrixXd::Identity(1, 1);
    model.posterior.phi_t_y = Eigen::VectorXd::Ones(1);
    model.posterior.hp = {1.0, 1.0};
    model.posterior.q = n;
    model.stats.mean = Eigen::VectorXd::Zero(2);
    model.stats.std = Eigen::VectorXd::Ones(2);
    model.train_dataset_names = {"other"};
    model.feature_version = "metafeatures-v1";
    return model;
}

std::vector<std::int32_t> flat_chosen(const ablr::SearchTrace& trace) {
    std::vector<std::int32_t> out;
    for (const auto& step : trace.steps) {
        out.insert(out.end(), step.chosen.begin(), step.chosen.end());
    }
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("an exact surrogate finds the best pipeline immediately") {
    const std::vector<double> y = {0.5, 0.9, 0.7};
    const ablr::MetaDataset md = make_md(y, {0.6, 0.55, 0.65});
    const ablr::FittedModel model = make_exact_model(y);

    ablr::SearchPolicy policy;
    policy.kind = ablr::PolicyKind::ablr_static;
    ablr::ReplayOracle oracle(md);
    const ablr::SearchTrace trace = ablr::run_search(md, &model, 1, policy, 3, oracle);

    REQUIRE(trace.steps.size() == 3);
    CHECK(trace.dataset == 1);
    CHECK(trace.dataset_name == "target");
    CHECK_FALSE(trace.truncated);

    // Cold start takes the largest predictive mean, then EI orders the rest
    // by how close they sit to the incumbent.
    CHECK(flat_chosen(trace) == std::vector<std::int32_t>{1, 2, 0});
    CHECK(trace.steps[0].best_so_far == 0.9);
    CHECK(trace.steps[0].regret == 0.0);
    CHECK(trace.steps[2].best_so_far == 0.9);
    CHECK(trace.steps[2].regret == 0.0);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(trace.steps[t].iteration == static_cast<std::int32_t>(t));
        CHECK(trace.steps[t].chosen.size() == 1);
        CHECK(trace.steps[t].observed.size() == 1);
    }

    // The oracle log proves the policy only read the scores it chose.
    std::vector<std::pair<std::int32_t, std::int32_t>> expected_log = {{1, 1}, {2, 1}, {0, 1}};
    CHECK(oracle.access_log() == expected_log);
}

TEST_CASE("online updates keep the same picks when predictions are already exact") {
    const std::vector<double> y = {0.5, 0.9, 0.7};
    const ablr::MetaDataset md = make_md(y, {0.6, 0.55, 0.65});
    const ablr::FittedModel model = make_exact_model(y);

    ablr::SearchPolicy policy;
    policy.kind = ablr::PolicyKind::ablr_online;
    const ablr::SearchTrace trace = ablr::run_search(md, &model, 1, policy, 3);
    CHECK(flat_chosen(trace) == std::vector<std::int32_t>{1, 2, 0});
    CHECK(trace.steps.back().regret == 0.0);
}

TEST_CASE("regret and best_so_far are consistent within every trace") {
    std::vector<double> target, other;
    for (int i = 0; i < 10; ++i) {
        target.push_back(0.30 + 0.05 * i);
        other.push_back(0.5);
    }
    const ablr::MetaDataset md = make_md(target, other);
    const double y_star = ablr::best_score(md, md.dataset(1));
    CHECK(y_star == 0.75);

    for (const ablr::PolicyKind kind :
         {ablr::PolicyKind::random1x, ablr::PolicyKind::random2x}) {
        ablr::SearchPolicy policy;
        policy.kind = kind;
        policy.seed = 11;
        const ablr::SearchTrace trace = ablr::run_search(md, nullptr, 1, policy, 5);
        double best = -1.0;
        for (const auto& step : trace.steps) {
            for (double obs : step.observed) best = std::max(best, obs);
            CHECK(step.best_so_far == best);
            CHECK(step.regret == y_star - best);
        }
    }
}

TEST_CASE("random search visits every candidate exactly once") {
    std::vector<double> target, other;
    for (int i = 0; i < 7; ++i) {
        target.push_back(0.2 + 0.1 * i);
        other.push_back(0.5);
    }
    const ablr::MetaDataset md = make_md(target, other);

    ablr::SearchPolicy policy;
    policy.kind = ablr::PolicyKind::random1x;
    policy.seed = 3;
    const ablr::SearchTrace full = ablr::run_search(md, nullptr, 1, policy, 7);
    CHECK_FALSE(full.truncated);
    const auto picks = flat_chosen(full);
    CHECK(picks.size() == 7);
    CHECK(std::set<std::int32_t>(picks.begin(), picks.end()).size() == 7);
    CHECK(full.steps.back().regret == 0.0);

    // A budget beyond the pool stops early and flags the trace.
    const ablr::SearchTrace over = ablr::run_search(md, nullptr, 1, policy, 12);
    CHECK(over.truncated);
    CHECK(over.steps.size() == 7);
}

TEST_CASE("random2x takes two picks per iteration until the pool runs dry") {
    const std::vector<double> y = {0.5, 0.9, 0.7};
    const ablr::MetaDataset md = make_md(y, {0.6, 0.55, 0.65});

    ablr::SearchPolicy policy;
    policy.kind = ablr::PolicyKind::random2x;
    policy.seed = 1;
    const ablr::SearchTrace trace = ablr::run_search(md, nullptr, 1, policy, 2);
    CHECK(trace.truncated);
    REQUIRE(trace.steps.size() == 2);
    CHECK(trace.steps[0].chosen.size() == 2);
    CHECK(trace.steps[1].chosen.size() == 1);
    const auto picks = flat_chosen(trace);
    CHECK(std::set<std::int32_t>(picks.begin(), picks.end()).size() == 3);
    CHECK(trace.steps[1].regret == 0.0);
}

TEST_CASE("random traces are reproducible from the policy seed") {
    std::vector<double> target, other;
    for (int i = 0; i < 12; ++i) {
        target.push_back(0.2 + 0.05 * i);
        other.push_back(0.5);
    }
    const ablr::MetaDataset md = make_md(target, other);

    ablr::SearchPolicy policy;
    policy.kind = ablr::PolicyKind::random1x;
    policy.seed = 42;
    const auto a = ablr::run_search(md, nullptr, 1, policy, 12);
    const auto b = ablr::run_search(md, nullptr, 1, policy, 12);
    CHECK(flat_chosen(a) == flat_chosen(b));

    policy.seed = 43;
    const auto c = ablr::run_search(md, nullptr, 1, policy, 12);
    CHECK(flat_chosen(a) != flat_chosen(c));
}

TEST_CASE("doubling the budget cannot hurt random search on average") {
    std::vector<double> target, other;
    for (int i = 0; i < 10; ++i) {
        target.push_back(0.30 + 0.05 * i);
        other.push_back(0.5);
    }
    const ablr::MetaDataset md = make_md(target, other);

    const int n_trials = 400;
    const int iterations = 3;
    std::vector<double> mean1(iterations, 0.0), mean2(iterations, 0.0);
    for (int s = 0; s < n_trials; ++s) {
        ablr::SearchPolicy p1;
        p1.kind = ablr::PolicyKind::random1x;
        p1.seed = static_cast<std::uint64_t>(s);
        ablr::SearchPolicy p2 = p1;
        p2.kind = ablr::PolicyKind::random2x;
        const auto t1 = ablr::run_search(md, nullptr, 1, p1, iterations);
        const auto t2 = ablr::run_search(md, nullptr, 1, p2, iterations);
        for (int t = 0; t < iterations; ++t) {
            mean1[static_cast<std::size_t>(t)] += t1.steps[static_cast<std::size_t>(t)].regret / n_trials;
            mean2[static_cast<std::size_t>(t)] += t2.steps[static_cast<std::size_t>(t)].regret / n_trials;
        }
    }
    for (int t = 0; t < iterations; ++t) {
        CHECK(mean2[static_cast<std::size_t>(t)] <= mean1[static_cast<std::size_t>(t)] + 1e-12);
    }
    CHECK(mean2[0] < mean1[0]);
}

TEST_CASE("search rejects bad inputs") {
    const std::vector<double> y = {0.5, 0.9, 0.7};
    const ablr::MetaDataset md = make_md(y, {0.6, 0.55, 0.65});
    const ablr::FittedModel model = make_exact_model(y);

    ablr::SearchPolicy policy;
    policy.kind = ablr::PolicyKind::ablr_static;
    CHECK_THROWS_AS(ablr::run_search(md, &model, 0, policy, 3), ablr::ModelTrainedOnTestDataset);
    CHECK_THROWS_AS(ablr::run_search(md, nullptr, 1, policy, 3), ablr::RuntimeError);
    CHECK_THROWS_AS(ablr::run_search(md, &model, 5, policy, 3), ablr::UnknownDataset);
    CHECK_THROWS_AS(ablr::run_search(md, &model, 1, policy, -1), ablr::ValidationError);

    ablr::ReplayOracle oracle(md);
    CHECK_THROWS_AS(oracle.observe(99, 1), ablr::UnknownPipeline);

    CHECK_THROWS_AS(ablr::parse_policy("bandit"), ablr::ValidationError);
    CHECK(ablr::parse_policy("ablr_online") == ablr::PolicyKind::ablr_online);
    CHECK(ablr::policy_name(ablr::PolicyKind::random2x) == "random2x");
}

TEST_CASE("evaluate_policies validates its arguments") {
    const std::vector<double> y = {0.5, 0.9, 0.7};
    ablr::MetaDataset md = make_md(y, {0.6, 0.55, 0.65});
    ablr::SearchPolicy policy;
    policy.kind = ablr::PolicyKind::random1x;

    CHECK_THROWS_AS(ablr::evaluate_policies(md, nullptr, {}, 5, 1, 1), ablr::ValidationError);
    CHECK_THROWS_AS(ablr::evaluate_policies(md, nullptr, {policy}, 0, 1, 1), ablr::ValidationError);
    CHECK_THROWS_AS(ablr::evaluate_policies(md, nullptr, {policy}, 5, 0, 1), ablr::ValidationError);
    md.test_datasets.clear();
    CHECK_THROWS_AS(ablr::evaluate_policies(md, nullptr, {policy}, 5, 1, 1), ablr::ValidationError);
}

TEST_CASE("a single policy always holds rank one") {
    const std::vector<double> y = {0.5, 0.9, 0.7};
    const ablr::MetaDataset md = make_md(y, {0.6, 0.55, 0.65});
    ablr::SearchPolicy policy;
    policy.kind = ablr::PolicyKind::random1x;
    policy.seed = 5;

    const auto result = ablr::evaluate_policies(md, nullptr, {policy}, 3, 2, 1);
    REQUIRE(result.rows.size() == 3);
    for (const auto& row : result.rows) {
        CHECK(row.mean_rank == 1.0);
        CHECK(row.stderr_regret == 0.0);
    }
    CHECK(result.traces.size() == 2);
    CHECK(result.traces[0].replicate == 0);
    CHECK(result.traces[1].replicate == 1);
}

TEST_CASE("two copies of a deterministic policy tie at rank 1.5") {
    const std::vector<double> y = {0.5, 0.9, 0.7};
    const ablr::MetaDataset md = make_md(y, {0.6, 0.55, 0.65});
    const ablr::FittedModel model = make_exact_model(y);

    ablr::SearchPolicy policy;
    policy.kind = ablr::PolicyKind::ablr_static;
    const auto result = ablr::evaluate_policies(md, &model, {policy, policy}, 3, 1, 1);
    REQUIRE(result.rows.size() == 6);
    for (const auto& row : result.rows) CHECK(row.mean_rank == 1.5);
}

TEST_CASE("mean ranks over all policies sum to the tie-free total") {
    ablr::MetaDataset md;
    md.performance = ablr::PerformanceMatrix(8, 3);
    for (std::int32_t i = 0; i < 8; ++i) {
        md.performance.add_entry(i, 0, 0.1 + 0.1 * i);
        md.performance.add_entry(i, 1, 0.9 - 0.1 * i);
        md.performance.add_entry(i, 2, 0.3 + 0.07 * i);
    }
    md.dataset_names = {"train0", "testA", "testB"};
    md.meta_features.feature_names = {"f0"};
    md.meta_features.rows.resize(3, 1);
    md.meta_features.rows << 0.0, 1.0, 2.0;
    md.train_datasets = {0};
    md.test_datasets = {1, 2};

    std::vector<ablr::SearchPolicy> policies(3);
    policies[0].kind = ablr::PolicyKind::random1x;
    policies[0].seed = 1;
    policies[1].kind = ablr::PolicyKind::random1x;
    policies[1].seed = 2;
    policies[2].kind = ablr::PolicyKind::random2x;
    policies[2].seed = 3;

    const auto result = ablr::evaluate_policies(md, nullptr, policies, 4, 3, 2);
    REQUIRE(result.rows.size() == 12);
    for (std::int32_t t = 0; t < 4; ++t) {
        double rank_sum = 0.0;
        for (std::size_t p = 0; p < 3; ++p) {
            rank_sum += result.rows[p * 4 + static_cast<std::size_t>(t)].mean_rank;
        }
        CHECK(rank_sum == doctest::Approx(6.0).epsilon(1e-12));
    }
}

TEST_CASE("aggregate rows match an independent recomputation from the traces") {
    ablr::MetaDataset md;
    md.performance = ablr::PerformanceMatrix(6, 3);
    for (std::int32_t i = 0; i < 6; ++i) {
        md.performance.add_entry(i, 0, 0.2 + 0.1 * i);
        md.performance.add_entry(i, 1, 0.8 - 0.09 * i);
        md.performance.add_entry(i, 2, 0.25 + 0.11 * i);
    }
    md.dataset_names = {"train0", "testA", "testB"};
    md.meta_features.feature_names = {"f0"};
    md.meta_features.rows.resize(3, 1);
    md.meta_features.rows << 0.5, -0.5, 1.5;
    md.train_datasets = {0};
    md.test_datasets = {1, 2};

    std::vector<ablr::SearchPolicy> policies(2);
    policies[0].kind = ablr::PolicyKind::random1x;
    policies[0].seed = 9;
    policies[1].kind = ablr::PolicyKind::random2x;
    policies[1].seed = 9;

    const std::int32_t T = 5;
    const std::int32_t R = 3;
    const auto result = ablr::evaluate_policies(md, nullptr, policies, T, R, 4);

    const std::size_t n_data = 2;
    for (std::size_t p = 0; p < policies.size(); ++p) {
        for (std::size_t t = 0; t < static_cast<std::size_t>(T); ++t) {
            std::vector<double> per_dataset;
            for (std::size_t d = 0; d < n_data; ++d) {
                double acc = 0.0;
                for (std::size_t r = 0; r < static_cast<std::size_t>(R); ++r) {
                    const auto& trace = result.traces[(p * n_data + d) * R + r];
                    const std::size_t s = std::min(t, trace.steps.size() - 1);
                    acc += trace.steps[s].regret;
                }
                per_dataset.push_back(acc / R);
            }
            const double mean =
                (per_dataset[0] + per_dataset[1]) / static_cast<double>(per_dataset.size());
            double ss = 0.0;
            for (double v : per_dataset) ss += (v - mean) * (v - mean);
            const double se = std::sqrt(ss / (n_data - 1)) / std::sqrt(static_cast<double>(n_data));

            const auto& row = result.rows[p * static_cast<std::size_t>(T) + t];
            CHECK(std::fabs(row.mean_regret - mean) < 1e-12);
            CHECK(std::fabs(row.stderr_regret - se) < 1e-12);
        }
    }

    // Mean ranks, recomputed with the reference rank routine.
    for (std::size_t t = 0; t < static_cast<std::size_t>(T); ++t) {
        std::vector<double> rank_acc(policies.size(), 0.0);
        for (std::size_t d = 0; d < n_data; ++d) {
            std::vector<double> cell;
            for (std::size_t p = 0; p < policies.size(); ++p) {
                double acc = 0.0;
                for (std::size_t r = 0; r < static_cast<std::size_t>(R); ++r) {
                    const auto& trace = result.traces[(p * n_data + d) * R + r];
                    const std::size_t s = std::min(t, trace.steps.size() - 1);
                    acc += trace.steps[s].regret;
                }
                cell.push_back(acc / R);
            }
            const auto rk = oracle::ranks(cell);
            for (std::size_t p = 0; p < policies.size(); ++p) rank_acc[p] += rk[p];
        }
        for (std::size_t p = 0; p < policies.size(); ++p) {
            const auto& row = result.rows[p * static_cast<std::size_t>(T) + t];
            CHECK(std::fabs(row.mean_rank - rank_acc[p] / n_data) < 1e-12);
        }
    }
}

TEST_CASE("results do not depend on the number of worker threads") {
    std::vector<double> target, other;
    for (int i = 0; i < 9; ++i) {
        target.push_back(0.2 + 0.08 * i);
        other.push_back(0.5);
    }
    const ablr::MetaDataset md = make_md(target, other);
    const ablr::FittedModel model = make_exact_model(target);

    std::vector<ablr::SearchPolicy> policies(3);
    policies[0].kind = ablr::PolicyKind::ablr_static;
    policies[1].kind = ablr::PolicyKind::random1x;
    policies[1].seed = 4;
    policies[2].kind = ablr::PolicyKind::random2x;
    policies[2].seed = 4;

    const auto serial = ablr::evaluate_policies(md, &model, policies, 4, 2, 1);
    const auto parallel = ablr::evaluate_policies(md, &model, policies, 4, 2, 8);
    REQUIRE(serial.traces.size() == parallel.traces.size());
    for (std::size_t i = 0; i < serial.traces.size(); ++i) {
        CHECK(flat_chosen(serial.traces[i]) == flat_chosen(parallel.traces[i]));
        CHECK(serial.traces[i].replicate == parallel.traces[i].replicate);
    }
    REQUIRE(serial.rows.size() == parallel.rows.size());
    for (std::size_t i = 0; i < serial.rows.size(); ++i) {
        CHECK(serial.rows[i].mean_regret == parallel.rows[i].mean_regret);
        CHECK(serial.rows[i].stderr_regret == parallel.rows[i].stderr_regret);
        CHECK(serial.rows[i].mean_rank == parallel.rows[i].mean_rank);
    }
}

TEST_CASE("trace and aggregate files have the expected shape and are stable") {
    const std::vector<double> y = {0.5, 0.9, 0.7};
    const ablr::MetaDataset md = make_md(y, {0.6, 0.55, 0.65});

    std::vector<ablr::SearchPolicy> policies(2);
    policies[0].kind = ablr::PolicyKind::random1x;
    policies[0].seed = 2;
    policies[1].kind = ablr::PolicyKind::random2x;
    policies[1].seed = 2;
    const auto result = ablr::evaluate_policies(md, nullptr, policies, 3, 2, 1);

    ablr::write_trace_csv("test_tmp_traces.csv", result);
    ablr::write_aggregate_csv("test_tmp_agg.csv", result);
    const std::string traces = slurp("test_tmp_traces.csv");
    const std::string agg = slurp("test_tmp_agg.csv");

    std::size_t total_picks = 0;
    for (const auto& trace : result.traces) {
        for (const auto& step : trace.steps) total_picks += step.chosen.size();
    }
    CHECK(std::count(traces.begin(), traces.end(), '\n') == 1 + static_cast<long>(total_picks));
    CHECK(traces.rfind("dataset,policy,seed,iteration,pipeline_id,observed,best_so_far,regret\n", 0) == 0);
    CHECK(std::count(agg.begin(), agg.end(), '\n') == 1 + 2 * 3);
    CHECK(agg.rfind("policy,iteration,mean_regret,stderr_regret,mean_rank\n", 0) == 0);

    ablr::write_trace_csv("test_tmp_traces2.csv", result);
    CHECK(slurp("test_tmp_traces2.csv") == traces);
    for (const char* f :
         {"test_tmp_traces.csv", "test_tmp_agg.csv", "test_tmp_traces2.csv"}) {
        std::remove(f);
    }
}
