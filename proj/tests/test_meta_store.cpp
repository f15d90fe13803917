#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

#include "ablr/errors.hpp"
#include "ablr/meta_store.hpp"

namespace {

struct TempFile {
    std::string path;
    TempFile(const std::string& name, const std::string& content) : path("test_tmp_" + name) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kPerf =
    "pipeline_id,dataset_name,score\n"
    "0,iris,0.9\n"
    "0,wine,0.8\n"
    "1,iris,0.95\n"
    "2,wine,0.5\n";

const char* kFeats =
    "# metafeatures-v1\n"
    "dataset_name,f1,f2\n"
    "iris,1.5,2\n"
    "wine,-1,0.25\n";

}  // namespace

TEST_CASE("load assigns dataset indices by first appearance") {
    TempFile perf("ms_perf.csv", kPerf);
    TempFile feats("ms_feats.csv", kFeats);
    ablr::SplitSpec split;
    split.train_fraction = 0.5;
    const ablr::MetaDataset md = ablr::load_meta_dataset(perf.path, feats.path, split);

    CHECK(md.dataset_names == std::vector<std::string>{"iris", "wine"});
    CHECK(md.performance.n_pipelines() == 3);
    CHECK(md.performance.n_datasets() == 2);
    CHECK(md.performance.n_entries() == 4);
    CHECK(md.performance.score(1, 0).value() == 0.95);
    CHECK_FALSE(md.performance.has(1, 1));
    CHECK(md.meta_features.version == "metafeatures-v1");
    CHECK(md.meta_features.rows(0, 0) == 1.5);
    CHECK(md.meta_features.rows(1, 1) == 0.25);
    CHECK(md.train_datasets.size() + md.test_datasets.size() == 2);
    CHECK(md.train_datasets.size() == 1);

    CHECK(ablr::best_score(md, md.dataset(0)) == 0.95);
    const auto dense = ablr::dense_view(md, md.dataset(1));
    REQUIRE(dense.size() == 3);
    CHECK(dense[0].value() == 0.8);
    CHECK_FALSE(dense[1].has_value());
    CHECK(md.performance.tested_pipelines(0) == std::vector<std::int32_t>{0, 1});
}

TEST_CASE("scores outside [0,1] are rejected, with a percentage hint") {
    TempFile perf("ms_pct.csv", "pipeline_id,dataset_name,score\n0,a,91.5\n0,b,0.5\n");
    TempFile feats("ms_pct_feats.csv", "dataset_name,f1\na,0\nb,0\n");
    try {
        ablr::load_meta_dataset(perf.path, feats.path, ablr::SplitSpec{});
        FAIL("expected ScoreOutOfRange");
    } catch (const ablr::ScoreOutOfRange& e) {
        const std::string msg = e.what();
        CHECK(msg.find("percentage") != std::string::npos);
        CHECK(msg.find(":2") != std::string::npos);
    }
}

TEST_CASE("duplicate (pipeline, dataset) rows are rejected") {
    TempFile perf("ms_dup.csv", "pipeline_id,dataset_name,score\n0,a,0.5\n0,a,0.6\n");
    TempFile feats("ms_dup_feats.csv", "dataset_name,f1\na,0\n");
    CHECK_THROWS_AS(ablr::load_meta_dataset(perf.path, feats.path, ablr::SplitSpec{}),
                    ablr::DuplicateEntry);
}

TEST_CASE("wrong performance header is rejected") {
    TempFile perf("ms_hdr.csv", "pipeline,dataset,acc\n0,a,0.5\n");
    TempFile feats("ms_hdr_feats.csv", "dataset_name,f1\na,0\n");
    CHECK_THROWS_AS(ablr::load_meta_dataset(perf.path, feats.path, ablr::SplitSpec{}),
                    ablr::MalformedFile);
}

TEST_CASE("every dataset needs a meta-feature row; extras are ignored") {
    TempFile perf("ms_cover.csv", "pipeline_id,dataset_name,score\n0,a,0.5\n0,b,0.6\n");
    TempFile missing("ms_cover_f1.csv", "dataset_name,f1\na,0\n");
    CHECK_THROWS_AS(ablr::load_meta_dataset(perf.path, missing.path, ablr::SplitSpec{}),
                    ablr::MalformedFile);

    TempFile extra("ms_cover_f2.csv", "dataset_name,f1\na,1\nb,2\nunrelated,9\n");
    const ablr::MetaDataset md = ablr::load_meta_dataset(perf.path, extra.path, ablr::SplitSpec{});
    CHECK(md.meta_features.rows.rows() == 2);
}

TEST_CASE("explicit split files are honored and validated") {
    TempFile perf("ms_sp.csv", kPerf);
    TempFile feats("ms_sp_feats.csv", kFeats);

    TempFile good("ms_sp_good.txt", "[train]\nwine\n[test]\niris\n");
    ablr::SplitSpec split;
    split.list_path = good.path;
    const ablr::MetaDataset md = ablr::load_meta_dataset(perf.path, feats.path, split);
    CHECK(md.train_datasets == std::vector<std::int32_t>{1});
    CHECK(md.test_datasets == std::vector<std::int32_t>{0});
    CHECK(md.is_train(1));
    CHECK(md.is_test(0));

    TempFile unknown("ms_sp_unk.txt", "[train]\nwine\nmystery\n[test]\niris\n");
    split.list_path = unknown.path;
    CHECK_THROWS_AS(ablr::load_meta_dataset(perf.path, feats.path, split),
                    ablr::UnknownDatasetInSplit);

    TempFile partial("ms_sp_partial.txt", "[train]\nwine\n[test]\n");
    split.list_path = partial.path;
    CHECK_THROWS_AS(ablr::load_meta_dataset(perf.path, feats.path, split), ablr::MalformedFile);

    TempFile overlap("ms_sp_overlap.txt", "[train]\nwine\niris\n[test]\niris\n");
    split.list_path = overlap.path;
    CHECK_THROWS_AS(ablr::load_meta_dataset(perf.path, feats.path, split), ablr::MalformedFile);
}

TEST_CASE("seeded splits are deterministic partitions with both sides non-empty") {
    TempFile perf("ms_seed.csv",
                  "pipeline_id,dataset_name,score\n"
                  "0,a,0.1\n0,b,0.2\n0,c,0.3\n0,d,0.4\n0,e,0.5\n");
    TempFile feats("ms_seed_feats.csv", "dataset_name,f1\na,1\nb,2\nc,3\nd,4\ne,5\n");
    ablr::SplitSpec split;
    split.seed = 9;
    split.train_fraction = 0.7;
    const ablr::MetaDataset m1 = ablr::load_meta_dataset(perf.path, feats.path, split);
    const ablr::MetaDataset m2 = ablr::load_meta_dataset(perf.path, feats.path, split);
    CHECK(m1.train_datasets == m2.train_datasets);
    CHECK(m1.test_datasets == m2.test_datasets);
    CHECK(m1.train_datasets.size() == 4);  // round(0.7 * 5), clamped to [1, 4]
    CHECK(m1.test_datasets.size() == 1);
    for (std::int32_t j = 0; j < 5; ++j) CHECK((m1.is_train(j) != m1.is_test(j)));

    split.seed = 10;
    const ablr::MetaDataset m3 = ablr::load_meta_dataset(perf.path, feats.path, split);
    CHECK(m3.train_datasets.size() == 4);
}

TEST_CASE("save then load is the identity, and save is canonical") {
    TempFile perf("ms_rt.csv", kPerf);
    TempFile feats("ms_rt_feats.csv", kFeats);
    ablr::SplitSpec split;
    split.train_fraction = 0.5;
    const ablr::MetaDataset md = ablr::load_meta_dataset(perf.path, feats.path, split);

    ablr::save_meta_dataset(md, "test_tmp_rt_perf.csv", "test_tmp_rt_feats.csv", "test_tmp_rt_split.txt");
    ablr::SplitSpec from_file;
    from_file.list_path = "test_tmp_rt_split.txt";
    const ablr::MetaDataset back =
        ablr::load_meta_dataset("test_tmp_rt_perf.csv", "test_tmp_rt_feats.csv", from_file);
    CHECK(back.dataset_names == md.dataset_names);
    CHECK(back.performance.entries().size() == md.performance.entries().size());
    CHECK(back.meta_features.rows == md.meta_features.rows);
    CHECK(back.train_datasets == md.train_datasets);
    CHECK(back.test_datasets == md.test_datasets);

    ablr::save_meta_dataset(back, "test_tmp_rt_perf2.csv", "test_tmp_rt_feats2.csv", "test_tmp_rt_split2.txt");
    CHECK(slurp("test_tmp_rt_perf.csv") == slurp("test_tmp_rt_perf2.csv"));
    CHECK(slurp("test_tmp_rt_feats.csv") == slurp("test_tmp_rt_feats2.csv"));
    CHECK(slurp("test_tmp_rt_split.txt") == slurp("test_tmp_rt_split2.txt"));
    for (const char* f : {"test_tmp_rt_perf.csv", "test_tmp_rt_feats.csv", "test_tmp_rt_split.txt",
                          "test_tmp_rt_perf2.csv", "test_tmp_rt_feats2.csv", "test_tmp_rt_split2.txt"}) {
        std::remove(f);
    }
}

TEST_CASE("best_score on an empty column throws") {
    ablr::MetaDataset md;
    md.dataset_names = {"a", "b"};
    md.performance = ablr::PerformanceMatrix(2, 2);
    md.performance.add_entry(0, 0, 0.5);
    CHECK(ablr::best_score(md, md.dataset(0)) == 0.5);
    CHECK_THROWS_AS(ablr::best_score(md, md.dataset(1)), ablr::EmptyColumn);
}
