#include <cstdint>
#include <string>
#include <vector>

#include <catch2/catch.hpp>

#include "fedmfs/datagen.hpp"
#include "fedmfs/sweep.hpp"
#include "helpers.hpp"

using namespace fedmfs;

namespace {

DatasetBundle sweep_bundle() {
    SynthSpec spec;
    spec.num_clients = 2;
    spec.num_classes = 3;
    spec.samples_per_client = 25;
    spec.seed = 61;
    spec.modalities = {
        {0, "a", 2, 3, 0.9, 0.5},
        {1, "b", 3, 3, 0.9, 0.5},
    };
    return generate(spec);
}

SweepSpec base_sweep() {
    SweepSpec spec;
    spec.gammas = {1};
    spec.alpha_pairs = {{0.2, 0.8}};
    spec.strategies = {Strategy::fedmfs};
    spec.seeds = {1};
    spec.base.rounds = 1;
    spec.base.local_epochs = 1;
    spec.base.batch_size = 8;
    spec.base.shapley_subsample = 8;
    spec.base.forest_trees = 5;
    spec.base.forest_depth = 2;
    return spec;
}

}  // namespace

TEST_CASE("accuracy at budget picks the last affordable round", "[sweep]") {
    ExperimentResult result;
    result.initial_accuracy = 0.2;
    result.metrics = {
        {0, 0.5, 0.5, 0.5, 100, 0, 100},
        {1, 0.6, 0.6, 0.6, 100, 0, 200},
        {2, 0.7, 0.7, 0.7, 100, 0, 300},
    };
    CHECK(accuracy_at_budget(result, 250) == 0.6);
    CHECK(rounds_within_budget(result, 250) == 2);
    CHECK(accuracy_at_budget(result, 300) == 0.7);
    CHECK(accuracy_at_budget(result, 99) == 0.2);
    CHECK(rounds_within_budget(result, 99) == 0);
}

TEST_CASE("the fedmfs grid covers gamma times alpha cells", "[sweep]") {
    const DatasetBundle bundle = sweep_bundle();
    SweepSpec spec = base_sweep();
    spec.gammas = {1, 2, 3, 4, 5, 6};
    spec.alpha_pairs = {{1.0, 0.0}, {0.8, 0.2}, {0.5, 0.5}, {0.2, 0.8}, {0.0, 1.0}};
    const std::vector<SweepRow> rows = run_sweep(spec, bundle);
    CHECK(rows.size() == 30);
    for (const SweepRow& row : rows) {
        CHECK(row.error.empty());
        CHECK(row.gamma.has_value());
        CHECK(row.alpha_s.has_value());
    }
}

TEST_CASE("baselines run once per seed with empty alpha columns", "[sweep]") {
    const DatasetBundle bundle = sweep_bundle();
    SweepSpec spec = base_sweep();
    spec.strategies = {Strategy::upload_all, Strategy::random_one};
    spec.seeds = {1, 2};
    const std::vector<SweepRow> rows = run_sweep(spec, bundle);
    REQUIRE(rows.size() == 4);
    for (const SweepRow& row : rows) {
        CHECK_FALSE(row.gamma.has_value());
        CHECK_FALSE(row.alpha_s.has_value());
        CHECK(row.error.empty());
    }

    const std::string csv = sweep_to_csv(rows);
    const auto parsed = parse_strict_csv(csv, sweep_csv_header());
    REQUIRE(parsed.size() == 4);
    for (const auto& fields : parsed) {
        CHECK(fields[1].empty());  // gamma
        CHECK(fields[2].empty());  // alpha_s
        CHECK(fields[3].empty());  // alpha_c
    }
}

TEST_CASE("a budget below one round reports the untrained accuracy", "[sweep]") {
    const DatasetBundle bundle = sweep_bundle();
    SweepSpec spec = base_sweep();
    spec.strategies = {Strategy::upload_all};
    spec.byte_budget = 1;
    const std::vector<SweepRow> rows = run_sweep(spec, bundle);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].rounds_within_budget == 0);

    const ExperimentConfig cfg = [&] {
        ExperimentConfig c = spec.base;
        c.strategy = Strategy::upload_all;
        c.seed = 1;
        return c;
    }();
    const ExperimentResult direct = run_experiment(cfg, bundle);
    CHECK(rows[0].accuracy_at_budget == direct.initial_accuracy);
}

TEST_CASE("failed cells become error rows and the sweep continues", "[sweep]") {
    const DatasetBundle bundle = sweep_bundle();
    SweepSpec spec = base_sweep();
    spec.gammas = {0, 1};  // gamma 0 violates the config contract
    const std::vector<SweepRow> rows = run_sweep(spec, bundle);
    REQUIRE(rows.size() == 2);
    CHECK_FALSE(rows[0].error.empty());
    CHECK(rows[0].error.find("gamma") != std::string::npos);
    CHECK(rows[1].error.empty());
}

TEST_CASE("sweep cells write their own metrics files", "[sweep]") {
    const DatasetBundle bundle = sweep_bundle();
    const SweepSpec spec = base_sweep();
    testutil::TempDir dir;
    const std::vector<SweepRow> rows = run_sweep(spec, bundle, dir.path());
    REQUIRE(rows.size() == 1);
    CHECK(std::filesystem::exists(dir.path() / "fedmfs_g1_as0.2_seed1" / "metrics.csv"));
}

TEST_CASE("sweep specs validate their alpha pairs", "[sweep]") {
    SweepSpec spec = base_sweep();
    spec.alpha_pairs = {{0.5, 0.6}};
    CHECK_THROWS_AS(validate_sweep_spec(spec), InvalidSpec);
    spec.alpha_pairs.clear();
    CHECK_THROWS_AS(validate_sweep_spec(spec), InvalidSpec);
}
