// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "dualproto/errors.hpp"
#include "dualproto/evaluation.hpp"

namespace dualproto {
namespace {

const std::filesystem::path kData = DUALPROTO_TEST_DATA_DIR;

RunConfig tiny_config() {
    ConfigSources src;
    src.use_environment = false;
    src.file = kData / "tiny_run.json";
    return parse_config(src);
}

std::string metrics_text(const RunMetrics& run) {
    std::ostringstream out;
    write_metrics_csv(run, out);
    return out.str();
}

TEST(WeightedObjective, Examples) {
    const std::vector<std::pair<std::uint64_t, double>> a = {{1, 0.4}, {3, 0.8}};
    EXPECT_NEAR(weighted_objective(a), 0.7, 1e-15);
    const std::vector<std::pair<std::uint64_t, double>> b = {{5, 0.2}, {5, 0.6}};
    EXPECT_NEAR(weighted_objective(b), 0.4, 1e-15);
    const std::vector<std::pair<std::uint64_t, double>> c = {{9, 1.25}};
    EXPECT_DOUBLE_EQ(weighted_objective(c), 1.25);
    EXPECT_THROW(weighted_objective({}), ProtocolError);
}

TEST(Summary, SampleStatistics) {
    const std::vector<double> v = {0.5, 0.7, 0.9};
    const Summary s = summarize(v);
    EXPECT_EQ(s.n, 3u);
    EXPECT_NEAR(s.mean, 0.7, 1e-15);
    EXPECT_NEAR(s.stddev, 0.2, 1e-15);
    EXPECT_EQ(s.min, 0.5);
    EXPECT_EQ(s.max, 0.9);
    const std::vector<double> one = {0.3};
    EXPECT_EQ(summarize(one).stddev, 0.0);
}

TEST(EvaluateClient, WellSeparatedIsPerfect) {
    ArchitectureSpec spec;
    spec.widths = {{2}};
    spec.activation = Activation::identity;
    spec.input_dim = 2;
    spec.d_z = 2;
    spec.num_classes = 2;
    ClientModel m = build_client_model(spec, 0, 0);
    for (Linear* l : {&m.extractor[0], &m.decision_branch}) {
        auto w = l->weight.mutable_values();
        w[0] = 1, w[1] = 0, w[2] = 0, w[3] = 1;
        for (double& b : l->bias.mutable_values()) b = 0;
    }
    const auto test = generate_synthetic(2, 20, 2, 100.0, 3);
    PrototypeSet right(PrototypeKind::personalized, 2, 2);
    right.set(0, {1, 0});
    right.set(1, {0, 1});
    EXPECT_DOUBLE_EQ(evaluate_client(m, test, right), 1.0);
    PrototypeSet swapped(PrototypeKind::personalized, 2, 2);
    swapped.set(0, {0, 1});
    swapped.set(1, {1, 0});
    EXPECT_LE(evaluate_client(m, test, swapped), 0.5);
}

TEST(EvaluateClient, EmptyTestSetRejected) {
    ArchitectureSpec spec;
    spec.widths = {{2}};
    spec.input_dim = 2;
    spec.d_z = 2;
    spec.num_classes = 2;
    const auto m = build_client_model(spec, 0, 0);
    PrototypeSet p(PrototypeKind::personalized, 2, 2);
    p.set(0, {1, 0});
    p.set(1, {0, 1});
    EXPECT_THROW(evaluate_client(m, LabeledDataset{Tensor::zeros({0, 2}), {}, 2}, p), ConfigError);
}

// Frozen from the first run of `dualproto run -c tests/data/tiny_run.json`.
TEST(Simulation, MatchesRecordedTrace) {
    const auto run = run_simulation(tiny_config(), Variant::full, 0);
    std::ifstream in(kData / "tiny_run_metrics.csv");
    std::stringstream want;
    want << in.rdbuf();
    EXPECT_EQ(metrics_text(run), want.str());
}

TEST(Simulation, NoHardEqualsFullWithoutMining) {
    RunConfig cfg = tiny_config();
    const auto no_hard = run_simulation(cfg, Variant::no_hard, 2);
    cfg.loss.hard_mining = false;
    const auto full = run_simulation(cfg, Variant::full, 2);
    EXPECT_EQ(metrics_text(no_hard), metrics_text(full));
}

TEST(Simulation, SeedsGiveIndependentTraces) {
    RunConfig cfg = tiny_config();
    const std::vector<std::uint64_t> seeds = {0, 1};
    const auto res = run_experiment(cfg, Variant::full, seeds);
    ASSERT_EQ(res.runs.size(), 2u);
    EXPECT_NE(metrics_text(res.runs[0]), metrics_text(res.runs[1]));
    EXPECT_GE(res.final_accuracy.mean, res.final_accuracy.min);
    EXPECT_LE(res.final_accuracy.mean, res.final_accuracy.max);
    EXPECT_EQ(metrics_text(res.runs[0]), metrics_text(run_simulation(cfg, Variant::full, 0)));
}

TEST(Simulation, WritesRunDirectory) {
    RunConfig cfg = tiny_config();
    cfg.training.rounds = 1;
    const std::vector<std::uint64_t> seeds = {4};
    const auto res = run_experiment(cfg, Variant::no_share, seeds);
    const auto dir = std::filesystem::temp_directory_path() / "dualproto_eval_out";
    std::filesystem::remove_all(dir);
    const auto written = write_experiment(dir, cfg, res);
    ASSERT_EQ(written.size(), 1u);
    EXPECT_EQ(written[0], dir / "no_share" / "seed_4");
    for (const char* f : {"metrics.csv", "rounds.csv", "timing.csv", "manifest.json"})
        EXPECT_TRUE(std::filesystem::exists(written[0] / f)) << f;
    std::filesystem::remove_all(dir);
}

TEST(Variants, WiringPerVariant) {
    const LossConfig base;
    const auto full = configure_variant(Variant::full, base, true);
    EXPECT_TRUE(full.plan.use_ld && full.plan.use_ls && full.personalize && full.loss.hard_mining);
    EXPECT_FALSE(configure_variant(Variant::no_hard, base, true).loss.hard_mining);
    EXPECT_FALSE(configure_variant(Variant::no_personalization, base, true).personalize);
    const auto l2 = configure_variant(Variant::l2_only_baseline, base, true);
    EXPECT_FALSE(l2.plan.use_ld || l2.plan.use_dce || l2.personalize);
    EXPECT_EQ(l2.plan.inference_branch, Branch::shared);
    const auto ns = configure_variant(Variant::no_share, base, true);
    EXPECT_FALSE(ns.plan.use_sce || ns.plan.use_ls);
    EXPECT_EQ(ns.plan.prototype_branch, Branch::decision);
}

}  // namespace
}  // namespace dualproto
