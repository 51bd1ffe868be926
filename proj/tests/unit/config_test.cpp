// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "dualproto/config.hpp"
#include "dualproto/errors.hpp"

namespace dualproto {
namespace {

std::string error_of(const ConfigSources& src) {
    try {
        parse_config(src);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream(path) << body;
    return path;
}

TEST(Config, EmptySourcesGiveBuiltInDefaults) {
    ConfigSources src;
    src.use_environment = false;
    const RunConfig c = parse_config(src);
    EXPECT_EQ(c, RunConfig{});
    EXPECT_EQ(c.partition.clients, 20u);
    EXPECT_EQ(c.training.rounds, 100u);
    EXPECT_EQ(c.training.epochs, 10u);
    EXPECT_EQ(c.training.batch_size, 32u);
    EXPECT_DOUBLE_EQ(c.training.lr, 0.01);
    EXPECT_DOUBLE_EQ(c.loss.tau, 0.07);
    EXPECT_DOUBLE_EQ(c.loss.lambda1, 1.0);
    EXPECT_DOUBLE_EQ(c.loss.lambda2, 10.0);
    EXPECT_DOUBLE_EQ(c.loss.lambda3, 1.0);
    EXPECT_DOUBLE_EQ(c.fusion.eta, 1.0);
    EXPECT_EQ(c.fusion.k_top, 30u);
    EXPECT_EQ(c.model.d_z, 512u);
    EXPECT_DOUBLE_EQ(c.partition.alpha, 0.1);
    EXPECT_EQ(c.model.architectures.size(), 8u);
}

TEST(Config, TopKBeyondWidthNamesKey) {
    ConfigSources src;
    src.use_environment = false;
    src.overrides = {"fusion.k_top=600"};
    EXPECT_NE(error_of(src).find("fusion.k_top"), std::string::npos);
}

TEST(Config, FlagOverridesFile) {
    const auto path = write_temp("dualproto_cfg_alpha.json", R"({"partition": {"alpha": 0.5, "clients": 4}})");
    ConfigSources src;
    src.use_environment = false;
    src.file = path;
    EXPECT_DOUBLE_EQ(parse_config(src).partition.alpha, 0.5);
    EXPECT_EQ(parse_config(src).partition.clients, 4u);
    src.overrides = {"partition.alpha=0.05"};
    EXPECT_DOUBLE_EQ(parse_config(src).partition.alpha, 0.05);
    std::filesystem::remove(path);
}

TEST(Config, EnvironmentSitsBetweenFileAndFlags) {
    const auto path = write_temp("dualproto_cfg_out.json", R"({"output_dir": "from_file"})");
    ConfigSources src;
    src.file = path;
    ::setenv("DUALPROTO_OUTPUT_DIR", "from_env", 1);
    EXPECT_EQ(parse_config(src).output_dir, "from_env");
    src.overrides = {"output_dir=from_flag"};
    EXPECT_EQ(parse_config(src).output_dir, "from_flag");
    src.use_environment = false;
    src.overrides.clear();
    EXPECT_EQ(parse_config(src).output_dir, "from_file");
    ::unsetenv("DUALPROTO_OUTPUT_DIR");
    std::filesystem::remove(path);
}

TEST(Config, UnknownKeysAndBadValuesNamed) {
    ConfigSources src;
    src.use_environment = false;
    src.overrides = {"loss.temperature=0.1"};
    EXPECT_NE(error_of(src).find("loss.temperature"), std::string::npos);
    src.overrides = {"loss.tau=0"};
    EXPECT_NE(error_of(src).find("loss.tau"), std::string::npos);
    src.overrides = {"training.epochs=\"ten\""};
    EXPECT_NE(error_of(src).find("training.epochs"), std::string::npos);
    src.overrides = {"variant=everything"};
    EXPECT_FALSE(error_of(src).empty());
    src.overrides = {"fusion.eta=1.5"};
    EXPECT_NE(error_of(src).find("fusion.eta"), std::string::npos);
}

TEST(Config, DeskProfile) {
    ConfigSources src;
    src.use_environment = false;
    src.profile = "desk";
    const RunConfig c = parse_config(src);
    EXPECT_EQ(c.partition.clients, 8u);
    EXPECT_EQ(c.model.d_z, 32u);
    EXPECT_EQ(c.training.rounds, 30u);
    EXPECT_EQ(c.fusion.k_top, 2u);
    EXPECT_DOUBLE_EQ(c.loss.tau, 0.07);
    src.profile = "laptop";
    EXPECT_THROW(parse_config(src), ConfigError);
}

TEST(Config, StringValuedOverride) {
    ConfigSources src;
    src.use_environment = false;
    src.overrides = {"loss.l_d_form=log_form", "variant=no_hard", "seeds=[1,2,3]"};
    const RunConfig c = parse_config(src);
    EXPECT_EQ(c.loss.l_d_form, DecisionLossForm::log_form);
    EXPECT_EQ(c.variant, Variant::no_hard);
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
}

TEST(Config, ManifestRoundTrips) {
    ConfigSources src;
    src.use_environment = false;
    src.profile = "desk";
    src.overrides = {"partition.alpha=0.5", "loss.hard_mining=false"};
    const RunConfig c = parse_config(src);
    const auto manifest = run_manifest(c, 3);
    EXPECT_EQ(manifest.at("seed"), 3);
    const RunConfig back = config_from_json(nlohmann::json::parse(manifest.dump()).at("config"));
    EXPECT_EQ(back, c);
    EXPECT_EQ(manifest.at("config_hash"), config_hash(back));
}

TEST(Config, HashIsGitBlobSha1) {
    // Frozen from `git hash-object --stdin` over to_json(RunConfig{}).dump().
    EXPECT_EQ(config_hash(RunConfig{}), "cdefd40c15a676c671031001d0751ec075198764");
    RunConfig other;
    other.training.lr = 0.02;
    EXPECT_NE(config_hash(other), config_hash(RunConfig{}));
}

TEST(Variants, SixNamesRoundTrip) {
    EXPECT_EQ(all_variants().size(), 6u);
    for (Variant v : all_variants()) EXPECT_EQ(parse_variant(to_string(v)), v);
    EXPECT_THROW(parse_variant("fedproto"), ConfigError);
}

}  // namespace
}  // namespace dualproto
