// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration. The tree is JSON; every key is optional and falls
// back to the built-in defaults. Layers apply in this order, later wins:
// defaults, named profile, config file, DUALPROTO_OUTPUT_DIR, --set flags.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dualproto/client.hpp"
#include "dualproto/dataset.hpp"
#include "dualproto/objectives.hpp"
#include "dualproto/protocol.hpp"

namespace dualproto {

enum class Variant { full, no_share, no_decision, no_hard, no_personalization, l2_only_baseline };

Variant parse_variant(const std::string& name);
std::string to_string(Variant v);
const std::vector<Variant>& all_variants();

struct DatasetConfig {
    std::string kind = "synthetic";  // synthetic | csv
    std::size_t num_classes = 10;
    std::size_t per_class = 200;
    std::size_t input_dim = 32;
    double separation = 3.0;
    std::uint64_t seed = 0;
    std::string csv_path;
    LabelColumn label_column = std::string("label");

    bool operator==(const DatasetConfig&) const = default;
};

struct PartitionConfig {
    std::size_t clients = 20;
    double alpha = 0.1;
    std::uint64_t seed = 0;
    double test_fraction = 0.2;

    bool operator==(const PartitionConfig&) const = default;
};

struct ModelConfig {
    std::vector<std::vector<std::size_t>> architectures = default_architecture_cycle();
    Activation activation = Activation::relu;
    std::size_t d_z = 512;
    bool separate_decision_head = false;

    bool operator==(const ModelConfig&) const = default;
};

struct TrainingConfig {
    std::size_t rounds = 100;
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double lr = 0.01;
    double participation = 1.0;

    bool operator==(const TrainingConfig&) const = default;
};

struct SweepConfig {
    std::vector<double> alphas = {0.05, 0.1, 0.5, 1.0, 5.0};
    std::vector<std::size_t> epochs = {1, 5, 10, 20};

    bool operator==(const SweepConfig&) const = default;
};

struct RunConfig {
    DatasetConfig dataset;
    PartitionConfig partition;
    ModelConfig model;
    TrainingConfig training;
    LossConfig loss;
    FusionConfig fusion;
    bool normalize_inference = true;
    Variant variant = Variant::full;
    std::vector<std::uint64_t> seeds = {0};
    std::string output_dir = "runs";
    std::size_t workers = 0;  // 0: one per hardware thread
    SweepConfig sweep;

    /// Throws ConfigError naming the offending key.
    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

/// Names accepted by `profile_tree`: "paper" (the defaults) and "desk".
nlohmann::json profile_tree(const std::string& name);

nlohmann::json to_json(const RunConfig& cfg);
/// Overlays `tree` on the defaults; unknown keys and bad types or ranges
/// raise ConfigError naming the key path.
RunConfig config_from_json(const nlohmann::json& tree);

struct ConfigSources {
    std::string profile = "paper";
    std::optional<std::filesystem::path> file;
    /// "dotted.key=value"; the value is read as JSON when it parses, else as a string.
    std::vector<std::string> overrides;
    bool use_environment = true;
};

RunConfig parse_config(const ConfigSources& sources);

/// Git-style object hash: SHA-1 over "blob <len>\0" followed by the
/// canonical (sorted-key, compact) JSON of the configuration.
std::string config_hash(const RunConfig& cfg);

/// Config echo, seed and hash.
nlohmann::json run_manifest(const RunConfig& cfg, std::uint64_t seed);

}  // namespace dualproto
