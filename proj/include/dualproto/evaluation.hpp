// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "dualproto/config.hpp"

namespace dualproto {

/// How a variant wires the loss terms, branches and server fusion.
struct VariantSetup {
    LossPlan plan;
    LossConfig loss;
    bool personalize = true;
};

VariantSetup configure_variant(Variant variant, const LossConfig& base, bool normalize_inference);

/// sum_k (n_k / N) F_k over (n_k, F_k) pairs.
double weighted_objective(std::span<const std::pair<std::uint64_t, double>> per_client);

/// Fraction of the shard predicted correctly by nearest prototype.
double evaluate_client(const ClientModel& model, const LabeledDataset& test, const PrototypeSet& prototypes,
                       Branch branch = Branch::decision, bool normalize = true);

struct ClientRoundRecord {
    std::size_t client = 0;
    bool trained = false;
    /// Absent while the client has no prototype for some class.
    std::optional<double> accuracy;
    std::optional<LossBreakdown> loss;
};

struct RoundRecord {
    std::size_t round = 0;
    bool empty = false;
    std::vector<ClientRoundRecord> clients;
    /// Unweighted mean over clients with an accuracy; absent if none has one.
    std::optional<double> average_accuracy;
    /// Mean breakdown over the clients that trained this round.
    LossBreakdown mean_loss;
    /// Sample-weighted mean total loss over the clients that trained.
    std::optional<double> weighted_loss;
    double wall_seconds = 0.0;
};

struct RunMetrics {
    Variant variant = Variant::full;
    std::uint64_t seed = 0;
    std::vector<RoundRecord> rounds;

    /// Average accuracy of the last round that has one (0 if none does).
    double final_average_accuracy() const;
};

struct Summary {
    std::size_t n = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation, 0 for n < 2
    double min = 0.0;
    double max = 0.0;
};

Summary summarize(std::span<const double> values);

/// One federated run. The run seed offsets the dataset and partition seeds
/// and derives model initialisation, local shuffling and client selection.
RunMetrics run_simulation(const RunConfig& config, Variant variant, std::uint64_t seed);

struct ExperimentResult {
    Variant variant = Variant::full;
    std::vector<RunMetrics> runs;
    Summary final_accuracy;
};

/// Runs every seed (in parallel up to config.workers) and summarises the
/// final average accuracy.
ExperimentResult run_experiment(const RunConfig& config, Variant variant, std::span<const std::uint64_t> seeds);

/// One row per round per client.
void write_metrics_csv(const RunMetrics& run, std::ostream& out);
/// One row per round: average accuracy and mean loss terms.
void write_rounds_csv(const RunMetrics& run, std::ostream& out);
/// Wall-clock seconds per round, kept apart so the metric files replay exactly.
void write_timing_csv(const RunMetrics& run, std::ostream& out);
/// One row per experiment.
void write_summary_csv(std::span<const ExperimentResult> results, std::ostream& out);

/// Writes metrics, rounds, timing and manifest files for each seed under
/// `dir/<variant>/seed_<s>/` and returns the run directories.
std::vector<std::filesystem::path> write_experiment(const std::filesystem::path& dir, const RunConfig& config,
                                                    const ExperimentResult& result);

}  // namespace dualproto
