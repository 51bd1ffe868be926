// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// Labeled datasets, synthetic generation, CSV ingestion and the Dirichlet
// non-IID client split.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dualproto/tensor.hpp"

namespace dualproto {

struct LabeledDataset {
    Tensor features;  // [n x d_in], constant
    std::vector<std::size_t> labels;
    std::size_t num_classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t input_dim() const { return features.cols(); }
    /// Samples per class, length num_classes.
    std::vector<std::size_t> class_counts() const;
    /// Rows selected by index, in the given order.
    LabeledDataset subset(std::span<const std::size_t> indices) const;
};

struct PartitionPlan {
    std::vector<std::vector<std::size_t>> clients;  // sorted index lists
    double alpha = 0.0;
    std::uint64_t seed = 0;

    std::size_t num_clients() const { return clients.size(); }
};

/// Gaussian mixture: class c is centred at class_separation * u_c with unit
/// isotropic noise. u_c is e_c for c < d_in, -e_{c-d_in} for c < 2 d_in, and
/// a fixed pseudo-random unit vector beyond that.
LabeledDataset generate_synthetic(std::size_t num_classes, std::size_t per_class, std::size_t input_dim,
                                  double class_separation, std::uint64_t seed);

using LabelColumn = std::variant<std::string, std::size_t>;

/// Reads a comma-separated file. The first row is a header when the label
/// column is given by name, or when none of its feature cells parse as
/// numbers. String labels are numbered in order of first appearance;
/// all-integer labels keep their numeric order.
LabeledDataset ingest_csv(const std::filesystem::path& path, const LabelColumn& label_column);

/// Per-class Dirichlet split: each class draws q ~ Dir(alpha 1_K) and its
/// shuffled samples are dealt out by largest-remainder rounding (ties go to
/// the lower client index). Clients left empty take one sample from the
/// largest client until none is empty.
PartitionPlan dirichlet_partition(const LabeledDataset& data, std::size_t num_clients, double alpha,
                                  std::uint64_t seed);

struct ShardSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded split of one client's indices; both halves stay sorted. Shards of
/// two or more samples get at least one sample on each side.
ShardSplit split_shard(std::span<const std::size_t> indices, double test_fraction, std::uint64_t seed);

/// Shannon entropy (nats) of the label histogram restricted to `indices`.
double label_entropy(const LabeledDataset& data, std::span<const std::size_t> indices);

}  // namespace dualproto
