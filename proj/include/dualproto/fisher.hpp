// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-class, per-channel empirical Fisher scores of branch features:
//   s[c][j] = (1/N_c) sum_{i : y_i = c} (d log p(y_i | x_i) / d z_ij)^2

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dualproto/dataset.hpp"
#include "dualproto/model.hpp"

namespace dualproto {

struct ImportanceScores {
    std::size_t num_classes = 0;
    std::size_t d_z = 0;
    std::vector<double> scores;              // [C x d_z], row-major
    std::vector<std::size_t> sample_counts;  // N_c; 0 marks an absent row

    ImportanceScores() = default;
    ImportanceScores(std::size_t classes, std::size_t width)
        : num_classes(classes), d_z(width), scores(classes * width, 0.0), sample_counts(classes, 0) {}

    bool present(std::size_t c) const { return c < num_classes && sample_counts[c] > 0; }
    std::span<const double> row(std::size_t c) const;
    std::vector<std::size_t> coverage() const;

    bool operator==(const ImportanceScores& other) const;
};

/// Runs the data through extractor, branch and head in index order. The
/// head is evaluated on a constant copy, so model parameters are only read.
ImportanceScores channel_scores(const ClientModel& model, const LabeledDataset& data,
                                Branch branch = Branch::shared, std::size_t batch_size = 256);

}  // namespace dualproto
