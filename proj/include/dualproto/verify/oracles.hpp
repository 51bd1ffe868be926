// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations used to check the library. Each one is written
// the slow, obvious way and shares no code path with what it checks.

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dualproto/client.hpp"
#include "dualproto/dataset.hpp"

namespace dualproto::verify {

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every i.
std::vector<double> central_differences(const std::function<double(std::span<const double>)>& f,
                                        std::span<const double> x, double h);

/// |a - b| <= max(rel * max(|a|, |b|), abs_floor).
bool agree(double a, double b, double rel = 1e-4, double abs_floor = 1e-6);

/// Largest k scores by a full stable sort on descending score.
std::vector<std::size_t> brute_topk(std::span<const double> scores, std::size_t k);

/// Channel-wise blend of one class row: top-k channels interpolate with
/// weight eta toward the local row, all others copy the global row.
std::vector<double> brute_fuse_row(std::span<const double> local, std::span<const double> global,
                                   std::span<const double> scores, double eta, std::size_t k);

/// Per-class mean over the uploads that cover the class.
std::vector<std::optional<std::vector<double>>> brute_class_means(std::span<const ClientUpload> uploads);

/// log softmax(z W + b)[y] for one feature row, W stored [d_z x C] row-major.
double log_prob(std::span<const double> z, std::span<const double> weight, std::span<const double> bias,
                std::size_t num_classes, std::size_t label);

/// Per-class squared gradient of log p(y | z) in each feature channel,
/// averaged over the class's samples and estimated by central differences.
/// `features` is [N x d_z]. Absent classes give zero rows.
std::vector<double> fisher_by_differences(std::span<const double> features, std::span<const std::size_t> labels,
                                          std::size_t d_z, std::span<const double> weight,
                                          std::span<const double> bias, std::size_t num_classes, double h);

/// Accuracy of a nearest class-mean classifier fit on `train` raw inputs.
double nearest_centroid_accuracy(const LabeledDataset& train, const LabeledDataset& test);

}  // namespace dualproto::verify
