// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// Client-side work for one round: local SGD on the combined objective,
// local prototypes, Fisher scores, upload packaging, prototype inference.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dualproto/dataset.hpp"
#include "dualproto/fisher.hpp"
#include "dualproto/model.hpp"
#include "dualproto/objectives.hpp"
#include "dualproto/prototypes.hpp"

namespace dualproto {

/// Which loss terms are active and which branch feeds prototypes and
/// inference. The default is the full dual-branch pipeline.
struct LossPlan {
    bool use_sce = true;
    bool use_dce = true;
    bool use_ls = true;
    bool use_ld = true;
    Branch prototype_branch = Branch::shared;
    Branch inference_branch = Branch::decision;
    bool normalize_inference = true;
};

struct TrainOptions {
    std::size_t epochs = 10;
    double lr = 0.01;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    LossConfig loss;
    LossPlan plan;
};

struct TrainResult {
    /// Sample-weighted mean breakdown per epoch.
    std::vector<LossBreakdown> epoch_log;
    std::size_t steps = 0;
};

/// p <- p - lr * grad for every tensor, then clears the gradients.
void sgd_step(std::span<Tensor> params, double lr);

/// Plain minibatch SGD. Each epoch reshuffles with a seed derived from
/// (seed, epoch); the last partial batch is kept. Without prototypes only
/// the cross-entropy terms train, and the decision loss also stays off
/// while the prototypes miss a class. Any non-finite value raises
/// TrainingError.
TrainResult local_train(ClientModel& model, const LabeledDataset& shard, const PrototypeSet* prototypes,
                        const TrainOptions& options);

/// Per-class mean of branch features over the shard, in index order.
PrototypeSet compute_local_prototypes(const ClientModel& model, const LabeledDataset& shard,
                                      Branch branch = Branch::shared);

struct ClientUpload {
    std::uint32_t client_id = 0;
    PrototypeSet prototypes;
    ImportanceScores scores;
    std::uint64_t n_k = 0;

    bool operator==(const ClientUpload& other) const = default;
};

/// Validates that prototype and score coverage agree.
ClientUpload assemble_upload(std::size_t client_id, PrototypeSet prototypes, ImportanceScores scores,
                             std::uint64_t n_k);

/// Index of the closest prototype; ties go to the lowest class index.
std::size_t nearest_prototype(std::span<const double> feature, const PrototypeSet& prototypes, bool normalize);

/// Prototype inference for one sample x [d_in].
std::size_t predict(const ClientModel& model, const Tensor& x, const PrototypeSet& prototypes,
                    Branch branch = Branch::decision, bool normalize = true);

std::vector<std::size_t> predict_batch(const ClientModel& model, const Tensor& batch, const PrototypeSet& prototypes,
                                       Branch branch = Branch::decision, bool normalize = true);

}  // namespace dualproto
