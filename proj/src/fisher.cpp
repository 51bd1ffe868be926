// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include "dualproto/fisher.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "dualproto/errors.hpp"

namespace dualproto {

std::span<const double> ImportanceScores::row(std::size_t c) const {
    if (!present(c)) throw ProtocolError("no importance scores for class " + std::to_string(c));
    return std::span<const double>(scores).subspan(c * d_z, d_z);
}

std::vector<std::size_t> ImportanceScores::coverage() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < num_classes; ++c)
        if (sample_counts[c] > 0) out.push_back(c);
    return out;
}

bool ImportanceScores::operator==(const ImportanceScores& other) const {
    return num_classes == other.num_classes && d_z == other.d_z && sample_counts == other.sample_counts &&
           scores.size() == other.scores.size() &&
           std::memcmp(scores.data(), other.scores.data(), scores.size() * sizeof(double)) == 0;
}

ImportanceScores channel_scores(const ClientModel& model, const LabeledDataset& data, Branch branch,
                                std::size_t batch_size) {
    if (data.size() == 0) throw ConfigError("channel_scores: empty dataset");
    if (data.input_dim() != model.input_dim()) {
        throw DimensionError("channel_scores: data width " + std::to_string(data.input_dim()) + " vs model input " +
                             std::to_string(model.input_dim()));
    }
    if (batch_size == 0) batch_size = data.size();

    const std::size_t d = model.d_z();
    ImportanceScores out(model.num_classes(), d);
    const Linear& head = model.head_for(branch);
    const Linear frozen{Tensor::constant(head.weight.shape(), {head.weight.values().begin(), head.weight.values().end()}),
                        Tensor::constant(head.bias.shape(), {head.bias.values().begin(), head.bias.values().end()})};
    const Linear& projector = branch == Branch::shared ? model.shared_branch : model.decision_branch;

    std::vector<std::size_t> idx(batch_size);
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, data.size() - start);
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), start);
        LabeledDataset batch = data.subset(idx);

        Tape no_grad(false);
        Tensor z_const = projector.forward(no_grad, model.extract(no_grad, batch.features));
        Tensor z = Tensor::variable(z_const.shape(), {z_const.values().begin(), z_const.values().end()});

        // Each row's log-probability depends only on its own z row, so one
        // sweep of the summed objective yields every per-sample gradient.
        Tape tape;
        Tensor objective = sum(tape, log_softmax_pick_rows(tape, frozen.forward(tape, z), batch.labels));
        tape.backward(objective);
        const auto g = z.grad();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = batch.labels[i];
            ++out.sample_counts[c];
            for (std::size_t j = 0; j < d; ++j) out.scores[c * d + j] += g[i * d + j] * g[i * d + j];
        }
    }
    for (std::size_t c = 0; c < out.num_classes; ++c) {
        if (out.sample_counts[c] == 0) continue;
        const double count = static_cast<double>(out.sample_counts[c]);
        for (std::size_t j = 0; j < d; ++j) out.scores[c * d + j] /= count;
    }
    return out;
}

}  // namespace dualproto
