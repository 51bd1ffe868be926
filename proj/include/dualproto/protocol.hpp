// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// Server aggregation and round orchestration. Every exchange between a
// client and the server goes through the binary codec, in-process included.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dualproto/client.hpp"
#include "dualproto/codec.hpp"

namespace dualproto {

struct FusionConfig {
    double eta = 1.0;
    std::size_t k_top = 30;

    void validate(std::size_t d_z) const;
    bool operator==(const FusionConfig&) const = default;
};

/// p^c = mean of p_k^c over the uploads that cover c, unweighted, in upload
/// order. Classes nobody covers stay absent.
PrototypeSet average_global_prototypes(std::span<const ClientUpload> uploads);

/// Indices of the k_top largest scores, largest first; equal scores go to
/// the lower index.
std::vector<std::size_t> topk_channels(std::span<const double> scores_row, std::size_t k_top);

/// For classes the client holds: channels in its top-k_top set become
/// eta * local + (1 - eta) * global, the rest keep the global value.
/// Classes the client lacks get the global prototype unchanged.
PrototypeSet fuse_personalized_prototype(const PrototypeSet& local, const PrototypeSet& global,
                                         const ImportanceScores& scores, double eta, std::size_t k_top);

/// One participant: its model, data shards and last received prototypes.
class FederatedClient {
public:
    FederatedClient(ClientModel model, LabeledDataset train, LabeledDataset test, TrainOptions options);

    std::size_t id() const { return model_.client_id; }
    const ClientModel& model() const { return model_; }
    const LabeledDataset& train_shard() const { return train_; }
    const LabeledDataset& test_shard() const { return test_; }
    const TrainOptions& options() const { return options_; }
    const std::optional<PrototypeSet>& prototypes() const { return prototypes_; }
    /// Breakdown of the final local epoch of the most recent round trained.
    const std::optional<LossBreakdown>& last_loss() const { return last_loss_; }

    /// Local training followed by prototype and score computation; returns
    /// the encoded upload message.
    std::vector<std::uint8_t> run_local_round(std::uint32_t round);
    /// Accepts an encoded download addressed to this client.
    void receive(std::span<const std::uint8_t> message);

private:
    ClientModel model_;
    LabeledDataset train_;
    LabeledDataset test_;
    TrainOptions options_;
    std::optional<PrototypeSet> prototypes_;
    std::optional<LossBreakdown> last_loss_;
};

struct ServerState {
    std::uint32_t round = 0;
    PrototypeSet global;
    std::vector<std::optional<ClientUpload>> latest_uploads;
    FusionConfig fusion;
    /// When false, clients receive the plain global prototypes.
    bool personalize = true;
};

ServerState make_server_state(std::size_t num_clients, std::size_t num_classes, std::size_t d_z,
                              FusionConfig fusion, bool personalize);

struct RoundOutcome {
    std::uint32_t round = 0;
    std::vector<std::size_t> selected;
    bool empty = false;
};

/// One communication round. Each client joins with probability
/// `participation` (seeded per round). Selected clients train concurrently
/// on up to `workers` threads; the server aggregates after all have
/// finished, then sends each selected client its prototypes.
RoundOutcome run_round(ServerState& state, std::span<FederatedClient> clients, double participation,
                       std::uint64_t seed, std::size_t workers = 1);

}  // namespace dualproto
