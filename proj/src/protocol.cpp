// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include "dualproto/protocol.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "dualproto/errors.hpp"
#include "dualproto/parallel.hpp"
#include "dualproto/random.hpp"

namespace dualproto {

void FusionConfig::validate(std::size_t d_z) const {
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("fusion.eta must lie in [0, 1]");
    if (k_top < 1 || k_top > d_z) {
        throw ConfigError("fusion.k_top must lie in [1, d_z=" + std::to_string(d_z) + "], got " +
                          std::to_string(k_top));
    }
}

PrototypeSet average_global_prototypes(std::span<const ClientUpload> uploads) {
    if (uploads.empty()) throw ProtocolError("cannot aggregate an empty set of uploads");
    const std::size_t c = uploads.front().prototypes.num_classes();
    const std::size_t d = uploads.front().prototypes.d_z();
    for (const auto& up : uploads) {
        if (up.prototypes.num_classes() != c || up.prototypes.d_z() != d) {
            throw ProtocolError("client " + std::to_string(up.client_id) + " uploaded prototypes of a different shape");
        }
    }
    PrototypeSet global(PrototypeKind::global, c, d);
    for (std::size_t cls = 0; cls < c; ++cls) {
        std::vector<double> sum(d, 0.0);
        std::size_t holders = 0;
        for (const auto& up : uploads) {
            if (!up.prototypes.has(cls)) continue;
            const auto p = up.prototypes.at(cls);
            for (std::size_t j = 0; j < d; ++j) sum[j] += p[j];
            ++holders;
        }
        if (holders == 0) continue;
        for (double& v : sum) v /= static_cast<double>(holders);
        global.set(cls, std::move(sum));
    }
    return global;
}

std::vector<std::size_t> topk_channels(std::span<const double> scores_row, std::size_t k_top) {
    if (k_top < 1 || k_top > scores_row.size()) {
        throw ConfigError("k_top must lie in [1, " + std::to_string(scores_row.size()) + "], got " +
                          std::to_string(k_top));
    }
    std::vector<std::size_t> idx(scores_row.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k_top), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (scores_row[a] != scores_row[b]) return scores_row[a] > scores_row[b];
                          return a < b;
                      });
    idx.resize(k_top);
    return idx;
}

PrototypeSet fuse_personalized_prototype(const PrototypeSet& local, const PrototypeSet& global,
                                         const ImportanceScores& scores, double eta, std::size_t k_top) {
    const std::size_t c = global.num_classes();
    const std::size_t d = global.d_z();
    if (local.num_classes() != c || local.d_z() != d || scores.num_classes != c || scores.d_z != d) {
        throw DimensionError("fusion inputs disagree on class count or width");
    }
    FusionConfig{eta, k_top}.validate(d);

    PrototypeSet out(PrototypeKind::personalized, c, d);
    for (std::size_t cls = 0; cls < c; ++cls) {
        if (!global.has(cls)) {
            if (local.has(cls)) throw ProtocolError("local class " + std::to_string(cls) + " missing from global set");
            continue;
        }
        const auto g = global.at(cls);
        std::vector<double> fused(g.begin(), g.end());
        if (local.has(cls)) {
            if (!scores.present(cls)) {
                throw ProtocolError("no importance scores for local class " + std::to_string(cls));
            }
            const auto l = local.at(cls);
            for (std::size_t j : topk_channels(scores.row(cls), k_top)) fused[j] = eta * l[j] + (1.0 - eta) * g[j];
        }
        out.set(cls, std::move(fused));
    }
    return out;
}

FederatedClient::FederatedClient(ClientModel model, LabeledDataset train, LabeledDataset test, TrainOptions options)
    : model_(std::move(model)), train_(std::move(train)), test_(std::move(test)), options_(std::move(options)) {
    if (train_.size() == 0) throw ConfigError("client " + std::to_string(model_.client_id) + " has no training data");
}

std::vector<std::uint8_t> FederatedClient::run_local_round(std::uint32_t round) {
    TrainOptions opts = options_;
    opts.seed = derive_seed({options_.seed, round});
    const PrototypeSet* protos = prototypes_ ? &*prototypes_ : nullptr;
    TrainResult result = local_train(model_, train_, protos, opts);
    if (!result.epoch_log.empty()) last_loss_ = result.epoch_log.back();

    const Branch branch = options_.plan.prototype_branch;
    PrototypeSet local = compute_local_prototypes(model_, train_, branch);
    ImportanceScores scores = channel_scores(model_, train_, branch);
    ClientUpload up = assemble_upload(model_.client_id, std::move(local), std::move(scores), train_.size());
    return encode(make_upload_message(round, std::move(up)));
}

void FederatedClient::receive(std::span<const std::uint8_t> message) {
    RoundMessage msg = decode(message);
    if (msg.direction != Direction::download) throw ProtocolError("client received a non-download message");
    auto& down = std::get<PrototypeDownload>(msg.payload);
    if (down.client_id != model_.client_id) {
        throw ProtocolError("download for client " + std::to_string(down.client_id) + " delivered to client " +
                            std::to_string(model_.client_id));
    }
    if (down.prototypes.d_z() != model_.d_z() || down.prototypes.num_classes() != model_.num_classes()) {
        throw ProtocolError("downloaded prototypes do not match the model shape");
    }
    prototypes_ = std::move(down.prototypes);
}

ServerState make_server_state(std::size_t num_clients, std::size_t num_classes, std::size_t d_z,
                              FusionConfig fusion, bool personalize) {
    fusion.validate(d_z);
    ServerState s;
    s.global = PrototypeSet(PrototypeKind::global, num_classes, d_z);
    s.latest_uploads.resize(num_clients);
    s.fusion = fusion;
    s.personalize = personalize;
    return s;
}

RoundOutcome run_round(ServerState& state, std::span<FederatedClient> clients, double participation,
                       std::uint64_t seed, std::size_t workers) {
    if (!(participation > 0.0 && participation <= 1.0)) throw ConfigError("participation must lie in (0, 1]");
    if (clients.size() != state.latest_uploads.size()) throw ContractError("server state sized for other clients");

    RoundOutcome outcome;
    outcome.round = state.round;
    Rng pick(derive_seed({seed, state.round, 0x5E1EC7ULL}));
    for (std::size_t k = 0; k < clients.size(); ++k)
        if (pick.uniform() < participation) outcome.selected.push_back(k);

    if (outcome.selected.empty()) {
        // Nobody joined: the previous global prototypes carry over.
        outcome.empty = true;
        ++state.round;
        return outcome;
    }

    const std::uint32_t round = state.round;
    std::vector<std::vector<std::uint8_t>> wire(outcome.selected.size());
    parallel_for(outcome.selected.size(), workers,
                 [&](std::size_t i) { wire[i] = clients[outcome.selected[i]].run_local_round(round); });

    std::vector<ClientUpload> uploads;
    uploads.reserve(wire.size());
    for (std::size_t i = 0; i < wire.size(); ++i) {
        RoundMessage msg = decode(wire[i]);
        if (msg.direction != Direction::upload || msg.round != round) {
            throw ProtocolError("unexpected message from client " + std::to_string(outcome.selected[i]));
        }
        auto& up = std::get<ClientUpload>(msg.payload);
        if (up.client_id != clients[outcome.selected[i]].id()) throw ProtocolError("upload carries wrong client id");
        uploads.push_back(
            assemble_upload(up.client_id, std::move(up.prototypes), std::move(up.scores), up.n_k));
    }

    state.global = average_global_prototypes(uploads);
    for (std::size_t i = 0; i < uploads.size(); ++i) {
        const auto& up = uploads[i];
        PrototypeSet out = state.personalize ? fuse_personalized_prototype(up.prototypes, state.global, up.scores,
                                                                           state.fusion.eta, state.fusion.k_top)
                                             : state.global;
        clients[outcome.selected[i]].receive(encode(make_download_message(round, up.client_id, std::move(out))));
        state.latest_uploads[outcome.selected[i]] = up;
    }
    ++state.round;
    return outcome;
}

}  // namespace dualproto
