// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <vector>

#include <gtest/gtest.h>

#include "dualproto/codec.hpp"
#include "dualproto/errors.hpp"
#include "dualproto/protocol.hpp"
#include "dualproto/random.hpp"
#include "dualproto/verify/oracles.hpp"

namespace dualproto {
namespace {

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

ClientUpload upload(std::uint32_t id, std::size_t c, std::size_t d, Rng& rng, double drop = 0.0) {
    ClientUpload u;
    u.client_id = id;
    u.prototypes = PrototypeSet(PrototypeKind::local, c, d);
    u.scores = ImportanceScores(c, d);
    for (std::size_t k = 0; k < c; ++k) {
        if (rng.uniform() < drop) continue;
        std::vector<double> v(d);
        for (auto& x : v) x = rng.normal();
        u.prototypes.set(k, v);
        u.scores.sample_counts[k] = 1 + rng.below(9);
        u.n_k += u.scores.sample_counts[k];
        for (std::size_t j = 0; j < d; ++j) u.scores.scores[k * d + j] = rng.uniform();
    }
    return u;
}

TEST(Averaging, TwoPointMean) {
    std::vector<ClientUpload> ups(2);
    for (auto& u : ups) {
        u.prototypes = PrototypeSet(PrototypeKind::local, 1, 2);
        u.scores = ImportanceScores(1, 2);
        u.scores.sample_counts = {1};
    }
    ups[0].prototypes.set(0, {1, 0});
    ups[1].prototypes.set(0, {3, 2});
    const auto g = average_global_prototypes(ups);
    EXPECT_EQ(g.kind(), PrototypeKind::global);
    EXPECT_EQ(vec(g.at(0)), (std::vector<double>{2, 1}));
}

TEST(Averaging, SingleCoveringClientAndBruteForce) {
    Rng rng(1);
    std::vector<ClientUpload> ups;
    for (std::uint32_t k = 0; k < 5; ++k) ups.push_back(upload(k, 4, 6, rng, 0.4));
    const auto g = average_global_prototypes(ups);
    const auto want = verify::brute_class_means(ups);
    for (std::size_t c = 0; c < 4; ++c) {
        ASSERT_EQ(g.has(c), want[c].has_value());
        if (!g.has(c)) continue;
        for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(g.at(c)[j], (*want[c])[j], 1e-10);
    }
    const std::vector<ClientUpload> one = {ups[0]};
    const auto g1 = average_global_prototypes(one);
    for (std::size_t c : ups[0].prototypes.coverage()) EXPECT_EQ(vec(g1.at(c)), vec(ups[0].prototypes.at(c)));
}

TEST(Averaging, EmptyListRejected) {
    EXPECT_THROW(average_global_prototypes({}), ProtocolError);
}

TEST(TopK, Examples) {
    const std::vector<double> s = {0.5, 0.1, 0.9, 0.3};
    EXPECT_EQ(topk_channels(s, 2), (std::vector<std::size_t>{2, 0}));
    const std::vector<double> flat = {0.2, 0.2, 0.2};
    EXPECT_EQ(topk_channels(flat, 2), (std::vector<std::size_t>{0, 1}));
    EXPECT_THROW(topk_channels(s, 0), ConfigError);
    EXPECT_THROW(topk_channels(s, 5), ConfigError);
}

TEST(TopK, MatchesFullSort) {
    Rng rng(2);
    std::vector<double> s(64);
    for (auto& v : s) v = static_cast<double>(rng.below(20));
    for (std::size_t k : {1u, 7u, 30u, 64u}) EXPECT_EQ(topk_channels(s, k), verify::brute_topk(s, k));
}

struct FusionCase {
    PrototypeSet local{PrototypeKind::local, 1, 3};
    PrototypeSet global{PrototypeKind::global, 1, 3};
    ImportanceScores scores{1, 3};
    FusionCase() {
        local.set(0, {2, 7, -1});
        global.set(0, {4, 5, 1});
        scores.sample_counts = {3};
        scores.scores = {0.9, 0.1, 0.5};
    }
};

TEST(Fusion, EtaOneCopiesLocalOnTopChannels) {
    FusionCase f;
    const auto p = fuse_personalized_prototype(f.local, f.global, f.scores, 1.0, 2);
    EXPECT_EQ(p.kind(), PrototypeKind::personalized);
    EXPECT_EQ(vec(p.at(0)), (std::vector<double>{2, 5, -1}));
}

TEST(Fusion, HalfwayBlend) {
    FusionCase f;
    const auto p = fuse_personalized_prototype(f.local, f.global, f.scores, 0.5, 1);
    EXPECT_EQ(p.at(0)[0], 3.0);
    EXPECT_EQ(p.at(0)[1], 5.0);
}

TEST(Fusion, EtaZeroIsGlobal) {
    FusionCase f;
    EXPECT_EQ(vec(fuse_personalized_prototype(f.local, f.global, f.scores, 0.0, 3).at(0)), vec(f.global.at(0)));
}

TEST(Fusion, CoverageViolations) {
    FusionCase f;
    PrototypeSet empty_global(PrototypeKind::global, 1, 3);
    EXPECT_THROW(fuse_personalized_prototype(f.local, empty_global, f.scores, 1.0, 1), ProtocolError);
    ImportanceScores no_scores(1, 3);
    EXPECT_THROW(fuse_personalized_prototype(f.local, f.global, no_scores, 1.0, 1), ProtocolError);
}

TEST(Fusion, ClassesTheClientLacksGetGlobal) {
    PrototypeSet local(PrototypeKind::local, 2, 2), global(PrototypeKind::global, 2, 2);
    global.set(0, {1, 1});
    global.set(1, {2, 2});
    local.set(0, {0, 0});
    ImportanceScores s(2, 2);
    s.sample_counts = {1, 0};
    const auto p = fuse_personalized_prototype(local, global, s, 1.0, 2);
    EXPECT_EQ(vec(p.at(0)), (std::vector<double>{0, 0}));
    EXPECT_EQ(vec(p.at(1)), (std::vector<double>{2, 2}));
}

TEST(Codec, RoundTripIsBitExact) {
    Rng rng(3);
    const auto up = upload(7, 5, 4, rng, 0.3);
    const auto msg = make_upload_message(12, up);
    const auto bytes = encode(msg);
    EXPECT_EQ(decode(bytes), msg);
    EXPECT_EQ(encode(decode(bytes)), bytes);
    const auto down = make_download_message(3, 7, up.prototypes);
    EXPECT_EQ(decode(encode(down)), down);
}

TEST(Codec, CorruptMagicAtOffsetZero) {
    Rng rng(4);
    auto bytes = encode(make_upload_message(0, upload(1, 3, 2, rng)));
    bytes[0] ^= 0xFF;
    try {
        decode(bytes);
        FAIL() << "expected CodecError";
    } catch (const CodecError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }
}

TEST(Codec, VersionMismatch) {
    Rng rng(5);
    auto bytes = encode(make_upload_message(0, upload(1, 3, 2, rng)));
    bytes[4] = 9;
    try {
        decode(bytes);
        FAIL() << "expected CodecError";
    } catch (const CodecError& e) {
        EXPECT_EQ(e.offset(), 4u);
    }
}

TEST(Codec, TruncationNamesSection) {
    Rng rng(6);
    const auto bytes = encode(make_upload_message(0, upload(1, 3, 4, rng)));
    // Header 19, client section 9+4, prototype section header 9 and its
    // kind/C/d_z/bitmap fields 10: cut inside the first prototype row.
    const std::size_t cut = 19 + 13 + 9 + 10 + 12;
    try {
        decode(std::span(bytes.data(), cut));
        FAIL() << "expected CodecError";
    } catch (const CodecError& e) {
        EXPECT_EQ(e.section(), "prototypes");
    }
    EXPECT_THROW(decode(std::span(bytes.data(), 10)), CodecError);
}

ArchitectureSpec tiny_spec() {
    ArchitectureSpec s;
    s.widths = {{6}, {5, 4}, {7}};
    s.input_dim = 3;
    s.d_z = 4;
    s.num_classes = 3;
    return s;
}

std::vector<FederatedClient> make_clients(std::size_t k, std::uint64_t seed) {
    const auto data = generate_synthetic(3, 12, 3, 2.0, seed);
    const auto plan = dirichlet_partition(data, k, 1.0, seed);
    std::vector<FederatedClient> out;
    for (std::size_t i = 0; i < k; ++i) {
        TrainOptions opt;
        opt.epochs = 1;
        opt.batch_size = 8;
        opt.seed = seed + i;
        const auto shard = data.subset(plan.clients[i]);
        out.emplace_back(build_client_model(tiny_spec(), i, seed), shard, shard, opt);
    }
    return out;
}

TEST(RunRound, FullParticipationProcessesEveryUpload) {
    auto clients = make_clients(3, 1);
    auto state = make_server_state(3, 3, 4, FusionConfig{1.0, 2}, true);
    const auto out = run_round(state, clients, 1.0, 0);
    EXPECT_EQ(out.selected, (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_FALSE(out.empty);
    EXPECT_EQ(state.round, 1u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_TRUE(state.latest_uploads[k].has_value());
        EXPECT_TRUE(clients[k].prototypes().has_value());
    }
}

TEST(RunRound, SingleClientReceivesItsOwnLocals) {
    auto clients = make_clients(2, 2);
    std::vector<FederatedClient> one;
    one.push_back(std::move(clients[0]));
    auto state = make_server_state(1, 3, 4, FusionConfig{1.0, 4}, true);
    run_round(state, one, 1.0, 0);
    const auto& up = *state.latest_uploads[0];
    const auto& got = *one[0].prototypes();
    for (std::size_t c : up.prototypes.coverage()) EXPECT_EQ(vec(got.at(c)), vec(up.prototypes.at(c)));
}

TEST(RunRound, EmptyRoundCarriesPrototypesOver) {
    auto clients = make_clients(3, 3);
    auto state = make_server_state(3, 3, 4, FusionConfig{1.0, 2}, true);
    run_round(state, clients, 1.0, 0);
    const PrototypeSet before = state.global;
    // With participation 0.001 an empty round turns up within a few seeds.
    RoundOutcome out;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        out = run_round(state, clients, 0.001, seed);
        if (out.empty) break;
    }
    ASSERT_TRUE(out.empty);
    EXPECT_TRUE(out.selected.empty());
    EXPECT_EQ(state.round, out.round + 1);
    EXPECT_EQ(state.global, before);
}

TEST(RunRound, ReplayAndWorkerCountGiveSameState) {
    auto a = make_clients(3, 4);
    auto b = make_clients(3, 4);
    auto sa = make_server_state(3, 3, 4, FusionConfig{1.0, 2}, true);
    auto sb = make_server_state(3, 3, 4, FusionConfig{1.0, 2}, true);
    for (int r = 0; r < 2; ++r) {
        run_round(sa, a, 0.7, 11, 1);
        run_round(sb, b, 0.7, 11, 3);
    }
    EXPECT_EQ(sa.global, sb.global);
    EXPECT_EQ(sa.latest_uploads, sb.latest_uploads);
}

TEST(Receive, WrongAddresseeRejected) {
    auto clients = make_clients(2, 5);
    PrototypeSet p(PrototypeKind::global, 3, 4);
    p.set(0, {1, 2, 3, 4});
    EXPECT_THROW(clients[0].receive(encode(make_download_message(0, 1, p))), ProtocolError);
    PrototypeSet wrong(PrototypeKind::global, 3, 5);
    EXPECT_THROW(clients[0].receive(encode(make_download_message(0, 0, wrong))), ProtocolError);
}

}  // namespace
}  // namespace dualproto
