// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "dualproto/errors.hpp"
#include "dualproto/fisher.hpp"
#include "dualproto/random.hpp"
#include "dualproto/verify/oracles.hpp"

namespace dualproto {
namespace {

ClientModel make_model(std::size_t d_z, std::size_t classes, std::uint64_t seed) {
    ArchitectureSpec spec;
    spec.widths = {{6}};
    spec.input_dim = 3;
    spec.d_z = d_z;
    spec.num_classes = classes;
    return build_client_model(spec, 0, seed);
}

LabeledDataset random_data(std::size_t n, std::size_t classes, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n * 3);
    for (auto& v : x) v = rng.normal();
    std::vector<std::size_t> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = i % classes;
    return {Tensor::constant({n, 3}, x), y, classes};
}

Tensor shared_features(const ClientModel& m, const LabeledDataset& data) {
    Tape off(false);
    return m.shared_branch.forward(off, m.extract(off, data.features));
}

TEST(ChannelScores, DeadChannelScoresZero) {
    auto m = make_model(4, 3, 1);
    auto w = m.classifier.weight.mutable_values();
    for (std::size_t c = 0; c < 3; ++c) w[2 * 3 + c] = 0.0;
    const auto s = channel_scores(m, random_data(9, 3, 2));
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(s.row(c)[2], 0.0);
}

TEST(ChannelScores, TwoClassClosedForm) {
    const auto m = make_model(3, 2, 3);
    const auto data = random_data(1, 2, 4);
    const auto s = channel_scores(m, data);
    const Tensor z = shared_features(m, data);
    const auto W = m.classifier.weight.values();  // [d_z x C]
    double l[2];
    for (std::size_t c = 0; c < 2; ++c) {
        l[c] = m.classifier.bias[c];
        for (std::size_t j = 0; j < 3; ++j) l[c] += z[j] * W[j * 2 + c];
    }
    const double p_true = 1.0 / (1.0 + std::exp(l[1] - l[0]));
    for (std::size_t j = 0; j < 3; ++j) {
        const double g = (1 - p_true) * (W[j * 2 + 0] - W[j * 2 + 1]);
        EXPECT_NEAR(s.row(0)[j], g * g, 1e-14);
    }
    EXPECT_FALSE(s.present(1));
}

TEST(ChannelScores, MatchesFiniteDifferenceOracle) {
    const auto m = make_model(5, 4, 7);
    const auto data = random_data(13, 4, 8);
    const auto s = channel_scores(m, data, Branch::shared, 4);
    const Tensor z = shared_features(m, data);
    const auto want = verify::fisher_by_differences(z.values(), data.labels, 5, m.classifier.weight.values(),
                                                    m.classifier.bias.values(), 4, 1e-4);
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_TRUE(verify::agree(s.scores[i], want[i])) << i;
    EXPECT_EQ(s.sample_counts, (std::vector<std::size_t>{4, 3, 3, 3}));
}

TEST(ChannelScores, NonNegativeAndBatchIndependent) {
    const auto m = make_model(4, 3, 9);
    const auto data = random_data(20, 3, 10);
    const auto a = channel_scores(m, data, Branch::shared, 1);
    const auto b = channel_scores(m, data, Branch::shared, 256);
    for (std::size_t i = 0; i < a.scores.size(); ++i) {
        EXPECT_GE(a.scores[i], 0.0);
        EXPECT_NEAR(a.scores[i], b.scores[i], 1e-15 + 1e-12 * a.scores[i]);
    }
}

TEST(ChannelScores, ScaleCovariance) {
    auto m = make_model(3, 3, 11);
    const auto data = random_data(6, 3, 12);
    const auto before = channel_scores(m, data);
    // Scale channel 1's head weights and undo the change in logits through
    // the shared branch so log p is unchanged: gradients scale by a.
    const double a = 2.5;
    auto w = m.classifier.weight.mutable_values();
    for (std::size_t c = 0; c < 3; ++c) w[1 * 3 + c] *= a;
    auto ws = m.shared_branch.weight.mutable_values();
    for (std::size_t r = 0; r < m.shared_branch.in_dim(); ++r) ws[r * 3 + 1] /= a;
    m.shared_branch.bias.mutable_values()[1] /= a;
    const auto after = channel_scores(m, data);
    for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_NEAR(after.row(c)[1], a * a * before.row(c)[1], 1e-12 * (1 + before.row(c)[1]));
        EXPECT_NEAR(after.row(c)[0], before.row(c)[0], 1e-12 * (1 + before.row(c)[0]));
    }
}

TEST(ChannelScores, EmptyDatasetRejected) {
    const auto m = make_model(3, 2, 1);
    LabeledDataset empty{Tensor::zeros({0, 3}), {}, 2};
    EXPECT_THROW(channel_scores(m, empty), ConfigError);
}

}  // namespace
}  // namespace dualproto
