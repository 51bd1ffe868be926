// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dualproto/errors.hpp"
#include "dualproto/model.hpp"
#include "dualproto/random.hpp"
#include "dualproto/verify/oracles.hpp"

namespace dualproto {
namespace {

ArchitectureSpec small_spec() {
    ArchitectureSpec spec;
    spec.widths = {{16}, {32, 32}};
    spec.input_dim = 5;
    spec.d_z = 4;
    spec.num_classes = 3;
    return spec;
}

Tensor random_batch(std::size_t b, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(b * d);
    for (auto& x : v) x = rng.normal();
    return Tensor::constant({b, d}, v);
}

bool same_values(const Tensor& a, const Tensor& b) {
    return a.size() == b.size() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

TEST(BuildModel, WidthListsGiveDifferentParameterCounts) {
    const auto spec = small_spec();
    EXPECT_NE(build_client_model(spec, 0, 1).parameter_count(), build_client_model(spec, 1, 1).parameter_count());
}

TEST(BuildModel, DeterministicPerSeedAndClient) {
    const auto spec = small_spec();
    const auto a = build_client_model(spec, 1, 9).parameters();
    const auto b = build_client_model(spec, 1, 9).parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(same_values(a[i], b[i]));
    EXPECT_FALSE(same_values(a.front(), build_client_model(spec, 1, 10).parameters().front()));
}

TEST(BuildModel, InitialisationWithinFanInBound) {
    const auto m = build_client_model(small_spec(), 0, 4);
    for (const Linear* layer : {&m.extractor.front(), &m.shared_branch, &m.classifier}) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer->in_dim()));
        for (double w : layer->weight.values()) EXPECT_LE(std::abs(w), bound);
        for (double w : layer->bias.values()) EXPECT_LE(std::abs(w), bound);
    }
}

TEST(BuildModel, ArchitecturesCycleOverClients) {
    ArchitectureSpec spec = small_spec();
    spec.widths = default_architecture_cycle();
    ASSERT_EQ(spec.widths.size(), 8u);
    for (std::size_t k = 0; k < 20; ++k) EXPECT_EQ(spec.widths_for(k), spec.widths[k % 8]);
    const auto m = build_client_model(spec, 11, 0);
    ASSERT_EQ(m.extractor.size(), spec.widths[3].size());
    for (std::size_t l = 0; l < m.extractor.size(); ++l) EXPECT_EQ(m.extractor[l].out_dim(), spec.widths[3][l]);
}

TEST(BuildModel, InvalidSpecRejected) {
    ArchitectureSpec spec = small_spec();
    spec.widths = {{}};
    EXPECT_THROW(build_client_model(spec, 0, 0), ConfigError);
    spec = small_spec();
    spec.widths = {{4, 0}};
    EXPECT_THROW(build_client_model(spec, 0, 0), ConfigError);
    spec = small_spec();
    spec.d_z = 0;
    EXPECT_THROW(build_client_model(spec, 0, 0), ConfigError);
}

TEST(ForwardDual, ZeroWeightsGiveZeroOutputs) {
    auto m = build_client_model(small_spec(), 0, 0);
    for (Tensor& p : m.parameters()) std::fill(p.mutable_values().begin(), p.mutable_values().end(), 0.0);
    Tape tape;
    const auto out = forward_dual(m, random_batch(1, 5, 2), tape);
    for (const Tensor* t : {&out.z_s, &out.z_d, &out.logits_s, &out.logits_d})
        for (double v : t->values()) EXPECT_EQ(v, 0.0);
}

TEST(ForwardDual, ShapesAndIndependentBranches) {
    const auto m = build_client_model(small_spec(), 1, 3);
    Tape tape;
    const auto out = forward_dual(m, random_batch(6, 5, 2), tape);
    EXPECT_EQ(out.z_s.shape(), (Shape{6, 4}));
    EXPECT_EQ(out.z_d.shape(), (Shape{6, 4}));
    EXPECT_EQ(out.logits_s.shape(), (Shape{6, 3}));
    EXPECT_FALSE(same_values(out.z_s, out.z_d));
}

TEST(ForwardDual, PerturbingOneBranchLeavesTheOther) {
    auto m = build_client_model(small_spec(), 0, 3);
    const Tensor x = random_batch(3, 5, 8);
    Tape t1(false);
    const auto before = forward_dual(m, x, t1);
    m.decision_branch.weight.mutable_values()[0] += 0.5;
    Tape t2(false);
    const auto after = forward_dual(m, x, t2);
    EXPECT_TRUE(same_values(before.z_s, after.z_s));
    EXPECT_FALSE(same_values(before.z_d, after.z_d));
}

TEST(ForwardDual, PureAcrossCalls) {
    const auto m = build_client_model(small_spec(), 1, 5);
    const Tensor x = random_batch(4, 5, 1);
    Tape a(false), b(false);
    EXPECT_TRUE(same_values(forward_dual(m, x, a).logits_d, forward_dual(m, x, b).logits_d));
}

TEST(ForwardDual, WrongInputWidth) {
    const auto m = build_client_model(small_spec(), 0, 0);
    Tape tape;
    EXPECT_THROW(forward_dual(m, random_batch(2, 4, 0), tape), DimensionError);
}

TEST(ForwardDual, ExtractorGradientMatchesDifferences) {
    auto m = build_client_model(small_spec(), 0, 21);
    const Tensor x = random_batch(3, 5, 6);
    Tape tape;
    tape.backward(sum(tape, forward_dual(m, x, tape).logits_s));
    Tensor w = m.extractor.front().weight;
    const std::vector<double> w0(w.values().begin(), w.values().end());
    const std::vector<double> got(w.grad().begin(), w.grad().end());
    const auto fd = verify::central_differences(
        [&](std::span<const double> p) {
            std::copy(p.begin(), p.end(), w.mutable_values().begin());
            Tape off(false);
            const DualOutput out = forward_dual(m, x, off);
            double s = 0;
            for (double v : out.logits_s.values()) s += v;
            return s;
        },
        w0, 1e-6);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_TRUE(verify::agree(got[i], fd[i])) << i;
}

TEST(ForwardDual, SeparateDecisionHead) {
    ArchitectureSpec spec = small_spec();
    spec.separate_decision_head = true;
    const auto m = build_client_model(spec, 0, 0);
    ASSERT_TRUE(m.decision_classifier.has_value());
    EXPECT_EQ(&m.head_for(Branch::decision), &*m.decision_classifier);
    const auto shared = build_client_model(small_spec(), 0, 0);
    EXPECT_EQ(&shared.head_for(Branch::decision), &shared.classifier);
}

TEST(Model, CloneSharesNoStorage) {
    const auto m = build_client_model(small_spec(), 0, 0);
    auto c = m.clone();
    c.classifier.weight.mutable_values()[0] += 1.0;
    EXPECT_NE(c.classifier.weight[0], m.classifier.weight[0]);
}

}  // namespace
}  // namespace dualproto
