// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// Heterogeneous client networks: an MLP feature extractor of per-client
// depth/width, two affine projectors into the common d_z prototype space
// (shared and decision branches), and a classifier head on d_z.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dualproto/tensor.hpp"

namespace dualproto {

enum class Activation { relu, identity };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

struct ArchitectureSpec {
    std::vector<std::vector<std::size_t>> widths;  // hidden widths per architecture
    Activation activation = Activation::relu;
    std::size_t input_dim = 0;
    std::size_t d_z = 0;
    std::size_t num_classes = 0;
    /// Give the decision path its own classifier instead of sharing f_phi.
    bool separate_decision_head = false;

    /// Throws ConfigError naming the first problem found.
    void validate() const;
    /// Architectures are assigned to clients cyclically.
    const std::vector<std::size_t>& widths_for(std::size_t client_id) const;
};

/// The eight-member MLP family cycled over clients by default.
std::vector<std::vector<std::size_t>> default_architecture_cycle();

struct Linear {
    Tensor weight;  // [in x out]
    Tensor bias;    // [out]

    Tensor forward(Tape& tape, const Tensor& x) const;
    std::size_t in_dim() const { return weight.rows(); }
    std::size_t out_dim() const { return weight.cols(); }
};

enum class Branch { shared, decision };

struct BranchOutput {
    Tensor features;  // [B x d_z]
    Tensor logits;    // [B x C]
};

struct DualOutput {
    Tensor z_s;
    Tensor z_d;
    Tensor logits_s;
    Tensor logits_d;
};

struct ClientModel {
    std::size_t client_id = 0;
    Activation activation = Activation::relu;
    std::vector<Linear> extractor;
    Linear shared_branch;
    Linear decision_branch;
    Linear classifier;
    std::optional<Linear> decision_classifier;

    std::size_t input_dim() const { return extractor.front().in_dim(); }
    std::size_t d_z() const { return shared_branch.out_dim(); }
    std::size_t num_classes() const { return classifier.out_dim(); }

    /// All trainable tensors in a fixed order.
    std::vector<Tensor> parameters() const;
    std::size_t parameter_count() const;
    /// Deep copy; the copy shares no storage with this model.
    ClientModel clone() const;

    /// f_theta(x)
    Tensor extract(Tape& tape, const Tensor& batch) const;
    /// Head for the given branch's features.
    const Linear& head_for(Branch branch) const;
    BranchOutput forward_branch(Tape& tape, const Tensor& batch, Branch branch) const;
};

/// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], each
/// layer seeded from (seed, client_id, layer).
ClientModel build_client_model(const ArchitectureSpec& spec, std::size_t client_id, std::uint64_t seed);

/// z_s = g_s(f(x)), z_d = g_d(f(x)) and both heads' logits, on one tape.
DualOutput forward_dual(const ClientModel& model, const Tensor& batch, Tape& tape);

}  // namespace dualproto
