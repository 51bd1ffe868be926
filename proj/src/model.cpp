// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include "dualproto/model.hpp"

#include <cmath>

#include "dualproto/errors.hpp"
#include "dualproto/random.hpp"

namespace dualproto {

namespace {

constexpr std::uint64_t kSharedLayer = 1000;
constexpr std::uint64_t kDecisionLayer = 1001;
constexpr std::uint64_t kHeadLayer = 1002;
constexpr std::uint64_t kDecisionHeadLayer = 1003;

Linear init_linear(std::size_t in, std::size_t out, std::uint64_t seed, std::size_t client, std::uint64_t layer) {
    Rng rng(derive_seed({seed, client, layer}));
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(in * out);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    std::vector<double> b(out);
    for (auto& v : b) v = rng.uniform(-bound, bound);
    return Linear{Tensor::variable({in, out}, std::move(w)), Tensor::variable({out}, std::move(b))};
}

Linear clone_linear(const Linear& l) { return Linear{l.weight.clone(), l.bias.clone()}; }

}  // namespace

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "identity") return Activation::identity;
    throw ConfigError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

void ArchitectureSpec::validate() const {
    if (widths.empty()) throw ConfigError("model.architectures: need at least one architecture");
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (widths[i].empty()) throw ConfigError("model.architectures[" + std::to_string(i) + "]: no layers");
        for (std::size_t w : widths[i]) {
            if (w < 1) throw ConfigError("model.architectures[" + std::to_string(i) + "]: width must be >= 1");
        }
    }
    if (input_dim < 1) throw ConfigError("model input_dim must be >= 1");
    if (d_z < 1) throw ConfigError("model.d_z must be >= 1");
    if (num_classes < 2) throw ConfigError("model needs at least 2 classes");
}

const std::vector<std::size_t>& ArchitectureSpec::widths_for(std::size_t client_id) const {
    return widths[client_id % widths.size()];
}

std::vector<std::vector<std::size_t>> default_architecture_cycle() {
    return {{64}, {96}, {48, 48}, {64, 32}, {32, 32, 32}, {128}, {80, 40}, {48, 64, 48}};
}

Tensor Linear::forward(Tape& tape, const Tensor& x) const {
    return add_row_broadcast(tape, matmul(tape, x, weight), bias);
}

std::vector<Tensor> ClientModel::parameters() const {
    std::vector<Tensor> params;
    auto push = [&](const Linear& l) {
        params.push_back(l.weight);
        params.push_back(l.bias);
    };
    for (const auto& l : extractor) push(l);
    push(shared_branch);
    push(decision_branch);
    push(classifier);
    if (decision_classifier) push(*decision_classifier);
    return params;
}

std::size_t ClientModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.size();
    return n;
}

ClientModel ClientModel::clone() const {
    ClientModel copy;
    copy.client_id = client_id;
    copy.activation = activation;
    for (const auto& l : extractor) copy.extractor.push_back(clone_linear(l));
    copy.shared_branch = clone_linear(shared_branch);
    copy.decision_branch = clone_linear(decision_branch);
    copy.classifier = clone_linear(classifier);
    if (decision_classifier) copy.decision_classifier = clone_linear(*decision_classifier);
    return copy;
}

Tensor ClientModel::extract(Tape& tape, const Tensor& batch) const {
    if (batch.rank() != 2 || batch.cols() != input_dim()) {
        throw DimensionError("model input " + shape_str(batch.shape()) + " does not match input_dim " +
                             std::to_string(input_dim()));
    }
    Tensor h = batch;
    for (const auto& layer : extractor) {
        h = layer.forward(tape, h);
        if (activation == Activation::relu) h = relu(tape, h);
    }
    return h;
}

const Linear& ClientModel::head_for(Branch branch) const {
    if (branch == Branch::decision && decision_classifier) return *decision_classifier;
    return classifier;
}

BranchOutput ClientModel::forward_branch(Tape& tape, const Tensor& batch, Branch branch) const {
    Tensor h = extract(tape, batch);
    Tensor z = (branch == Branch::shared ? shared_branch : decision_branch).forward(tape, h);
    Tensor logits = head_for(branch).forward(tape, z);
    return {z, logits};
}

ClientModel build_client_model(const ArchitectureSpec& spec, std::size_t client_id, std::uint64_t seed) {
    spec.validate();
    ClientModel model;
    model.client_id = client_id;
    model.activation = spec.activation;
    std::size_t in = spec.input_dim;
    const auto& widths = spec.widths_for(client_id);
    for (std::size_t layer = 0; layer < widths.size(); ++layer) {
        model.extractor.push_back(init_linear(in, widths[layer], seed, client_id, layer));
        in = widths[layer];
    }
    model.shared_branch = init_linear(in, spec.d_z, seed, client_id, kSharedLayer);
    model.decision_branch = init_linear(in, spec.d_z, seed, client_id, kDecisionLayer);
    model.classifier = init_linear(spec.d_z, spec.num_classes, seed, client_id, kHeadLayer);
    if (spec.separate_decision_head) {
        model.decision_classifier = init_linear(spec.d_z, spec.num_classes, seed, client_id, kDecisionHeadLayer);
    }
    return model;
}

DualOutput forward_dual(const ClientModel& model, const Tensor& batch, Tape& tape) {
    Tensor h = model.extract(tape, batch);
    Tensor z_s = model.shared_branch.forward(tape, h);
    Tensor z_d = model.decision_branch.forward(tape, h);
    Tensor logits_s = model.classifier.forward(tape, z_s);
    Tensor logits_d = model.head_for(Branch::decision).forward(tape, z_d);
    return {z_s, z_d, logits_s, logits_d};
}

}  // namespace dualproto
