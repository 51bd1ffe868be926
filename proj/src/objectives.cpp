// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include "dualproto/objectives.hpp"

#include <cmath>

#include "dualproto/errors.hpp"

namespace dualproto {

DecisionLossForm parse_decision_loss_form(const std::string& name) {
    if (name == "as_written") return DecisionLossForm::as_written;
    if (name == "log_form") return DecisionLossForm::log_form;
    throw ConfigError("unknown l_d_form '" + name + "'");
}

std::string to_string(DecisionLossForm form) {
    return form == DecisionLossForm::as_written ? "as_written" : "log_form";
}

void LossConfig::validate() const {
    if (!(tau > 0.0)) throw ConfigError("loss.tau must be > 0");
    if (!(lambda1 >= 0.0)) throw ConfigError("loss.lambda1 must be >= 0");
    if (!(lambda2 >= 0.0)) throw ConfigError("loss.lambda2 must be >= 0");
    if (!(lambda3 >= 0.0)) throw ConfigError("loss.lambda3 must be >= 0");
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const std::size_t> labels) {
    return affine(tape, mean(tape, log_softmax_pick_rows(tape, logits, labels)), -1.0, 0.0);
}

Tensor l2_alignment_loss(Tape& tape, const Tensor& z_s, std::span<const std::size_t> labels,
                         const PrototypeSet& prototypes) {
    if (z_s.rank() != 2 || z_s.rows() != labels.size()) {
        throw DimensionError("l2_alignment_loss: features " + shape_str(z_s.shape()) + " for " +
                             std::to_string(labels.size()) + " labels");
    }
    const std::size_t d = z_s.cols();
    if (prototypes.d_z() != d) {
        throw DimensionError("l2_alignment_loss: prototype width " + std::to_string(prototypes.d_z()) +
                             " vs feature width " + std::to_string(d));
    }
    std::vector<double> targets;
    targets.reserve(labels.size() * d);
    for (std::size_t y : labels) {
        auto p = prototypes.at(y);
        targets.insert(targets.end(), p.begin(), p.end());
    }
    Tensor target = Tensor::constant(z_s.shape(), std::move(targets));
    Tensor diff = sub(tape, z_s, target);
    return mean(tape, row_sum(tape, mul(tape, diff, diff)));
}

double adaptive_margin(const Tensor& distances, std::span<const std::size_t> labels) {
    if (distances.rank() != 2) throw DimensionError("adaptive_margin: expected [B x C] distances");
    const std::size_t b = distances.rows(), c = distances.cols();
    if (c < 2) throw ConfigError("adaptive_margin: need at least 2 classes for negatives");
    if (b < 1) throw DimensionError("adaptive_margin: empty batch");
    if (labels.size() != b) throw DimensionError("adaptive_margin: label count does not match batch");
    double pos = 0.0, neg = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        if (labels[i] >= c) throw IndexError("adaptive_margin: label out of range");
        for (std::size_t j = 0; j < c; ++j) {
            if (j == labels[i])
                pos += distances.at(i, j);
            else
                neg += distances.at(i, j);
        }
    }
    const double mean_pos = pos / static_cast<double>(b);
    const double mean_neg = neg / static_cast<double>(b * (c - 1));
    return (mean_pos + mean_neg) / 2.0;
}

namespace {

Tensor negative_mask(const Shape& shape, std::span<const std::size_t> labels) {
    const std::size_t c = shape.back();
    std::vector<double> mask(shape_size(shape), 1.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= c) throw IndexError("label " + std::to_string(labels[i]) + " out of range");
        mask[i * c + labels[i]] = 0.0;
    }
    return Tensor::constant(shape, std::move(mask));
}

// exp(-max(0, m - d) / tau), elementwise.
Tensor penalty_terms(Tape& tape, const Tensor& distances, double m, double tau) {
    Tensor gap = relu(tape, affine(tape, distances, -1.0, m));
    return exp(tape, affine(tape, gap, -1.0 / tau, 0.0));
}

}  // namespace

Tensor boundary_penalty(Tape& tape, const Tensor& distances_row, std::size_t label, double m, double tau) {
    if (!(tau > 0.0)) throw ConfigError("boundary_penalty: tau must be > 0");
    if (distances_row.rank() != 1) throw DimensionError("boundary_penalty: expected a distance row");
    const std::size_t one[] = {label};
    Tensor mask = negative_mask(distances_row.shape(), one);
    return sum(tape, mul(tape, penalty_terms(tape, distances_row, m, tau), mask));
}

Tensor boundary_penalty_rows(Tape& tape, const Tensor& distances, std::span<const std::size_t> labels, double m,
                             double tau) {
    if (!(tau > 0.0)) throw ConfigError("boundary_penalty: tau must be > 0");
    if (distances.rank() != 2 || distances.rows() != labels.size()) {
        throw DimensionError("boundary_penalty: distances " + shape_str(distances.shape()) + " for " +
                             std::to_string(labels.size()) + " labels");
    }
    Tensor mask = negative_mask(distances.shape(), labels);
    return row_sum(tape, mul(tape, penalty_terms(tape, distances, m, tau), mask));
}

Tensor decision_ratio(Tape& tape, const Tensor& distances, std::span<const std::size_t> labels, double tau,
                      const Tensor* penalty) {
    if (!(tau > 0.0)) throw ConfigError("decision loss: tau must be > 0");
    Tensor scaled = exp(tape, affine(tape, distances, -1.0 / tau, 0.0));
    Tensor numerator = pick(tape, scaled, labels);
    Tensor denominator = row_sum(tape, scaled);
    if (penalty) denominator = add(tape, denominator, *penalty);
    return div(tape, numerator, denominator);
}

DecisionLoss decision_loss_from_distances(Tape& tape, const Tensor& distances, std::span<const std::size_t> labels,
                                          const LossConfig& cfg) {
    return decision_loss_with_margin(tape, distances, labels, cfg, adaptive_margin(distances, labels));
}

DecisionLoss decision_loss_with_margin(Tape& tape, const Tensor& distances, std::span<const std::size_t> labels,
                                       const LossConfig& cfg, double m) {
    Tensor ratio;
    if (cfg.hard_mining) {
        Tensor penalty = boundary_penalty_rows(tape, distances, labels, m, cfg.tau);
        ratio = decision_ratio(tape, distances, labels, cfg.tau, &penalty);
    } else {
        ratio = decision_ratio(tape, distances, labels, cfg.tau, nullptr);
    }
    Tensor per_sample = cfg.l_d_form == DecisionLossForm::log_form ? log(tape, ratio) : ratio;
    return {affine(tape, mean(tape, per_sample), -1.0, 0.0), m};
}

Tensor normalized_prototype_distances(Tape& tape, const Tensor& features, const PrototypeSet& prototypes) {
    if (features.rank() != 2) throw DimensionError("decision features must be [B x d_z]");
    if (prototypes.d_z() != features.cols()) {
        throw DimensionError("prototype width " + std::to_string(prototypes.d_z()) + " vs feature width " +
                             std::to_string(features.cols()));
    }
    const std::size_t c = prototypes.num_classes();
    std::vector<double> flat;
    flat.reserve(c * prototypes.d_z());
    for (std::size_t k = 0; k < c; ++k) {
        auto p = prototypes.at(k);
        flat.insert(flat.end(), p.begin(), p.end());
    }
    Tape constants(false);
    Tensor proto_hat = l2_normalize_rows(constants, Tensor::constant({c, prototypes.d_z()}, std::move(flat)));
    return pairwise_distance(tape, l2_normalize_rows(tape, features), proto_hat);
}

DecisionLoss contrastive_decision_loss(Tape& tape, const Tensor& z_d, std::span<const std::size_t> labels,
                                       const PrototypeSet& prototypes, const LossConfig& cfg) {
    return decision_loss_from_distances(tape, normalized_prototype_distances(tape, z_d, prototypes), labels, cfg);
}

Tensor total_loss(Tape& tape, const LossTerms& parts, const LossConfig& cfg) {
    std::optional<Tensor> acc = parts.l_sce;
    auto accumulate = [&](const std::optional<Tensor>& term, double weight) {
        if (!term) return;
        Tensor scaled = affine(tape, *term, weight, 0.0);
        acc = acc ? add(tape, *acc, scaled) : scaled;
    };
    accumulate(parts.l_dce, cfg.lambda1);
    accumulate(parts.l_s, cfg.lambda2);
    accumulate(parts.l_d, cfg.lambda3);
    if (!acc) throw ContractError("total_loss: no loss terms");
    return *acc;
}

LossBreakdown breakdown(const LossTerms& parts, const Tensor& total, double margin_m) {
    auto value = [](const std::optional<Tensor>& t) { return t ? t->item() : 0.0; };
    return LossBreakdown{value(parts.l_sce), value(parts.l_dce), value(parts.l_s), value(parts.l_d), total.item(),
                         margin_m};
}

}  // namespace dualproto
