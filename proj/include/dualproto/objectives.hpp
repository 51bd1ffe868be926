// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// Local training objective: classifier cross-entropy on both branches, L2
// alignment of shared features to received prototypes, and the contrastive
// decision-branch loss with its batch-adaptive boundary penalty.
//
// The decision loss has two forms. `as_written` is the negative mean of
// the prototype ratio exp(-d_y/tau) / (sum_c exp(-d_c/tau) + M_i) with no
// logarithm; `log_form` takes -mean(log ratio). Note that the boundary
// penalty term exp(-max(0, m - d)/tau) shrinks as a negative gets closer
// than m, so harder negatives reduce M_i rather than inflate it. It is
// implemented as defined.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "dualproto/prototypes.hpp"
#include "dualproto/tensor.hpp"

namespace dualproto {

enum class DecisionLossForm { as_written, log_form };

DecisionLossForm parse_decision_loss_form(const std::string& name);
std::string to_string(DecisionLossForm form);

struct LossConfig {
    double tau = 0.07;
    double lambda1 = 1.0;
    double lambda2 = 10.0;
    double lambda3 = 1.0;
    bool hard_mining = true;
    DecisionLossForm l_d_form = DecisionLossForm::as_written;

    void validate() const;
    bool operator==(const LossConfig&) const = default;
};

struct LossBreakdown {
    double l_sce = 0.0;
    double l_dce = 0.0;
    double l_s = 0.0;
    double l_d = 0.0;
    double total = 0.0;
    double margin_m = 0.0;
};

/// Mean over the batch of -log softmax(logits_i)[y_i].
Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const std::size_t> labels);

/// (1/B) sum_i ||p^{y_i} - z_i||^2 on raw vectors. Prototypes are constants.
Tensor l2_alignment_loss(Tape& tape, const Tensor& z_s, std::span<const std::size_t> labels,
                         const PrototypeSet& prototypes);

/// Midpoint of the mean positive distance d[i, y_i] and the mean of all
/// negative distances d[i, c != y_i]. A plain number: no gradient flows.
double adaptive_margin(const Tensor& distances, std::span<const std::size_t> labels);

/// M = sum_{c != label} exp(-max(0, m - d_c) / tau) for one row d [C].
Tensor boundary_penalty(Tape& tape, const Tensor& distances_row, std::size_t label, double m, double tau);
/// Row-wise version over distances [B x C] -> [B].
Tensor boundary_penalty_rows(Tape& tape, const Tensor& distances, std::span<const std::size_t> labels, double m,
                             double tau);

/// Per-sample ratio exp(-d_y/tau) / (sum_c exp(-d_c/tau) + penalty_i).
/// A null penalty leaves the denominator as the plain softmax sum.
Tensor decision_ratio(Tape& tape, const Tensor& distances, std::span<const std::size_t> labels, double tau,
                      const Tensor* penalty);

struct DecisionLoss {
    Tensor loss;
    double margin_m = 0.0;
};

/// Decision loss given a distance matrix [B x C] (distances may be any
/// non-negative values; the feature-space entry point below normalizes).
DecisionLoss decision_loss_from_distances(Tape& tape, const Tensor& distances, std::span<const std::size_t> labels,
                                          const LossConfig& cfg);

/// Same loss with the margin supplied by the caller instead of measured on
/// the batch. Used to hold m fixed, e.g. under finite differences.
DecisionLoss decision_loss_with_margin(Tape& tape, const Tensor& distances, std::span<const std::size_t> labels,
                                       const LossConfig& cfg, double margin);

/// d[i, c] = ||z_i/||z_i|| - p^c/||p^c|| ||. Needs a prototype for every class.
Tensor normalized_prototype_distances(Tape& tape, const Tensor& features, const PrototypeSet& prototypes);

DecisionLoss contrastive_decision_loss(Tape& tape, const Tensor& z_d, std::span<const std::size_t> labels,
                                       const PrototypeSet& prototypes, const LossConfig& cfg);

/// Terms that were not computed (disabled or unavailable) stay empty and
/// count as zero.
struct LossTerms {
    std::optional<Tensor> l_sce;
    std::optional<Tensor> l_dce;
    std::optional<Tensor> l_s;
    std::optional<Tensor> l_d;
};

/// l_sce + lambda1 l_dce + lambda2 l_s + lambda3 l_d, summed left to right.
Tensor total_loss(Tape& tape, const LossTerms& parts, const LossConfig& cfg);

LossBreakdown breakdown(const LossTerms& parts, const Tensor& total, double margin_m);

}  // namespace dualproto
