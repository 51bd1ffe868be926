// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include "dualproto/client.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dualproto/errors.hpp"
#include "dualproto/random.hpp"

namespace dualproto {

void sgd_step(std::span<Tensor> params, double lr) {
    for (Tensor& p : params) {
        if (!p.has_grad()) continue;
        auto values = p.mutable_values();
        const auto g = p.grad();
        for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * g[i];
        p.zero_grad();
    }
}

namespace {

void accumulate(LossBreakdown& acc, const LossBreakdown& x, double w) {
    acc.l_sce += w * x.l_sce;
    acc.l_dce += w * x.l_dce;
    acc.l_s += w * x.l_s;
    acc.l_d += w * x.l_d;
    acc.total += w * x.total;
    acc.margin_m += w * x.margin_m;
}

void scale(LossBreakdown& acc, double s) {
    acc.l_sce *= s;
    acc.l_dce *= s;
    acc.l_s *= s;
    acc.l_d *= s;
    acc.total *= s;
    acc.margin_m *= s;
}

bool all_finite(std::span<const Tensor> params) {
    for (const Tensor& p : params)
        for (double v : p.values())
            if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

TrainResult local_train(ClientModel& model, const LabeledDataset& shard, const PrototypeSet* prototypes,
                        const TrainOptions& options) {
    if (shard.size() == 0) throw ConfigError("local_train: empty shard");
    if (options.batch_size == 0) throw ConfigError("local_train: batch_size must be >= 1");
    options.loss.validate();

    const LossPlan& plan = options.plan;
    const bool use_ls = plan.use_ls && prototypes != nullptr;
    // The decision loss contrasts against every class, so it waits until the
    // received set covers all of them (only possible to miss when rho < 1).
    const bool use_ld = plan.use_ld && prototypes != nullptr && prototypes->covers_all();
    const bool need_shared = plan.use_sce || use_ls;
    const bool need_decision = plan.use_dce || use_ld;

    std::vector<Tensor> params = model.parameters();
    std::vector<std::size_t> order(shard.size());
    TrainResult result;

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed({options.seed, epoch, 0xE90C4ULL}));
        rng.shuffle(order);

        LossBreakdown epoch_sum;
        std::size_t step = 0;
        for (std::size_t start = 0; start < order.size(); start += options.batch_size, ++step) {
            const std::size_t n = std::min(options.batch_size, order.size() - start);
            const LabeledDataset batch = shard.subset(std::span(order).subspan(start, n));
            LossBreakdown parts;
            try {
                for (Tensor& p : params) p.zero_grad();
                Tape tape;
                Tensor h = model.extract(tape, batch.features);
                LossTerms terms;
                double margin = 0.0;
                if (need_shared) {
                    Tensor z_s = model.shared_branch.forward(tape, h);
                    if (plan.use_sce) terms.l_sce = cross_entropy(tape, model.classifier.forward(tape, z_s), batch.labels);
                    if (use_ls) terms.l_s = l2_alignment_loss(tape, z_s, batch.labels, *prototypes);
                }
                if (need_decision) {
                    Tensor z_d = model.decision_branch.forward(tape, h);
                    if (plan.use_dce) {
                        terms.l_dce = cross_entropy(tape, model.head_for(Branch::decision).forward(tape, z_d),
                                                    batch.labels);
                    }
                    if (use_ld) {
                        DecisionLoss dl = contrastive_decision_loss(tape, z_d, batch.labels, *prototypes, options.loss);
                        terms.l_d = dl.loss;
                        margin = dl.margin_m;
                    }
                }
                Tensor total = total_loss(tape, terms, options.loss);
                parts = breakdown(terms, total, margin);
                tape.backward(total);
                sgd_step(params, options.lr);
                if (!all_finite(params)) throw NumericalError("non-finite parameter after SGD update");
            } catch (const NumericalError& e) {
                throw TrainingError(std::string("client ") + std::to_string(model.client_id) + ": " + e.what(),
                                    epoch, step);
            } catch (const DegenerateInputError& e) {
                throw TrainingError(std::string("client ") + std::to_string(model.client_id) + ": " + e.what(),
                                    epoch, step);
            }
            accumulate(epoch_sum, parts, static_cast<double>(n));
            ++result.steps;
        }
        scale(epoch_sum, 1.0 / static_cast<double>(order.size()));
        result.epoch_log.push_back(epoch_sum);
    }
    return result;
}

PrototypeSet compute_local_prototypes(const ClientModel& model, const LabeledDataset& shard, Branch branch) {
    if (shard.size() == 0) throw ConfigError("compute_local_prototypes: empty shard");
    const std::size_t d = model.d_z();
    const std::size_t c = model.num_classes();
    std::vector<double> sums(c * d, 0.0);
    std::vector<std::size_t> counts(c, 0);
    const Linear& projector = branch == Branch::shared ? model.shared_branch : model.decision_branch;

    constexpr std::size_t kChunk = 256;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < shard.size(); start += kChunk) {
        const std::size_t n = std::min(kChunk, shard.size() - start);
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), start);
        const LabeledDataset batch = shard.subset(idx);
        Tape no_grad(false);
        Tensor z = projector.forward(no_grad, model.extract(no_grad, batch.features));
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t y = batch.labels[i];
            ++counts[y];
            for (std::size_t j = 0; j < d; ++j) sums[y * d + j] += z[i * d + j];
        }
    }
    PrototypeSet out(PrototypeKind::local, c, d);
    for (std::size_t y = 0; y < c; ++y) {
        if (counts[y] == 0) continue;
        std::vector<double> p(sums.begin() + static_cast<std::ptrdiff_t>(y * d),
                              sums.begin() + static_cast<std::ptrdiff_t>((y + 1) * d));
        for (double& v : p) v /= static_cast<double>(counts[y]);
        out.set(y, std::move(p));
    }
    return out;
}

ClientUpload assemble_upload(std::size_t client_id, PrototypeSet prototypes, ImportanceScores scores,
                             std::uint64_t n_k) {
    if (prototypes.kind() != PrototypeKind::local) throw ProtocolError("upload prototypes must be local");
    if (prototypes.num_classes() != scores.num_classes || prototypes.d_z() != scores.d_z) {
        throw ProtocolError("upload prototypes and scores disagree on shape");
    }
    if (prototypes.coverage() != scores.coverage()) {
        throw ProtocolError("client " + std::to_string(client_id) +
                            ": prototype class coverage does not match score coverage");
    }
    if (n_k == 0) throw ProtocolError("upload with zero samples");
    return ClientUpload{static_cast<std::uint32_t>(client_id), std::move(prototypes), std::move(scores), n_k};
}

namespace {

std::vector<double> unit(std::span<const double> v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    const double norm = std::sqrt(sq);
    if (!(norm > kNormFloor)) throw DegenerateInputError("cannot normalize a near-zero vector for inference");
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x /= norm;
    return out;
}

std::vector<std::vector<double>> prepared_prototypes(const PrototypeSet& prototypes, bool normalize) {
    std::vector<std::vector<double>> out;
    out.reserve(prototypes.num_classes());
    for (std::size_t c = 0; c < prototypes.num_classes(); ++c) {
        auto p = prototypes.at(c);
        out.push_back(normalize ? unit(p) : std::vector<double>(p.begin(), p.end()));
    }
    return out;
}

std::size_t argmin_distance(std::span<const double> z, const std::vector<std::vector<double>>& protos) {
    std::size_t best = 0;
    double best_d = 0.0;
    for (std::size_t c = 0; c < protos.size(); ++c) {
        double sq = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) sq += (z[j] - protos[c][j]) * (z[j] - protos[c][j]);
        const double dist = std::sqrt(sq);
        if (c == 0 || dist < best_d) {
            best = c;
            best_d = dist;
        }
    }
    return best;
}

}  // namespace

std::size_t nearest_prototype(std::span<const double> feature, const PrototypeSet& prototypes, bool normalize) {
    if (feature.size() != prototypes.d_z()) throw DimensionError("feature width does not match prototypes");
    const auto protos = prepared_prototypes(prototypes, normalize);
    return normalize ? argmin_distance(unit(feature), protos) : argmin_distance(feature, protos);
}

std::vector<std::size_t> predict_batch(const ClientModel& model, const Tensor& batch, const PrototypeSet& prototypes,
                                       Branch branch, bool normalize) {
    if (prototypes.d_z() != model.d_z()) throw DimensionError("prototype width does not match model d_z");
    const auto protos = prepared_prototypes(prototypes, normalize);
    Tape no_grad(false);
    const Linear& projector = branch == Branch::shared ? model.shared_branch : model.decision_branch;
    Tensor z = projector.forward(no_grad, model.extract(no_grad, batch));
    const std::size_t d = model.d_z();
    std::vector<std::size_t> out(z.rows());
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto row = z.values().subspan(i * d, d);
        out[i] = normalize ? argmin_distance(unit(row), protos) : argmin_distance(row, protos);
    }
    return out;
}

std::size_t predict(const ClientModel& model, const Tensor& x, const PrototypeSet& prototypes, Branch branch,
                    bool normalize) {
    if (x.rank() != 1) throw DimensionError("predict expects a single sample [d_in]");
    Tensor row = Tensor::constant({1, x.size()}, {x.values().begin(), x.values().end()});
    return predict_batch(model, row, prototypes, branch, normalize).front();
}

}  // namespace dualproto
