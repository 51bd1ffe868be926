// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include "dualproto/verify/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dualproto::verify {

std::vector<double> central_differences(const std::function<double(std::span<const double>)>& f,
                                        std::span<const double> x, double h) {
    std::vector<double> point(x.begin(), x.end());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        point[i] = x[i] + h;
        const double up = f(point);
        point[i] = x[i] - h;
        const double down = f(point);
        point[i] = x[i];
        out[i] = (up - down) / (2.0 * h);
    }
    return out;
}

bool agree(double a, double b, double rel, double abs_floor) {
    return std::abs(a - b) <= std::max(rel * std::max(std::abs(a), std::abs(b)), abs_floor);
}

std::vector<std::size_t> brute_topk(std::span<const double> scores, std::size_t k) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    idx.resize(std::min(k, idx.size()));
    return idx;
}

std::vector<double> brute_fuse_row(std::span<const double> local, std::span<const double> global,
                                   std::span<const double> scores, double eta, std::size_t k) {
    std::vector<double> out(global.begin(), global.end());
    std::vector<bool> chosen(global.size(), false);
    for (std::size_t j : brute_topk(scores, k)) chosen[j] = true;
    for (std::size_t j = 0; j < out.size(); ++j)
        if (chosen[j]) out[j] = eta * local[j] + (1.0 - eta) * global[j];
    return out;
}

std::vector<std::optional<std::vector<double>>> brute_class_means(std::span<const ClientUpload> uploads) {
    const std::size_t c = uploads.front().prototypes.num_classes();
    const std::size_t d = uploads.front().prototypes.d_z();
    std::vector<std::optional<std::vector<double>>> out(c);
    for (std::size_t cls = 0; cls < c; ++cls) {
        std::vector<const ClientUpload*> holders;
        for (const auto& up : uploads)
            if (up.prototypes.has(cls)) holders.push_back(&up);
        if (holders.empty()) continue;
        std::vector<double> mean(d);
        for (std::size_t j = 0; j < d; ++j) {
            long double acc = 0.0L;
            for (const ClientUpload* up : holders) acc += up->prototypes.at(cls)[j];
            mean[j] = static_cast<double>(acc / static_cast<long double>(holders.size()));
        }
        out[cls] = std::move(mean);
    }
    return out;
}

double log_prob(std::span<const double> z, std::span<const double> weight, std::span<const double> bias,
                std::size_t num_classes, std::size_t label) {
    std::vector<double> logits(bias.begin(), bias.end());
    for (std::size_t j = 0; j < z.size(); ++j)
        for (std::size_t c = 0; c < num_classes; ++c) logits[c] += z[j] * weight[j * num_classes + c];
    const double top = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - top);
    return logits[label] - top - std::log(sum);
}

std::vector<double> fisher_by_differences(std::span<const double> features, std::span<const std::size_t> labels,
                                          std::size_t d_z, std::span<const double> weight,
                                          std::span<const double> bias, std::size_t num_classes, double h) {
    std::vector<double> scores(num_classes * d_z, 0.0);
    std::vector<std::size_t> counts(num_classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const std::size_t y = labels[i];
        auto f = [&](std::span<const double> z) { return log_prob(z, weight, bias, num_classes, y); };
        const auto g = central_differences(f, features.subspan(i * d_z, d_z), h);
        for (std::size_t j = 0; j < d_z; ++j) scores[y * d_z + j] += g[j] * g[j];
        ++counts[y];
    }
    for (std::size_t c = 0; c < num_classes; ++c)
        if (counts[c] > 0)
            for (std::size_t j = 0; j < d_z; ++j) scores[c * d_z + j] /= static_cast<double>(counts[c]);
    return scores;
}

double nearest_centroid_accuracy(const LabeledDataset& train, const LabeledDataset& test) {
    const std::size_t d = train.input_dim();
    const std::size_t c = train.num_classes;
    std::vector<double> centroid(c * d, 0.0);
    std::vector<std::size_t> counts(c, 0);
    const auto x = train.features.values();
    for (std::size_t i = 0; i < train.size(); ++i) {
        ++counts[train.labels[i]];
        for (std::size_t j = 0; j < d; ++j) centroid[train.labels[i] * d + j] += x[i * d + j];
    }
    for (std::size_t k = 0; k < c; ++k)
        for (std::size_t j = 0; j < d; ++j) centroid[k * d + j] /= static_cast<double>(std::max<std::size_t>(1, counts[k]));

    const auto t = test.features.values();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < c; ++k) {
            if (counts[k] == 0) continue;
            double sq = 0.0;
            for (std::size_t j = 0; j < d; ++j) sq += (t[i * d + j] - centroid[k * d + j]) * (t[i * d + j] - centroid[k * d + j]);
            if (sq < best_d) {
                best_d = sq;
                best = k;
            }
        }
        correct += best == test.labels[i] ? 1 : 0;
    }
    return test.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace dualproto::verify
