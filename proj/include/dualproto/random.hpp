// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded random streams. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard. The distributions are written out here
// because libstdc++/libc++ normal and gamma samplers produce different
// streams, and frozen fixtures must not depend on the standard library.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace dualproto {

/// splitmix64 fold over a list of integers. Used to derive independent
/// sub-seeds such as (seed, client, layer).
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller (no cached second variate).
    double normal();

    /// log of a Gamma(shape, 1) draw. Marsaglia-Tsang, with the
    /// shape < 1 boost done in log space so tiny shapes do not underflow.
    double log_gamma_draw(double shape);

    /// Proportions ~ Dir(alpha * 1_k).
    std::vector<double> dirichlet(std::size_t k, double alpha);

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        shuffle(std::span<T>(items));
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace dualproto
