// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// Writes the raw material for the frozen regression fixtures:
//   record_fixtures synthetic OUT.csv   C=4, 50 per class, d_in=4, sep 3, seed 7
//   record_fixtures partition OUT.txt   C=10, 100 per class, K=20, alpha 0.1, seed 42
// The nearest-centroid number is computed from OUT.csv by
// tests/oracles/nearest_centroid.py, not by the library.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "dualproto/dataset.hpp"

using namespace dualproto;

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: record_fixtures synthetic|partition OUT\n";
        return 2;
    }
    const std::string what = argv[1];
    std::ofstream out(argv[2]);
    if (what == "synthetic") {
        const auto data = generate_synthetic(4, 50, 4, 3.0, 7);
        char buf[64];
        out << "f0,f1,f2,f3,label\n";
        for (std::size_t i = 0; i < data.size(); ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g,", data.features.at(i, j));
                out << buf;
            }
            out << data.labels[i] << "\n";
        }
    } else if (what == "partition") {
        const auto data = generate_synthetic(10, 100, 8, 3.0, 42);
        const auto plan = dirichlet_partition(data, 20, 0.1, 42);
        for (const auto& idx : plan.clients) {
            const auto counts = data.subset(idx).class_counts();
            for (std::size_t c = 0; c < counts.size(); ++c) out << (c ? " " : "") << counts[c];
            out << "\n";
        }
    } else {
        std::cerr << "unknown fixture '" << what << "'\n";
        return 2;
    }
    return 0;
}
