// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dualproto/dataset.hpp"
#include "dualproto/errors.hpp"
#include "dualproto/verify/oracles.hpp"

namespace dualproto {
namespace {

const std::filesystem::path kData = DUALPROTO_TEST_DATA_DIR;

std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

TEST(Synthetic, WellSeparatedIsPerfectlyClassified) {
    const auto data = generate_synthetic(2, 10, 2, 100.0, 1);
    EXPECT_EQ(data.size(), 20u);
    EXPECT_EQ(data.num_classes, 2u);
    EXPECT_DOUBLE_EQ(verify::nearest_centroid_accuracy(data, data), 1.0);
}

TEST(Synthetic, SameArgumentsSameBits) {
    const auto a = generate_synthetic(3, 7, 5, 2.0, 99);
    const auto b = generate_synthetic(3, 7, 5, 2.0, 99);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_TRUE(std::equal(a.features.values().begin(), a.features.values().end(), b.features.values().begin()));
}

// 193 of 200 rows, measured on the exported rows by tests/oracles/nearest_centroid.py.
TEST(Synthetic, FrozenNearestCentroidAccuracy) {
    const auto data = generate_synthetic(4, 50, 4, 3.0, 7);
    EXPECT_DOUBLE_EQ(verify::nearest_centroid_accuracy(data, data), 193.0 / 200.0);
}

TEST(Synthetic, InvalidCountsRejected) {
    EXPECT_THROW(generate_synthetic(1, 10, 2, 1.0, 0), ConfigError);
    EXPECT_THROW(generate_synthetic(2, 0, 2, 1.0, 0), ConfigError);
    EXPECT_THROW(generate_synthetic(2, 10, 0, 1.0, 0), ConfigError);
}

TEST(Csv, StringLabelsNumberedByFirstAppearance) {
    const auto data = ingest_csv(kData / "three_rows.csv", std::string("label"));
    EXPECT_EQ(data.num_classes, 2u);
    EXPECT_EQ(data.labels, (std::vector<std::size_t>{0, 1, 0}));
    EXPECT_EQ(data.input_dim(), 2u);
    EXPECT_DOUBLE_EQ(data.features.at(2, 1), 6.0);
}

TEST(Csv, HeaderOnlyIsEmptyDataset) {
    try {
        ingest_csv(kData / "header_only.csv", std::string("label"));
        FAIL() << "expected IngestionError";
    } catch (const IngestionError& e) {
        EXPECT_NE(std::string(e.what()).find("empty dataset"), std::string::npos) << e.what();
    }
}

TEST(Csv, HundredFiftyRowsFourFeatures) {
    // Row count from the file itself: every line but the header.
    std::ifstream in(kData / "four_features_150.csv");
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);) lines += line.empty() ? 0 : 1;
    const auto data = ingest_csv(kData / "four_features_150.csv", std::size_t{4});
    EXPECT_EQ(data.size(), lines - 1);
    EXPECT_EQ(data.size(), 150u);
    EXPECT_EQ(data.input_dim(), 4u);
    EXPECT_EQ(data.num_classes, 3u);
}

TEST(Csv, MissingFileAndBadCellCarryPosition) {
    EXPECT_THROW(ingest_csv(kData / "does_not_exist.csv", std::string("label")), IngestionError);
    const auto path = std::filesystem::temp_directory_path() / "dualproto_bad_cell.csv";
    {
        std::ofstream out(path);
        out << "a,b,label\n1,2,x\n3,oops,y\n";
    }
    try {
        ingest_csv(path, std::string("label"));
        FAIL() << "expected IngestionError";
    } catch (const IngestionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("row"), std::string::npos) << msg;
        EXPECT_NE(msg.find("column"), std::string::npos) << msg;
    }
    std::filesystem::remove(path);
}

void expect_partition_of(const PartitionPlan& plan, std::size_t n) {
    std::vector<std::size_t> all;
    for (const auto& c : plan.clients) {
        EXPECT_FALSE(c.empty());
        EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
        all.insert(all.end(), c.begin(), c.end());
    }
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, iota_indices(n));
}

TEST(Partition, LargeAlphaIsNearUniform) {
    const auto data = generate_synthetic(2, 100, 2, 1.0, 5);
    const auto plan = dirichlet_partition(data, 4, 1e6, 3);
    expect_partition_of(plan, data.size());
    for (const auto& idx : plan.clients) {
        for (std::size_t count : data.subset(idx).class_counts()) {
            EXPECT_GE(count, 24u);
            EXPECT_LE(count, 26u);
        }
    }
}

TEST(Partition, CoversEveryIndexOnce) {
    for (double alpha : {0.01, 0.1, 1.0, 100.0}) {
        const auto data = generate_synthetic(5, 13, 3, 1.0, 2);
        expect_partition_of(dirichlet_partition(data, 9, alpha, 17), data.size());
    }
}

TEST(Partition, FrozenHistograms) {
    const auto data = generate_synthetic(10, 100, 8, 3.0, 42);
    const auto plan = dirichlet_partition(data, 20, 0.1, 42);
    std::ifstream in(kData / "partition_alpha0.1_C10_K20_seed42.txt");
    ASSERT_TRUE(in.good());
    for (std::size_t k = 0; k < plan.num_clients(); ++k) {
        std::string line;
        ASSERT_TRUE(std::getline(in, line));
        std::istringstream row(line);
        std::vector<std::size_t> want;
        for (std::size_t v; row >> v;) want.push_back(v);
        EXPECT_EQ(data.subset(plan.clients[k]).class_counts(), want) << "client " << k;
    }
    expect_partition_of(plan, data.size());
}

TEST(Partition, DeterministicAndSeedSensitive) {
    const auto data = generate_synthetic(4, 30, 2, 1.0, 0);
    EXPECT_EQ(dirichlet_partition(data, 6, 0.3, 1).clients, dirichlet_partition(data, 6, 0.3, 1).clients);
    EXPECT_NE(dirichlet_partition(data, 6, 0.3, 1).clients, dirichlet_partition(data, 6, 0.3, 2).clients);
}

TEST(Partition, MoreClientsThanSamples) {
    const auto data = generate_synthetic(2, 2, 2, 1.0, 0);
    EXPECT_THROW(dirichlet_partition(data, 5, 0.1, 0), ConfigError);
}

TEST(Partition, SmallAlphaLowersEntropy) {
    const auto data = generate_synthetic(10, 100, 4, 1.0, 0);
    auto mean_entropy = [&](double alpha) {
        const auto plan = dirichlet_partition(data, 20, alpha, 8);
        double total = 0;
        for (const auto& idx : plan.clients) total += label_entropy(data, idx);
        return total / 20.0;
    };
    EXPECT_LT(mean_entropy(0.05), mean_entropy(5.0));
}

TEST(Split, DisjointSortedAndBothSidesNonEmpty) {
    const auto idx = iota_indices(11);
    const auto split = split_shard(idx, 0.2, 4);
    EXPECT_FALSE(split.train.empty());
    EXPECT_FALSE(split.test.empty());
    std::vector<std::size_t> all = split.train;
    all.insert(all.end(), split.test.begin(), split.test.end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, idx);
    EXPECT_TRUE(std::is_sorted(split.test.begin(), split.test.end()));
}

}  // namespace
}  // namespace dualproto
