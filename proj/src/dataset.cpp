// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include "dualproto/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <unordered_map>

#include "dualproto/errors.hpp"
#include "dualproto/random.hpp"

namespace dualproto {

std::vector<std::size_t> LabeledDataset::class_counts() const {
    std::vector<std::size_t> counts(num_classes, 0);
    for (std::size_t y : labels) ++counts[y];
    return counts;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
    const std::size_t d = input_dim();
    std::vector<double> x;
    x.reserve(indices.size() * d);
    std::vector<std::size_t> y;
    y.reserve(indices.size());
    const auto src = features.values();
    for (std::size_t idx : indices) {
        if (idx >= size()) throw IndexError("subset index " + std::to_string(idx) + " out of range");
        x.insert(x.end(), src.begin() + idx * d, src.begin() + (idx + 1) * d);
        y.push_back(labels[idx]);
    }
    return LabeledDataset{Tensor::constant({indices.size(), d}, std::move(x)), std::move(y), num_classes};
}

// Synthetic ----------------------------------------------------------------

namespace {

std::vector<double> class_direction(std::size_t c, std::size_t d) {
    std::vector<double> u(d, 0.0);
    if (c < d) {
        u[c] = 1.0;
    } else if (c < 2 * d) {
        u[c - d] = -1.0;
    } else {
        Rng rng(derive_seed({0xD1EC7ULL, c}));
        double sq = 0.0;
        do {
            sq = 0.0;
            for (auto& v : u) {
                v = rng.normal();
                sq += v * v;
            }
        } while (sq < 1e-6);
        const double norm = std::sqrt(sq);
        for (auto& v : u) v /= norm;
    }
    return u;
}

}  // namespace

LabeledDataset generate_synthetic(std::size_t num_classes, std::size_t per_class, std::size_t input_dim,
                                  double class_separation, std::uint64_t seed) {
    if (num_classes < 2) throw ConfigError("synthetic dataset needs at least 2 classes");
    if (per_class < 1) throw ConfigError("synthetic dataset needs at least 1 sample per class");
    if (input_dim < 1) throw ConfigError("synthetic dataset needs input_dim >= 1");
    if (!(class_separation > 0.0)) throw ConfigError("class_separation must be positive");

    Rng rng(derive_seed({seed, 0x5EEDDA7AULL}));
    const std::size_t n = num_classes * per_class;
    std::vector<double> x;
    x.reserve(n * input_dim);
    std::vector<std::size_t> y;
    y.reserve(n);
    for (std::size_t c = 0; c < num_classes; ++c) {
        const auto u = class_direction(c, input_dim);
        for (std::size_t i = 0; i < per_class; ++i) {
            for (std::size_t j = 0; j < input_dim; ++j) x.push_back(class_separation * u[j] + rng.normal());
            y.push_back(c);
        }
    }
    return LabeledDataset{Tensor::constant({n, input_dim}, std::move(x)), std::move(y), num_classes};
}

// CSV ------------------------------------------------------------------------

namespace {

std::string trim(std::string s) {
    auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

std::optional<double> parse_real(const std::string& cell) {
    if (cell.empty()) return std::nullopt;
    const char* first = cell.data();
    if (*first == '+') ++first;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<long long> parse_integer(const std::string& cell) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) return std::nullopt;
    return v;
}

}  // namespace

LabeledDataset ingest_csv(const std::filesystem::path& path, const LabelColumn& label_column) {
    std::ifstream in(path);
    if (!in) throw IngestionError("cannot open " + path.string());

    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    std::string line;
    for (std::size_t ln = 1; std::getline(in, line); ++ln) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        rows.push_back(split_row(line));
        line_numbers.push_back(ln);
    }
    if (rows.empty()) throw IngestionError(path.string() + ": empty dataset");

    const std::size_t width = rows.front().size();
    std::size_t label_idx = 0;
    bool has_header = false;
    if (const auto* name = std::get_if<std::string>(&label_column)) {
        has_header = true;
        auto it = std::find(rows.front().begin(), rows.front().end(), *name);
        if (it == rows.front().end()) throw IngestionError(path.string() + ": no column named '" + *name + "'");
        label_idx = static_cast<std::size_t>(it - rows.front().begin());
    } else {
        label_idx = std::get<std::size_t>(label_column);
        if (label_idx >= width) {
            throw IngestionError(path.string() + ": label column " + std::to_string(label_idx) + " out of range (" +
                                 std::to_string(width) + " columns)");
        }
        has_header = true;
        for (std::size_t j = 0; j < width; ++j) {
            if (j != label_idx && parse_real(rows.front()[j])) has_header = false;
        }
    }
    if (width < 2) throw IngestionError(path.string() + ": need at least one feature column and a label column");

    const std::size_t first_data = has_header ? 1 : 0;
    const std::size_t n = rows.size() - first_data;
    if (n == 0) throw IngestionError(path.string() + ": empty dataset");
    const std::size_t d = width - 1;

    std::vector<double> x;
    x.reserve(n * d);
    std::vector<std::string> raw_labels;
    raw_labels.reserve(n);
    for (std::size_t r = first_data; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string where = path.string() + ": row " + std::to_string(line_numbers[r]);
        if (row.size() != width) {
            throw IngestionError(where + ": expected " + std::to_string(width) + " columns, found " +
                                 std::to_string(row.size()));
        }
        for (std::size_t j = 0; j < width; ++j) {
            if (j == label_idx) continue;
            auto v = parse_real(row[j]);
            if (!v) {
                throw IngestionError(where + ", column " + std::to_string(j) + ": non-numeric feature '" + row[j] +
                                     "'");
            }
            x.push_back(*v);
        }
        if (row[label_idx].empty()) throw IngestionError(where + ", column " + std::to_string(label_idx) + ": empty label");
        raw_labels.push_back(row[label_idx]);
    }

    std::vector<std::size_t> y(n);
    std::size_t num_classes = 0;
    const bool all_integer =
        std::all_of(raw_labels.begin(), raw_labels.end(), [](const std::string& s) { return parse_integer(s).has_value(); });
    if (all_integer) {
        std::map<long long, std::size_t> ids;
        for (const auto& s : raw_labels) ids.emplace(*parse_integer(s), 0);
        for (auto& [value, id] : ids) id = num_classes++;
        for (std::size_t i = 0; i < n; ++i) y[i] = ids.at(*parse_integer(raw_labels[i]));
    } else {
        std::unordered_map<std::string, std::size_t> ids;
        for (std::size_t i = 0; i < n; ++i) {
            auto [it, inserted] = ids.emplace(raw_labels[i], num_classes);
            if (inserted) ++num_classes;
            y[i] = it->second;
        }
    }
    return LabeledDataset{Tensor::constant({n, d}, std::move(x)), std::move(y), num_classes};
}

// Partition ------------------------------------------------------------------

PartitionPlan dirichlet_partition(const LabeledDataset& data, std::size_t num_clients, double alpha,
                                  std::uint64_t seed) {
    if (num_clients < 2) throw ConfigError("dirichlet_partition needs at least 2 clients");
    if (!(alpha > 0.0)) throw ConfigError("dirichlet_partition needs alpha > 0");
    if (num_clients > data.size()) {
        throw ConfigError("dirichlet_partition: " + std::to_string(num_clients) + " clients for " +
                          std::to_string(data.size()) + " samples");
    }

    Rng rng(derive_seed({seed, 0xD121C4LL}));
    std::vector<std::vector<std::size_t>> by_class(data.num_classes);
    for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);

    PartitionPlan plan;
    plan.alpha = alpha;
    plan.seed = seed;
    plan.clients.resize(num_clients);

    for (auto& members : by_class) {
        // Draws happen for every class, present or not, to keep the stream
        // aligned across datasets with the same class count.
        const auto q = rng.dirichlet(num_clients, alpha);
        rng.shuffle(members);
        const std::size_t nc = members.size();

        std::vector<std::size_t> counts(num_clients);
        std::vector<double> frac(num_clients);
        std::size_t assigned = 0;
        for (std::size_t k = 0; k < num_clients; ++k) {
            const double exact = static_cast<double>(nc) * q[k];
            counts[k] = static_cast<std::size_t>(std::floor(exact));
            frac[k] = exact - static_cast<double>(counts[k]);
            assigned += counts[k];
        }
        std::vector<std::size_t> order(num_clients);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
        for (std::size_t r = 0; assigned < nc; ++r, ++assigned) ++counts[order[r % num_clients]];

        std::size_t pos = 0;
        for (std::size_t k = 0; k < num_clients; ++k) {
            for (std::size_t t = 0; t < counts[k]; ++t) plan.clients[k].push_back(members[pos++]);
        }
    }

    for (auto& idx : plan.clients) std::sort(idx.begin(), idx.end());

    // Repair: every client must hold at least one sample.
    for (;;) {
        auto empty = std::find_if(plan.clients.begin(), plan.clients.end(), [](const auto& c) { return c.empty(); });
        if (empty == plan.clients.end()) break;
        auto largest = std::max_element(plan.clients.begin(), plan.clients.end(),
                                        [](const auto& a, const auto& b) { return a.size() < b.size(); });
        empty->push_back(largest->back());
        largest->pop_back();
    }
    return plan;
}

ShardSplit split_shard(std::span<const std::size_t> indices, double test_fraction, std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction >= 1.0) throw ConfigError("test_fraction must be in [0, 1)");
    std::vector<std::size_t> shuffled(indices.begin(), indices.end());
    Rng rng(derive_seed({seed, 0x5B117ULL}));
    rng.shuffle(shuffled);
    const std::size_t n = shuffled.size();
    std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    if (n >= 2 && test_fraction > 0.0) n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    if (n < 2) n_test = 0;
    ShardSplit split;
    split.test.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_test), shuffled.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

double label_entropy(const LabeledDataset& data, std::span<const std::size_t> indices) {
    if (indices.empty()) return 0.0;
    std::vector<std::size_t> hist(data.num_classes, 0);
    for (std::size_t i : indices) ++hist[data.labels[i]];
    double h = 0.0;
    const double n = static_cast<double>(indices.size());
    for (std::size_t count : hist) {
        if (count == 0) continue;
        const double p = static_cast<double>(count) / n;
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace dualproto
