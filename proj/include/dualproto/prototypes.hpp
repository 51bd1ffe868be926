// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dualproto {

enum class PrototypeKind : unsigned char { local = 0, global = 1, personalized = 2 };

std::string to_string(PrototypeKind kind);

/// Per-class d_z vectors; classes without a vector are absent.
class PrototypeSet {
public:
    PrototypeSet() = default;
    PrototypeSet(PrototypeKind kind, std::size_t num_classes, std::size_t d_z);

    PrototypeKind kind() const { return kind_; }
    void set_kind(PrototypeKind kind) { kind_ = kind; }
    std::size_t num_classes() const { return vectors_.size(); }
    std::size_t d_z() const { return d_z_; }

    bool has(std::size_t c) const { return c < vectors_.size() && vectors_[c].has_value(); }
    /// Throws ProtocolError when class c is absent.
    std::span<const double> at(std::size_t c) const;
    /// Throws DimensionError on wrong length, NumericalError on non-finite entries.
    void set(std::size_t c, std::vector<double> vec);
    void erase(std::size_t c);

    std::vector<std::size_t> coverage() const;
    bool covers_all() const;

    bool operator==(const PrototypeSet& other) const;

private:
    PrototypeKind kind_ = PrototypeKind::local;
    std::size_t d_z_ = 0;
    std::vector<std::optional<std::vector<double>>> vectors_;
};

/// One line per present class: "<class>: v0 v1 ..." with round-trip precision.
std::string dump_text(const PrototypeSet& set);

}  // namespace dualproto
