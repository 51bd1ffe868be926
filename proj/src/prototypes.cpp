// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include "dualproto/prototypes.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "dualproto/errors.hpp"

namespace dualproto {

std::string to_string(PrototypeKind kind) {
    switch (kind) {
        case PrototypeKind::local:
            return "local";
        case PrototypeKind::global:
            return "global";
        case PrototypeKind::personalized:
            return "personalized";
    }
    return "unknown";
}

PrototypeSet::PrototypeSet(PrototypeKind kind, std::size_t num_classes, std::size_t d_z)
    : kind_(kind), d_z_(d_z), vectors_(num_classes) {}

std::span<const double> PrototypeSet::at(std::size_t c) const {
    if (!has(c)) throw ProtocolError("no " + to_string(kind_) + " prototype for class " + std::to_string(c));
    return *vectors_[c];
}

void PrototypeSet::set(std::size_t c, std::vector<double> vec) {
    if (c >= vectors_.size()) throw IndexError("prototype class " + std::to_string(c) + " out of range");
    if (vec.size() != d_z_) {
        throw DimensionError("prototype for class " + std::to_string(c) + " has length " + std::to_string(vec.size()) +
                             ", expected " + std::to_string(d_z_));
    }
    for (double v : vec) {
        if (!std::isfinite(v)) throw NumericalError("non-finite prototype entry for class " + std::to_string(c));
    }
    vectors_[c] = std::move(vec);
}

void PrototypeSet::erase(std::size_t c) {
    if (c < vectors_.size()) vectors_[c].reset();
}

std::vector<std::size_t> PrototypeSet::coverage() const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < vectors_.size(); ++c)
        if (vectors_[c]) out.push_back(c);
    return out;
}

bool PrototypeSet::covers_all() const {
    for (const auto& v : vectors_)
        if (!v) return false;
    return true;
}

bool PrototypeSet::operator==(const PrototypeSet& other) const {
    if (kind_ != other.kind_ || d_z_ != other.d_z_ || vectors_.size() != other.vectors_.size()) return false;
    for (std::size_t c = 0; c < vectors_.size(); ++c) {
        if (vectors_[c].has_value() != other.vectors_[c].has_value()) return false;
        if (vectors_[c] &&
            std::memcmp(vectors_[c]->data(), other.vectors_[c]->data(), d_z_ * sizeof(double)) != 0)
            return false;
    }
    return true;
}

std::string dump_text(const PrototypeSet& set) {
    std::string out;
    char buf[40];
    for (std::size_t c : set.coverage()) {
        out += std::to_string(c) + ":";
        for (double v : set.at(c)) {
            std::snprintf(buf, sizeof(buf), " %.17g", v);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

}  // namespace dualproto
