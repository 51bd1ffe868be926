// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exception hierarchy. Every module reports failures by throwing one of
// these; the CLI maps them onto stable exit codes.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dualproto {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or length disagreement between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input that would make an operation ill-defined (e.g. zero-norm vector).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

/// Caller violated an API precondition (e.g. backward on a non-scalar).
class ContractError : public Error {
public:
    using Error::Error;
};

/// A NaN or Inf appeared in the output of a tensor operation.
class NumericalError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IngestionError : public Error {
public:
    using Error::Error;
};

/// Client/server exchange invariants broken (missing prototypes, coverage).
class ProtocolError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    TrainingError(const std::string& what, std::size_t epoch, std::size_t step)
        : Error(what + " (epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ")"),
          epoch_(epoch), step_(step) {}

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t epoch_;
    std::size_t step_;
};

class CodecError : public Error {
public:
    CodecError(const std::string& what, std::size_t offset, std::string section = {})
        : Error("codec error at byte " + std::to_string(offset) +
                (section.empty() ? std::string() : " in section '" + section + "'") + ": " + what),
          offset_(offset), section_(std::move(section)) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& section() const noexcept { return section_; }

private:
    std::size_t offset_;
    std::string section_;
};

}  // namespace dualproto
