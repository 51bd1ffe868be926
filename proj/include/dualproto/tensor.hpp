// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense double-precision tensors with a reverse-mode tape.
//
// A Tensor is a cheap handle onto shared storage (shape, values, optional
// grad). Operations take the Tape they record on as their first argument.
// Outputs whose inputs all lack requires_grad are plain constants and are
// not recorded. Tape::backward runs one reverse sweep into scratch adjoints
// and then adds them into each tensor's grad, so repeated sweeps accumulate.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dualproto {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor {
public:
    /// Scalar zero constant.
    Tensor();

    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor variable(Shape shape, std::vector<double> values);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->values.size(); }
    /// Extent of dimension 0 / 1 for a matrix.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> values() const { return node_->values; }
    /// Writable view, for optimizers and initializers. Must not be used while
    /// a tape that recorded this tensor is still pending backward.
    std::span<double> mutable_values() { return node_->values; }
    double item() const;
    double operator[](std::size_t i) const { return node_->values[i]; }
    double at(std::size_t r, std::size_t c) const;

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    /// Throws ContractError when no gradient has been accumulated.
    std::span<const double> grad() const;
    void zero_grad() { node_->grad.clear(); }

    bool same(const Tensor& other) const { return node_ == other.node_; }
    /// Deep copy with fresh storage; keeps requires_grad, drops grad.
    Tensor clone() const;

private:
    struct Node {
        Shape shape;
        std::vector<double> values;
        std::vector<double> grad;
        std::vector<double> adjoint;
        bool requires_grad = false;
        bool in_sweep = false;
    };

    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    static Tensor make(Shape shape, std::vector<double> values, bool requires_grad);

    std::shared_ptr<Node> node_;

    friend class Tape;
};

class Tape {
public:
    /// Backward rule: receives the output adjoint and one adjoint buffer per
    /// input (nullptr for inputs that do not require grad) to add into.
    using BackwardFn =
        std::function<void(std::span<const double> out_adjoint, std::span<std::vector<double>* const> in_adjoints)>;

    explicit Tape(bool recording = true) : recording_(recording) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    bool recording() const { return recording_; }
    std::size_t size() const { return entries_.size(); }
    void clear() { entries_.clear(); }

    /// Populates grad on every tensor requiring grad that the tape touched.
    void backward(const Tensor& loss);

    /// Creates the output tensor of an operation and records it. Checks the
    /// values are finite.
    Tensor record(const char* op, Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                  BackwardFn backward);

private:
    struct Entry {
        const char* op;
        std::vector<Tensor> inputs;
        Tensor output;
        BackwardFn backward;
    };

    bool recording_;
    std::vector<Entry> entries_;
};

// Linear algebra ---------------------------------------------------------

/// a [m x k] . b [k x n] -> [m x n]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
/// a [m x n] + bias [n] broadcast over rows.
Tensor add_row_broadcast(Tape& tape, const Tensor& a, const Tensor& bias);

// Elementwise (same shape) -----------------------------------------------

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor div(Tape& tape, const Tensor& a, const Tensor& b);
/// scale * a + shift
Tensor affine(Tape& tape, const Tensor& a, double scale, double shift);
/// max(0, a); the subgradient at 0 is 0.
Tensor relu(Tape& tape, const Tensor& a);
Tensor exp(Tape& tape, const Tensor& a);
/// Natural log; non-positive inputs raise DegenerateInputError.
Tensor log(Tape& tape, const Tensor& a);

// Reductions and indexing --------------------------------------------------

Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);
/// [m x n] -> [m]
Tensor row_sum(Tape& tape, const Tensor& a);
/// out[i] = a[i, index[i]] for a [m x n].
Tensor pick(Tape& tape, const Tensor& a, std::span<const std::size_t> index);

// Probability -------------------------------------------------------------

/// log softmax(logits)[label] for logits [C], max-subtracted.
Tensor log_softmax_pick(Tape& tape, const Tensor& logits, std::size_t label);
/// Row-wise version: logits [m x C], labels [m] -> [m].
Tensor log_softmax_pick_rows(Tape& tape, const Tensor& logits, std::span<const std::size_t> labels);

// Geometry ------------------------------------------------------------------

inline constexpr double kNormFloor = 1e-12;

/// v / ||v|| for v [d]; ||v|| <= 1e-12 raises DegenerateInputError.
Tensor l2_normalize(Tape& tape, const Tensor& v);
/// Normalizes each row of a [m x d].
Tensor l2_normalize_rows(Tape& tape, const Tensor& a);
/// ||a - b|| for a, b [d] -> scalar. Gradient at a == b is taken as 0.
Tensor euclidean_distance(Tape& tape, const Tensor& a, const Tensor& b);
/// out[i, j] = ||a_i - b_j|| for a [m x d], b [n x d].
Tensor pairwise_distance(Tape& tape, const Tensor& a, const Tensor& b);

}  // namespace dualproto
