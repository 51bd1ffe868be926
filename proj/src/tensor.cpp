// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include "dualproto/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dualproto/errors.hpp"

namespace dualproto {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

// Tensor -----------------------------------------------------------------

Tensor::Tensor() : Tensor(make({}, {0.0}, false)) {}

Tensor Tensor::make(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_size(shape) != values.size()) {
        throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                             std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    return make(std::move(shape), std::move(values), false);
}

Tensor Tensor::variable(Shape shape, std::vector<double> values) {
    return make(std::move(shape), std::move(values), true);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = shape_size(shape);
    return make(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return make({}, {value}, requires_grad);
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw DimensionError("rows() needs a matrix, got " + shape_str(shape()));
    return node_->shape[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw DimensionError("cols() needs a matrix, got " + shape_str(shape()));
    return node_->shape[1];
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return node_->values[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    return node_->values[r * cols() + c];
}

std::span<const double> Tensor::grad() const {
    if (node_->grad.empty()) throw ContractError("tensor has no accumulated gradient");
    return node_->grad;
}

Tensor Tensor::clone() const {
    return make(node_->shape, node_->values, node_->requires_grad);
}

// Tape -------------------------------------------------------------------

Tensor Tape::record(const char* op, Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                    BackwardFn backward) {
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericalError(std::string("non-finite value produced by ") + op);
    }
    const bool needs_grad =
        recording_ && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    Tensor out = Tensor::make(std::move(shape), std::move(values), needs_grad);
    if (needs_grad) entries_.push_back(Entry{op, std::move(inputs), out, std::move(backward)});
    return out;
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1) throw ContractError("backward needs a scalar loss, got " + shape_str(loss.shape()));
    auto loss_it = std::find_if(entries_.begin(), entries_.end(),
                                [&](const Entry& e) { return e.output.same(loss); });
    if (loss_it == entries_.end()) throw ContractError("loss was not recorded on this tape");

    std::vector<Tensor::Node*> touched;
    auto enroll = [&](const Tensor& t) {
        Tensor::Node* n = t.node_.get();
        if (!n->requires_grad || n->in_sweep) return;
        n->in_sweep = true;
        n->adjoint.assign(n->values.size(), 0.0);
        touched.push_back(n);
    };
    for (const Entry& e : entries_) {
        enroll(e.output);
        for (const Tensor& in : e.inputs) enroll(in);
    }

    loss.node_->adjoint[0] = 1.0;
    std::vector<std::vector<double>*> in_adj;
    for (auto it = std::make_reverse_iterator(loss_it + 1); it != entries_.rend(); ++it) {
        in_adj.clear();
        for (const Tensor& in : it->inputs) in_adj.push_back(in.requires_grad() ? &in.node_->adjoint : nullptr);
        it->backward(it->output.node_->adjoint, in_adj);
    }

    for (Tensor::Node* n : touched) {
        if (n->grad.empty()) n->grad.assign(n->values.size(), 0.0);
        for (std::size_t i = 0; i < n->grad.size(); ++i) n->grad[i] += n->adjoint[i];
        n->adjoint.clear();
        n->adjoint.shrink_to_fit();
        n->in_sweep = false;
    }
}

// Helpers ----------------------------------------------------------------

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

void require_matrix(const char* op, const Tensor& a) {
    if (a.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

void require_vector(const char* op, const Tensor& a) {
    if (a.rank() != 1) throw DimensionError(std::string(op) + ": expected a vector, got " + shape_str(a.shape()));
}

template <typename Fwd, typename Deriv>
Tensor unary(Tape& tape, const char* op, const Tensor& a, Fwd fwd, Deriv deriv) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a[i]);
    std::vector<double> outv = out;
    return tape.record(op, a.shape(), std::move(out), {a},
                       [a, outv = std::move(outv), deriv](std::span<const double> g,
                                                           std::span<std::vector<double>* const> in) {
                           auto& da = *in[0];
                           for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * deriv(a[i], outv[i]);
                       });
}

}  // namespace

// Linear algebra ---------------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    require_matrix("matmul", a);
    require_matrix("matmul", b);
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw DimensionError("matmul: inner dimensions disagree " + shape_str(a.shape()) + " . " +
                             shape_str(b.shape()));
    }
    std::vector<double> out(m * n, 0.0);
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
        double* row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            const double* brow = bv.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
        }
    }
    return tape.record("matmul", {m, n}, std::move(out), {a, b},
                       [a, b, m, k, n](std::span<const double> g, std::span<std::vector<double>* const> in) {
                           const auto av = a.values();
                           const auto bv = b.values();
                           if (in[0]) {
                               auto& da = *in[0];
                               for (std::size_t i = 0; i < m; ++i)
                                   for (std::size_t p = 0; p < k; ++p) {
                                       double acc = 0.0;
                                       for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
                                       da[i * k + p] += acc;
                                   }
                           }
                           if (in[1]) {
                               auto& db = *in[1];
                               for (std::size_t i = 0; i < m; ++i)
                                   for (std::size_t p = 0; p < k; ++p) {
                                       const double aip = av[i * k + p];
                                       for (std::size_t j = 0; j < n; ++j) db[p * n + j] += aip * g[i * n + j];
                                   }
                           }
                       });
}

Tensor add_row_broadcast(Tape& tape, const Tensor& a, const Tensor& bias) {
    require_matrix("add_row_broadcast", a);
    require_vector("add_row_broadcast", bias);
    const std::size_t m = a.rows(), n = a.cols();
    if (bias.size() != n) {
        throw DimensionError("add_row_broadcast: bias " + shape_str(bias.shape()) + " vs rows of " +
                             shape_str(a.shape()));
    }
    std::vector<double> out(a.values().begin(), a.values().end());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bias[j];
    return tape.record("add_row_broadcast", a.shape(), std::move(out), {a, bias},
                       [m, n](std::span<const double> g, std::span<std::vector<double>* const> in) {
                           if (in[0])
                               for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i];
                           if (in[1])
                               for (std::size_t i = 0; i < m; ++i)
                                   for (std::size_t j = 0; j < n; ++j) (*in[1])[j] += g[i * n + j];
                       });
}

// Elementwise ------------------------------------------------------------

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return tape.record("add", a.shape(), std::move(out), {a, b},
                       [](std::span<const double> g, std::span<std::vector<double>* const> in) {
                           for (auto* d : in)
                               if (d)
                                   for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
                       });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return tape.record("sub", a.shape(), std::move(out), {a, b},
                       [](std::span<const double> g, std::span<std::vector<double>* const> in) {
                           if (in[0])
                               for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i];
                           if (in[1])
                               for (std::size_t i = 0; i < g.size(); ++i) (*in[1])[i] -= g[i];
                       });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return tape.record("mul", a.shape(), std::move(out), {a, b},
                       [a, b](std::span<const double> g, std::span<std::vector<double>* const> in) {
                           if (in[0])
                               for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] * b[i];
                           if (in[1])
                               for (std::size_t i = 0; i < g.size(); ++i) (*in[1])[i] += g[i] * a[i];
                       });
}

Tensor div(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape("div", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (b[i] == 0.0) throw DegenerateInputError("div: division by zero at element " + std::to_string(i));
        out[i] = a[i] / b[i];
    }
    return tape.record("div", a.shape(), std::move(out), {a, b},
                       [a, b](std::span<const double> g, std::span<std::vector<double>* const> in) {
                           if (in[0])
                               for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] / b[i];
                           if (in[1])
                               for (std::size_t i = 0; i < g.size(); ++i)
                                   (*in[1])[i] -= g[i] * a[i] / (b[i] * b[i]);
                       });
}

Tensor affine(Tape& tape, const Tensor& a, double scale, double shift) {
    return unary(
        tape, "affine", a, [=](double x) { return scale * x + shift; }, [=](double, double) { return scale; });
}

Tensor relu(Tape& tape, const Tensor& a) {
    return unary(
        tape, "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(Tape& tape, const Tensor& a) {
    return unary(
        tape, "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(Tape& tape, const Tensor& a) {
    for (double v : a.values()) {
        if (!(v > 0.0)) throw DegenerateInputError("log of non-positive value");
    }
    return unary(
        tape, "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

// Reductions -------------------------------------------------------------

Tensor sum(Tape& tape, const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return tape.record("sum", {}, {s}, {a}, [](std::span<const double> g, std::span<std::vector<double>* const> in) {
        for (double& d : *in[0]) d += g[0];
    });
}

Tensor mean(Tape& tape, const Tensor& a) {
    if (a.size() == 0) throw DimensionError("mean of empty tensor");
    double s = 0.0;
    for (double v : a.values()) s += v;
    const double n = static_cast<double>(a.size());
    return tape.record("mean", {}, {s / n}, {a},
                       [n](std::span<const double> g, std::span<std::vector<double>* const> in) {
                           for (double& d : *in[0]) d += g[0] / n;
                       });
}

Tensor row_sum(Tape& tape, const Tensor& a) {
    require_matrix("row_sum", a);
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i] += a[i * n + j];
    return tape.record("row_sum", {m}, std::move(out), {a},
                       [n](std::span<const double> g, std::span<std::vector<double>* const> in) {
                           auto& da = *in[0];
                           for (std::size_t i = 0; i < g.size(); ++i)
                               for (std::size_t j = 0; j < n; ++j) da[i * n + j] += g[i];
                       });
}

Tensor pick(Tape& tape, const Tensor& a, std::span<const std::size_t> index) {
    require_matrix("pick", a);
    const std::size_t m = a.rows(), n = a.cols();
    if (index.size() != m) {
        throw DimensionError("pick: " + std::to_string(index.size()) + " indices for " + shape_str(a.shape()));
    }
    std::vector<std::size_t> idx(index.begin(), index.end());
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (idx[i] >= n) throw IndexError("pick: index " + std::to_string(idx[i]) + " out of range " + std::to_string(n));
        out[i] = a[i * n + idx[i]];
    }
    return tape.record("pick", {m}, std::move(out), {a},
                       [idx = std::move(idx), n](std::span<const double> g, std::span<std::vector<double>* const> in) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i * n + idx[i]] += g[i];
                       });
}

// Probability ------------------------------------------------------------

Tensor log_softmax_pick_rows(Tape& tape, const Tensor& logits, std::span<const std::size_t> labels) {
    require_matrix("log_softmax_pick", logits);
    const std::size_t m = logits.rows(), c = logits.cols();
    if (labels.size() != m) {
        throw DimensionError("log_softmax_pick: " + std::to_string(labels.size()) + " labels for " +
                             shape_str(logits.shape()));
    }
    std::vector<std::size_t> lab(labels.begin(), labels.end());
    std::vector<double> out(m);
    std::vector<double> probs(m * c);
    for (std::size_t i = 0; i < m; ++i) {
        if (lab[i] >= c) {
            throw IndexError("log_softmax_pick: label " + std::to_string(lab[i]) + " out of range for " +
                             std::to_string(c) + " classes");
        }
        const double* row = logits.values().data() + i * c;
        const double mx = *std::max_element(row, row + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
        const double log_z = std::log(z);
        for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - mx - log_z);
        out[i] = row[lab[i]] - mx - log_z;
    }
    return tape.record("log_softmax_pick", {m}, std::move(out), {logits},
                       [lab = std::move(lab), probs = std::move(probs), c](std::span<const double> g,
                                                                          std::span<std::vector<double>* const> in) {
                           auto& d = *in[0];
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               for (std::size_t j = 0; j < c; ++j) d[i * c + j] -= g[i] * probs[i * c + j];
                               d[i * c + lab[i]] += g[i];
                           }
                       });
}

Tensor log_softmax_pick(Tape& tape, const Tensor& logits, std::size_t label) {
    require_vector("log_softmax_pick", logits);
    const std::size_t c = logits.size();
    if (label >= c) {
        throw IndexError("log_softmax_pick: label " + std::to_string(label) + " out of range for " +
                         std::to_string(c) + " classes");
    }
    const auto row = logits.values();
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double log_z = std::log(z);
    std::vector<double> probs(c);
    for (std::size_t j = 0; j < c; ++j) probs[j] = std::exp(row[j] - mx - log_z);
    return tape.record("log_softmax_pick", {}, {row[label] - mx - log_z}, {logits},
                       [probs = std::move(probs), label](std::span<const double> g,
                                                        std::span<std::vector<double>* const> in) {
                           auto& d = *in[0];
                           for (std::size_t j = 0; j < probs.size(); ++j) d[j] -= g[0] * probs[j];
                           d[label] += g[0];
                       });
}

// Geometry ---------------------------------------------------------------

namespace {

// Backward of y = x / ||x|| for one row: dx = (g - y (y . g)) / ||x||.
void normalize_backward(const double* g, const double* y, double norm, double* dx, std::size_t d) {
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += y[j] * g[j];
    for (std::size_t j = 0; j < d; ++j) dx[j] += (g[j] - y[j] * dot) / norm;
}

}  // namespace

Tensor l2_normalize_rows(Tape& tape, const Tensor& a) {
    require_matrix("l2_normalize_rows", a);
    const std::size_t m = a.rows(), d = a.cols();
    std::vector<double> out(m * d);
    std::vector<double> norms(m);
    for (std::size_t i = 0; i < m; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) sq += a[i * d + j] * a[i * d + j];
        const double norm = std::sqrt(sq);
        if (!(norm > kNormFloor)) {
            throw DegenerateInputError("l2_normalize: row " + std::to_string(i) + " has near-zero norm");
        }
        norms[i] = norm;
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = a[i * d + j] / norm;
    }
    std::vector<double> y = out;
    return tape.record("l2_normalize", a.shape(), std::move(out), {a},
                       [y = std::move(y), norms = std::move(norms), d](std::span<const double> g,
                                                                       std::span<std::vector<double>* const> in) {
                           for (std::size_t i = 0; i < norms.size(); ++i)
                               normalize_backward(g.data() + i * d, y.data() + i * d, norms[i],
                                                  in[0]->data() + i * d, d);
                       });
}

Tensor l2_normalize(Tape& tape, const Tensor& v) {
    require_vector("l2_normalize", v);
    const std::size_t d = v.size();
    double sq = 0.0;
    for (double x : v.values()) sq += x * x;
    const double norm = std::sqrt(sq);
    if (!(norm > kNormFloor)) throw DegenerateInputError("l2_normalize: vector has near-zero norm");
    std::vector<double> out(d);
    for (std::size_t j = 0; j < d; ++j) out[j] = v[j] / norm;
    std::vector<double> y = out;
    return tape.record("l2_normalize", v.shape(), std::move(out), {v},
                       [y = std::move(y), norm, d](std::span<const double> g,
                                                   std::span<std::vector<double>* const> in) {
                           normalize_backward(g.data(), y.data(), norm, in[0]->data(), d);
                       });
}

Tensor euclidean_distance(Tape& tape, const Tensor& a, const Tensor& b) {
    require_vector("euclidean_distance", a);
    require_vector("euclidean_distance", b);
    if (a.size() != b.size()) {
        throw DimensionError("euclidean_distance: length mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
    double sq = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) sq += (a[j] - b[j]) * (a[j] - b[j]);
    const double dist = std::sqrt(sq);
    return tape.record("euclidean_distance", {}, {dist}, {a, b},
                       [a, b, dist](std::span<const double> g, std::span<std::vector<double>* const> in) {
                           if (dist == 0.0) return;
                           for (std::size_t j = 0; j < a.size(); ++j) {
                               const double u = g[0] * (a[j] - b[j]) / dist;
                               if (in[0]) (*in[0])[j] += u;
                               if (in[1]) (*in[1])[j] -= u;
                           }
                       });
}

Tensor pairwise_distance(Tape& tape, const Tensor& a, const Tensor& b) {
    require_matrix("pairwise_distance", a);
    require_matrix("pairwise_distance", b);
    const std::size_t m = a.rows(), n = b.rows(), d = a.cols();
    if (b.cols() != d) {
        throw DimensionError("pairwise_distance: feature widths differ " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double sq = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = a[i * d + k] - b[j * d + k];
                sq += diff * diff;
            }
            out[i * n + j] = std::sqrt(sq);
        }
    std::vector<double> dist = out;
    return tape.record("pairwise_distance", {m, n}, std::move(out), {a, b},
                       [a, b, dist = std::move(dist), m, n, d](std::span<const double> g,
                                                               std::span<std::vector<double>* const> in) {
                           for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j) {
                                   const double dij = dist[i * n + j];
                                   if (dij == 0.0) continue;
                                   const double w = g[i * n + j] / dij;
                                   for (std::size_t k = 0; k < d; ++k) {
                                       const double u = w * (a[i * d + k] - b[j * d + k]);
                                       if (in[0]) (*in[0])[i * d + k] += u;
                                       if (in[1]) (*in[1])[j * d + k] -= u;
                                   }
                               }
                       });
}

}  // namespace dualproto
