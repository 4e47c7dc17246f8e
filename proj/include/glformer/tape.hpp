#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "glformer/tensor.hpp"

namespace glformer {

class Tape;
using NodeId = std::int32_t;

// Handle to a tensor value, optionally tracked on a tape. A default or
// Tensor-constructed Var is an untracked constant; operations on constants
// evaluate eagerly and record nothing. An operation whose inputs live on a
// tape records a pullback there and returns a tracked Var.
class Var {
public:
    Var() = default;
    Var(Tensor value) : value_(std::make_shared<const Tensor>(std::move(value))) {}
    Var(Tape* tape, NodeId id, std::shared_ptr<const Tensor> value)
        : value_(std::move(value)), tape_(tape), id_(id) {}

    const Tensor& value() const { return *value_; }
    const std::shared_ptr<const Tensor>& ptr() const { return value_; }
    bool tracked() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    NodeId id() const { return id_; }

    const std::vector<std::size_t>& shape() const { return value_->shape(); }

private:
    std::shared_ptr<const Tensor> value_ = std::make_shared<const Tensor>();
    Tape* tape_ = nullptr;
    NodeId id_ = -1;
};

// Reverse-mode tape: an ordered record of primitive operations. Nodes are
// appended in evaluation order, so every node's inputs precede it and the
// backward sweep is a single reverse pass. One forward/backward pass per tape;
// concurrent passes must use separate tapes (single-writer).
class Tape {
public:
    using Pullback = std::function<void(const Tensor& grad_out, Tape&)>;

    // Tracked input (parameter or data leaf).
    Var leaf(Tensor value);

    // Used by operations: appends a node holding the forward value and its
    // pullback. The pullback receives the accumulated output gradient and
    // adds into the input nodes' accumulators via accumulate().
    Var record(Tensor value, Pullback pullback);

    // Reverse sweep from a scalar output node. Gradients of nodes the output
    // does not depend on are exactly zero.
    void backward(const Var& output);

    // Gradient accumulated for a node by the last backward(); zeros if the
    // node was never touched. ContractError if v is not on this tape.
    Tensor gradient(const Var& v) const;

    void accumulate(NodeId id, const Tensor& grad);

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        std::shared_ptr<const Tensor> value;
        Pullback pullback; // empty for leaves
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

// Central finite differences (f(x+h*e_i) - f(x-h*e_i)) / (2h) per element.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h = 1e-5);

// ---- differentiable operations --------------------------------------------
// Each mirrors the plain kernel of the same name; gradients of every
// operation are covered by finite-difference tests.

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b); // elementwise
Var add_scalar(const Var& a, double c);
Var mul_scalar(const Var& a, double c);
Var relu(const Var& a);
Var softmax(const Var& x, std::size_t axis);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var reshape(const Var& a, std::vector<std::size_t> shape);
Var sum(const Var& a); // -> scalar Var (shape [])

Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& a, std::size_t r0, std::size_t r1);
Var slice_cols(const Var& a, std::size_t c0, std::size_t c1);

Var add_rowvec(const Var& a, const Var& v); // m x n + 1 x n, broadcast over rows
Var mul_rowvec(const Var& a, const Var& v); // m x n * 1 x n
Var mul_colvec(const Var& a, const Var& v); // m x n * m x 1

Var row_sums(const Var& a);  // m x n -> m x 1
Var mean_rows(const Var& a); // m x n -> 1 x n

// sqrt(max(x, 0)) with the zero-subgradient convention at 0. Exact-zero
// inputs occur structurally (self-distances), where the composed derivative
// is 0.
Var sqrt0(const Var& a);
Var recip(const Var& a);
Var sigmoid(const Var& a);

// Scale a matrix by a 1x1 (or scalar) Var.
Var scale(const Var& s, const Var& x);

// Elementwise multiply by an untracked 0/1 mask.
Var mask_mul(const Var& a, const Tensor& mask);

// D(i,j) = sum_d w_d * (r_i[d] - r_j[d])^2 for R: M x D, w: 1 x D.
// Differences are taken before squaring, so identical rows give exact zeros.
Var weighted_sqdist(const Var& r, const Var& w);

// Full cosine-similarity matrix of the rows of R; entries where either row
// norm is below `norm_eps` are 0 (with zero gradient).
Var cosine_matrix(const Var& r, double norm_eps = 1e-12);

// Three m x n matrices -> (m*n) x 3, column c holding the flattened c-th input.
Var stack_cols3(const Var& a, const Var& b, const Var& c);

} // namespace glformer
