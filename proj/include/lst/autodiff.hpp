#pragma once

#include "lst/tensor.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace lst {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    // Accumulated gradient after Tape::backward; zeros for nodes that never received one.
    Tensor grad() const;
    bool requires_grad() const;

    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Linear record of primitive operations for reverse-mode differentiation.
// Nodes are appended in evaluation order, so parents always precede children
// and a reverse sweep is a valid topological order.
class Tape {
public:
    // Propagates the gradient stored at node `self` into its parents.
    using Backprop = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = true);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // Records an operation result. requires_grad is inherited from the parents.
    Var record(Tensor value, std::vector<std::size_t> parents, Backprop backprop);

    // Seeds d(root)/d(root) = 1 and sweeps the tape once. The root must hold a
    // single element. A tape can be swept only once.
    void backward(Var root);

    bool backward_done() const noexcept { return swept_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    Tensor grad(std::size_t id) const;

    // Gradient buffers used by Backprop implementations.
    const Vector& upstream(std::size_t id) const { return nodes_[id].grad; }
    // Returns the parent's gradient buffer, allocating zeros on first use, or
    // nullptr when the parent does not require a gradient.
    Vector* accumulator(std::size_t id);

private:
    struct Node {
        Tensor value;
        Vector grad;
        bool requires_grad = false;
        std::vector<std::size_t> parents;
        Backprop backprop;
    };

    void check_owned(const Var& v) const;

    std::vector<Node> nodes_;
    bool swept_ = false;
};

// ---------------------------------------------------------------------------
// Differentiable primitives. All operands must live on the same tape.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);
Var dot(Var a, Var b);
Var squared_norm(Var a);
Var reshape(Var a, Shape shape);

// a: [m x k], b: [k x n] -> [m x n]. Rank-1 b is treated as a [k x 1] column
// and the result keeps rank 1.
Var matmul(Var a, Var b);

// weight: [out x in], x: [in], bias: [out] -> weight * x + bias.
Var linear(Var x, Var weight, Var bias);

Var relu(Var a);
// log(1 + exp(a)), evaluated without overflow.
Var softplus(Var a);

// Cross-correlation (no kernel flip). x: [C_in x H x W], kernel:
// [C_out x C_in x kh x kw] -> [C_out x H' x W'] with
// H' = (H + 2 padding - kh) / stride + 1.
Var conv2d(Var x, Var kernel, int stride, int padding);
// Adds bias[c] to every element of channel c of a [C x H x W] tensor.
Var add_channel_bias(Var x, Var bias);
// Non-overlapping window mean over the spatial axes of [C x H x W].
Var avg_pool2d(Var x, int window);
Var max_pool2d(Var x, int window);

// -log softmax(logits)[label] over a rank-1 logit vector, computed with the
// max-subtraction trick. The gradient is softmax(logits) - onehot(label).
Var softmax_cross_entropy(Var logits, int label);

// Numerically stable softmax of a plain vector (no tape).
Vector softmax(const Vector& logits);

}  // namespace lst
