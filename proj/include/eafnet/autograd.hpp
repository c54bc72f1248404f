#pragma once

// Tape-based reverse-mode differentiation.
//
// A Var is a shared handle to a value and its gradient accumulator. Ops take
// a Graph, compute their output eagerly and, when any input requires a
// gradient, push a backward closure onto the graph's tape. Graph::backward
// replays the tape in exact reverse order; gradients add up at fan-out.

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eafnet/tensor.hpp"

namespace eafnet::autograd {

template <class T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;

    bool has_grad() const { return !grad.empty(); }
    Tensor<T>& grad_ref()
    {
        if (grad.empty()) grad = Tensor<T>(value.shape());
        return grad;
    }
};

template <class T>
class Var {
public:
    Var() = default;
    explicit Var(Tensor<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>())
    {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    bool defined() const { return static_cast<bool>(node_); }
    const Tensor<T>& value() const { return node_->value; }
    Tensor<T>& value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool has_grad() const { return node_ && node_->has_grad(); }
    // Gradient accumulator; allocated as zeros on first access.
    Tensor<T>& grad() { return node_->grad_ref(); }
    void zero_grad()
    {
        if (node_ && node_->has_grad()) node_->grad.fill(T(0));
    }
    void set_requires_grad(bool v) { node_->requires_grad = v; }

    const std::shared_ptr<Node<T>>& node() const { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

template <class T>
class Graph {
public:
    explicit Graph(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }
    void set_check_finite(bool v) { check_finite_ = v; }
    bool check_finite() const { return check_finite_; }
    std::size_t size() const { return tape_.size(); }

    void record(std::function<void()> backward_fn)
    {
        if (recording_) tape_.push_back(std::move(backward_fn));
    }

    // Seeds d(root)/d(root) = 1 and runs every recorded backward step in
    // reverse order. The tape is consumed.
    void backward(Var<T>& root)
    {
        if (!root.requires_grad()) throw std::logic_error("backward: root does not require grad");
        root.grad().fill(T(1));
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
        tape_.clear();
    }

private:
    std::vector<std::function<void()>> tape_;
    bool recording_ = true;
    bool check_finite_ = false;
};

template <class T>
Var<T> make_output(Graph<T>& g, Tensor<T> value, std::initializer_list<const Var<T>*> inputs,
                   const char* op_name = "op")
{
    if (g.check_finite() && !value.all_finite()) {
        throw std::runtime_error(std::string("non-finite value produced by ") + op_name);
    }
    bool rg = false;
    if (g.recording()) {
        for (const Var<T>* v : inputs) rg = rg || (v && v->requires_grad());
    }
    return Var<T>(std::move(value), rg);
}

template <class T>
Var<T> make_output(Graph<T>& g, Tensor<T> value, const std::vector<Var<T>>& inputs, const char* op_name = "op")
{
    if (g.check_finite() && !value.all_finite()) {
        throw std::runtime_error(std::string("non-finite value produced by ") + op_name);
    }
    bool rg = false;
    if (g.recording()) {
        for (const auto& v : inputs) rg = rg || v.requires_grad();
    }
    return Var<T>(std::move(value), rg);
}

// Test-only mutation hooks used to prove the gradient checker can fail.
// Fingerprint of every piecewise branch taken (ReLU masks, max-pool argmax)
// while non-null; the gradient checker uses it to spot stencils that straddle
// a kink.
namespace kink_probe {
inline thread_local std::uint64_t* signature = nullptr;

inline void fold(std::uint64_t v)
{
    if (!signature) return;
    std::uint64_t h = *signature ^ (v + 0x9e3779b97f4a7c15ULL + (*signature << 6) + (*signature >> 2));
    *signature = h;
}
}  // namespace kink_probe

namespace fault_injection {
inline bool corrupt_sigmoid_backward = false;
}

}  // namespace eafnet::autograd
