#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "mselab/numerics/rng.hpp"

namespace mse::num {

template <typename T>
struct Tensor;

// One autodiff graph node. `backward` reads the output's grad buffer and
// accumulates into the parents' grad buffers.
template <typename T>
struct Node {
    std::vector<Tensor<T>> parents;
    std::function<void(Tensor<T>&)> backward;
};

// Dense row-major tensor with shared storage. Copies are shallow: they alias
// the same data/grad buffers, which is what the tape needs.
template <typename T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::shared_ptr<std::vector<T>> data;
    std::shared_ptr<std::vector<T>> grad;
    std::shared_ptr<Node<T>> node;
    bool requires_grad = false;

    Tensor() = default;

    static std::size_t product(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
        Tensor t;
        t.shape = std::move(shape);
        t.data = std::make_shared<std::vector<T>>(product(t.shape), T(0));
        t.requires_grad = requires_grad;
        // Allocate the grad buffer up front so every shallow copy aliases it.
        if (requires_grad) t.ensure_grad();
        return t;
    }

    static Tensor full(std::vector<std::size_t> shape, T value) {
        Tensor t = zeros(std::move(shape));
        std::fill(t.data->begin(), t.data->end(), value);
        return t;
    }

    static Tensor from(std::vector<std::size_t> shape, std::vector<T> values,
                       bool requires_grad = false) {
        if (product(shape) != values.size()) {
            throw std::invalid_argument("tensor: shape does not match value count");
        }
        Tensor t;
        t.shape = std::move(shape);
        t.data = std::make_shared<std::vector<T>>(std::move(values));
        t.requires_grad = requires_grad;
        if (requires_grad) t.ensure_grad();
        return t;
    }

    static Tensor randn(std::vector<std::size_t> shape, RngState& rng, T stddev,
                        bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (T& x : *t.data) x = static_cast<T>(rng.normal()) * stddev;
        return t;
    }

    // Flags this tensor as a trainable leaf and allocates its grad buffer so
    // all existing and future copies alias the same accumulator.
    void set_requires_grad(bool rg) {
        requires_grad = rg;
        if (rg) ensure_grad();
    }

    std::size_t numel() const { return data ? data->size() : 0; }
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

    std::vector<T>& v() { return *data; }
    const std::vector<T>& v() const { return *data; }

    T& at(std::size_t r, std::size_t c) { return (*data)[r * cols() + c]; }
    const T& at(std::size_t r, std::size_t c) const { return (*data)[r * cols() + c]; }

    T scalar() const {
        if (numel() != 1) throw std::logic_error("tensor: scalar() on non-scalar");
        return (*data)[0];
    }

    void ensure_grad() {
        if (!grad) grad = std::make_shared<std::vector<T>>(numel(), T(0));
    }

    void zero_grad() {
        if (grad) std::fill(grad->begin(), grad->end(), T(0));
    }

    bool same_buffer(const Tensor& o) const { return data == o.data; }
};

// Reverse-mode sweep from a scalar root. Topological order by DFS over node
// pointers; each node's backward runs exactly once, after its output grad has
// fully accumulated.
template <typename T>
void backward(Tensor<T>& root) {
    if (root.numel() != 1) throw std::logic_error("backward: root must be scalar");
    root.ensure_grad();
    (*root.grad)[0] = T(1);
    if (!root.node) return;

    std::vector<Tensor<T>*> order;
    std::unordered_set<Node<T>*> visited;

    // Iterative postorder DFS.
    struct Frame {
        Tensor<T>* t;
        std::size_t next_child = 0;
    };
    std::vector<Frame> stack;
    stack.push_back({&root, 0});
    visited.insert(root.node.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        Node<T>* n = f.t->node.get();
        if (f.next_child < n->parents.size()) {
            Tensor<T>& p = n->parents[f.next_child++];
            if (p.node && visited.insert(p.node.get()).second) {
                stack.push_back({&p, 0});
            }
        } else {
            order.push_back(f.t);
            stack.pop_back();
        }
    }

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor<T>& t = **it;
        if (t.node && t.node->backward) t.node->backward(t);
    }
}

}  // namespace mse::num
