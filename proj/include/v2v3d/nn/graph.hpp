#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "v2v3d/errors.hpp"

namespace v2v3d::nn {

// Up to 4 dims; the meaning of each axis is fixed per op (conv2d works on
// [c,h,w], weights are [co,ci,k,k]). Last axis is fastest.
struct Shape {
    std::array<int, 4> d{1, 1, 1, 1};
    int rank = 0;

    static Shape of(std::initializer_list<int> dims) {
        Shape s;
        if (dims.size() > 4) throw ShapeError("Shape: at most 4 dims");
        s.rank = static_cast<int>(dims.size());
        int i = 0;
        for (int v : dims) {
            if (v < 1) throw ShapeError("Shape: dims must be >= 1");
            s.d[static_cast<std::size_t>(i++)] = v;
        }
        return s;
    }

    int operator[](int i) const { return d[static_cast<std::size_t>(i)]; }
    bool operator==(const Shape& o) const { return rank == o.rank && d == o.d; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::size_t numel() const {
        std::size_t n = 1;
        for (int i = 0; i < rank; ++i) n *= static_cast<std::size_t>(d[static_cast<std::size_t>(i)]);
        return n;
    }

    std::string str() const {
        std::string s;
        for (int i = 0; i < rank; ++i) {
            if (i) s += "x";
            s += std::to_string(d[static_cast<std::size_t>(i)]);
        }
        return s.empty() ? "scalar" : s;
    }
};

// One value in the computation graph. Nodes are created in topological order
// (parents first), so the creation id doubles as a topological key for the
// backward sweep. backward_fn scatters this node's grad into its parents'.
template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backward_fn;
    std::uint64_t id = 0;
    bool needs_grad = false;
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

namespace detail {
inline std::atomic<std::uint64_t> node_id_counter{0};
}

template <typename T>
NodePtr<T> make_node(Shape shape) {
    auto n = std::make_shared<Node<T>>();
    n->shape = shape;
    n->value.assign(shape.numel(), T(0));
    n->grad.assign(shape.numel(), T(0));
    n->id = ++detail::node_id_counter;
    return n;
}

template <typename T>
NodePtr<T> leaf(Shape shape, std::vector<T> data, bool needs_grad) {
    if (data.size() != shape.numel())
        throw ShapeError("leaf: data size " + std::to_string(data.size()) + " vs shape " + shape.str());
    auto n = make_node<T>(shape);
    n->value = std::move(data);
    n->needs_grad = needs_grad;
    return n;
}

// Reverse-mode sweep from a scalar root. Grads must be fresh (nodes start
// zeroed); each reachable node's rule runs exactly once, children before
// parents, ordered by descending creation id.
template <typename T>
void backward(const NodePtr<T>& root) {
    if (root->value.size() != 1) throw ShapeError("backward: root must be scalar");
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<Node<T>*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        Node<T>* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents)
            if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(), [](const Node<T>* a, const Node<T>* b) { return a->id > b->id; });
    root->grad[0] = T(1);
    for (Node<T>* n : order)
        if (n->backward_fn && n->needs_grad) n->backward_fn(*n);
}

// Trainable tensor plus its optimizer state. attach() plants a fresh leaf in
// the current graph; after backward the gradient is read from that leaf.
template <typename T>
struct Param {
    std::string name;
    Shape shape;
    std::vector<T> value;
    std::vector<T> m, v; // adaptive-moment state
    std::int64_t step = 0;
    NodePtr<T> node;

    Param() = default;
    Param(std::string name_, Shape shape_)
        : name(std::move(name_)), shape(shape_), value(shape_.numel(), T(0)),
          m(shape_.numel(), T(0)), v(shape_.numel(), T(0)) {}

    NodePtr<T>& attach() {
        node = leaf<T>(shape, value, true);
        return node;
    }
    void detach() { node.reset(); }
};

} // namespace v2v3d::nn
