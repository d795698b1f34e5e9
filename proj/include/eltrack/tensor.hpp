#pragma once

// Reverse-mode automatic differentiation over 2-D row-major matrices.
//
// Every tensor is a (rows x cols) matrix; token sequences are (tokens x
// channels) and feature maps are (H*W x channels) with the spatial extent
// carried alongside. A Tensor is a cheap handle onto a shared graph node, so
// copying a Tensor aliases the same value and gradient.

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "eltrack/errors.hpp"

namespace eltrack {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

template <typename T>
struct Node {
    Mat<T> value;
    Mat<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward_fn;

    Mat<T>& grad_ref() {
        if (grad.size() == 0) {
            grad = Mat<T>::Zero(value.rows(), value.cols());
        }
        return grad;
    }
};

namespace detail {
bool& grad_mode_flag();
}  // namespace detail

/// While alive, newly created tensors record no graph edges.
class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

inline bool grad_enabled() { return detail::grad_mode_flag(); }

template <typename T>
class Tensor {
public:
    using Scalar = T;

    Tensor() = default;

    explicit Tensor(Mat<T> value, bool requires_grad = false)
        : node_(std::make_shared<Node<T>>()) {
        if (!value.allFinite()) {
            throw ValidationError("tensor values must be finite");
        }
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Index rows, Index cols) { return Tensor(Mat<T>::Zero(rows, cols)); }

    static Tensor scalar(T v) {
        Mat<T> m(1, 1);
        m(0, 0) = v;
        return Tensor(std::move(m));
    }

    /// Builds an op result; edges are kept only if grad mode is on and some
    /// parent needs a gradient.
    static Tensor from_op(Mat<T> value, std::vector<Tensor> parents,
                          std::function<void(Node<T>&)> backward_fn) {
        Tensor out;
        out.node_ = std::make_shared<Node<T>>();
        out.node_->value = std::move(value);
        if (!grad_enabled()) {
            return out;
        }
        bool any = false;
        for (const auto& p : parents) {
            any = any || p.requires_grad();
        }
        if (!any) {
            return out;
        }
        out.node_->requires_grad = true;
        out.node_->parents.reserve(parents.size());
        for (auto& p : parents) {
            out.node_->parents.push_back(p.node_);
        }
        out.node_->backward_fn = std::move(backward_fn);
        return out;
    }

    bool defined() const { return static_cast<bool>(node_); }
    const Mat<T>& value() const { return node_->value; }
    /// Direct write access; reserved for parameter updates and test setup.
    Mat<T>& mutable_value() { return node_->value; }
    const Mat<T>& grad() const { return node_->grad; }
    Mat<T>& grad_ref() { return node_->grad_ref(); }
    bool has_grad() const { return node_->grad.size() != 0; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    Index rows() const { return node_->value.rows(); }
    Index cols() const { return node_->value.cols(); }
    Index size() const { return node_->value.size(); }
    T item() const {
        if (size() != 1) {
            throw ShapeError("item() needs a 1x1 tensor");
        }
        return node_->value(0, 0);
    }
    void zero_grad() { node_->grad.resize(0, 0); }
    Node<T>* node() const { return node_.get(); }
    const std::shared_ptr<Node<T>>& shared_node() const { return node_; }

    /// Backpropagates from a 1x1 tensor, accumulating into every leaf that
    /// requires a gradient.
    void backward() const {
        if (size() != 1) {
            throw ShapeError("backward() needs a scalar (1x1) root");
        }
        if (!requires_grad()) {
            return;
        }
        std::vector<Node<T>*> order;
        std::unordered_set<Node<T>*> seen;
        // Iterative post-order DFS.
        std::vector<std::pair<Node<T>*, std::size_t>> stack;
        stack.emplace_back(node_.get(), 0);
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& [n, next] = stack.back();
            if (next < n->parents.size()) {
                Node<T>* p = n->parents[next++].get();
                if (p->requires_grad && !seen.count(p)) {
                    seen.insert(p);
                    stack.emplace_back(p, 0);
                }
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
        node_->grad_ref()(0, 0) += T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node<T>* n = *it;
            if (n->backward_fn && n->grad.size() != 0) {
                n->backward_fn(*n);
            }
        }
    }

private:
    std::shared_ptr<Node<T>> node_;
};

/// Accumulates g into parent i of n when that parent tracks gradients.
template <typename T, typename Expr>
inline void accumulate(Node<T>& n, std::size_t i, const Expr& g) {
    Node<T>& p = *n.parents[i];
    if (p.requires_grad) {
        p.grad_ref() += g;
    }
}

}  // namespace eltrack
