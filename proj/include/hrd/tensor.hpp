// Dense n-dimensional float tensor with reverse-mode automatic differentiation.
//
// Storage is row-major. The scalar type is a template parameter so the same
// operator definitions can run in float (training) and double (gradient
// checking). Ops record a tape of parent links; backward() walks the tape
// once in reverse topological order with a deterministic accumulation order.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace hrd {

// Validation failures (bad shapes, bad configs, bad input files). CLI maps
// these to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures (divergence, NaN loss). CLI maps these to exit code 2.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<int64_t>;

inline int64_t numel_of(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// Number of threads the compute kernels may use. Fold-level workers set this
// to 1 to avoid oversubscription.
int& op_threads();

// Thread-local switch: when false, ops do not record the tape (inference).
bool& grad_mode();

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
};

template <typename T>
class TensorT;

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // allocated on first backward touch
    bool requires_grad = false;
    const char* op = "leaf";

    // tape
    std::vector<TensorT<T>> parents;
    std::function<void(TensorNode<T>&)> backward_fn;

    int64_t numel() const { return static_cast<int64_t>(data.size()); }

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
    }
};

template <typename T>
class TensorT {
public:
    using Node = TensorNode<T>;

    TensorT() = default;

    static TensorT zeros(Shape shape) { return full(std::move(shape), T(0)); }

    static TensorT full(Shape shape, T value) {
        TensorT t;
        t.n_ = std::make_shared<Node>();
        t.n_->shape = std::move(shape);
        t.n_->data.assign(static_cast<size_t>(numel_of(t.n_->shape)), value);
        return t;
    }

    static TensorT from(Shape shape, std::vector<T> values) {
        if (numel_of(shape) != static_cast<int64_t>(values.size()))
            throw ValidationError("tensor data length " + std::to_string(values.size()) +
                                  " does not match shape " + shape_str(shape));
        TensorT t;
        t.n_ = std::make_shared<Node>();
        t.n_->shape = std::move(shape);
        t.n_->data = std::move(values);
        return t;
    }

    static TensorT scalar(T value) { return from({1}, {value}); }

    // TensorT is a shared-ownership handle: a const handle still exposes the
    // mutable node, mirroring shared_ptr semantics. Ops rely on this when
    // backward lambdas capture parent handles by value.
    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const { return n_->shape; }
    int64_t dim(size_t i) const { return n_->shape.at(i); }
    int64_t ndim() const { return static_cast<int64_t>(n_->shape.size()); }
    int64_t numel() const { return n_->numel(); }

    std::vector<T>& data() const { return n_->data; }
    T* ptr() const { return n_->data.data(); }
    std::vector<T>& grad() const { return n_->grad; }

    bool requires_grad() const { return n_->requires_grad; }
    const TensorT& set_requires_grad(bool v) const {
        n_->requires_grad = v;
        return *this;
    }

    void zero_grad() const {
        if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), T(0));
    }

    T item() const {
        if (numel() != 1) throw ValidationError("item() on non-scalar tensor " + shape_str(shape()));
        return n_->data[0];
    }

    Node* node() const { return n_.get(); }

    // Detached value copy: same data, no tape, no grad.
    TensorT detach() const {
        TensorT t;
        t.n_ = std::make_shared<Node>();
        t.n_->shape = n_->shape;
        t.n_->data = n_->data;
        return t;
    }

    // Reverse-mode sweep from a scalar loss. Each reachable node is visited
    // exactly once; accumulation order is fixed by the recorded parent order,
    // so repeated runs on identical inputs produce bit-identical gradients.
    void backward() const {
        if (numel() != 1) throw ValidationError("backward() requires a scalar loss, got " + shape_str(shape()));
        if (!n_->requires_grad) return;

        // iterative post-order DFS
        std::vector<Node*> order;
        std::unordered_set<Node*> seen;
        struct Frame {
            Node* node;
            size_t next_parent;
        };
        std::vector<Frame> stack;
        stack.push_back({n_.get(), 0});
        seen.insert(n_.get());
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next_parent < f.node->parents.size()) {
                Node* p = f.node->parents[f.next_parent++].node();
                if (p->requires_grad && !seen.count(p)) {
                    seen.insert(p);
                    stack.push_back({p, 0});
                }
            } else {
                order.push_back(f.node);
                stack.pop_back();
            }
        }

        n_->ensure_grad();
        n_->grad[0] += T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* node = *it;
            if (node->backward_fn) node->backward_fn(*node);
        }
    }

    // Internal: used by ops to stitch the tape together.
    static TensorT make_op(Shape shape, const char* op_name, std::vector<TensorT> parents,
                           std::function<void(Node&)> backward_fn) {
        TensorT t = zeros(std::move(shape));
        bool need = false;
        if (grad_mode()) {
            for (const auto& p : parents)
                if (p.defined() && p.requires_grad()) need = true;
        }
        if (need) {
            t.n_->requires_grad = true;
            t.n_->parents = std::move(parents);
            t.n_->backward_fn = std::move(backward_fn);
        }
        t.n_->op = op_name;
        return t;
    }

private:
    std::shared_ptr<Node> n_;
};

using Tensor = TensorT<float>;

}  // namespace hrd
