#pragma once

// Dense n-dimensional tensors with reverse-mode automatic differentiation.
// Values are row-major. A thread-local tape records executed operations;
// backward() replays it in reverse, accumulating gradients (sum over uses),
// then clears the record. Tensors are immutable after construction except
// their gradient buffers; values_mut() exists for initialization and
// optimizer updates between passes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace yowo {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ']';
    return os.str();
}

namespace detail {

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;  // empty until a gradient is first accumulated
    bool requires_grad = false;
};

inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace detail

// Disables tape recording for the lifetime of the guard (inference paths).
struct NoGradScope {
    bool prev;
    NoGradScope() : prev(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGradScope() { detail::grad_mode_flag() = prev; }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;
};

inline bool grad_enabled() { return detail::grad_mode_flag(); }

template <typename T>
class Tensor {
public:
    Tensor() = default;

    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
        : node_(std::make_shared<detail::TensorNode<T>>()) {
        if (shape_numel(shape) != values.size())
            throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                        " values for shape " + shape_str(shape));
        node_->shape = std::move(shape);
        node_->values = std::move(values);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
    }
    static Tensor ones(Shape shape, bool requires_grad = false) {
        std::size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, T(1)), requires_grad);
    }
    static Tensor full(Shape shape, T v, bool requires_grad = false) {
        std::size_t n = shape_numel(shape);
        return Tensor(std::move(shape), std::vector<T>(n, v), requires_grad);
    }
    static Tensor scalar(T v, bool requires_grad = false) {
        return Tensor(Shape{1}, std::vector<T>{v}, requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t numel() const { return node_->values.size(); }

    const std::vector<T>& values() const { return node_->values; }
    // Mutation is only legal outside a recorded forward pass.
    std::vector<T>& values_mut() { return node_->values; }

    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }

    bool has_grad() const { return node_ && !node_->grad.empty(); }
    const std::vector<T>& grad() const {
        if (node_->grad.empty()) node_->grad.assign(node_->values.size(), T(0));
        return node_->grad;
    }
    std::vector<T>& grad_buffer() {
        if (node_->grad.empty()) node_->grad.assign(node_->values.size(), T(0));
        return node_->grad;
    }
    void zero_grad() {
        if (node_) node_->grad.clear();
    }

    T value() const {
        if (numel() != 1) throw std::logic_error("value(): tensor is not scalar, shape " + shape_str(shape()));
        return node_->values[0];
    }
    T at(std::size_t i) const { return node_->values.at(i); }

    detail::TensorNode<T>* node() const { return node_.get(); }
    std::shared_ptr<detail::TensorNode<T>> node_ptr() const { return node_; }

private:
    std::shared_ptr<detail::TensorNode<T>> node_;
};

namespace detail {

template <typename T>
struct Tape {
    std::vector<std::function<void()>> entries;
};

template <typename T>
Tape<T>& tape() {
    thread_local Tape<T> t;
    return t;
}

template <typename T>
void record(const Tensor<T>& out, std::function<void()> fn) {
    if (out.requires_grad()) tape<T>().entries.push_back(std::move(fn));
}

template <typename T>
bool out_requires_grad(std::initializer_list<const Tensor<T>*> inputs) {
    if (!grad_mode_flag()) return false;
    for (const Tensor<T>* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

// Accumulates src (scaled elementwise by fn) into dst's grad buffer.
template <typename T>
void accumulate(const std::shared_ptr<TensorNode<T>>& node, const std::vector<T>& contrib) {
    if (node->grad.empty()) node->grad.assign(node->values.size(), T(0));
    for (std::size_t i = 0; i < contrib.size(); ++i) node->grad[i] += contrib[i];
}

}  // namespace detail

// Replays the record in reverse, accumulating gradients into every
// requires_grad tensor reachable from `loss`, then clears the record.
template <typename T>
void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1)
        throw std::logic_error("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    auto& tp = detail::tape<T>();
    if (tp.entries.empty())
        throw std::logic_error("backward: no recorded forward pass (record already consumed?)");
    loss.node()->grad.assign(1, T(1));
    for (auto it = tp.entries.rbegin(); it != tp.entries.rend(); ++it) (*it)();
    tp.entries.clear();
}

// Drops any partially recorded forward pass (error recovery, inference).
template <typename T>
void clear_record() {
    detail::tape<T>().entries.clear();
}

template <typename T>
std::size_t record_size() {
    return detail::tape<T>().entries.size();
}

// ---------------------------------------------------------------------------
// elementwise operations
// ---------------------------------------------------------------------------

namespace detail {

// Binary ops accept equal shapes or a 1-element scalar on either side.
template <typename T>
void check_binary_shapes(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() == b.shape() || a.numel() == 1 || b.numel() == 1) return;
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_binary_shapes(a, b, "add");
    const bool sa = a.numel() == 1 && b.numel() != 1;
    const bool sb = b.numel() == 1 && a.numel() != 1;
    const Shape& out_shape = sa ? b.shape() : a.shape();
    std::size_t n = shape_numel(out_shape);
    std::vector<T> out(n);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < n; ++i) out[i] = (sa ? av[0] : av[i]) + (sb ? bv[0] : bv[i]);
    Tensor<T> r(out_shape, std::move(out), detail::out_requires_grad<T>({&a, &b}));
    if (r.requires_grad()) {
        auto an = a.node_ptr(), bn = b.node_ptr(), rn = r.node_ptr();
        detail::record(r, [an, bn, rn, sa, sb, n] {
            if (rn->grad.empty()) return;
            const auto& g = rn->grad;
            if (an->requires_grad) {
                if (an->grad.empty()) an->grad.assign(an->values.size(), T(0));
                if (sa) { T s = 0; for (std::size_t i = 0; i < n; ++i) s += g[i]; an->grad[0] += s; }
                else    for (std::size_t i = 0; i < n; ++i) an->grad[i] += g[i];
            }
            if (bn->requires_grad) {
                if (bn->grad.empty()) bn->grad.assign(bn->values.size(), T(0));
                if (sb) { T s = 0; for (std::size_t i = 0; i < n; ++i) s += g[i]; bn->grad[0] += s; }
                else    for (std::size_t i = 0; i < n; ++i) bn->grad[i] += g[i];
            }
        });
    }
    return r;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_binary_shapes(a, b, "sub");
    const bool sa = a.numel() == 1 && b.numel() != 1;
    const bool sb = b.numel() == 1 && a.numel() != 1;
    const Shape& out_shape = sa ? b.shape() : a.shape();
    std::size_t n = shape_numel(out_shape);
    std::vector<T> out(n);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < n; ++i) out[i] = (sa ? av[0] : av[i]) - (sb ? bv[0] : bv[i]);
    Tensor<T> r(out_shape, std::move(out), detail::out_requires_grad<T>({&a, &b}));
    if (r.requires_grad()) {
        auto an = a.node_ptr(), bn = b.node_ptr(), rn = r.node_ptr();
        detail::record(r, [an, bn, rn, sa, sb, n] {
            if (rn->grad.empty()) return;
            const auto& g = rn->grad;
            if (an->requires_grad) {
                if (an->grad.empty()) an->grad.assign(an->values.size(), T(0));
                if (sa) { T s = 0; for (std::size_t i = 0; i < n; ++i) s += g[i]; an->grad[0] += s; }
                else    for (std::size_t i = 0; i < n; ++i) an->grad[i] += g[i];
            }
            if (bn->requires_grad) {
                if (bn->grad.empty()) bn->grad.assign(bn->values.size(), T(0));
                if (sb) { T s = 0; for (std::size_t i = 0; i < n; ++i) s += g[i]; bn->grad[0] -= s; }
                else    for (std::size_t i = 0; i < n; ++i) bn->grad[i] -= g[i];
            }
        });
    }
    return r;
}

// Elementwise (Hadamard) product; either side may be a 1-element scalar.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_binary_shapes(a, b, "mul");
    const bool sa = a.numel() == 1 && b.numel() != 1;
    const bool sb = b.numel() == 1 && a.numel() != 1;
    const Shape& out_shape = sa ? b.shape() : a.shape();
    std::size_t n = shape_numel(out_shape);
    std::vector<T> out(n);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < n; ++i) out[i] = (sa ? av[0] : av[i]) * (sb ? bv[0] : bv[i]);
    Tensor<T> r(out_shape, std::move(out), detail::out_requires_grad<T>({&a, &b}));
    if (r.requires_grad()) {
        auto an = a.node_ptr(), bn = b.node_ptr(), rn = r.node_ptr();
        detail::record(r, [an, bn, rn, sa, sb, n] {
            if (rn->grad.empty()) return;
            const auto& g = rn->grad;
            const auto& av2 = an->values;
            const auto& bv2 = bn->values;
            if (an->requires_grad) {
                if (an->grad.empty()) an->grad.assign(an->values.size(), T(0));
                if (sa) { T s = 0; for (std::size_t i = 0; i < n; ++i) s += g[i] * bv2[i]; an->grad[0] += s; }
                else    for (std::size_t i = 0; i < n; ++i) an->grad[i] += g[i] * (sb ? bv2[0] : bv2[i]);
            }
            if (bn->requires_grad) {
                if (bn->grad.empty()) bn->grad.assign(bn->values.size(), T(0));
                if (sb) { T s = 0; for (std::size_t i = 0; i < n; ++i) s += g[i] * av2[i]; bn->grad[0] += s; }
                else    for (std::size_t i = 0; i < n; ++i) bn->grad[i] += g[i] * (sa ? av2[0] : av2[i]);
            }
        });
    }
    return r;
}

template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& x, T c) {
    std::size_t n = x.numel();
    std::vector<T> out(n);
    const auto& xv = x.values();
    for (std::size_t i = 0; i < n; ++i) out[i] = xv[i] * c;
    Tensor<T> r(x.shape(), std::move(out), detail::out_requires_grad<T>({&x}));
    if (r.requires_grad()) {
        auto xn = x.node_ptr(), rn = r.node_ptr();
        detail::record(r, [xn, rn, c, n] {
            if (rn->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->values.size(), T(0));
            for (std::size_t i = 0; i < n; ++i) xn->grad[i] += rn->grad[i] * c;
        });
    }
    return r;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
    return add(x, Tensor<T>::scalar(c));
}

namespace detail {

template <typename T, typename Fwd, typename Dev>
Tensor<T> unary_op(const Tensor<T>& x, Fwd fwd, Dev dev) {
    std::size_t n = x.numel();
    std::vector<T> out(n);
    const auto& xv = x.values();
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(xv[i]);
    Tensor<T> r(x.shape(), std::move(out), out_requires_grad<T>({&x}));
    if (r.requires_grad()) {
        auto xn = x.node_ptr(), rn = r.node_ptr();
        record(r, [xn, rn, dev, n] {
            if (rn->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->values.size(), T(0));
            for (std::size_t i = 0; i < n; ++i)
                xn->grad[i] += rn->grad[i] * dev(xn->values[i], rn->values[i]);
        });
    }
    return r;
}

}  // namespace detail

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return detail::unary_op(
        x, [](T v) { return v > T(0) ? v : T(0); },
        [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
    return detail::unary_op(
        x, [slope](T v) { return v > T(0) ? v : slope * v; },
        [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return detail::unary_op(
        x,
        [](T v) {
            // split by sign so exp never overflows
            if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
            T e = std::exp(v);
            return e / (T(1) + e);
        },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
    return detail::unary_op(
        x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
    const auto& xv = x.values();
    for (std::size_t i = 0; i < xv.size(); ++i)
        if (!(xv[i] > T(0)))
            throw std::domain_error("log: non-positive input " + std::to_string(double(xv[i])) +
                                    " at index " + std::to_string(i));
    return detail::unary_op(
        x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

// clamp(x, lo, hi): gradient 1 inside the band, 0 outside.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
    return detail::unary_op(
        x, [lo, hi](T v) { return std::min(std::max(v, lo), hi); },
        [lo, hi](T v, T) { return (v > lo && v < hi) ? T(1) : T(0); });
}

// x^p for constant exponent, x > 0.
template <typename T>
Tensor<T> pow_const(const Tensor<T>& x, T p) {
    return detail::unary_op(
        x, [p](T v) { return std::pow(v, p); },
        [p](T v, T) { return p == T(0) ? T(0) : p * std::pow(v, p - T(1)); });
}

// ---------------------------------------------------------------------------
// matmul / transpose
// ---------------------------------------------------------------------------

namespace detail {

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            T av = arow[p];
            if (av == T(0)) continue;
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] += A[m,k] * B[n,k]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const T* brow = b + j * k;
            T s = 0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] += s;
        }
    }
}

// C[m,n] += A[k,m]^T * B[k,n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const T* arow = a + p * m;
        const T* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            T av = arow[i];
            if (av == T(0)) continue;
            T* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        throw std::invalid_argument("matmul: expects 2-d operands, got " + shape_str(a.shape()) +
                                    " and " + shape_str(b.shape()));
    std::size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw std::invalid_argument("matmul: inner dimensions differ, " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    std::vector<T> out(m * n, T(0));
    detail::gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
    Tensor<T> r(Shape{m, n}, std::move(out), detail::out_requires_grad<T>({&a, &b}));
    if (r.requires_grad()) {
        auto an = a.node_ptr(), bn = b.node_ptr(), rn = r.node_ptr();
        detail::record(r, [an, bn, rn, m, k, n] {
            if (rn->grad.empty()) return;
            const T* g = rn->grad.data();
            if (an->requires_grad) {
                if (an->grad.empty()) an->grad.assign(an->values.size(), T(0));
                detail::gemm_nt(g, bn->values.data(), an->grad.data(), m, n, k);  // dA = G * B^T
            }
            if (bn->requires_grad) {
                if (bn->grad.empty()) bn->grad.assign(bn->values.size(), T(0));
                detail::gemm_tn(an->values.data(), g, bn->grad.data(), k, m, n);  // dB = A^T * G
            }
        });
    }
    return r;
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& x) {
    if (x.ndim() != 2) throw std::invalid_argument("transpose2d: expects 2-d tensor");
    std::size_t m = x.dim(0), n = x.dim(1);
    std::vector<T> out(m * n);
    const auto& xv = x.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
    Tensor<T> r(Shape{n, m}, std::move(out), detail::out_requires_grad<T>({&x}));
    if (r.requires_grad()) {
        auto xn = x.node_ptr(), rn = r.node_ptr();
        detail::record(r, [xn, rn, m, n] {
            if (rn->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->values.size(), T(0));
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) xn->grad[i * n + j] += rn->grad[j * m + i];
        });
    }
    return r;
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

// Stable softmax along `axis` (max-subtraction per lane).
template <typename T>
Tensor<T> softmax_axis(const Tensor<T>& x, std::size_t axis) {
    if (axis >= x.ndim()) throw std::invalid_argument("softmax_axis: axis out of range");
    const auto& xv = x.values();
    for (T v : xv)
        if (!std::isfinite(double(v))) throw std::domain_error("softmax: non-finite input");

    std::size_t c = x.dim(axis);
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
    std::size_t outer = x.numel() / (c * inner);

    std::vector<T> out(x.numel());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            std::size_t base = o * c * inner + in;
            T mx = xv[base];
            for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, xv[base + j * inner]);
            T denom = 0;
            for (std::size_t j = 0; j < c; ++j) {
                T e = std::exp(xv[base + j * inner] - mx);
                out[base + j * inner] = e;
                denom += e;
            }
            for (std::size_t j = 0; j < c; ++j) out[base + j * inner] /= denom;
        }
    }
    Tensor<T> r(x.shape(), std::move(out), detail::out_requires_grad<T>({&x}));
    if (r.requires_grad()) {
        auto xn = x.node_ptr(), rn = r.node_ptr();
        detail::record(r, [xn, rn, c, inner, outer] {
            if (rn->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->values.size(), T(0));
            const auto& y = rn->values;
            const auto& g = rn->grad;
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    std::size_t base = o * c * inner + in;
                    T dot = 0;
                    for (std::size_t j = 0; j < c; ++j) dot += g[base + j * inner] * y[base + j * inner];
                    for (std::size_t j = 0; j < c; ++j) {
                        std::size_t idx = base + j * inner;
                        xn->grad[idx] += y[idx] * (g[idx] - dot);
                    }
                }
            }
        });
    }
    return r;
}

// Row-wise softmax of a 2-d tensor; each output row sums to 1.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
    if (x.ndim() != 2) throw std::invalid_argument("softmax_rows: expects 2-d tensor");
    return softmax_axis(x, 1);
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " +
                                    shape_str(new_shape));
    Tensor<T> r(std::move(new_shape), x.values(), detail::out_requires_grad<T>({&x}));
    if (r.requires_grad()) {
        auto xn = x.node_ptr(), rn = r.node_ptr();
        detail::record(r, [xn, rn] {
            if (rn->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->values.size(), T(0));
            for (std::size_t i = 0; i < rn->grad.size(); ++i) xn->grad[i] += rn->grad[i];
        });
    }
    return r;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const Shape& s0 = parts[0].shape();
    if (axis >= s0.size()) throw std::invalid_argument("concat: axis out of range");
    Shape out_shape = s0;
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        if (p.ndim() != s0.size()) throw std::invalid_argument("concat: rank mismatch");
        for (std::size_t d = 0; d < s0.size(); ++d)
            if (d != axis && p.dim(d) != s0[d])
                throw std::invalid_argument("concat: shape mismatch " + shape_str(p.shape()) +
                                            " vs " + shape_str(s0) + " on non-concat dim");
        out_shape[axis] += p.dim(axis);
    }
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
    std::size_t outer = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];

    std::vector<T> out(shape_numel(out_shape));
    std::size_t out_axis = out_shape[axis];
    std::size_t offset = 0;
    for (const auto& p : parts) {
        std::size_t pa = p.dim(axis);
        const auto& pv = p.values();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy(pv.begin() + o * pa * inner, pv.begin() + (o + 1) * pa * inner,
                      out.begin() + (o * out_axis + offset) * inner);
        offset += pa;
    }

    bool rg = false;
    if (grad_enabled())
        for (const auto& p : parts) rg = rg || p.requires_grad();
    Tensor<T> r(out_shape, std::move(out), rg);
    if (rg) {
        std::vector<std::shared_ptr<detail::TensorNode<T>>> nodes;
        std::vector<std::size_t> axes;
        for (const auto& p : parts) {
            nodes.push_back(p.node_ptr());
            axes.push_back(p.dim(axis));
        }
        auto rn = r.node_ptr();
        detail::record(r, [nodes, axes, rn, outer, inner, out_axis] {
            if (rn->grad.empty()) return;
            std::size_t offset2 = 0;
            for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
                auto& nd = nodes[pi];
                std::size_t pa = axes[pi];
                if (nd->requires_grad) {
                    if (nd->grad.empty()) nd->grad.assign(nd->values.size(), T(0));
                    for (std::size_t o = 0; o < outer; ++o) {
                        const T* src = rn->grad.data() + (o * out_axis + offset2) * inner;
                        T* dst = nd->grad.data() + o * pa * inner;
                        for (std::size_t i = 0; i < pa * inner; ++i) dst[i] += src[i];
                    }
                }
                offset2 += pa;
            }
        });
    }
    return r;
}

// Contiguous sub-range [start, end) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t end) {
    if (axis >= x.ndim()) throw std::invalid_argument("slice: axis out of range");
    if (start >= end || end > x.dim(axis))
        throw std::invalid_argument("slice: bad range [" + std::to_string(start) + "," +
                                    std::to_string(end) + ") on dim " + std::to_string(x.dim(axis)));
    Shape out_shape = x.shape();
    out_shape[axis] = end - start;
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
    std::size_t outer = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
    std::size_t in_axis = x.dim(axis), len = end - start;

    std::vector<T> out(shape_numel(out_shape));
    const auto& xv = x.values();
    for (std::size_t o = 0; o < outer; ++o)
        std::copy(xv.begin() + (o * in_axis + start) * inner,
                  xv.begin() + (o * in_axis + end) * inner, out.begin() + o * len * inner);

    Tensor<T> r(out_shape, std::move(out), detail::out_requires_grad<T>({&x}));
    if (r.requires_grad()) {
        auto xn = x.node_ptr(), rn = r.node_ptr();
        detail::record(r, [xn, rn, outer, inner, in_axis, start, len] {
            if (rn->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->values.size(), T(0));
            for (std::size_t o = 0; o < outer; ++o) {
                const T* src = rn->grad.data() + o * len * inner;
                T* dst = xn->grad.data() + (o * in_axis + start) * inner;
                for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
            }
        });
    }
    return r;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x) {
    T s = 0;
    for (T v : x.values()) s += v;
    Tensor<T> r(Shape{1}, std::vector<T>{s}, detail::out_requires_grad<T>({&x}));
    if (r.requires_grad()) {
        auto xn = x.node_ptr(), rn = r.node_ptr();
        detail::record(r, [xn, rn] {
            if (rn->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->values.size(), T(0));
            T g = rn->grad[0];
            for (auto& v : xn->grad) v += g;
        });
    }
    return r;
}

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x) {
    return scalar_mul(reduce_sum(x), T(1) / T(x.numel()));
}

namespace detail {

template <typename T>
Tensor<T> reduce_axes_impl(const Tensor<T>& x, const std::vector<std::size_t>& axes, bool mean) {
    std::vector<bool> reduced(x.ndim(), false);
    for (std::size_t a : axes) {
        if (a >= x.ndim()) throw std::invalid_argument("reduce: axis out of range");
        reduced[a] = true;
    }
    Shape out_shape;
    for (std::size_t d = 0; d < x.ndim(); ++d)
        if (!reduced[d]) out_shape.push_back(x.dim(d));
    if (out_shape.empty()) out_shape.push_back(1);

    // strides of x, and the flat output index of each input element
    std::size_t nd = x.ndim();
    std::vector<std::size_t> xstride(nd, 1);
    for (std::size_t d = nd; d-- > 1;) xstride[d - 1] = xstride[d] * x.dim(d);
    std::vector<std::size_t> ostride(nd, 0);
    {
        std::size_t acc = 1;
        for (std::size_t d = nd; d-- > 0;) {
            if (!reduced[d]) {
                ostride[d] = acc;
                acc *= x.dim(d);
            }
        }
    }
    std::size_t count = 1;
    for (std::size_t d = 0; d < nd; ++d)
        if (reduced[d]) count *= x.dim(d);

    std::vector<T> out(shape_numel(out_shape), T(0));
    const auto& xv = x.values();
    std::vector<std::size_t> idx(nd, 0);
    for (std::size_t flat = 0; flat < xv.size(); ++flat) {
        std::size_t rem = flat, oidx = 0;
        for (std::size_t d = 0; d < nd; ++d) {
            std::size_t id = rem / xstride[d];
            rem %= xstride[d];
            oidx += id * ostride[d];
        }
        out[oidx] += xv[flat];
    }
    T scale = mean ? T(1) / T(count) : T(1);
    if (mean)
        for (auto& v : out) v *= scale;

    Tensor<T> r(out_shape, std::move(out), out_requires_grad<T>({&x}));
    if (r.requires_grad()) {
        auto xn = x.node_ptr(), rn = r.node_ptr();
        record(r, [xn, rn, xstride, ostride, nd, scale] {
            if (rn->grad.empty() || !xn->requires_grad) return;
            if (xn->grad.empty()) xn->grad.assign(xn->values.size(), T(0));
            for (std::size_t flat = 0; flat < xn->values.size(); ++flat) {
                std::size_t rem = flat, oidx = 0;
                for (std::size_t d = 0; d < nd; ++d) {
                    std::size_t id = rem / xstride[d];
                    rem %= xstride[d];
                    oidx += id * ostride[d];
                }
                xn->grad[flat] += rn->grad[oidx] * scale;
            }
        });
    }
    return r;
}

}  // namespace detail

template <typename T>
Tensor<T> reduce_sum_axes(const Tensor<T>& x, const std::vector<std::size_t>& axes) {
    return detail::reduce_axes_impl(x, axes, false);
}

template <typename T>
Tensor<T> reduce_mean_axes(const Tensor<T>& x, const std::vector<std::size_t>& axes) {
    return detail::reduce_axes_impl(x, axes, true);
}

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

// Compares the reverse-mode gradient of scalar-valued f at x against central
// finite differences, coordinate by coordinate. Returns the max relative
// error; callers assert against their tolerance. Meant for double precision.
template <typename T, typename F>
double grad_check(F f, const Tensor<T>& x, double eps) {
    Tensor<T> probe(x.shape(), x.values(), true);
    clear_record<T>();
    Tensor<T> y = f(probe);
    if (y.numel() != 1) throw std::logic_error("grad_check: f must be scalar-valued");
    std::vector<T> analytic(x.numel(), T(0));
    if (y.requires_grad()) {
        backward(y);
        analytic = probe.grad();
    }

    double max_rel = 0.0;
    std::vector<T> vals = x.values();
    NoGradScope ng;
    // floor scales with |f| so roundoff in the differences cannot dominate
    // coordinates whose true gradient is ~0
    double floor = 1e-6 * std::max(1.0, std::fabs(double(f(Tensor<T>(x.shape(), vals)).value())));
    for (std::size_t i = 0; i < vals.size(); ++i) {
        T orig = vals[i];
        vals[i] = orig + T(eps);
        double fp = double(f(Tensor<T>(x.shape(), vals)).value());
        vals[i] = orig - T(eps);
        double fm = double(f(Tensor<T>(x.shape(), vals)).value());
        vals[i] = orig;
        double fd = (fp - fm) / (2.0 * eps);
        double ad = double(analytic[i]);
        double denom = std::max({std::fabs(fd), std::fabs(ad), floor});
        max_rel = std::max(max_rel, std::fabs(fd - ad) / denom);
    }
    return max_rel;
}

}  // namespace yowo
