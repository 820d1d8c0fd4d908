// Minimal tape-based reverse-mode differentiation engine. Every value is a
// row-major matrix node on a Tape (scalar = 1x1, vector = n x 1). Backward
// passes are themselves recorded as tape nodes, so gradients of gradients
// come out of the same machinery.
#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hamlat/core.hpp"  // Vec

namespace hamlat::ad {

enum class Op {
    Leaf,
    Add,
    Sub,
    Scale,
    Mul,
    MatMul,
    MatMulTA,  // A^T B
    MatMulTB,  // A B^T
    AddCol,    // matrix + column vector, broadcast over columns
    RowSum,    // sum over columns -> n x 1
    ColBroadcast,
    Sum,       // sum of all entries -> scalar
    ScalarBroadcast,
    Reshape,
    GatherRows,
    ScatterAddRows,
    ConcatRows,
    SliceRows,
    RepeatInterleave,  // each entry repeated `reps` times (column vectors)
    SegmentSum,        // inverse layout of RepeatInterleave
    Square,
    Exp,
    Sin,
    Cos,
    Tanh,
    Sigmoid,
    Erf,
    Silu,
    Gelu,
};

struct Node {
    Op op = Op::Leaf;
    int a = -1, b = -1;  // parents
    int rows = 0, cols = 0;
    double c = 0.0;  // Scale factor
    int reps = 0;    // RepeatInterleave / SegmentSum
    int r0 = 0;      // SliceRows offset, ScatterAddRows target rows
    std::shared_ptr<const std::vector<int>> idx;  // Gather/Scatter row indices
    Vec x;  // forward value
};

class Tape;

struct Value {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    int rows() const;
    int cols() const;
    std::size_t size() const { return static_cast<std::size_t>(rows()) * cols(); }
    const Vec& data() const;
    double scalar() const;
};

class Tape {
  public:
    Value leaf(int rows, int cols, Vec data) {
        if (rows < 1 || cols < 1 || data.size() != static_cast<std::size_t>(rows) * cols)
            throw std::invalid_argument("leaf: bad shape");
        Node n;
        n.rows = rows;
        n.cols = cols;
        n.x = std::move(data);
        return push(std::move(n));
    }
    Value leaf_vec(Vec data) {
        const int r = static_cast<int>(data.size());
        return leaf(r, 1, std::move(data));
    }
    Value scalar(double v) { return leaf(1, 1, Vec{v}); }
    Value zeros(int rows, int cols) { return leaf(rows, cols, Vec(static_cast<std::size_t>(rows) * cols, 0.0)); }
    Value ones_like(const Value& v) {
        return leaf(v.rows(), v.cols(), Vec(v.size(), 1.0));
    }

    const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    Value push(Node n) {
        nodes_.push_back(std::move(n));
        return Value{this, static_cast<int>(nodes_.size()) - 1};
    }

  private:
    std::vector<Node> nodes_;
};

inline int Value::rows() const { return tape->node(id).rows; }
inline int Value::cols() const { return tape->node(id).cols; }
inline const Vec& Value::data() const { return tape->node(id).x; }
inline double Value::scalar() const {
    if (size() != 1) throw std::invalid_argument("Value::scalar on non-scalar");
    return data()[0];
}

namespace detail {
inline Tape& same_tape(const Value& a, const Value& b) {
    if (a.tape != b.tape || a.tape == nullptr)
        throw std::invalid_argument("operands live on different tapes");
    return *a.tape;
}
inline void same_shape(const Value& a, const Value& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
}
}  // namespace detail

inline Value add(const Value& a, const Value& b) {
    Tape& t = detail::same_tape(a, b);
    detail::same_shape(a, b, "add");
    Node n{Op::Add, a.id, b.id, a.rows(), a.cols()};
    n.x.resize(a.size());
    const Vec &xa = a.data(), &xb = b.data();
    for (std::size_t i = 0; i < n.x.size(); ++i) n.x[i] = xa[i] + xb[i];
    return t.push(std::move(n));
}

inline Value sub(const Value& a, const Value& b) {
    Tape& t = detail::same_tape(a, b);
    detail::same_shape(a, b, "sub");
    Node n{Op::Sub, a.id, b.id, a.rows(), a.cols()};
    n.x.resize(a.size());
    const Vec &xa = a.data(), &xb = b.data();
    for (std::size_t i = 0; i < n.x.size(); ++i) n.x[i] = xa[i] - xb[i];
    return t.push(std::move(n));
}

inline Value scale(const Value& a, double c) {
    Node n{Op::Scale, a.id, -1, a.rows(), a.cols()};
    n.c = c;
    n.x.resize(a.size());
    const Vec& xa = a.data();
    for (std::size_t i = 0; i < n.x.size(); ++i) n.x[i] = c * xa[i];
    return a.tape->push(std::move(n));
}

inline Value mul(const Value& a, const Value& b) {
    Tape& t = detail::same_tape(a, b);
    detail::same_shape(a, b, "mul");
    Node n{Op::Mul, a.id, b.id, a.rows(), a.cols()};
    n.x.resize(a.size());
    const Vec &xa = a.data(), &xb = b.data();
    for (std::size_t i = 0; i < n.x.size(); ++i) n.x[i] = xa[i] * xb[i];
    return t.push(std::move(n));
}

namespace detail {
// C(m x n) += A(m x k) * B(k x n), row-major, ikj order
inline void gemm(const double* A, const double* B, double* C, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* Ai = A + static_cast<std::size_t>(i) * k;
        double* Ci = C + static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const double a = Ai[l];
            if (a == 0.0) continue;
            const double* Bl = B + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) Ci[j] += a * Bl[j];
        }
    }
}
}  // namespace detail

inline Value matmul(const Value& a, const Value& b) {
    Tape& t = detail::same_tape(a, b);
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    Node n{Op::MatMul, a.id, b.id, a.rows(), b.cols()};
    n.x.assign(static_cast<std::size_t>(n.rows) * n.cols, 0.0);
    detail::gemm(a.data().data(), b.data().data(), n.x.data(), a.rows(), a.cols(), b.cols());
    return t.push(std::move(n));
}

inline Value matmul_ta(const Value& a, const Value& b) {  // A^T B
    Tape& t = detail::same_tape(a, b);
    if (a.rows() != b.rows()) throw std::invalid_argument("matmul_ta: dimension mismatch");
    Node n{Op::MatMulTA, a.id, b.id, a.cols(), b.cols()};
    n.x.assign(static_cast<std::size_t>(n.rows) * n.cols, 0.0);
    const Vec &xa = a.data(), &xb = b.data();
    const int m = a.cols(), k = a.rows(), nc = b.cols();
    for (int l = 0; l < k; ++l)
        for (int i = 0; i < m; ++i) {
            const double v = xa[static_cast<std::size_t>(l) * m + i];
            if (v == 0.0) continue;
            for (int j = 0; j < nc; ++j)
                n.x[static_cast<std::size_t>(i) * nc + j] += v * xb[static_cast<std::size_t>(l) * nc + j];
        }
    return t.push(std::move(n));
}

inline Value matmul_tb(const Value& a, const Value& b) {  // A B^T
    Tape& t = detail::same_tape(a, b);
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_tb: dimension mismatch");
    Node n{Op::MatMulTB, a.id, b.id, a.rows(), b.rows()};
    n.x.assign(static_cast<std::size_t>(n.rows) * n.cols, 0.0);
    const Vec &xa = a.data(), &xb = b.data();
    const int m = a.rows(), k = a.cols(), nc = b.rows();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < nc; ++j) {
            double s = 0.0;
            for (int l = 0; l < k; ++l)
                s += xa[static_cast<std::size_t>(i) * k + l] * xb[static_cast<std::size_t>(j) * k + l];
            n.x[static_cast<std::size_t>(i) * nc + j] = s;
        }
    return t.push(std::move(n));
}

/// W x for a column vector x.
inline Value matvec(const Value& w, const Value& x) {
    if (x.cols() != 1) throw std::invalid_argument("matvec: x must be a column vector");
    return matmul(w, x);
}
/// W^T x.
inline Value matvec_t(const Value& w, const Value& x) {
    if (x.cols() != 1) throw std::invalid_argument("matvec_t: x must be a column vector");
    return matmul_ta(w, x);
}
/// a b^T for column vectors.
inline Value outer(const Value& a, const Value& b) {
    if (a.cols() != 1 || b.cols() != 1) throw std::invalid_argument("outer: needs column vectors");
    return matmul_tb(a, b);
}

inline Value add_col(const Value& m, const Value& v) {
    Tape& t = detail::same_tape(m, v);
    if (v.cols() != 1 || v.rows() != m.rows()) throw std::invalid_argument("add_col: shape mismatch");
    Node n{Op::AddCol, m.id, v.id, m.rows(), m.cols()};
    n.x.resize(m.size());
    const Vec &xm = m.data(), &xv = v.data();
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j)
            n.x[static_cast<std::size_t>(i) * m.cols() + j] =
                xm[static_cast<std::size_t>(i) * m.cols() + j] + xv[static_cast<std::size_t>(i)];
    return t.push(std::move(n));
}

inline Value row_sum(const Value& m) {
    Node n{Op::RowSum, m.id, -1, m.rows(), 1};
    n.x.assign(static_cast<std::size_t>(m.rows()), 0.0);
    const Vec& xm = m.data();
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) n.x[i] += xm[static_cast<std::size_t>(i) * m.cols() + j];
    return m.tape->push(std::move(n));
}

inline Value col_broadcast(const Value& v, int ncols) {
    if (v.cols() != 1) throw std::invalid_argument("col_broadcast: needs a column vector");
    Node n{Op::ColBroadcast, v.id, -1, v.rows(), ncols};
    n.x.resize(static_cast<std::size_t>(v.rows()) * ncols);
    const Vec& xv = v.data();
    for (int i = 0; i < v.rows(); ++i)
        for (int j = 0; j < ncols; ++j) n.x[static_cast<std::size_t>(i) * ncols + j] = xv[i];
    return v.tape->push(std::move(n));
}

inline Value sum(const Value& m) {
    Node n{Op::Sum, m.id, -1, 1, 1};
    double s = 0.0;
    for (double x : m.data()) s += x;
    n.x = Vec{s};
    return m.tape->push(std::move(n));
}

inline Value scalar_broadcast(const Value& s, int rows, int cols) {
    if (s.size() != 1) throw std::invalid_argument("scalar_broadcast: needs a scalar");
    Node n{Op::ScalarBroadcast, s.id, -1, rows, cols};
    n.x.assign(static_cast<std::size_t>(rows) * cols, s.data()[0]);
    return s.tape->push(std::move(n));
}

inline Value reshape(const Value& m, int rows, int cols) {
    if (static_cast<std::size_t>(rows) * cols != m.size())
        throw std::invalid_argument("reshape: element count mismatch");
    Node n{Op::Reshape, m.id, -1, rows, cols};
    n.x = m.data();
    return m.tape->push(std::move(n));
}

inline Value gather_rows(const Value& m, std::shared_ptr<const std::vector<int>> idx) {
    for (int i : *idx)
        if (i < 0 || i >= m.rows()) throw std::invalid_argument("gather_rows: index out of range");
    Node n{Op::GatherRows, m.id, -1, static_cast<int>(idx->size()), m.cols()};
    n.idx = idx;
    n.x.resize(static_cast<std::size_t>(n.rows) * n.cols);
    const Vec& xm = m.data();
    for (int r = 0; r < n.rows; ++r)
        for (int j = 0; j < n.cols; ++j)
            n.x[static_cast<std::size_t>(r) * n.cols + j] =
                xm[static_cast<std::size_t>((*idx)[r]) * n.cols + j];
    return m.tape->push(std::move(n));
}

inline Value scatter_add_rows(const Value& m, std::shared_ptr<const std::vector<int>> idx,
                              int out_rows) {
    if (static_cast<int>(idx->size()) != m.rows())
        throw std::invalid_argument("scatter_add_rows: index count mismatch");
    Node n{Op::ScatterAddRows, m.id, -1, out_rows, m.cols()};
    n.idx = idx;
    n.r0 = out_rows;
    n.x.assign(static_cast<std::size_t>(out_rows) * m.cols(), 0.0);
    const Vec& xm = m.data();
    for (int r = 0; r < m.rows(); ++r) {
        const int tr = (*idx)[r];
        if (tr < 0 || tr >= out_rows) throw std::invalid_argument("scatter_add_rows: index out of range");
        for (int j = 0; j < m.cols(); ++j)
            n.x[static_cast<std::size_t>(tr) * n.cols + j] += xm[static_cast<std::size_t>(r) * n.cols + j];
    }
    return m.tape->push(std::move(n));
}

inline Value concat_rows(const Value& a, const Value& b) {
    Tape& t = detail::same_tape(a, b);
    if (a.cols() != b.cols()) throw std::invalid_argument("concat_rows: column mismatch");
    Node n{Op::ConcatRows, a.id, b.id, a.rows() + b.rows(), a.cols()};
    n.x = a.data();
    n.x.insert(n.x.end(), b.data().begin(), b.data().end());
    return t.push(std::move(n));
}

inline Value slice_rows(const Value& m, int r0, int r1) {
    if (r0 < 0 || r1 > m.rows() || r0 >= r1) throw std::invalid_argument("slice_rows: bad range");
    Node n{Op::SliceRows, m.id, -1, r1 - r0, m.cols()};
    n.r0 = r0;
    n.x.assign(m.data().begin() + static_cast<std::size_t>(r0) * m.cols(),
               m.data().begin() + static_cast<std::size_t>(r1) * m.cols());
    return m.tape->push(std::move(n));
}

inline Value repeat_interleave(const Value& v, int reps) {
    if (v.cols() != 1) throw std::invalid_argument("repeat_interleave: needs a column vector");
    if (reps < 1) throw std::invalid_argument("repeat_interleave: reps >= 1");
    Node n{Op::RepeatInterleave, v.id, -1, v.rows() * reps, 1};
    n.reps = reps;
    n.x.resize(static_cast<std::size_t>(n.rows));
    const Vec& xv = v.data();
    for (int i = 0; i < v.rows(); ++i)
        for (int r = 0; r < reps; ++r) n.x[static_cast<std::size_t>(i) * reps + r] = xv[i];
    return v.tape->push(std::move(n));
}

inline Value segment_sum(const Value& v, int seg) {
    if (v.cols() != 1 || seg < 1 || v.rows() % seg != 0)
        throw std::invalid_argument("segment_sum: bad segment size");
    Node n{Op::SegmentSum, v.id, -1, v.rows() / seg, 1};
    n.reps = seg;
    n.x.assign(static_cast<std::size_t>(n.rows), 0.0);
    const Vec& xv = v.data();
    for (int i = 0; i < n.rows; ++i)
        for (int r = 0; r < seg; ++r) n.x[i] += xv[static_cast<std::size_t>(i) * seg + r];
    return v.tape->push(std::move(n));
}

namespace detail {
template <typename F>
Value unary(const Value& a, Op op, F&& f) {
    Node n{op, a.id, -1, a.rows(), a.cols()};
    n.x.resize(a.size());
    const Vec& xa = a.data();
    for (std::size_t i = 0; i < n.x.size(); ++i) n.x[i] = f(xa[i]);
    return a.tape->push(std::move(n));
}
inline double sigmoid_fn(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double gelu_fn(double x) {  // exact erf form
    return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}
}  // namespace detail

inline Value square(const Value& a) { return detail::unary(a, Op::Square, [](double x) { return x * x; }); }
inline Value exp(const Value& a) { return detail::unary(a, Op::Exp, [](double x) { return std::exp(x); }); }
inline Value sin(const Value& a) { return detail::unary(a, Op::Sin, [](double x) { return std::sin(x); }); }
inline Value cos(const Value& a) { return detail::unary(a, Op::Cos, [](double x) { return std::cos(x); }); }
inline Value tanh(const Value& a) { return detail::unary(a, Op::Tanh, [](double x) { return std::tanh(x); }); }
inline Value sigmoid(const Value& a) { return detail::unary(a, Op::Sigmoid, detail::sigmoid_fn); }
inline Value erf(const Value& a) { return detail::unary(a, Op::Erf, [](double x) { return std::erf(x); }); }
inline Value silu(const Value& a) {
    return detail::unary(a, Op::Silu, [](double x) { return x * detail::sigmoid_fn(x); });
}
inline Value gelu(const Value& a) { return detail::unary(a, Op::Gelu, detail::gelu_fn); }

namespace detail {

// Append the vector-Jacobian contributions of node `i` (upstream adjoint g)
// to its parents. Every contribution is built out of tape primitives so the
// backward pass is itself differentiable.
template <typename Accum>
void backprop_node(Tape& t, int i, const Value& g, Accum&& into) {
    const Node& n = t.node(i);
    const Value a{&t, n.a};
    const Value b{&t, n.b};
    const Value self{&t, i};
    switch (n.op) {
        case Op::Leaf: break;
        case Op::Add:
            into(n.a, g);
            into(n.b, g);
            break;
        case Op::Sub:
            into(n.a, g);
            into(n.b, scale(g, -1.0));
            break;
        case Op::Scale: into(n.a, scale(g, n.c)); break;
        case Op::Mul:
            into(n.a, mul(g, b));
            into(n.b, mul(g, a));
            break;
        case Op::MatMul:
            into(n.a, matmul_tb(g, b));
            into(n.b, matmul_ta(a, g));
            break;
        case Op::MatMulTA:  // C = A^T B
            into(n.a, matmul_tb(b, g));
            into(n.b, matmul(a, g));
            break;
        case Op::MatMulTB:  // C = A B^T
            into(n.a, matmul(g, b));
            into(n.b, matmul_ta(g, a));
            break;
        case Op::AddCol:
            into(n.a, g);
            into(n.b, row_sum(g));
            break;
        case Op::RowSum: into(n.a, col_broadcast(g, t.node(n.a).cols)); break;
        case Op::ColBroadcast: into(n.a, row_sum(g)); break;
        case Op::Sum: into(n.a, scalar_broadcast(g, t.node(n.a).rows, t.node(n.a).cols)); break;
        case Op::ScalarBroadcast: into(n.a, sum(g)); break;
        case Op::Reshape: into(n.a, reshape(g, t.node(n.a).rows, t.node(n.a).cols)); break;
        case Op::GatherRows: into(n.a, scatter_add_rows(g, n.idx, t.node(n.a).rows)); break;
        case Op::ScatterAddRows: into(n.a, gather_rows(g, n.idx)); break;
        case Op::ConcatRows: {
            const int ra = t.node(n.a).rows;
            into(n.a, slice_rows(g, 0, ra));
            into(n.b, slice_rows(g, ra, n.rows));
            break;
        }
        case Op::SliceRows: {
            auto idx = std::make_shared<std::vector<int>>();
            idx->reserve(static_cast<std::size_t>(n.rows));
            for (int r = 0; r < n.rows; ++r) idx->push_back(n.r0 + r);
            into(n.a, scatter_add_rows(g, idx, t.node(n.a).rows));
            break;
        }
        case Op::RepeatInterleave: into(n.a, segment_sum(g, n.reps)); break;
        case Op::SegmentSum: into(n.a, repeat_interleave(g, n.reps)); break;
        case Op::Square: into(n.a, scale(mul(g, a), 2.0)); break;
        case Op::Exp: into(n.a, mul(g, self)); break;
        case Op::Sin: into(n.a, mul(g, cos(a))); break;
        case Op::Cos: into(n.a, scale(mul(g, sin(a)), -1.0)); break;
        case Op::Tanh: {
            const Value ones = t.ones_like(a);
            into(n.a, mul(g, sub(ones, square(self))));
            break;
        }
        case Op::Sigmoid: {
            const Value ones = t.ones_like(a);
            into(n.a, mul(g, mul(self, sub(ones, self))));
            break;
        }
        case Op::Erf:
            into(n.a, mul(g, scale(exp(scale(square(a), -1.0)), 2.0 / std::sqrt(std::numbers::pi))));
            break;
        case Op::Silu: {
            const Value ones = t.ones_like(a);
            const Value s = sigmoid(a);
            into(n.a, mul(g, mul(s, add(ones, mul(a, sub(ones, s))))));
            break;
        }
        case Op::Gelu: {
            const Value ones = t.ones_like(a);
            const Value phi = scale(add(ones, erf(scale(a, 1.0 / std::numbers::sqrt2))), 0.5);
            const Value pdf =
                scale(exp(scale(square(a), -0.5)), 1.0 / std::sqrt(2.0 * std::numbers::pi));
            into(n.a, mul(g, add(phi, mul(a, pdf))));
            break;
        }
    }
}

}  // namespace detail

/// Reverse-mode gradients of a scalar output. The returned gradients are
/// tape nodes, so a further grad over them (or over parameters reached
/// through them) is exact. Inputs not reached by the output get zeros.
inline std::vector<Value> grad_graph(const Value& output, std::span<const Value> inputs) {
    if (output.size() != 1) throw std::invalid_argument("grad_graph: output must be scalar");
    Tape& t = *output.tape;
    for (const Value& v : inputs)
        if (v.tape != &t) throw std::invalid_argument("grad_graph: input on a different tape");

    std::unordered_map<int, Value> adj;
    adj.emplace(output.id, t.scalar(1.0));

    // nodes are appended in topological order; walk ids downward
    const int top = output.id;
    for (int i = top; i >= 0; --i) {
        auto it = adj.find(i);
        if (it == adj.end()) continue;
        const Value g = it->second;
        detail::backprop_node(t, i, g, [&](int parent, const Value& contrib) {
            auto p = adj.find(parent);
            if (p == adj.end())
                adj.emplace(parent, contrib);
            else
                p->second = add(p->second, contrib);
        });
    }

    std::vector<Value> out;
    out.reserve(inputs.size());
    for (const Value& v : inputs) {
        auto it = adj.find(v.id);
        out.push_back(it != adj.end() ? it->second : t.zeros(v.rows(), v.cols()));
    }
    return out;
}

inline std::vector<Value> grad_graph(const Value& output, std::initializer_list<Value> inputs) {
    return grad_graph(output, std::span<const Value>(inputs.begin(), inputs.size()));
}

/// First-order convenience wrapper: plain data, not meant for re-differentiation
/// (though the nodes do stay on the tape).
inline std::vector<Vec> grad(const Value& output, std::span<const Value> inputs) {
    std::vector<Vec> out;
    for (const Value& v : grad_graph(output, inputs)) out.push_back(v.data());
    return out;
}

inline std::vector<Vec> grad(const Value& output, std::initializer_list<Value> inputs) {
    return grad(output, std::span<const Value>(inputs.begin(), inputs.size()));
}

}  // namespace hamlat::ad
