#pragma once

#include "lsim/autodiff/dual.hpp"
#include "lsim/core.hpp"

#include <cassert>
#include <cstdint>
#include <string>
#include <vector>

namespace lsim::ad {

class Tape;

// Handle to a matrix-valued node. A default-constructed Var is a structural
// zero: arithmetic short-circuits on it, so unused tangent slots of nested
// duals cost nothing on the tape. Scalars are 1x1 nodes.
struct Var {
    Tape* tape = nullptr;
    std::int32_t idx = -1;

    Var() = default;
    Var(Tape* t, std::int32_t i) : tape(t), idx(i) {}
    bool valid() const { return tape != nullptr; }
};

enum class Op : std::uint8_t {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale,     // c * a
    AddC,      // a + c
    RSubC,     // c - a
    Exp,
    Log,
    Tanh,
    Sigmoid,
    Sqrt,
    PowC,      // a^c
    MatMulNN,  // A * B
    MatMulNT,  // A * B^T
    MatMulTN,  // A^T * B
    Transpose,
    MatInv,
    AddRowVec,       // A + ones * b   (b is 1 x cols)
    PerSampleLinMap, // row r -> row r * D_{r/group}^T, D constant per group
    Sum,             // total sum -> 1x1
};

const char* op_name(Op op);

struct Node {
    Op op = Op::Leaf;
    std::int32_t a = -1;
    std::int32_t b = -1;
    double c = 0.0;
    std::int32_t payload = -1;
    Mat val;
};

class Tape {
public:
    void reserve(std::size_t n) { nodes_.reserve(n); }
    void clear();
    std::size_t size() const { return nodes_.size(); }

    Var leaf(Mat value);
    Var constant(Mat value);
    Var scalar(double value) { return constant(Mat::Constant(1, 1, value)); }

    const Mat& value(Var v) const { return nodes_[v.idx].val; }
    double scalar_value(Var v) const { return nodes_[v.idx].val(0, 0); }

    // Structured ops used by the batched training path.
    Var matmul_nn(Var a, Var b) { return binary(Op::MatMulNN, a, b); }
    Var matmul_nt(Var a, Var b) { return binary(Op::MatMulNT, a, b); }
    Var matmul_tn(Var a, Var b) { return binary(Op::MatMulTN, a, b); }
    Var transpose(Var a) { return unary(Op::Transpose, a); }
    Var matinv(Var a) { return unary(Op::MatInv, a); }
    Var add_rowvec(Var a, Var row) { return binary(Op::AddRowVec, a, row); }
    Var per_sample_linmap(Var a, std::vector<Mat> maps, int group);
    Var sum(Var a) { return unary(Op::Sum, a); }
    Var sum_sq(Var a);

    // Reverse sweep from a 1x1 node. Adjoints of leaves are then available
    // through grad(). When finite checking is on, the op that produced a
    // non-finite adjoint is reported.
    void backward(Var loss);
    Mat grad(Var v) const;
    void set_check_finite(bool on) { check_finite_ = on; }

    Var unary(Op op, Var a, double c = 0.0);
    Var binary(Op op, Var a, Var b);

private:
    friend struct Var;
    Var push(Node n);
    void backprop_node(std::int32_t i);
    Mat& adj(std::int32_t i);

    std::vector<Node> nodes_;
    std::vector<Mat> adj_;
    std::vector<std::vector<Mat>> payloads_;
    bool check_finite_ = true;
};

// ---- Var arithmetic (elementwise; shapes must match, be 1x1, or differ by
// a row-group factor, in which case the smaller side broadcasts). ----

inline Var operator+(Var a, Var b) {
    if (!a.valid()) return b;
    if (!b.valid()) return a;
    return a.tape->binary(Op::Add, a, b);
}
inline Var operator-(Var a) {
    if (!a.valid()) return a;
    return a.tape->unary(Op::Neg, a);
}
inline Var operator-(Var a, Var b) {
    if (!b.valid()) return a;
    if (!a.valid()) return -b;
    return a.tape->binary(Op::Sub, a, b);
}
inline Var operator*(Var a, Var b) {
    if (!a.valid() || !b.valid()) return {};
    return a.tape->binary(Op::Mul, a, b);
}
inline Var operator/(Var a, Var b) {
    assert(b.valid());
    if (!a.valid()) return {};
    return a.tape->binary(Op::Div, a, b);
}

inline Var operator*(Var a, double c) {
    if (!a.valid()) return {};
    return a.tape->unary(Op::Scale, a, c);
}
inline Var operator*(double c, Var a) { return a * c; }
inline Var operator/(Var a, double c) { return a * (1.0 / c); }
inline Var operator+(Var a, double c) {
    assert(a.valid());
    return a.tape->unary(Op::AddC, a, c);
}
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator-(double c, Var a) {
    assert(a.valid());
    return a.tape->unary(Op::RSubC, a, c);
}

inline Var exp(Var a) { return a.tape->unary(Op::Exp, a); }
inline Var log(Var a) { return a.tape->unary(Op::Log, a); }
inline Var tanh(Var a) { return a.tape->unary(Op::Tanh, a); }
inline Var sigmoid(Var a) { return a.tape->unary(Op::Sigmoid, a); }
inline Var sqrt(Var a) { return a.tape->unary(Op::Sqrt, a); }
inline Var pow(Var a, double c) { return a.tape->unary(Op::PowC, a, c); }
inline Var silu(Var a) { return a * sigmoid(a); }
inline Var operator/(double c, Var a) { return pow(a, -1.0) * c; }

inline double primal(const Var& v) {
    assert(v.valid());
    return v.tape->scalar_value(v);
}

}  // namespace lsim::ad
