#include "lsim/autodiff/tape.hpp"

#include <fmt/format.h>

namespace lsim::ad {

const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Const: return "const";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Neg: return "neg";
        case Op::Scale: return "scale";
        case Op::AddC: return "add_const";
        case Op::RSubC: return "rsub_const";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Tanh: return "tanh";
        case Op::Sigmoid: return "sigmoid";
        case Op::Sqrt: return "sqrt";
        case Op::PowC: return "pow";
        case Op::MatMulNN: return "matmul";
        case Op::MatMulNT: return "matmul_nt";
        case Op::MatMulTN: return "matmul_tn";
        case Op::Transpose: return "transpose";
        case Op::MatInv: return "matinv";
        case Op::AddRowVec: return "add_rowvec";
        case Op::PerSampleLinMap: return "per_sample_linmap";
        case Op::Sum: return "sum";
    }
    return "?";
}

void Tape::clear() {
    nodes_.clear();
    adj_.clear();
    payloads_.clear();
}

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return {this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::leaf(Mat value) {
    Node n;
    n.op = Op::Leaf;
    n.val = std::move(value);
    return push(std::move(n));
}

Var Tape::constant(Mat value) {
    Node n;
    n.op = Op::Const;
    n.val = std::move(value);
    return push(std::move(n));
}

namespace {

bool scalar_shaped(const Mat& m) { return m.rows() == 1 && m.cols() == 1; }

// Shape resolution for elementwise binaries: equal shapes, 1x1 scalar, or
// same cols with one row count an integer multiple of the other (row-group
// broadcast; group g repeats each small row g consecutive times).
struct BShape {
    long rows, cols;
    int mode_a, mode_b;  // 0 = full, 1 = scalar, 2 = row-group
};

BShape bshape(const Mat& A, const Mat& B, Op op) {
    if (A.rows() == B.rows() && A.cols() == B.cols()) return {A.rows(), A.cols(), 0, 0};
    if (scalar_shaped(A)) return {B.rows(), B.cols(), 1, 0};
    if (scalar_shaped(B)) return {A.rows(), A.cols(), 0, 1};
    if (A.cols() == B.cols() && A.rows() < B.rows() && B.rows() % A.rows() == 0)
        return {B.rows(), B.cols(), 2, 0};
    if (A.cols() == B.cols() && B.rows() < A.rows() && A.rows() % B.rows() == 0)
        return {A.rows(), A.cols(), 0, 2};
    throw Error(fmt::format("tape: incompatible shapes {}x{} vs {}x{} for {}", A.rows(),
                            A.cols(), B.rows(), B.cols(), op_name(op)));
}

Mat expand(const Mat& small, long rows) {
    const long rep = rows / small.rows();
    Mat out(rows, small.cols());
    for (long i = 0; i < small.rows(); ++i)
        out.middleRows(i * rep, rep) = small.row(i).replicate(rep, 1);
    return out;
}

// View of operand expanded to the output shape (materializes a copy only
// when broadcasting is actually needed).
Mat broadcast_to(const Mat& m, long rows, long cols, int mode) {
    if (mode == 0) return m;
    if (mode == 1) return Mat::Constant(rows, cols, m(0, 0));
    return expand(m, rows);
}

// Reduce a full-shaped adjoint contribution back onto the operand shape.
void reduce_add(Mat& acc, const Mat& contrib, const Mat& operand_val, int mode) {
    if (mode == 0) {
        acc += contrib;
    } else if (mode == 1) {
        acc(0, 0) += contrib.sum();
    } else {
        const long rep = contrib.rows() / operand_val.rows();
        for (long i = 0; i < operand_val.rows(); ++i)
            acc.row(i) += contrib.middleRows(i * rep, rep).colwise().sum();
    }
}

}  // namespace

Var Tape::unary(Op op, Var a, double c) {
    assert(a.valid() && a.tape == this);
    const Mat& A = nodes_[a.idx].val;
    Node n;
    n.op = op;
    n.a = a.idx;
    n.c = c;
    switch (op) {
        case Op::Neg: n.val = -A; break;
        case Op::Scale: n.val = c * A; break;
        case Op::AddC: n.val = A.array() + c; break;
        case Op::RSubC: n.val = c - A.array(); break;
        case Op::Exp: n.val = A.array().exp(); break;
        case Op::Log: n.val = A.array().log(); break;
        case Op::Tanh: n.val = A.array().tanh(); break;
        case Op::Sigmoid: n.val = 1.0 / (1.0 + (-A.array()).exp()); break;
        case Op::Sqrt: n.val = A.array().sqrt(); break;
        case Op::PowC: n.val = A.array().pow(c); break;
        case Op::Transpose: n.val = A.transpose(); break;
        case Op::MatInv: {
            if (A.rows() != A.cols()) throw Error("tape: matinv of non-square matrix");
            n.val = A.partialPivLu().inverse();
            break;
        }
        case Op::Sum: n.val = Mat::Constant(1, 1, A.sum()); break;
        default: throw Error(fmt::format("tape: {} is not unary", op_name(op)));
    }
    return push(std::move(n));
}

Var Tape::binary(Op op, Var a, Var b) {
    assert(a.valid() && b.valid() && a.tape == this && b.tape == this);
    const Mat& A = nodes_[a.idx].val;
    const Mat& B = nodes_[b.idx].val;
    Node n;
    n.op = op;
    n.a = a.idx;
    n.b = b.idx;
    switch (op) {
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            const BShape s = bshape(A, B, op);
            const Mat ax = broadcast_to(A, s.rows, s.cols, s.mode_a);
            const Mat bx = broadcast_to(B, s.rows, s.cols, s.mode_b);
            if (op == Op::Add) n.val = ax + bx;
            else if (op == Op::Sub) n.val = ax - bx;
            else if (op == Op::Mul) n.val = ax.array() * bx.array();
            else n.val = ax.array() / bx.array();
            break;
        }
        case Op::MatMulNN: n.val.noalias() = A * B; break;
        case Op::MatMulNT: n.val.noalias() = A * B.transpose(); break;
        case Op::MatMulTN: n.val.noalias() = A.transpose() * B; break;
        case Op::AddRowVec: {
            if (B.rows() != 1 || B.cols() != A.cols())
                throw Error("tape: add_rowvec shape mismatch");
            n.val = A.array().rowwise() + B.row(0).array();
            break;
        }
        default: throw Error(fmt::format("tape: {} is not binary", op_name(op)));
    }
    return push(std::move(n));
}

Var Tape::per_sample_linmap(Var a, std::vector<Mat> maps, int group) {
    assert(a.valid() && a.tape == this);
    const Mat& A = nodes_[a.idx].val;
    if (group <= 0 || A.rows() % group != 0 ||
        static_cast<std::size_t>(A.rows() / group) != maps.size())
        throw Error("tape: per_sample_linmap group mismatch");
    const long out_cols = maps.empty() ? 0 : maps[0].rows();
    Node n;
    n.op = Op::PerSampleLinMap;
    n.a = a.idx;
    n.payload = static_cast<std::int32_t>(payloads_.size());
    n.val.resize(A.rows(), out_cols);
    for (long r = 0; r < A.rows(); ++r)
        n.val.row(r).noalias() = A.row(r) * maps[r / group].transpose();
    payloads_.push_back(std::move(maps));
    return push(std::move(n));
}

Var Tape::sum_sq(Var a) { return sum(a * a); }

Mat& Tape::adj(std::int32_t i) {
    if (adj_[i].size() == 0) adj_[i] = Mat::Zero(nodes_[i].val.rows(), nodes_[i].val.cols());
    return adj_[i];
}

void Tape::backward(Var loss) {
    assert(loss.valid() && loss.tape == this);
    if (!scalar_shaped(nodes_[loss.idx].val)) throw Error("tape: backward needs a 1x1 loss");
    adj_.assign(nodes_.size(), Mat());
    adj(loss.idx)(0, 0) = 1.0;
    for (std::int32_t i = loss.idx; i >= 0; --i) {
        if (adj_[i].size() == 0) continue;  // not on any path to the loss
        backprop_node(i);
    }
}

void Tape::backprop_node(std::int32_t i) {
    const Node& n = nodes_[i];
    if (n.op == Op::Leaf || n.op == Op::Const) return;
    const Mat& g = adj_[i];
    if (check_finite_ && !g.allFinite())
        throw NonFiniteError(
            fmt::format("non-finite adjoint produced at op '{}' (node {})", op_name(n.op), i));
    const Mat& C = n.val;
    switch (n.op) {
        case Op::Neg: adj(n.a) -= g; break;
        case Op::Scale: adj(n.a) += n.c * g; break;
        case Op::AddC: adj(n.a) += g; break;
        case Op::RSubC: adj(n.a) -= g; break;
        case Op::Exp: adj(n.a).array() += g.array() * C.array(); break;
        case Op::Log: adj(n.a).array() += g.array() / nodes_[n.a].val.array(); break;
        case Op::Tanh: adj(n.a).array() += g.array() * (1.0 - C.array().square()); break;
        case Op::Sigmoid: adj(n.a).array() += g.array() * C.array() * (1.0 - C.array()); break;
        case Op::Sqrt: adj(n.a).array() += 0.5 * g.array() / C.array(); break;
        case Op::PowC:
            adj(n.a).array() += g.array() * n.c * nodes_[n.a].val.array().pow(n.c - 1.0);
            break;
        case Op::Transpose: adj(n.a) += g.transpose(); break;
        case Op::MatInv: adj(n.a).noalias() -= C.transpose() * g * C.transpose(); break;
        case Op::Sum: adj(n.a).array() += g(0, 0); break;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            const Mat& A = nodes_[n.a].val;
            const Mat& B = nodes_[n.b].val;
            const BShape s = bshape(A, B, n.op);
            Mat da, db;
            if (n.op == Op::Add) {
                da = g;
                db = g;
            } else if (n.op == Op::Sub) {
                da = g;
                db = -g;
            } else if (n.op == Op::Mul) {
                da = g.array() * broadcast_to(B, s.rows, s.cols, s.mode_b).array();
                db = g.array() * broadcast_to(A, s.rows, s.cols, s.mode_a).array();
            } else {
                const Mat bx = broadcast_to(B, s.rows, s.cols, s.mode_b);
                da = g.array() / bx.array();
                db = -(g.array() * C.array() / bx.array());
            }
            reduce_add(adj(n.a), da, A, s.mode_a);
            reduce_add(adj(n.b), db, B, s.mode_b);
            break;
        }
        case Op::MatMulNN:
            adj(n.a).noalias() += g * nodes_[n.b].val.transpose();
            adj(n.b).noalias() += nodes_[n.a].val.transpose() * g;
            break;
        case Op::MatMulNT:
            adj(n.a).noalias() += g * nodes_[n.b].val;
            adj(n.b).noalias() += g.transpose() * nodes_[n.a].val;
            break;
        case Op::MatMulTN:
            adj(n.a).noalias() += nodes_[n.b].val * g.transpose();
            adj(n.b).noalias() += nodes_[n.a].val * g;
            break;
        case Op::AddRowVec:
            adj(n.a) += g;
            adj(n.b).row(0) += g.colwise().sum();
            break;
        case Op::PerSampleLinMap: {
            const auto& maps = payloads_[n.payload];
            const long group = nodes_[n.a].val.rows() / static_cast<long>(maps.size());
            Mat& acc = adj(n.a);
            for (long r = 0; r < g.rows(); ++r)
                acc.row(r).noalias() += g.row(r) * maps[r / group];
            break;
        }
        default: break;
    }
}

Mat Tape::grad(Var v) const {
    assert(v.valid() && v.tape == this);
    if (adj_.empty() || adj_[v.idx].size() == 0)
        return Mat::Zero(nodes_[v.idx].val.rows(), nodes_[v.idx].val.cols());
    return adj_[v.idx];
}

}  // namespace lsim::ad
