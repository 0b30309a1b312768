#pragma once

#include "lsim/autodiff/dual.hpp"
#include "lsim/autodiff/tape.hpp"
#include "lsim/core.hpp"

#include <fmt/format.h>

#include <vector>

namespace lsim::ad {

// J_f(x) . v by evaluating f on dual inputs; no Jacobian matrix is formed.
// f has signature f(span<const D1> in, span<D1> out).
template <class F>
Vec jvp(F&& f, const Vec& x, const Vec& v, int out_dim = -1) {
    if (x.size() != v.size()) throw Error("jvp: x and v must have the same shape");
    if (out_dim < 0) out_dim = static_cast<int>(x.size());
    std::vector<D1> in(x.size()), out(out_dim);
    for (int i = 0; i < x.size(); ++i) in[i] = {x[i], v[i]};
    f(std::span<const D1>(in), std::span<D1>(out));
    Vec r(out_dim);
    for (int i = 0; i < out_dim; ++i) {
        r[i] = out[i].d;
        if (!std::isfinite(out[i].v) || !std::isfinite(out[i].d))
            throw NonFiniteError(fmt::format("jvp: non-finite output at component {}", i));
    }
    return r;
}

// Central-difference fallback used for debugging the dual path.
template <class F>
Vec jvp_fd(F&& f, const Vec& x, const Vec& v, double eps, int out_dim = -1) {
    if (out_dim < 0) out_dim = static_cast<int>(x.size());
    std::vector<double> p(x.size()), m(x.size());
    std::vector<double> fp(out_dim), fm(out_dim);
    for (int i = 0; i < x.size(); ++i) {
        p[i] = x[i] + eps * v[i];
        m[i] = x[i] - eps * v[i];
    }
    f(std::span<const double>(p), std::span<double>(fp));
    f(std::span<const double>(m), std::span<double>(fm));
    Vec r(out_dim);
    for (int i = 0; i < out_dim; ++i) r[i] = (fp[i] - fm[i]) / (2.0 * eps);
    return r;
}

// Reverse-mode gradient of a scalar loss over a parameter vector. The loss
// callable receives the parameters as scalar tape variables and returns the
// loss node; it may internally run forward-mode duals over tape variables
// (reverse-over-forward).
template <class F>
Vec grad(F&& loss, const Vec& params) {
    Tape tape;
    std::vector<Var> p(params.size());
    for (int i = 0; i < params.size(); ++i) p[i] = tape.leaf(Mat::Constant(1, 1, params[i]));
    Var l = loss(std::span<const Var>(p));
    if (!std::isfinite(tape.scalar_value(l))) throw NonFiniteError("grad: loss is non-finite");
    tape.backward(l);
    Vec g(params.size());
    for (int i = 0; i < params.size(); ++i) g[i] = tape.grad(p[i])(0, 0);
    return g;
}

// Central-difference gradient oracle: loss is a plain double function.
template <class F>
Vec grad_fd(F&& loss, const Vec& params, double eps_rel = 1e-6) {
    Vec g(params.size());
    Vec p = params;
    for (int i = 0; i < params.size(); ++i) {
        const double eps = eps_rel * std::max(1.0, std::abs(params[i]));
        p[i] = params[i] + eps;
        const double fp = loss(p);
        p[i] = params[i] - eps;
        const double fm = loss(p);
        p[i] = params[i];
        g[i] = (fp - fm) / (2.0 * eps);
    }
    return g;
}

}  // namespace lsim::ad
