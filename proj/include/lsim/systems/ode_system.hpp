#pragma once

#include "lsim/autodiff/dual.hpp"
#include "lsim/autodiff/jvp.hpp"
#include "lsim/core.hpp"

#include <atomic>
#include <functional>
#include <memory>
#include <string>

namespace lsim::systems {

// A named autonomous right-hand side with its sampling box, default horizon,
// and (when known) exact solution. The dual/dual2 channels expose the same
// function to forward-mode differentiation; every evaluation through rhs()
// bumps the shared call counter exactly once.
struct OdeSystem {
    std::string name;
    int dim = 0;
    std::function<void(std::span<const double>, std::span<double>)> rhs_raw;
    std::function<void(std::span<const ad::D1>, std::span<ad::D1>)> rhs_dual;
    std::function<void(std::span<const ad::D2>, std::span<ad::D2>)> rhs_dual2;
    Vec box_lo, box_hi;
    double horizon = 1.0;
    std::function<Vec(const Vec&, double)> exact;  // null when no closed form
    std::shared_ptr<std::atomic<long long>> n_calls =
        std::make_shared<std::atomic<long long>>(0);

    void rhs(const Vec& x, Vec& dx) const {
        n_calls->fetch_add(1, std::memory_order_relaxed);
        dx.resize(dim);
        rhs_raw(std::span<const double>(x.data(), x.size()),
                std::span<double>(dx.data(), dx.size()));
    }

    Vec eval(const Vec& x) const {
        Vec dx(dim);
        rhs(x, dx);
        return dx;
    }

    // J_f(x) . v via duals (does not touch the call counter).
    Vec jvp(const Vec& x, const Vec& v) const {
        return ad::jvp([&](std::span<const ad::D1> in, std::span<ad::D1> out) {
            rhs_dual(in, out);
        }, x, v, dim);
    }

    Mat jacobian(const Vec& x) const {
        Mat j(dim, dim);
        Vec e = Vec::Zero(dim);
        for (int c = 0; c < dim; ++c) {
            e[c] = 1.0;
            j.col(c) = jvp(x, e);
            e[c] = 0.0;
        }
        return j;
    }

    long long call_count() const { return n_calls->load(); }
    void reset_call_count() const { n_calls->store(0); }
};

// Wraps a scalar-generic functor into the type-erased channels.
template <class F>
OdeSystem wrap_system(std::string name, int dim, F f) {
    OdeSystem sys;
    sys.name = std::move(name);
    sys.dim = dim;
    sys.rhs_raw = [f](std::span<const double> x, std::span<double> dx) { f(x, dx); };
    sys.rhs_dual = [f](std::span<const ad::D1> x, std::span<ad::D1> dx) { f(x, dx); };
    sys.rhs_dual2 = [f](std::span<const ad::D2> x, std::span<ad::D2> dx) { f(x, dx); };
    return sys;
}

}  // namespace lsim::systems
