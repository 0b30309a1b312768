#pragma once

#include "lsim/autodiff/tape.hpp"
#include "lsim/latent/latent.hpp"

#include <fmt/format.h>

namespace lsim::train {

// One unit-norm Gaussian direction per (sample, j) pair, drawn sample-major.
Mat draw_directions(int n_samples, int k, int m, Rng& rng);

// Dispatches a type-erased system into the scalar-generic latent kernels.
struct ErasedRhs {
    const systems::OdeSystem* sys;
    template <class S>
    void operator()(std::span<const S> x, std::span<S> dx) const {
        if constexpr (std::is_same_v<S, double>) {
            sys->rhs_raw(x, dx);
        } else if constexpr (std::is_same_v<S, ad::D1>) {
            sys->rhs_dual(x, dx);
        } else {
            static_assert(std::is_same_v<S, ad::D2>);
            sys->rhs_dual2(x, dx);
        }
    }
};

// Reference slow-dynamics loss: mean squared norm of J_zdot(z_i) v_ij, the
// outer directional derivative taken exactly with one more dual level over
// the latent right-hand side (which itself contains the phi JVP).
template <class BaseF>
double jacobian_loss_ref(const net::NetDims& nd, std::span<const double> params, BaseF&& f,
                         const Mat& samples, const Mat& directions) {
    const int n_samples = static_cast<int>(samples.rows());
    const int k = static_cast<int>(directions.rows()) / n_samples;
    const int m = nd.m;
    net::Workspace<double> wsd;
    net::Workspace<ad::D1> ws1;
    double acc = 0;
    std::vector<double> z(m);
    std::vector<ad::D1> zs(m), out(m);
    for (int i = 0; i < n_samples; ++i) {
        Vec x = samples.row(i).transpose();
        net::encode_kernel<double, double>(nd, params,
                                           std::span<const double>(x.data(), x.size()),
                                           std::span<double>(z), wsd);
        for (int j = 0; j < k; ++j) {
            for (int r = 0; r < m; ++r) zs[r] = {z[r], directions(i * k + j, r)};
            latent::latent_rhs_t<ad::D1, double>(nd, params, f, std::span<const ad::D1>(zs),
                                                 std::span<ad::D1>(out));
            double term = 0;
            for (int r = 0; r < m; ++r) term += out[r].d * out[r].d;
            if (!std::isfinite(term))
                throw NonFiniteError(fmt::format("jacobian_loss: non-finite at sample {}", i));
            acc += term;
        }
    }
    return acc / (static_cast<double>(n_samples) * k);
}

// Central-difference fallback for the outer JVP (debug mode):
// eps = 1e-5 (1 + ||z||).
template <class BaseF>
double jacobian_loss_fd(const net::NetDims& nd, std::span<const double> params, BaseF&& f,
                        const Mat& samples, const Mat& directions) {
    const int n_samples = static_cast<int>(samples.rows());
    const int k = static_cast<int>(directions.rows()) / n_samples;
    const int m = nd.m;
    net::Workspace<double> wsd;
    double acc = 0;
    std::vector<double> z(m), zp(m), zm(m), gp(m), gm(m);
    for (int i = 0; i < n_samples; ++i) {
        Vec x = samples.row(i).transpose();
        net::encode_kernel<double, double>(nd, params,
                                           std::span<const double>(x.data(), x.size()),
                                           std::span<double>(z), wsd);
        double znorm = 0;
        for (int r = 0; r < m; ++r) znorm += z[r] * z[r];
        const double eps = 1e-5 * (1.0 + std::sqrt(znorm));
        for (int j = 0; j < k; ++j) {
            for (int r = 0; r < m; ++r) {
                zp[r] = z[r] + eps * directions(i * k + j, r);
                zm[r] = z[r] - eps * directions(i * k + j, r);
            }
            latent::latent_rhs_t<double, double>(nd, params, f, std::span<const double>(zp),
                                                 std::span<double>(gp));
            latent::latent_rhs_t<double, double>(nd, params, f, std::span<const double>(zm),
                                                 std::span<double>(gm));
            for (int r = 0; r < m; ++r) {
                const double d = (gp[r] - gm[r]) / (2 * eps);
                acc += d * d;
            }
        }
    }
    return acc / (static_cast<double>(n_samples) * k);
}

// Loss and parameter gradient through the scalar tape (reverse over
// forward-over-forward). Reference path for gradient oracles; the trainer
// uses the batched engine instead.
template <class BaseF>
std::pair<double, Vec> jacobian_loss_grad_ref(const net::NetDims& nd,
                                              std::span<const double> params, BaseF&& f,
                                              const Mat& samples, const Mat& directions) {
    using ad::Dual;
    using ad::Tape;
    using ad::Var;
    const int n_samples = static_cast<int>(samples.rows());
    const int k = static_cast<int>(directions.rows()) / n_samples;
    const int m = nd.m;
    Tape tape;
    std::vector<Var> p(params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
        p[i] = tape.leaf(Mat::Constant(1, 1, params[i]));
    Var acc;
    net::Workspace<Var> wsv;
    std::vector<Var> z(m);
    std::vector<Dual<Var>> zs(m), out(m);
    for (int i = 0; i < n_samples; ++i) {
        std::vector<Var> x(nd.n);
        for (int c = 0; c < nd.n; ++c) x[c] = tape.constant(Mat::Constant(1, 1, samples(i, c)));
        net::encode_kernel<Var, Var>(nd, p, std::span<const Var>(x), std::span<Var>(z), wsv);
        for (int j = 0; j < k; ++j) {
            for (int r = 0; r < m; ++r)
                zs[r] = {z[r], tape.constant(Mat::Constant(1, 1, directions(i * k + j, r)))};
            latent::latent_rhs_t<Dual<Var>, Var>(nd, p, f, std::span<const Dual<Var>>(zs),
                                                 std::span<Dual<Var>>(out));
            for (int r = 0; r < m; ++r) acc = acc + out[r].d * out[r].d;
        }
    }
    Var loss = acc * (1.0 / (static_cast<double>(n_samples) * k));
    tape.backward(loss);
    Vec g(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) g[i] = tape.grad(p[i])(0, 0);
    return {tape.scalar_value(loss), g};
}

// Convenience entry point matching the spec's operation signature.
double jacobian_loss(const net::PseudoInvertibleNet& net, const systems::OdeSystem& sys,
                     const Mat& samples, int k, Rng& rng, bool fd_fallback = false);
double jacobian_loss(const net::PseudoInvertibleNet& net, const systems::OdeSystem& sys,
                     const Mat& samples, const Mat& directions, bool fd_fallback = false);

}  // namespace lsim::train
