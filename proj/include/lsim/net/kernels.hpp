#pragma once

#include "lsim/autodiff/dual.hpp"
#include "lsim/autodiff/linalg.hpp"
#include "lsim/net/dims.hpp"

#include <fmt/format.h>

#include <span>
#include <vector>

// Scalar-generic evaluation kernels for the pseudo-invertible net. S is the
// data scalar (double, dual, nested dual, possibly over tape variables) and
// PS the parameter scalar (double for inference, a tape variable when
// gradients w.r.t. parameters are wanted).
namespace lsim::net {

template <class S>
struct Workspace {
    std::vector<S> sbuf, tbuf, h0, h1;
};

template <class S, class PS>
void mlp_apply(const MlpDims& d, std::span<const PS> p, std::span<const S> in, std::span<S> out,
               Workspace<S>& ws) {
    using lsim::ad::silu;
    // acc starts as a structural zero so the same code serves plain doubles,
    // duals, and tape variables; the bias joins through a mixed add.
    auto linear_row = [&](std::size_t off, int rows, int cols, std::span<const S> x, int r) {
        S acc{};
        for (int c = 0; c < cols; ++c) acc = acc + p[off + r * cols + c] * x[c];
        return acc + p[off + static_cast<std::size_t>(rows) * cols + r];
    };
    std::size_t off = 0;
    if (d.depth == 0) {
        for (int r = 0; r < d.out; ++r) out[r] = linear_row(off, d.out, d.in, in, r);
        return;
    }
    ws.h0.resize(d.width);
    ws.h1.resize(d.width);
    auto* cur = &ws.h0;
    auto* nxt = &ws.h1;
    for (int r = 0; r < d.width; ++r) (*cur)[r] = silu(linear_row(off, d.width, d.in, in, r));
    off += static_cast<std::size_t>(d.width) * d.in + d.width;
    for (int l = 1; l < d.depth; ++l) {
        for (int r = 0; r < d.width; ++r)
            (*nxt)[r] = silu(linear_row(off, d.width, d.width, *cur, r));
        std::swap(cur, nxt);
        off += static_cast<std::size_t>(d.width) * d.width + d.width;
    }
    for (int r = 0; r < d.out; ++r) out[r] = linear_row(off, d.out, d.width, *cur, r);
}

// Smooth scale clamp: c * tanh(s / c), so |scale| < c and exp never overflows.
template <class S>
S clamp_scale(const S& s, double c) {
    using lsim::ad::tanh;
    return c * tanh(s * (1.0 / c));
}

template <class S, class PS>
void phi_layer_subnets(const NetDims& nd, int layer, std::span<const PS> params,
                       std::span<const S> cond, Workspace<S>& ws) {
    const MlpDims sd = nd.subnet();
    ws.sbuf.resize(sd.out);
    ws.tbuf.resize(sd.out);
    mlp_apply<S, PS>(sd, params.subspan(nd.subnet_offset(layer, 0), sd.param_count()), cond,
                     ws.sbuf, ws);
    mlp_apply<S, PS>(sd, params.subspan(nd.subnet_offset(layer, 1), sd.param_count()), cond,
                     ws.tbuf, ws);
}

template <class S, class PS>
void phi_forward(const NetDims& nd, std::span<const PS> params, std::span<S> z,
                 Workspace<S>& ws) {
    using lsim::ad::exp;
    for (int layer = 0; layer < nd.layers; ++layer) {
        int co, to;
        nd.layer_blocks(layer, co, to);
        phi_layer_subnets<S, PS>(nd, layer, params, z.subspan(co, nd.cond_size()), ws);
        for (int i = 0; i < nd.trans_size(); ++i) {
            S& zb = z[to + i];
            zb = zb * exp(clamp_scale(ws.sbuf[i], nd.clamp)) + ws.tbuf[i];
            if (!std::isfinite(lsim::ad::primal(zb)))
                throw NonFiniteError(
                    fmt::format("coupling layer {}: non-finite forward output", layer));
        }
    }
}

template <class S, class PS>
void phi_inverse(const NetDims& nd, std::span<const PS> params, std::span<S> z,
                 Workspace<S>& ws) {
    using lsim::ad::exp;
    for (int layer = nd.layers - 1; layer >= 0; --layer) {
        int co, to;
        nd.layer_blocks(layer, co, to);
        phi_layer_subnets<S, PS>(nd, layer, params, z.subspan(co, nd.cond_size()), ws);
        for (int i = 0; i < nd.trans_size(); ++i) {
            S& zb = z[to + i];
            zb = (zb - ws.tbuf[i]) * exp(-clamp_scale(ws.sbuf[i], nd.clamp));
            if (!std::isfinite(lsim::ad::primal(zb)))
                throw NonFiniteError(
                    fmt::format("coupling layer {}: non-finite inverse output", layer));
        }
    }
}

// z = phi(A x)
template <class S, class PS>
void encode_kernel(const NetDims& nd, std::span<const PS> params, std::span<const S> x,
                   std::span<S> z, Workspace<S>& ws) {
    for (int r = 0; r < nd.m; ++r) {
        S acc{};
        for (int c = 0; c < nd.n; ++c) acc = acc + params[r * nd.n + c] * x[c];
        z[r] = acc;
    }
    phi_forward<S, PS>(nd, params, z, ws);
}

// x = A^+ phi^{-1}(z), solving the normal equations in parameter arithmetic
// so gradients flow through the pseudo-inverse.
template <class S, class PS>
void decode_kernel(const NetDims& nd, std::span<const PS> params, std::span<const S> z,
                   std::span<S> x, Workspace<S>& ws) {
    std::vector<S> u(z.begin(), z.end());
    phi_inverse<S, PS>(nd, params, std::span<S>(u), ws);
    // AtA (n x n) and rhs = A^T u.
    std::vector<PS> ata(static_cast<std::size_t>(nd.n) * nd.n);
    for (int i = 0; i < nd.n; ++i)
        for (int j = i; j < nd.n; ++j) {
            PS acc{};
            for (int r = 0; r < nd.m; ++r)
                acc = acc + params[r * nd.n + i] * params[r * nd.n + j];
            ata[i * nd.n + j] = acc;
            ata[j * nd.n + i] = acc;
        }
    for (int i = 0; i < nd.n; ++i) {
        S acc{};
        for (int r = 0; r < nd.m; ++r) acc = acc + params[r * nd.n + i] * u[r];
        x[i] = acc;
    }
    ad::cholesky_factor(ata, nd.n);
    ad::cholesky_solve(ata, nd.n, x);
}

}  // namespace lsim::net
