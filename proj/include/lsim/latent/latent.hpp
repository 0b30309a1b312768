#pragma once

#include "lsim/net/net.hpp"
#include "lsim/solvers/solvers.hpp"
#include "lsim/systems/ode_system.hpp"

#include <atomic>
#include <memory>

namespace lsim::latent {

// The derived latent dynamics: evaluating the right-hand side walks
//   u = phi^{-1}(z),  x = A^+ u,  w = A f(x),  dz/dt = J_phi(u) . w,
// which is the chain rule applied to z = phi(A x). Exactly one base-system
// evaluation per call.
class LatentSystem {
public:
    LatentSystem(const net::PseudoInvertibleNet& n, systems::OdeSystem base);

    int latent_dim() const { return net_->m(); }
    int base_dim() const { return net_->n(); }
    const systems::OdeSystem& base() const { return base_; }
    const net::PseudoInvertibleNet& network() const { return *net_; }

    void latent_rhs(const Vec& z, Vec& dz) const;
    solvers::Rhs rhs() const;

    long long base_calls() const { return base_calls_->load(); }
    void reset_counters() const { base_calls_->store(0); }

private:
    const net::PseudoInvertibleNet* net_;
    systems::OdeSystem base_;
    Mat lift_;  // cached; the net is immutable while simulating
    std::shared_ptr<std::atomic<long long>> base_calls_ =
        std::make_shared<std::atomic<long long>>(0);
};

struct LatentSimInfo {
    long long base_fcalls = 0;  // evaluations of the original f
    long long rhs_calls = 0;    // latent RHS evaluations (equal by construction)
};

// encode -> integrate the latent equations -> decode on the output grid.
// The returned trajectory lives in the original space; call counts report
// the latent RHS evaluations.
solvers::SolveResult simulate_latent(const net::PseudoInvertibleNet& n,
                                     const systems::OdeSystem& base, const Vec& x0, double t0,
                                     double tf, const solvers::SolverSpec& spec,
                                     LatentSimInfo* info = nullptr);

// Scalar-generic latent RHS for oracles and the training loss reference:
// evaluates the honest pipeline (inverse, pseudo-inverse solve, base f, JVP)
// in S arithmetic with PS-typed parameters.
template <class S, class PS, class BaseF>
void latent_rhs_t(const net::NetDims& nd, std::span<const PS> params, BaseF&& f,
                  std::span<const S> z, std::span<S> out) {
    using lsim::ad::Dual;
    const int m = nd.m, n = nd.n;
    std::vector<S> u(z.begin(), z.end());
    net::Workspace<S> ws;
    net::phi_inverse<S, PS>(nd, params, std::span<S>(u), ws);
    std::vector<S> x(n);
    // x = A^+ u via the normal equations (shares u with the JVP base point).
    {
        std::vector<PS> ata(static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                PS acc{};
                for (int r = 0; r < m; ++r)
                    acc = acc + params[r * n + i] * params[r * n + j];
                ata[i * n + j] = acc;
                ata[j * n + i] = acc;
            }
        for (int i = 0; i < n; ++i) {
            S acc{};
            for (int r = 0; r < m; ++r) acc = acc + params[r * n + i] * u[r];
            x[i] = acc;
        }
        ad::cholesky_factor(ata, n);
        ad::cholesky_solve(ata, n, std::span<S>(x));
    }
    std::vector<S> fx(n);
    f(std::span<const S>(x), std::span<S>(fx));
    // w = A f(x), then J_phi(u) . w with one more dual level.
    std::vector<Dual<S>> zw(m);
    for (int r = 0; r < m; ++r) {
        S acc{};
        for (int c = 0; c < n; ++c) acc = acc + params[r * n + c] * fx[c];
        zw[r] = {u[r], acc};
    }
    net::Workspace<Dual<S>> ws2;
    net::phi_forward<Dual<S>, PS>(nd, params, std::span<Dual<S>>(zw), ws2);
    for (int r = 0; r < m; ++r) out[r] = zw[r].d;
}

}  // namespace lsim::latent
