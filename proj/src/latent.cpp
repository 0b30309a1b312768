#include "lsim/latent/latent.hpp"

namespace lsim::latent {

LatentSystem::LatentSystem(const net::PseudoInvertibleNet& n, systems::OdeSystem base)
    : net_(&n), base_(std::move(base)), lift_(n.lift()) {
    if (base_.dim != net_->n()) throw Error("latent system: net and base dimensions differ");
}

void LatentSystem::latent_rhs(const Vec& z, Vec& dz) const {
    // phi^{-1}(z) is computed once and shared between the projection and the
    // JVP base point.
    const Vec u = net_->phi_inverse(z);
    const Vec x = net_->pinv() * u;
    Vec fx(base_.dim);
    base_.rhs(x, fx);
    base_calls_->fetch_add(1, std::memory_order_relaxed);
    const Vec w = lift_ * fx;
    dz = net_->phi_jvp(u, w);
}

solvers::Rhs LatentSystem::rhs() const {
    return [this](const Vec& z, Vec& dz) { latent_rhs(z, dz); };
}

solvers::SolveResult simulate_latent(const net::PseudoInvertibleNet& n,
                                     const systems::OdeSystem& base, const Vec& x0, double t0,
                                     double tf, const solvers::SolverSpec& spec,
                                     LatentSimInfo* info) {
    LatentSystem sys(n, base);
    const Vec z0 = n.encode(x0);
    solvers::SolveResult res = solvers::integrate(sys.rhs(), z0, t0, tf, spec);
    // Decode on the output grid only.
    Mat decoded(res.states.rows(), n.n());
    for (int g = 0; g < res.states.rows(); ++g) {
        Vec z = res.states.row(g).transpose();
        if (z.allFinite())
            decoded.row(g) = n.decode(z).transpose();
        else
            decoded.row(g).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    res.states = std::move(decoded);
    if (info) {
        info->base_fcalls = sys.base_calls();
        info->rhs_calls = res.n_fcalls;
    }
    return res;
}

}  // namespace lsim::latent
