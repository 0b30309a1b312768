#include "lsim/systems/vortex.hpp"

namespace lsim::systems {

namespace {
std::atomic<long long> g_close_encounters{0};
}

long long vortex_close_encounters() { return g_close_encounters.load(); }

Eigen::Vector2d vortex_impulse(const Vec& state, const VortexConfig& cfg) {
    Eigen::Vector2d p = Eigen::Vector2d::Zero();
    for (int i = 0; i < cfg.particles; ++i) {
        p[0] += cfg.gamma[i] * state[2 * i];
        p[1] += cfg.gamma[i] * state[2 * i + 1];
    }
    return p;
}

double vortex_hamiltonian(const Vec& state, const VortexConfig& cfg, bool softened) {
    constexpr double four_pi = 4.0 * std::numbers::pi;
    const double e2 = cfg.eps_core * cfg.eps_core;
    double h = 0;
    for (int i = 0; i < cfg.particles; ++i)
        for (int j = i + 1; j < cfg.particles; ++j) {
            const double rx = state[2 * i] - state[2 * j];
            const double ry = state[2 * i + 1] - state[2 * j + 1];
            const double r2 = rx * rx + ry * ry;
            h -= cfg.gamma[i] * cfg.gamma[j] *
                 (softened ? 0.5 * std::log(r2 + e2) : 0.5 * std::log(r2)) / four_pi;
        }
    return h;
}

Vec vortex_leapfrog_ic() {
    Vec x(8);
    // pair 1 at x=0, pair 2 at x=1; +G on top, -G on bottom: both pairs
    // translate in +x and leapfrog through each other.
    x << 0.0, 0.5, 0.0, -0.5, 1.0, 0.5, 1.0, -0.5;
    return x;
}

VortexConfig vortex_leapfrog_config(double eps_core) {
    VortexConfig cfg;
    cfg.particles = 4;
    cfg.gamma = {1.0, -1.0, 1.0, -1.0};
    cfg.eps_core = eps_core;
    return cfg;
}

OdeSystem make_vortex_system(VortexConfig cfg) {
    cfg.validate();
    OdeSystem sys = wrap_system("vortex", 2 * cfg.particles, VortexRhs{cfg});
    // Close-encounter diagnostics only on the plain-double channel.
    const VortexRhs rhs{cfg};
    sys.rhs_raw = [rhs, cfg](std::span<const double> x, std::span<double> dx) {
        const double e2 = cfg.eps_core * cfg.eps_core;
        if (e2 > 0) {
            for (int i = 0; i < cfg.particles; ++i)
                for (int j = i + 1; j < cfg.particles; ++j) {
                    const double rx = x[2 * i] - x[2 * j];
                    const double ry = x[2 * i + 1] - x[2 * j + 1];
                    if (rx * rx + ry * ry < e2)
                        g_close_encounters.fetch_add(1, std::memory_order_relaxed);
                }
        }
        rhs(x, dx);
    };
    sys.box_lo = Vec::Constant(2 * cfg.particles, -1.0);
    sys.box_hi = Vec::Constant(2 * cfg.particles, 1.0);
    sys.horizon = 12.0;
    return sys;
}

}  // namespace lsim::systems
