#pragma once

#include "lsim/systems/ode_system.hpp"

#include <numbers>
#include <vector>

namespace lsim::systems {

struct VortexConfig {
    int particles = 4;
    std::vector<double> gamma = {1.0, 1.0, 1.0, 1.0};  // signed circulations
    double eps_core = 1e-3;                             // softening radius

    void validate() const {
        if (particles < 1 || static_cast<int>(gamma.size()) != particles)
            throw Error("vortex config: gamma must list one circulation per particle");
        if (eps_core < 0) throw Error("vortex config: eps_core must be >= 0");
    }
};

// 2D point vortices, state [x1, y1, ..., xP, yP]. Each vortex induces a
// circulating field of speed G/(2 pi r); the core softening removes the
// pairwise singularity.
struct VortexRhs {
    VortexConfig cfg;

    template <class S>
    void operator()(std::span<const S> x, std::span<S> dx) const {
        constexpr double two_pi = 2.0 * std::numbers::pi;
        const int p = cfg.particles;
        const double e2 = cfg.eps_core * cfg.eps_core;
        for (int i = 0; i < 2 * p; ++i) dx[i] = S{};
        for (int i = 0; i < p; ++i) {
            S vx{}, vy{};
            for (int j = 0; j < p; ++j) {
                if (j == i) continue;
                S rx = x[2 * i] - x[2 * j];
                S ry = x[2 * i + 1] - x[2 * j + 1];
                S denom = two_pi * (rx * rx + ry * ry + e2);
                vx = vx + cfg.gamma[j] * (-ry) / denom;
                vy = vy + cfg.gamma[j] * rx / denom;
            }
            dx[2 * i] = vx;
            dx[2 * i + 1] = vy;
        }
    }
};

// Conserved linear impulse (sum G_i x_i, sum G_i y_i).
Eigen::Vector2d vortex_impulse(const Vec& state, const VortexConfig& cfg);

// Interaction Hamiltonian. The softened form matches the implemented
// (regularized) dynamics exactly; the unsoftened form is the classical
// sum of G_i G_j log|r_ij|.
double vortex_hamiltonian(const Vec& state, const VortexConfig& cfg, bool softened = true);

// Two co-moving counter-rotating pairs; produces the classic leapfrogging
// motion used for plots and presets.
Vec vortex_leapfrog_ic();
VortexConfig vortex_leapfrog_config(double eps_core = 1e-3);

// Counts pairs closer than eps_core on the plain-double path (diagnostic).
long long vortex_close_encounters();

OdeSystem make_vortex_system(VortexConfig cfg = {});

}  // namespace lsim::systems
