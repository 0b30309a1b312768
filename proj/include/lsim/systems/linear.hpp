#pragma once

#include "lsim/systems/ode_system.hpp"

namespace lsim::systems {

// The 3-state benchmark: dx/dt = M x with eigenvalues (-20, -2 + i, -2 - i):
// a fast transient followed by a slow decaying oscillation.
struct LinearRhs {
    template <class S>
    void operator()(std::span<const S> x, std::span<S> dx) const {
        dx[0] = 33.0 * x[0] + 17.0 * x[1] - 70.0 * x[2];
        dx[1] = 42.0 * x[0] + 18.0 * x[1] - 80.0 * x[2];
        dx[2] = 37.0 * x[0] + 18.0 * x[1] - 75.0 * x[2];
    }
};

Mat linear_matrix();

// exp(M t) x0 via the (cached) eigendecomposition of M.
Vec linear_exact(const Vec& x0, double t);

OdeSystem make_linear_system();

}  // namespace lsim::systems
