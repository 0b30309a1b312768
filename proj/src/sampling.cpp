#include "lsim/train/sampling.hpp"

#include "lsim/solvers/solvers.hpp"

#include <fmt/format.h>

namespace lsim::train {

Mat make_samples(const systems::OdeSystem& sys, const SampleConfig& cfg, Rng& rng) {
    if (cfg.total() < 1) throw Error("make_samples: need at least one point");
    Mat samples(cfg.total(), sys.dim);
    if (cfg.mode == SampleMode::UniformBox) {
        for (int i = 0; i < cfg.count; ++i)
            samples.row(i) = random_in_box(sys.box_lo, sys.box_hi, rng).transpose();
        return samples;
    }

    // Escape bound: the domain box inflated about its center.
    const Vec center = 0.5 * (sys.box_lo + sys.box_hi);
    const Vec half = 0.5 * (sys.box_hi - sys.box_lo);
    solvers::SolverSpec spec;
    spec.kind = solvers::SolverKind::Dopri5;
    spec.rtol = spec.atol = cfg.traj_rtol;
    spec.grid_size = cfg.per_trajectory;
    int row = 0;
    for (int t = 0; t < cfg.trajectories; ++t) {
        bool accepted = false;
        for (int attempt = 0; attempt < 50 && !accepted; ++attempt) {
            const Vec x0 = random_in_box(sys.box_lo, sys.box_hi, rng);
            auto run = solvers::integrate([&](const Vec& x, Vec& dx) { sys.rhs(x, dx); }, x0,
                                          0.0, sys.horizon, spec);
            if (!run.ok()) continue;
            bool inside = true;
            for (int g = 0; g < run.states.rows() && inside; ++g)
                for (int c = 0; c < sys.dim; ++c)
                    if (std::abs(run.states(g, c) - center[c]) >
                        cfg.escape_factor * std::max(half[c], 1e-12)) {
                        inside = false;
                        break;
                    }
            if (!inside) continue;
            samples.middleRows(row, cfg.per_trajectory) = run.states;
            row += cfg.per_trajectory;
            accepted = true;
        }
        if (!accepted)
            throw Error(fmt::format(
                "make_samples: 50 consecutive trajectories escaped the bounding box "
                "({}x domain) for system '{}'",
                cfg.escape_factor, sys.name));
    }
    return samples;
}

}  // namespace lsim::train
