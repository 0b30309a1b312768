#pragma once

#include "lsim/systems/ode_system.hpp"

namespace lsim::train {

enum class SampleMode { UniformBox, Trajectory };

struct SampleConfig {
    SampleMode mode = SampleMode::UniformBox;
    int count = 600;            // uniform-box mode: number of points
    int trajectories = 40;      // trajectory mode
    int per_trajectory = 25;    // states subsampled per trajectory
    double escape_factor = 10.0;  // trajectories leaving the scaled box are redrawn
    double traj_rtol = 1e-9;

    int total() const {
        return mode == SampleMode::UniformBox ? count : trajectories * per_trajectory;
    }
};

// Draws training points in the original state space: i.i.d. from the
// system's domain box, or by integrating trajectories from random initial
// conditions and subsampling them uniformly in time.
Mat make_samples(const systems::OdeSystem& sys, const SampleConfig& cfg, Rng& rng);

}  // namespace lsim::train
