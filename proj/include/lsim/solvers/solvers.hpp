#pragma once

#include "lsim/core.hpp"

#include <functional>
#include <string>

namespace lsim::solvers {

enum class SolverKind { Euler, RK4, Dopri5 };

const char* solver_name(SolverKind k);
SolverKind solver_from_name(const std::string& name);

struct SolverSpec {
    SolverKind kind = SolverKind::Dopri5;
    double dt = 0.01;             // fixed-step kinds
    double rtol = 1e-6;           // Dopri5
    double atol = 1e-6;           // Dopri5
    long max_steps = 50'000'000;
    int grid_size = 201;          // uniform output samples over [t0, tf]

    void validate() const;
};

enum class SolveStatus { Ok, StepUnderflow, MaxSteps, NonFinite, RhsError };

struct SolveResult {
    Vec times;          // grid_size, strictly increasing
    Mat states;         // grid_size x dim
    long n_fcalls = 0;  // exact RHS evaluation count
    long n_steps = 0;
    long n_rejected = 0;
    double wall_time = 0.0;  // seconds
    SolveStatus status = SolveStatus::Ok;
    double fail_time = 0.0;
    std::string error;

    bool ok() const { return status == SolveStatus::Ok; }
};

using Rhs = std::function<void(const Vec&, Vec&)>;

// Integrates the autonomous system dx/dt = f(x) over [t0, tf] and samples the
// solution on the uniform output grid. Euler costs one call per step, RK4
// four; Dopri5 costs 7 on the first step and 6 per attempt after (FSAL).
SolveResult integrate(const Rhs& f, const Vec& x0, double t0, double tf,
                      const SolverSpec& spec);

// Builds a grid-sampled result from a closed-form solution (cost-free
// reference oracle).
SolveResult sample_exact(const std::function<Vec(double)>& x_of_t, double t0, double tf,
                         int grid_size);

// Mean over grid points and state components of squared differences.
double mse(const SolveResult& a, const SolveResult& b);
// Alternative endpoint-only metric (kept behind a config flag).
double mse_endpoint(const SolveResult& a, const SolveResult& b);

}  // namespace lsim::solvers
