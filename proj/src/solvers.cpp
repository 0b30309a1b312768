#include "lsim/solvers/solvers.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>

namespace lsim::solvers {

const char* solver_name(SolverKind k) {
    switch (k) {
        case SolverKind::Euler: return "euler";
        case SolverKind::RK4: return "rk4";
        case SolverKind::Dopri5: return "dopri5";
    }
    return "?";
}

SolverKind solver_from_name(const std::string& name) {
    if (name == "euler") return SolverKind::Euler;
    if (name == "rk4") return SolverKind::RK4;
    if (name == "dopri5") return SolverKind::Dopri5;
    throw FormatError(fmt::format("unknown solver '{}'", name));
}

void SolverSpec::validate() const {
    if (kind != SolverKind::Dopri5 && dt <= 0) throw Error("solver spec: dt must be positive");
    if (kind == SolverKind::Dopri5 && (rtol <= 0 || atol <= 0))
        throw Error("solver spec: rtol/atol must be positive");
    if (grid_size < 2) throw Error("solver spec: output grid needs at least 2 points");
    if (max_steps < 1) throw Error("solver spec: max_steps must be positive");
}

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

struct GridWriter {
    double t0, tf;
    int size;
    SolveResult* out;
    int next = 0;

    double grid_time(int g) const {
        return t0 + (tf - t0) * static_cast<double>(g) / (size - 1);
    }

    // Emit every grid point with time <= t_hi using the supplied interpolant.
    template <class Interp>
    void emit_upto(double t_hi, Interp&& interp) {
        while (next < size && grid_time(next) <= t_hi + 1e-30) {
            out->states.row(next) = interp(grid_time(next)).transpose();
            ++next;
        }
    }

    void finish(const Vec& x_final) {
        for (int g = next; g < size - 1; ++g)
            out->states.row(g).setConstant(std::numeric_limits<double>::quiet_NaN());
        out->states.row(size - 1) = x_final.transpose();
        next = size;
    }

    void fail_fill() {
        for (int g = next; g < size; ++g)
            out->states.row(g).setConstant(std::numeric_limits<double>::quiet_NaN());
        next = size;
    }
};

// Cubic Hermite on one step given both endpoint derivatives.
Vec hermite(double t, double ta, double tb, const Vec& xa, const Vec& fa, const Vec& xb,
            const Vec& fb) {
    const double h = tb - ta;
    const double s = (t - ta) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * xa + (s3 - 2 * s2 + s) * h * fa + (-2 * s3 + 3 * s2) * xb +
           (s3 - s2) * h * fb;
}

// Quadratic fallback for the final step, where the right-endpoint derivative
// would cost an extra function call.
Vec hermite_left(double t, double ta, double tb, const Vec& xa, const Vec& fa, const Vec& xb) {
    const double h = tb - ta;
    const double s = (t - ta) / h;
    return xa + s * h * fa + s * s * (xb - xa - h * fa);
}

SolveResult fixed_step(const Rhs& f, const Vec& x0, double t0, double tf,
                       const SolverSpec& spec) {
    Timer timer;
    const int dim = static_cast<int>(x0.size());
    SolveResult res;
    res.times = Vec::LinSpaced(spec.grid_size, t0, tf);
    res.states.resize(spec.grid_size, dim);
    GridWriter grid{t0, tf, spec.grid_size, &res};
    res.states.row(0) = x0.transpose();
    grid.next = 1;

    const long n_steps = static_cast<long>(std::ceil((tf - t0) / spec.dt - 1e-9));
    const bool rk4 = spec.kind == SolverKind::RK4;

    Vec x = x0, k1(dim), k2(dim), k3(dim), k4(dim), xt(dim);
    // A completed step is held back until the right-endpoint derivative (the
    // next step's first evaluation) is available for cubic interpolation.
    double pend_ta = 0, pend_tb = 0;
    Vec pend_xa, pend_fa, pend_xb;
    bool pending = false;
    double t = t0;

    auto eval = [&](const Vec& in, Vec& out) {
        f(in, out);
        ++res.n_fcalls;
    };

    for (long step = 0; step < n_steps; ++step) {
        const double h = std::min(spec.dt, tf - t);
        eval(x, k1);
        if (pending) {
            grid.emit_upto(pend_tb, [&](double tq) {
                return hermite(tq, pend_ta, pend_tb, pend_xa, pend_fa, pend_xb, k1);
            });
            pending = false;
        }
        Vec x_new(dim);
        if (!rk4) {
            x_new = x + h * k1;
        } else {
            xt = x + 0.5 * h * k1;
            eval(xt, k2);
            xt = x + 0.5 * h * k2;
            eval(xt, k3);
            xt = x + h * k3;
            eval(xt, k4);
            x_new = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
        }
        ++res.n_steps;
        if (!x_new.allFinite()) {
            res.status = SolveStatus::NonFinite;
            res.fail_time = t + h;
            res.error = fmt::format("non-finite state at t={:.6g}", t + h);
            grid.fail_fill();
            res.wall_time = timer.seconds();
            return res;
        }
        pend_ta = t;
        pend_tb = t + h;
        pend_xa = x;
        pend_fa = k1;
        pend_xb = x_new;
        pending = true;
        x = x_new;
        t = pend_tb;
    }
    if (pending)
        grid.emit_upto(t - 1e-12 * std::max(1.0, std::abs(t)), [&](double tq) {
            return hermite_left(tq, pend_ta, pend_tb, pend_xa, pend_fa, pend_xb);
        });
    grid.finish(x);
    res.wall_time = timer.seconds();
    return res;
}

// Dormand-Prince 5(4) tableau.
constexpr double A21 = 1.0 / 5;
constexpr double A31 = 3.0 / 40, A32 = 9.0 / 40;
constexpr double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9;
constexpr double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561,
                 A54 = -212.0 / 729;
constexpr double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247,
                 A64 = 49.0 / 176, A65 = -5103.0 / 18656;
constexpr double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784,
                 B6 = 11.0 / 84;
constexpr double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920,
                 E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40;
// Dense-output coefficients (CONTD5).
constexpr double D1 = -12715105075.0 / 11282082432.0, D3 = 87487479700.0 / 32700410799.0,
                 D4 = -10690763975.0 / 1880347072.0, D5 = 701980252875.0 / 199316789632.0,
                 D6 = -1453857185.0 / 822651844.0, D7 = 69997945.0 / 29380423.0;

SolveResult dopri5(const Rhs& f, const Vec& x0, double t0, double tf, const SolverSpec& spec) {
    Timer timer;
    const int dim = static_cast<int>(x0.size());
    SolveResult res;
    res.times = Vec::LinSpaced(spec.grid_size, t0, tf);
    res.states.resize(spec.grid_size, dim);
    GridWriter grid{t0, tf, spec.grid_size, &res};
    res.states.row(0) = x0.transpose();
    grid.next = 1;

    Vec x = x0;
    Vec k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), xt(dim), x_new(dim),
        err(dim);
    auto eval = [&](const Vec& in, Vec& out) {
        f(in, out);
        ++res.n_fcalls;
    };
    double t = t0;
    eval(x, k1);

    // Initial step from the scaled norms of x0 and f(x0); no probe
    // evaluations, so the call-count accounting stays exact.
    auto scaled_rms = [&](const Vec& v, const Vec& ref) {
        double acc = 0;
        for (int i = 0; i < dim; ++i) {
            const double sc = spec.atol + spec.rtol * std::abs(ref[i]);
            acc += (v[i] / sc) * (v[i] / sc);
        }
        return std::sqrt(acc / dim);
    };
    const double d0 = scaled_rms(x, x), d1 = scaled_rms(k1, x);
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min(h, 0.1 * (tf - t0));

    const double h_min = 1e-14 * (tf - t0);
    auto fail = [&](SolveStatus st, const char* what) {
        res.status = st;
        res.fail_time = t;
        res.error = fmt::format("{} at t={:.6g}", what, t);
        grid.fail_fill();
        res.wall_time = timer.seconds();
        return res;
    };

    while (t < tf - 1e-30 * std::max(1.0, std::abs(tf))) {
        if (res.n_steps + res.n_rejected >= spec.max_steps)
            return fail(SolveStatus::MaxSteps, "max step count exceeded");
        if (h < h_min) return fail(SolveStatus::StepUnderflow, "step size underflow");
        h = std::min(h, tf - t);

        xt = x + h * (A21 * k1);
        eval(xt, k2);
        xt = x + h * (A31 * k1 + A32 * k2);
        eval(xt, k3);
        xt = x + h * (A41 * k1 + A42 * k2 + A43 * k3);
        eval(xt, k4);
        xt = x + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4);
        eval(xt, k5);
        xt = x + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5);
        eval(xt, k6);
        x_new = x + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        eval(x_new, k7);  // FSAL stage
        err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);

        double err_norm;
        const bool finite = x_new.allFinite() && k7.allFinite();
        if (finite) {
            err_norm = 0;
            for (int i = 0; i < dim; ++i) {
                const double sc =
                    spec.atol + spec.rtol * std::max(std::abs(x[i]), std::abs(x_new[i]));
                err_norm += (err[i] / sc) * (err[i] / sc);
            }
            err_norm = std::sqrt(err_norm / dim);
        } else {
            err_norm = std::numeric_limits<double>::infinity();
        }

        if (err_norm <= 1.0) {
            const double t_new = t + h;
            const Vec dx = x_new - x;
            const Vec r3 = h * k1 - dx;
            const Vec r4 = dx - h * k7 - r3;
            const Vec r5 = h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7);
            const Vec& xa = x;
            const double t_lo = t, h_acc = h;
            grid.emit_upto(t_new, [&](double tq) -> Vec {
                const double s = (tq - t_lo) / h_acc;
                return xa + s * (dx + (1 - s) * (r3 + s * (r4 + (1 - s) * r5)));
            });
            x = x_new;
            k1 = k7;
            t = t_new;
            ++res.n_steps;
            h *= std::clamp(0.9 * std::pow(std::max(err_norm, 1e-16), -0.2), 0.2, 5.0);
        } else {
            ++res.n_rejected;
            if (!finite && h < 16 * h_min)
                return fail(SolveStatus::NonFinite, "non-finite stage");
            h *= std::isfinite(err_norm) ? std::clamp(0.9 * std::pow(err_norm, -0.2), 0.2, 1.0)
                                         : 0.2;
        }
    }
    grid.finish(x);
    res.wall_time = timer.seconds();
    return res;
}

}  // namespace

SolveResult integrate(const Rhs& f, const Vec& x0, double t0, double tf,
                      const SolverSpec& spec) {
    spec.validate();
    if (!(tf > t0)) throw Error("integrate: tf must exceed t0");
    if (!x0.allFinite()) throw Error("integrate: non-finite initial state");
    try {
        if (spec.kind == SolverKind::Dopri5) return dopri5(f, x0, t0, tf, spec);
        return fixed_step(f, x0, t0, tf, spec);
    } catch (const std::exception& e) {
        SolveResult res;
        res.times = Vec::LinSpaced(spec.grid_size, t0, tf);
        res.states.setConstant(spec.grid_size, x0.size(),
                               std::numeric_limits<double>::quiet_NaN());
        res.status = SolveStatus::RhsError;
        res.error = e.what();
        return res;
    }
}

SolveResult sample_exact(const std::function<Vec(double)>& x_of_t, double t0, double tf,
                         int grid_size) {
    SolveResult res;
    res.times = Vec::LinSpaced(grid_size, t0, tf);
    Vec first = x_of_t(t0);
    res.states.resize(grid_size, first.size());
    res.states.row(0) = first.transpose();
    for (int g = 1; g < grid_size; ++g) res.states.row(g) = x_of_t(res.times[g]).transpose();
    return res;
}

double mse(const SolveResult& a, const SolveResult& b) {
    if (a.times.size() != b.times.size() || a.states.cols() != b.states.cols())
        throw Error("mse: output grids do not match");
    if ((a.times - b.times).cwiseAbs().maxCoeff() >
        1e-9 * std::max(1.0, b.times.cwiseAbs().maxCoeff()))
        throw Error("mse: output grids do not match");
    return (a.states - b.states).squaredNorm() /
           static_cast<double>(a.states.rows() * a.states.cols());
}

double mse_endpoint(const SolveResult& a, const SolveResult& b) {
    if (a.states.cols() != b.states.cols()) throw Error("mse: dimensions do not match");
    return (a.states.row(a.states.rows() - 1) - b.states.row(b.states.rows() - 1))
               .squaredNorm() /
           static_cast<double>(a.states.cols());
}

}  // namespace lsim::solvers
