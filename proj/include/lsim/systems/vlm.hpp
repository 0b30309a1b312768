#pragma once

#include "lsim/autodiff/linalg.hpp"
#include "lsim/systems/ode_system.hpp"

#include <filesystem>
#include <memory>
#include <numbers>
#include <vector>

namespace lsim::systems {

// Longitudinal aircraft with vortex-lattice aerodynamics. Body axes:
// x forward, y starboard, z up; state [vx, vz, pitch rate, pitch angle].
struct VlmConfig {
    double wing_span = 11.0;
    double wing_chord = 1.5;
    int wing_panels = 100;
    double tail_span = 2.75;
    double tail_chord = 0.75;
    int tail_panels = 25;
    double wing_x = -0.2;    // wing quarter-chord station relative to the CG
    double tail_arm = 5.0;   // tail quarter chord sits at x = -tail_arm
    double wing_incidence_deg = 2.0;
    double tail_incidence_deg = -2.0;
    double mass = 700.0;      // kg
    double iyy = 3000.0;      // kg m^2
    double rho = 1.225;       // kg / m^3
    double gravity = 9.81;    // m / s^2
    double core_radius = 0.05;   // filament core, regularizes wake-surface passes
    double min_airspeed = 1.0;   // stall guard
    bool paper_vz_sign = false;  // printed Eq. sign: vdot_z = Fz/m - q vx

    void validate() const {
        if (wing_span <= 0 || wing_chord <= 0 || tail_span <= 0 || tail_chord <= 0)
            throw Error("vlm config: geometry must be positive");
        if (wing_panels < 1 || tail_panels < 1) throw Error("vlm config: need panels");
        if (mass <= 0 || iyy <= 0 || rho <= 0) throw Error("vlm config: bad mass properties");
        if (core_radius <= 0 || min_airspeed <= 0)
            throw Error("vlm config: core radius and stall guard must be positive");
    }
};

namespace vlm_detail {

struct Panel {
    double x_qc;        // bound vortex station
    double y_l, y_r, y_mid;
    double cp_x;        // control point (three-quarter chord)
    double nx, nz;      // surface normal (carries incidence)
    double dy;
};

// Velocity induced at p by a semi-infinite filament leaving `a` along the
// unit direction w (unit circulation). w = (wx, 0, wz) is state-dependent.
template <class S>
inline void leg_velocity(double px, double py, double pz, double ax, double ay, double az,
                         const S& wx, const S& wz, double rc2, S& vx, S& vy, S& vz) {
    const double rx = px - ax, ry = py - ay, rz = pz - az;
    const double rlen = std::sqrt(rx * rx + ry * ry + rz * rz);
    S cx = -(wz * ry);
    S cy = wz * rx - wx * rz;
    S cz = wx * ry;
    S d2 = cx * cx + cy * cy + cz * cz;  // squared perpendicular distance
    S k = (1.0 + (wx * rx + wz * rz) * (1.0 / rlen)) /
          ((4.0 * std::numbers::pi) * (d2 + rc2));
    vx = vx + k * cx;
    vy = vy + k * cy;
    vz = vz + k * cz;
}

// Finite straight segment p1 -> p2 (geometry constants only, unit
// circulation): used for the bound vortices, which sit in the z = 0 plane,
// so the induced velocity at in-plane points is purely vertical.
double bound_segment_z(double px, double py, double pz, double x1, double y1, double x2,
                       double y2, double rc2);

}  // namespace vlm_detail

class VlmModel {
public:
    explicit VlmModel(VlmConfig cfg);

    const VlmConfig& config() const { return cfg_; }
    int panel_count() const { return static_cast<int>(panels_.size()); }

    // Aerodynamic force resultants (no gravity): solves the flow-tangency
    // system for the circulations, then sums Kutta-Joukowski panel forces
    // rho * V_local x Gamma and their moments about the CG.
    template <class S>
    void solve_forces(std::span<const S> state, S& fx, S& fz, S& my) const {
        const int np = panel_count();
        const S& vx = state[0];
        const S& vz = state[1];
        const S& q = state[2];
        const S v2 = vx * vx + vz * vz;
        if (ad::primal(v2) < cfg_.min_airspeed * cfg_.min_airspeed)
            throw Error("vlm: airspeed below stall guard");
        using lsim::ad::sqrt;
        const S vmag = sqrt(v2);
        // Apparent wind and wake direction (wake trails along the freestream).
        const S ux = -vx, uz = -vz;
        const S wx = ux / vmag, wz = uz / vmag;
        const double rc2 = cfg_.core_radius * cfg_.core_radius;

        std::vector<S> a(static_cast<std::size_t>(np) * np);
        std::vector<S> rhs(np);
        std::vector<S> wfx(static_cast<std::size_t>(np) * np);  // x-velocity at force pts
        std::vector<S> wfz(static_cast<std::size_t>(np) * np);  // z-velocity at force pts
        for (int i = 0; i < np; ++i) {
            const auto& pi = panels_[i];
            for (int j = 0; j < np; ++j) {
                const auto& pj = panels_[j];
                S cvx{}, cvy{}, cvz{};
                // outgoing leg at the right tip, incoming at the left.
                vlm_detail::leg_velocity(pi.cp_x, pi.y_mid, 0.0, pj.x_qc, pj.y_r, 0.0, wx, wz,
                                         rc2, cvx, cvy, cvz);
                S lvx{}, lvy{}, lvz{};
                vlm_detail::leg_velocity(pi.cp_x, pi.y_mid, 0.0, pj.x_qc, pj.y_l, 0.0, wx, wz,
                                         rc2, lvx, lvy, lvz);
                a[i * np + j] = (cvx - lvx) * pi.nx + (cvz - lvz + bound_cp_z_(i, j)) * pi.nz;

                S fvx{}, fvy{}, fvz{};
                vlm_detail::leg_velocity(pi.x_qc, pi.y_mid, 0.0, pj.x_qc, pj.y_r, 0.0, wx, wz,
                                         rc2, fvx, fvy, fvz);
                S gvx{}, gvy{}, gvz{};
                vlm_detail::leg_velocity(pi.x_qc, pi.y_mid, 0.0, pj.x_qc, pj.y_l, 0.0, wx, wz,
                                         rc2, gvx, gvy, gvz);
                wfx[i * np + j] = fvx - gvx;
                wfz[i * np + j] = fvz - gvz + bound_fp_z_(i, j);
            }
            // Flow tangency: total normal velocity vanishes at each control
            // point. Pitch rate adds apparent wind q*x upward (z = 0 plane).
            rhs[i] = -(ux * pi.nx + (uz + q * pi.cp_x) * pi.nz);
        }

        std::vector<int> piv;
        ad::lu_factor(a, np, piv);
        std::vector<S> scratch;
        ad::lu_solve(a, piv, np, std::span<S>(rhs), scratch);  // rhs now holds Gamma

        fx = S{};
        fz = S{};
        my = S{};
        for (int i = 0; i < np; ++i) {
            const auto& pi = panels_[i];
            S vlx = ux;
            S vlz = uz + q * pi.x_qc;
            for (int j = 0; j < np; ++j) {
                vlx = vlx + wfx[i * np + j] * rhs[j];
                vlz = vlz + wfz[i * np + j] * rhs[j];
            }
            // F = rho * Gamma * (V_local x y_hat) * dy = rho G dy (-Vz, 0, Vx)
            S fxi = cfg_.rho * rhs[i] * pi.dy * (-vlz);
            S fzi = cfg_.rho * rhs[i] * pi.dy * vlx;
            fx = fx + fxi;
            fz = fz + fzi;
            my = my - pi.x_qc * fzi;  // z = 0: moment arm is the x station
        }
    }

    template <class S>
    void rhs(std::span<const S> x, std::span<S> dx) const {
        S fx{}, fz{}, my{};
        solve_forces(x, fx, fz, my);
        const S& vx = x[0];
        const S& vz = x[1];
        const S& q = x[2];
        const S& th = x[3];
        const double m = cfg_.mass, g = cfg_.gravity;
        // z up, pitch nose-down positive: that pairing keeps the coriolis
        // terms below, the q x apparent wind, and the -x Fz moment mutually
        // consistent. Gravity resolves to (+mg sin, -mg cos).
        S sin_th, cos_th;
        sincos_s(th, sin_th, cos_th);
        fx = fx + (m * g) * sin_th;
        fz = fz - (m * g) * cos_th;
        dx[0] = fx * (1.0 / m) - q * vz;
        dx[1] = cfg_.paper_vz_sign ? fz * (1.0 / m) - q * vx : fz * (1.0 / m) + q * vx;
        dx[2] = my * (1.0 / cfg_.iyy);
        dx[3] = q;
    }

    void dump_panels(const std::filesystem::path& path) const;

private:
    // Circular functions with their dual chain rules; the gravity terms are
    // the only place the dynamics need them.
    static void sincos_s(const double& th, double& s, double& c) {
        s = std::sin(th);
        c = std::cos(th);
    }
    template <class T>
    static void sincos_s(const ad::Dual<T>& th, ad::Dual<T>& s, ad::Dual<T>& c) {
        T sv, cv;
        sincos_s(th.v, sv, cv);
        s = {sv, th.d * cv};
        c = {cv, -(th.d * sv)};
    }

    VlmConfig cfg_;
    std::vector<vlm_detail::Panel> panels_;
    Mat bound_cp_z_;  // bound-segment vertical influence at control points
    Mat bound_fp_z_;  // and at force points
};

struct VlmRhs {
    std::shared_ptr<const VlmModel> model;
    template <class S>
    void operator()(std::span<const S> x, std::span<S> dx) const {
        model->rhs(x, dx);
    }
};

// Steady glide: solves for (vx, vz, theta) with q = 0 such that the
// translational and rotational accelerations vanish.
Vec vlm_trim(const VlmModel& model, double v_guess = 40.0);

OdeSystem make_vlm_system(VlmConfig cfg = {}, std::shared_ptr<const VlmModel>* out_model = nullptr);

}  // namespace lsim::systems
