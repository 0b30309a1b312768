#include "lsim/systems/vlm.hpp"

#include <fmt/format.h>

#include <fstream>

namespace lsim::systems {

namespace vlm_detail {

double bound_segment_z(double px, double py, double pz, double x1, double y1, double x2,
                       double y2, double rc2) {
    const double r1x = px - x1, r1y = py - y1, r1z = pz;
    const double r2x = px - x2, r2y = py - y2, r2z = pz;
    // r1 x r2; for in-plane points only the z component survives, but keep
    // the full cross product for the norm.
    const double cx = r1y * r2z - r1z * r2y;
    const double cy = r1z * r2x - r1x * r2z;
    const double cz = r1x * r2y - r1y * r2x;
    const double c2 = cx * cx + cy * cy + cz * cz;
    const double r0x = x2 - x1, r0y = y2 - y1;
    const double l2 = r0x * r0x + r0y * r0y;
    const double r1n = std::sqrt(r1x * r1x + r1y * r1y + r1z * r1z);
    const double r2n = std::sqrt(r2x * r2x + r2y * r2y + r2z * r2z);
    if (r1n < 1e-12 || r2n < 1e-12) return 0.0;  // on an endpoint
    const double dot = r0x * (r1x / r1n - r2x / r2n) + r0y * (r1y / r1n - r2y / r2n);
    return cz * dot / (4.0 * std::numbers::pi * (c2 + rc2 * l2));
}

}  // namespace vlm_detail

VlmModel::VlmModel(VlmConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    auto add_surface = [&](double span, double chord, int count, double x_qc, double inc_deg) {
        const double inc = inc_deg * std::numbers::pi / 180.0;
        const double dy = span / count;
        for (int k = 0; k < count; ++k) {
            vlm_detail::Panel p;
            p.x_qc = x_qc;
            p.y_l = -0.5 * span + k * dy;
            p.y_r = p.y_l + dy;
            p.y_mid = 0.5 * (p.y_l + p.y_r);
            p.cp_x = x_qc - 0.5 * chord;  // three-quarter-chord control point
            // Positive incidence raises the leading edge; pitch angles in the
            // state are nose-down positive (see rhs), hence the sign.
            p.nx = -std::sin(inc);
            p.nz = std::cos(inc);
            p.dy = dy;
            panels_.push_back(p);
        }
    };
    add_surface(cfg_.wing_span, cfg_.wing_chord, cfg_.wing_panels, cfg_.wing_x,
                cfg_.wing_incidence_deg);
    add_surface(cfg_.tail_span, cfg_.tail_chord, cfg_.tail_panels, -cfg_.tail_arm,
                cfg_.tail_incidence_deg);

    const int np = panel_count();
    const double rc2 = cfg_.core_radius * cfg_.core_radius;
    bound_cp_z_.resize(np, np);
    bound_fp_z_.resize(np, np);
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < np; ++j) {
            const auto& pi = panels_[i];
            const auto& pj = panels_[j];
            bound_cp_z_(i, j) = vlm_detail::bound_segment_z(pi.cp_x, pi.y_mid, 0.0, pj.x_qc,
                                                            pj.y_l, pj.x_qc, pj.y_r, rc2);
            bound_fp_z_(i, j) = vlm_detail::bound_segment_z(pi.x_qc, pi.y_mid, 0.0, pj.x_qc,
                                                            pj.y_l, pj.x_qc, pj.y_r, rc2);
        }
}

void VlmModel::dump_panels(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw Error(fmt::format("cannot open '{}' for writing", path.string()));
    os << "# panel x_qc y_l y_r cp_x n_x n_z dy\n";
    for (int i = 0; i < panel_count(); ++i) {
        const auto& p = panels_[i];
        os << fmt::format("{} {} {} {} {} {} {} {}\n", i, p.x_qc, p.y_l, p.y_r, p.cp_x, p.nx,
                          p.nz, p.dy);
    }
}

Vec vlm_trim(const VlmModel& model, double v_guess) {
    // Newton on (vx, vz, theta) with q = 0, driving the first three state
    // derivatives to zero (steady glide).
    Vec u(3);
    u << v_guess, 0.0, 0.0;
    auto residual = [&](const Vec& w) {
        std::array<double, 4> x{w[0], w[1], 0.0, w[2]};
        std::array<double, 4> dx{};
        model.rhs<double>(x, dx);
        Vec r(3);
        r << dx[0], dx[1], dx[2];
        return r;
    };
    for (int it = 0; it < 60; ++it) {
        Vec r = residual(u);
        if (r.norm() < 1e-10) break;
        Mat j(3, 3);
        for (int c = 0; c < 3; ++c) {
            const double eps = 1e-6 * std::max(1.0, std::abs(u[c]));
            Vec up = u, um = u;
            up[c] += eps;
            um[c] -= eps;
            j.col(c) = (residual(up) - residual(um)) / (2 * eps);
        }
        Vec step = j.partialPivLu().solve(r);
        // dampen large Newton steps; the aero forces are strongly nonlinear in V
        const double scale = std::min(1.0, 5.0 / std::max(1.0, step.cwiseAbs().maxCoeff()));
        u -= scale * step;
        if (u[0] < model.config().min_airspeed * 2) u[0] = model.config().min_airspeed * 2;
    }
    Vec r = residual(u);
    if (r.norm() > 1e-6)
        throw Error(fmt::format("vlm trim: no convergence, residual {:.3e}", r.norm()));
    Vec state(4);
    state << u[0], u[1], 0.0, u[2];
    return state;
}

OdeSystem make_vlm_system(VlmConfig cfg, std::shared_ptr<const VlmModel>* out_model) {
    auto model = std::make_shared<const VlmModel>(cfg);
    if (out_model) *out_model = model;
    OdeSystem sys = wrap_system("vlm", 4, VlmRhs{model});
    const Vec trim = vlm_trim(*model);
    Vec delta(4);
    delta << 3.0, 1.5, 0.1, 0.08;  // sampling box around the glide trim
    sys.box_lo = trim - delta;
    sys.box_hi = trim + delta;
    sys.horizon = 6.0;
    return sys;
}

}  // namespace lsim::systems
