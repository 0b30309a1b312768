#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lsim/solvers/solvers.hpp"
#include "lsim/systems/linear.hpp"
#include "lsim/systems/vlm.hpp"
#include "lsim/systems/vortex.hpp"
#include "test_util.hpp"

#include <numbers>

using namespace lsim;
using namespace lsim::systems;

TEST_CASE("linear system: matrix entries, eigenvalues, exact solution") {
    Mat m = linear_matrix();
    const double want[3][3] = {{33, 17, -70}, {42, 18, -80}, {37, 18, -75}};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) CHECK(m(r, c) == want[r][c]);

    Vec e1 = Vec::Zero(3);
    e1[0] = 1.0;
    auto sys = make_linear_system();
    Vec col = sys.eval(e1);
    CHECK(col[0] == 33.0);
    CHECK(col[1] == 42.0);
    CHECK(col[2] == 37.0);
    CHECK(sys.eval(Vec::Zero(3)).norm() == 0.0);

    Eigen::EigenSolver<Mat> es(m);
    std::vector<std::complex<double>> ev(es.eigenvalues().data(), es.eigenvalues().data() + 3);
    std::sort(ev.begin(), ev.end(),
              [](auto a, auto b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
    CHECK(std::abs(ev[0] - std::complex<double>(-20, 0)) <= 1e-9);
    CHECK(std::abs(ev[1] - std::complex<double>(-2, -1)) <= 1e-9);
    CHECK(std::abs(ev[2] - std::complex<double>(-2, 1)) <= 1e-9);

    Rng rng = make_rng(1);
    Vec x0 = random_normal(3, rng);
    CHECK((linear_exact(x0, 0.0) - x0).norm() <= 1e-14);
    CHECK(linear_exact(x0, 50.0).norm() <= 1e-12);

    // d/dt of the closed form equals M x(t); fourth-order stencil keeps the
    // finite-difference truncation far below the 1e-9 gate.
    const double t = 0.37, eps = 1e-4;
    Vec d = (-linear_exact(x0, t + 2 * eps) + 8 * linear_exact(x0, t + eps) -
             8 * linear_exact(x0, t - eps) + linear_exact(x0, t - 2 * eps)) /
            (12 * eps);
    Vec want_d = m * linear_exact(x0, t);
    CHECK((d - want_d).norm() <= 1e-9 * std::max(1.0, want_d.norm()));
}

TEST_CASE("two equal vortices rotate about the midpoint with the classical period") {
    VortexConfig cfg;
    cfg.particles = 2;
    cfg.gamma = {2.0, 2.0};
    cfg.eps_core = 0.0;
    const double d = 0.8, gamma = 2.0;
    auto sys = make_vortex_system(cfg);
    Vec x(4);
    x << d / 2, 0.0, -d / 2, 0.0;
    Vec v = sys.eval(x);
    const double speed = gamma / (2 * std::numbers::pi * d);
    CHECK(v[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(v[1] == doctest::Approx(speed).epsilon(1e-12));
    CHECK(v[2] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(v[3] == doctest::Approx(-speed).epsilon(1e-12));

    const double period = 2 * std::numbers::pi * std::numbers::pi * d * d / gamma;
    solvers::SolverSpec spec;
    spec.rtol = spec.atol = 1e-12;
    auto run = solvers::integrate([&](const Vec& s, Vec& ds) { sys.rhs(s, ds); }, x, 0.0,
                                  period, spec);
    CHECK((run.states.row(run.states.rows() - 1).transpose() - x).norm() <= 1e-6);
}

TEST_CASE("counter-rotating pair translates rigidly") {
    VortexConfig cfg;
    cfg.particles = 2;
    cfg.gamma = {1.5, -1.5};
    cfg.eps_core = 0.0;
    auto sys = make_vortex_system(cfg);
    const double d = 0.6;
    Vec x(4);
    x << 0.0, d / 2, 0.0, -d / 2;
    Vec v = sys.eval(x);
    const double speed = 1.5 / (2 * std::numbers::pi * d);
    CHECK(v[0] == doctest::Approx(speed).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(v[2] == doctest::Approx(speed).epsilon(1e-12));
    CHECK(v[3] == doctest::Approx(0.0).epsilon(1e-14));

    solvers::SolverSpec spec;
    spec.rtol = spec.atol = 1e-12;
    auto run = solvers::integrate([&](const Vec& s, Vec& ds) { sys.rhs(s, ds); }, x, 0.0, 4.0,
                                  spec);
    Vec xf = run.states.row(run.states.rows() - 1).transpose();
    const double sep = std::abs(xf[1] - xf[3]);
    CHECK(sep == doctest::Approx(d).epsilon(1e-9));
    CHECK(xf[0] == doctest::Approx(4.0 * speed).epsilon(1e-9));
}

TEST_CASE("vortex invariants drift below 1e-6 on the leapfrogging preset") {
    VortexConfig cfg = vortex_leapfrog_config();
    auto sys = make_vortex_system(cfg);
    Vec x0 = vortex_leapfrog_ic();
    solvers::SolverSpec spec;
    spec.rtol = spec.atol = 1e-12;
    spec.grid_size = 101;
    auto run = solvers::integrate([&](const Vec& s, Vec& ds) { sys.rhs(s, ds); }, x0, 0.0,
                                  12.0, spec);
    REQUIRE(run.ok());
    const auto p0 = vortex_impulse(x0, cfg);
    const double h0 = vortex_hamiltonian(x0, cfg, true);
    const double h0_classic = vortex_hamiltonian(x0, cfg, false);
    for (int g = 0; g < run.states.rows(); ++g) {
        Vec s = run.states.row(g).transpose();
        const auto p = vortex_impulse(s, cfg);
        CHECK((p - p0).norm() <= 1e-6 * std::max(1.0, p0.norm()));
        CHECK(std::abs(vortex_hamiltonian(s, cfg, true) - h0) <= 1e-6 * std::max(1.0, std::abs(h0)));
        CHECK(std::abs(vortex_hamiltonian(s, cfg, false) - h0_classic) <=
              1e-6 * std::max(1.0, std::abs(h0_classic)));
    }
}

TEST_CASE("vortex rhs matches its dual-channel jacobian") {
    VortexConfig cfg;
    auto sys = make_vortex_system(cfg);
    Rng rng = make_rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        Vec x = random_in_box(sys.box_lo, sys.box_hi, rng);
        Vec v = random_normal(sys.dim, rng);
        const double eps = 1e-6;
        Vec xp = x + eps * v, xm = x - eps * v;
        Vec fd = (sys.eval(xp) - sys.eval(xm)) / (2 * eps);
        CHECK((sys.jvp(x, v) - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
    }
}

namespace {

VlmConfig small_vlm() {
    VlmConfig cfg;
    cfg.wing_panels = 16;
    cfg.tail_panels = 4;
    return cfg;
}

}  // namespace

TEST_CASE("vlm: tangent flow carries zero circulation and zero aero force") {
    VlmConfig cfg = small_vlm();
    cfg.wing_incidence_deg = 0.0;
    cfg.tail_incidence_deg = 0.0;
    VlmModel model(cfg);
    std::array<double, 4> state{50.0, 0.0, 0.0, 0.0};
    double fx = 0, fz = 0, my = 0;
    model.solve_forces<double>(state, fx, fz, my);
    CHECK(std::abs(fx) <= 1e-9);
    CHECK(std::abs(fz) <= 1e-9);
    CHECK(std::abs(my) <= 1e-9);

    // Bookkeeping: with zero aero force the accelerations are pure gravity.
    std::array<double, 4> dx{};
    model.rhs<double>(state, dx);
    CHECK(dx[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(dx[1] == doctest::Approx(-cfg.gravity).epsilon(1e-12));
    CHECK(dx[2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(dx[3] == 0.0);

    // pitch is nose-down positive: gravity pulls forward along +x
    std::array<double, 4> pitched{50.0, 0.0, 0.0, 0.1};
    model.rhs<double>(pitched, dx);
    CHECK(dx[0] == doctest::Approx(cfg.gravity * std::sin(0.1)).epsilon(1e-12));
    CHECK(dx[1] == doctest::Approx(-cfg.gravity * std::cos(0.1)).epsilon(1e-12));
}

TEST_CASE("vlm: aerodynamic forces are linear in air density") {
    VlmConfig cfg = small_vlm();
    VlmModel model(cfg);
    cfg.rho *= 2.0;
    VlmModel dense(cfg);
    std::array<double, 4> state{45.0, -2.0, 0.05, 0.02};
    double fx1, fz1, my1, fx2, fz2, my2;
    model.solve_forces<double>(state, fx1, fz1, my1);
    dense.solve_forces<double>(state, fx2, fz2, my2);
    CHECK(fx2 == doctest::Approx(2 * fx1).epsilon(1e-12));
    CHECK(fz2 == doctest::Approx(2 * fz1).epsilon(1e-12));
    CHECK(my2 == doctest::Approx(2 * my1).epsilon(1e-12));
}

TEST_CASE("vlm: mirror symmetry in vz for a symmetric configuration") {
    VlmConfig cfg = small_vlm();
    cfg.wing_incidence_deg = 0.0;
    cfg.tail_incidence_deg = 0.0;
    VlmModel model(cfg);
    std::array<double, 4> up{50.0, 3.0, 0.0, 0.0}, down{50.0, -3.0, 0.0, 0.0};
    double fxu, fzu, myu, fxd, fzd, myd;
    model.solve_forces<double>(up, fxu, fzu, myu);
    model.solve_forces<double>(down, fxd, fzd, myd);
    CHECK(fzd == doctest::Approx(-fzu).epsilon(1e-10));
    CHECK(myd == doctest::Approx(-myu).epsilon(1e-10));
    CHECK(fxd == doctest::Approx(fxu).epsilon(1e-10));
}

TEST_CASE("vlm: lift-curve slope sits near the lifting-line value") {
    VlmConfig cfg;
    cfg.wing_span = 20.0;
    cfg.wing_chord = 1.0;
    cfg.wing_panels = 80;
    cfg.wing_incidence_deg = 0.0;
    cfg.wing_x = 0.0;
    // vestigial tail far away so the wing flies alone
    cfg.tail_span = 0.05;
    cfg.tail_chord = 0.05;
    cfg.tail_panels = 1;
    cfg.tail_arm = 200.0;
    cfg.tail_incidence_deg = 0.0;
    VlmModel model(cfg);
    const double v = 40.0, q = 0.5 * cfg.rho * v * v, area = cfg.wing_span * cfg.wing_chord;
    auto cl_at = [&](double alpha) {
        std::array<double, 4> state{v * std::cos(alpha), -v * std::sin(alpha), 0.0, 0.0};
        double fx, fz, my;
        model.solve_forces<double>(state, fx, fz, my);
        // lift = force perpendicular to the freestream
        const double lift = fz * std::cos(alpha) + fx * std::sin(alpha);
        return lift / (q * area);
    };
    const double a = 2.0 * std::numbers::pi / 180.0;
    const double slope = (cl_at(a) - cl_at(-a)) / (2 * a);
    const double ar = cfg.wing_span / cfg.wing_chord;
    const double lifting_line = 2 * std::numbers::pi * ar / (ar + 2);
    CHECK(std::abs(slope - lifting_line) <= 0.15 * lifting_line);
    CHECK(cl_at(a) > 0.0);  // positive incidence lifts upward
}

TEST_CASE("vlm: glide trim zeroes the state derivative") {
    VlmConfig cfg = small_vlm();
    VlmModel model(cfg);
    Vec trim = vlm_trim(model);
    std::array<double, 4> state{trim[0], trim[1], trim[2], trim[3]};
    std::array<double, 4> dx{};
    model.rhs<double>(state, dx);
    for (int i = 0; i < 4; ++i) CHECK(std::abs(dx[i]) <= 1e-6);
    CHECK(trim[0] > 10.0);  // a sane glide speed
}

TEST_CASE("vlm: rhs is smooth, dual JVP matches finite differences") {
    auto sys = make_vlm_system(small_vlm());
    Rng rng = make_rng(7);
    for (int trial = 0; trial < 8; ++trial) {
        Vec x = random_in_box(sys.box_lo, sys.box_hi, rng);
        Vec v = random_normal(4, rng);
        const double eps = 1e-6;
        Vec fd = (sys.eval(x + eps * v) - sys.eval(x - eps * v)) / (2 * eps);
        Vec got = sys.jvp(x, v);
        CHECK((got - fd).norm() <= 1e-4 * std::max(1.0, fd.norm()));
    }
}

TEST_CASE("vlm: stall guard rejects subsonic-zero states") {
    VlmModel model(small_vlm());
    std::array<double, 4> state{0.1, 0.0, 0.0, 0.0};
    std::array<double, 4> dx{};
    CHECK_THROWS_AS(model.rhs<double>(state, dx), Error);
}

TEST_CASE("system call counters tick once per evaluation") {
    auto sys = make_linear_system();
    sys.reset_call_count();
    Vec x(3), dx(3);
    x << 1, 2, 3;
    for (int i = 0; i < 7; ++i) sys.rhs(x, dx);
    CHECK(sys.call_count() == 7);
}
