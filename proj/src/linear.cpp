#include "lsim/systems/linear.hpp"

#include <complex>

namespace lsim::systems {

Mat linear_matrix() {
    Mat m(3, 3);
    m << 33, 17, -70, 42, 18, -80, 37, 18, -75;
    return m;
}

namespace {

struct EigCache {
    Eigen::MatrixXcd v, v_inv;
    Eigen::VectorXcd lambda;
    EigCache() {
        Eigen::EigenSolver<Mat> es(linear_matrix());
        v = es.eigenvectors();
        lambda = es.eigenvalues();
        v_inv = v.inverse();
    }
};

const EigCache& eig() {
    static const EigCache cache;
    return cache;
}

}  // namespace

Vec linear_exact(const Vec& x0, double t) {
    const auto& e = eig();
    Eigen::VectorXcd c = e.v_inv * x0.cast<std::complex<double>>();
    for (int i = 0; i < 3; ++i) c[i] *= std::exp(e.lambda[i] * t);
    return (e.v * c).real();
}

OdeSystem make_linear_system() {
    OdeSystem sys = wrap_system("linear", 3, LinearRhs{});
    sys.box_lo = Vec::Constant(3, -1.0);
    sys.box_hi = Vec::Constant(3, 1.0);
    sys.horizon = 2.0;
    sys.exact = [](const Vec& x0, double t) { return linear_exact(x0, t); };
    return sys;
}

}  // namespace lsim::systems
