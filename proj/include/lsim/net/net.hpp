#pragma once

#include "lsim/net/dims.hpp"
#include "lsim/net/kernels.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace lsim::net {

// Trainable lift A (with cached Moore-Penrose pseudo-inverse) followed by a
// stack of affine coupling layers. phi is exactly invertible by construction;
// the whole map is pseudo-invertible: x == decode(encode(x)).
class PseudoInvertibleNet {
public:
    PseudoInvertibleNet(NetDims dims, Rng& rng);

    const NetDims& dims() const { return dims_; }
    int n() const { return dims_.n; }
    int m() const { return dims_.m; }

    Vec encode(const Vec& x) const;
    Vec decode(const Vec& z) const;
    Vec phi_forward(const Vec& u) const;
    Vec phi_inverse(const Vec& z) const;
    // J_phi(u) . w through all coupling layers, via forward-mode duals.
    Vec phi_jvp(const Vec& u, const Vec& w) const;

    Mat lift() const;
    void set_lift(const Mat& a);
    // Recomputes A^+ from the normal equations (Cholesky) and clears the
    // staleness flag; rejects lifts whose smallest singular value < 1e-8.
    void refresh_pseudo_inverse();
    const Mat& pinv() const;
    bool pinv_stale() const { return pinv_stale_; }
    double sigma_min() const { return sigma_min_; }

    std::span<const double> params() const { return params_; }
    void set_params(std::span<const double> p);
    void perturb(double sigma, Rng& rng);  // random net for tests/benchmarks

private:
    NetDims dims_;
    std::vector<double> params_;
    Mat pinv_;
    bool pinv_stale_ = true;
    double sigma_min_ = 0.0;
};

void save_checkpoint(const PseudoInvertibleNet& net, const std::filesystem::path& path);
PseudoInvertibleNet load_checkpoint(const std::filesystem::path& path);

}  // namespace lsim::net
