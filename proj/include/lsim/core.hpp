#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace lsim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when a computation produces NaN/Inf where a finite value is required.
struct NonFiniteError : Error {
    using Error::Error;
};

/// Raised when a matrix expected to have full column rank does not.
struct RankDeficiencyError : Error {
    using Error::Error;
};

/// Raised on malformed config files, checkpoints, or CLI inputs.
struct FormatError : Error {
    using Error::Error;
};

using Rng = std::mt19937_64;

// Derives an independent stream from (seed, stream ids). Used so that
// per-epoch / per-sample draws do not depend on thread scheduling.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream0 = 0, std::uint64_t stream1 = 0) {
    std::seed_seq seq{seed, stream0, stream1, std::uint64_t{0x9e3779b97f4a7c15ULL}};
    return Rng(seq);
}

inline Vec random_normal(int n, Rng& rng, double sigma = 1.0) {
    std::normal_distribution<double> dist(0.0, sigma);
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = dist(rng);
    return v;
}

inline Vec random_in_box(const Vec& lo, const Vec& hi, Rng& rng) {
    Vec v(lo.size());
    for (int i = 0; i < lo.size(); ++i) {
        std::uniform_real_distribution<double> dist(lo[i], hi[i]);
        v[i] = dist(rng);
    }
    return v;
}

}  // namespace lsim
