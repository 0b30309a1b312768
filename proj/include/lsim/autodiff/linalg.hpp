#pragma once

#include "lsim/autodiff/dual.hpp"
#include "lsim/core.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace lsim::ad {

// Dense Cholesky (lower) on a generic scalar type, row-major n x n buffer.
// Used to solve the lift normal equations when the parameters themselves are
// differentiable. Pivot check matches the double-precision refresh path.
template <class T>
void cholesky_factor(std::vector<T>& a, int n) {
    for (int j = 0; j < n; ++j) {
        T d = a[j * n + j];
        for (int k = 0; k < j; ++k) d = d - a[j * n + k] * a[j * n + k];
        if (primal(d) < 1e-12)
            throw RankDeficiencyError("cholesky: pivot below 1e-12, matrix is rank deficient");
        T l = sqrt(d);
        a[j * n + j] = l;
        for (int i = j + 1; i < n; ++i) {
            T s = a[i * n + j];
            for (int k = 0; k < j; ++k) s = s - a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / l;
        }
    }
}

// Solves L L^T x = rhs in place; rhs scalar type may be wider than the
// factor's (e.g. dual-valued rhs against tape-valued factors).
template <class T, class S>
void cholesky_solve(const std::vector<T>& L, int n, std::span<S> rhs) {
    for (int i = 0; i < n; ++i) {
        S s = rhs[i];
        for (int k = 0; k < i; ++k) s = s - L[i * n + k] * rhs[k];
        rhs[i] = s / L[i * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        S s = rhs[i];
        for (int k = i + 1; k < n; ++k) s = s - L[k * n + i] * rhs[k];
        rhs[i] = s / L[i * n + i];
    }
}

// Partial-pivot LU on a generic scalar (pivot choice by primal magnitude so
// dual and double evaluations factor identically).
template <class T>
void lu_factor(std::vector<T>& a, int n, std::vector<int>& piv) {
    piv.resize(n);
    for (int i = 0; i < n; ++i) piv[i] = i;
    for (int col = 0; col < n; ++col) {
        int p = col;
        double best = std::abs(primal(a[col * n + col]));
        for (int r = col + 1; r < n; ++r) {
            const double m = std::abs(primal(a[r * n + col]));
            if (m > best) {
                best = m;
                p = r;
            }
        }
        if (best < 1e-30) throw RankDeficiencyError("lu: singular matrix");
        if (p != col) {
            for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[p * n + c]);
            std::swap(piv[col], piv[p]);
        }
        const T& d = a[col * n + col];
        for (int r = col + 1; r < n; ++r) {
            T m = a[r * n + col] / d;
            a[r * n + col] = m;
            for (int c = col + 1; c < n; ++c) a[r * n + c] = a[r * n + c] - m * a[col * n + c];
        }
    }
}

template <class T>
void lu_solve(const std::vector<T>& lu, const std::vector<int>& piv, int n, std::span<T> rhs,
              std::vector<T>& scratch) {
    scratch.resize(n);
    for (int i = 0; i < n; ++i) scratch[i] = rhs[piv[i]];
    for (int i = 0; i < n; ++i) {
        T s = scratch[i];
        for (int k = 0; k < i; ++k) s = s - lu[i * n + k] * scratch[k];
        scratch[i] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
        T s = scratch[i];
        for (int k = i + 1; k < n; ++k) s = s - lu[i * n + k] * scratch[k];
        scratch[i] = s / lu[i * n + i];
    }
    for (int i = 0; i < n; ++i) rhs[i] = scratch[i];
}

}  // namespace lsim::ad
