#pragma once

#include <cmath>
#include <type_traits>

namespace lsim::ad {

// Forward-mode scalar carrying a value and one tangent component.
// Nesting (Dual<Dual<double>>) gives exact second directional derivatives;
// the tangent of a tangent is the cross term d²f[v,w].
template <class T>
struct Dual {
    T v{};
    T d{};

    constexpr Dual() = default;
    template <class U>
        requires std::constructible_from<T, U>
    constexpr Dual(const U& value) : v(value), d{} {}
    constexpr Dual(T value, T tangent) : v(std::move(value)), d(std::move(tangent)) {}
};

template <class T>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};
template <class T>
inline constexpr bool is_dual_v = is_dual<std::remove_cvref_t<T>>::value;

// Innermost value of an arbitrarily nested dual.
inline double primal(double x) { return x; }
template <class T>
double primal(const Dual<T>& x) {
    return primal(x.v);
}

template <class T>
constexpr Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
    return {a.v + b.v, a.d + b.d};
}
template <class T>
constexpr Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
    return {a.v - b.v, a.d - b.d};
}
template <class T>
constexpr Dual<T> operator-(const Dual<T>& a) {
    return {-a.v, -a.d};
}
template <class T>
constexpr Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
    return {a.v * b.v, a.d * b.v + a.v * b.d};
}
template <class T>
constexpr Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
    T q = a.v / b.v;
    return {q, (a.d - q * b.d) / b.v};
}

// Mixed ops against a non-dual scalar (double, or the tape handle when the
// parameters live on a tape). The scalar is a constant: no tangent term.
template <class T, class U>
    requires(!is_dual_v<U>)
constexpr Dual<T> operator+(const Dual<T>& a, const U& b) {
    return {a.v + b, a.d};
}
template <class T, class U>
    requires(!is_dual_v<U>)
constexpr Dual<T> operator+(const U& a, const Dual<T>& b) {
    return {a + b.v, b.d};
}
template <class T, class U>
    requires(!is_dual_v<U>)
constexpr Dual<T> operator-(const Dual<T>& a, const U& b) {
    return {a.v - b, a.d};
}
template <class T, class U>
    requires(!is_dual_v<U>)
constexpr Dual<T> operator-(const U& a, const Dual<T>& b) {
    return {a - b.v, -b.d};
}
template <class T, class U>
    requires(!is_dual_v<U>)
constexpr Dual<T> operator*(const Dual<T>& a, const U& b) {
    return {a.v * b, a.d * b};
}
template <class T, class U>
    requires(!is_dual_v<U>)
constexpr Dual<T> operator*(const U& a, const Dual<T>& b) {
    return {a * b.v, a * b.d};
}
template <class T, class U>
    requires(!is_dual_v<U>)
constexpr Dual<T> operator/(const Dual<T>& a, const U& b) {
    return {a.v / b, a.d / b};
}
template <class T, class U>
    requires(!is_dual_v<U>)
constexpr Dual<T> operator/(const U& a, const Dual<T>& b) {
    T q = a / b.v;
    return {q, (-q * b.d) / b.v};
}

template <class T>
Dual<T>& operator+=(Dual<T>& a, const Dual<T>& b) {
    a = a + b;
    return a;
}
template <class T>
Dual<T>& operator-=(Dual<T>& a, const Dual<T>& b) {
    a = a - b;
    return a;
}

using std::exp;
using std::log;
using std::pow;
using std::sqrt;
using std::tanh;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }

template <class T>
Dual<T> exp(const Dual<T>& a) {
    T e = exp(a.v);
    return {e, a.d * e};
}
template <class T>
Dual<T> log(const Dual<T>& a) {
    return {log(a.v), a.d / a.v};
}
template <class T>
Dual<T> sqrt(const Dual<T>& a) {
    T s = sqrt(a.v);
    return {s, a.d / (2.0 * s)};
}
template <class T>
Dual<T> tanh(const Dual<T>& a) {
    T t = tanh(a.v);
    return {t, a.d * (1.0 - t * t)};
}
template <class T>
Dual<T> sigmoid(const Dual<T>& a) {
    T s = sigmoid(a.v);
    return {s, a.d * (s * (1.0 - s))};
}
template <class T>
Dual<T> silu(const Dual<T>& a) {
    return a * sigmoid(a);
}
template <class T>
Dual<T> pow(const Dual<T>& a, double c) {
    T p = pow(a.v, c);
    return {p, a.d * (c * pow(a.v, c - 1.0))};
}

using D1 = Dual<double>;          // value + one tangent
using D2 = Dual<Dual<double>>;    // nested: value, two tangents, cross term

// Seeds for directional derivatives.
inline D1 seed1(double v, double dot) { return {v, dot}; }
// Outer tangent in .d.v, inner tangent in .v.d; cross term accumulates in .d.d.
inline D2 seed2(double v, double inner, double outer, double cross = 0.0) {
    return {{v, inner}, {outer, cross}};
}

}  // namespace lsim::ad
