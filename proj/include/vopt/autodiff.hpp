#pragma once

#include <cmath>

namespace vopt {

/// First-order dual number a + b·ε with ε² = 0. Propagating (x, e_k) through
/// an expression yields the k-th partial derivative in `eps`.
struct Dual {
    double re = 0.0;
    double eps = 0.0;
};

/// Hyper-dual number a + b·ε₁ + c·ε₂ + d·ε₁ε₂ with ε₁² = ε₂² = 0.
/// Seeding x + d·ε₁ + d·ε₂ gives e12 = dᵀ∇²h(x)d and e1 = ∇h(x)d.
struct HyperDual {
    double re = 0.0;
    double e1 = 0.0;
    double e2 = 0.0;
    double e12 = 0.0;
};

// Chain rule for a scalar function with value f0, derivative f1, second
// derivative f2 at the real part.
inline Dual chain(const Dual& a, double f0, double f1, double /*f2*/) {
    return {f0, f1 * a.eps};
}

inline HyperDual chain(const HyperDual& a, double f0, double f1, double f2) {
    return {f0, f1 * a.e1, f1 * a.e2, f1 * a.e12 + f2 * a.e1 * a.e2};
}

inline double real_part(double a) { return a; }
inline double real_part(const Dual& a) { return a.re; }
inline double real_part(const HyperDual& a) { return a.re; }

inline bool has_derivative_part(double) { return false; }
inline bool has_derivative_part(const Dual& a) { return a.eps != 0.0; }
inline bool has_derivative_part(const HyperDual& a) { return a.e1 != 0.0 || a.e2 != 0.0 || a.e12 != 0.0; }

inline Dual operator+(const Dual& a, const Dual& b) { return {a.re + b.re, a.eps + b.eps}; }
inline Dual operator-(const Dual& a, const Dual& b) { return {a.re - b.re, a.eps - b.eps}; }
inline Dual operator-(const Dual& a) { return {-a.re, -a.eps}; }
inline Dual operator*(const Dual& a, const Dual& b) {
    return {a.re * b.re, a.re * b.eps + a.eps * b.re};
}
inline Dual operator/(const Dual& a, const Dual& b) {
    const double q = a.re / b.re;
    return {q, (a.eps - q * b.eps) / b.re};
}

inline HyperDual operator+(const HyperDual& a, const HyperDual& b) {
    return {a.re + b.re, a.e1 + b.e1, a.e2 + b.e2, a.e12 + b.e12};
}
inline HyperDual operator-(const HyperDual& a, const HyperDual& b) {
    return {a.re - b.re, a.e1 - b.e1, a.e2 - b.e2, a.e12 - b.e12};
}
inline HyperDual operator-(const HyperDual& a) { return {-a.re, -a.e1, -a.e2, -a.e12}; }
inline HyperDual operator*(const HyperDual& a, const HyperDual& b) {
    return {a.re * b.re, a.re * b.e1 + a.e1 * b.re, a.re * b.e2 + a.e2 * b.re,
            a.re * b.e12 + a.e1 * b.e2 + a.e2 * b.e1 + a.e12 * b.re};
}
inline HyperDual operator/(const HyperDual& a, const HyperDual& b) {
    // a * (1/b), with 1/b expanded through the chain rule
    const double inv = 1.0 / b.re;
    return a * chain(b, inv, -inv * inv, 2.0 * inv * inv * inv);
}

}  // namespace vopt
