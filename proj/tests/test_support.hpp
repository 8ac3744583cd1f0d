#pragma once

// Seeded generators shared by the unit and acceptance suites.

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "vopt/expr.hpp"

namespace vopt::testing {

inline std::vector<std::string> var_names(int s) {
    std::vector<std::string> v;
    for (int i = 1; i <= s; ++i) v.push_back("x" + std::to_string(i));
    return v;
}

inline std::string fmt_coeff(double c) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", std::abs(c));
    return buf;
}

/// Random polynomial of total degree <= max_degree in `s` variables, as text.
inline std::string random_polynomial(std::mt19937_64& rng, int s, int max_degree, int terms = 6) {
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    std::uniform_int_distribution<int> deg(0, max_degree);
    std::uniform_int_distribution<int> var(0, s - 1);
    std::string out;
    for (int t = 0; t < terms; ++t) {
        const double c = coef(rng);
        out += (t == 0 ? (c < 0 ? "-" : "") : (c < 0 ? " - " : " + "));
        out += fmt_coeff(c);
        const int d = deg(rng);
        std::vector<int> powers(static_cast<std::size_t>(s), 0);
        for (int k = 0; k < d; ++k) ++powers[static_cast<std::size_t>(var(rng))];
        for (int i = 0; i < s; ++i) {
            const int p = powers[static_cast<std::size_t>(i)];
            if (p == 0) continue;
            out += "*x" + std::to_string(i + 1);
            if (p > 1) out += "^" + std::to_string(p);
        }
    }
    return out;
}

/// Random quadratic ½·xᵀHx + bᵀx with H symmetric; returns text and H.
struct RandomQuadratic {
    std::string text;
    Mat hessian;
};

inline RandomQuadratic random_quadratic(std::mt19937_64& rng, int s) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    Mat H(s, s);
    for (int i = 0; i < s; ++i)
        for (int j = i; j < s; ++j) H(i, j) = H(j, i) = std::round(u(rng) * 1000.0) / 1000.0;
    std::string out = "0";
    char buf[96];
    for (int i = 0; i < s; ++i) {
        std::snprintf(buf, sizeof buf, " + %.3f*x%d^2/2", H(i, i), i + 1);
        out += buf;
        for (int j = i + 1; j < s; ++j) {
            std::snprintf(buf, sizeof buf, " + %.3f*x%d*x%d", H(i, j), i + 1, j + 1);
            out += buf;
        }
        std::snprintf(buf, sizeof buf, " + %.3f*x%d", u(rng), i + 1);
        out += buf;
    }
    // "+ -1.5" is not in the grammar; rewrite as subtraction
    std::string fixed;
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (out.compare(k, 4, " + -") == 0) {
            fixed += " - ";
            k += 3;
        } else {
            fixed += out[k];
        }
    }
    return {fixed, H};
}

/// Random grammar-valid expression text (for parse/print round trips).
inline std::string random_expression(std::mt19937_64& rng, int s, int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 9);
    switch (pick(rng)) {
        case 0: {
            std::uniform_int_distribution<int> n(0, 999);
            const int v = n(rng);
            return (v % 3 == 0) ? std::to_string(v) : std::to_string(v / 100) + "." + std::to_string(v % 100);
        }
        case 1: {
            std::uniform_int_distribution<int> v(1, s);
            return "x" + std::to_string(v(rng));
        }
        case 2:
            return random_expression(rng, s, depth - 1) + " + " + random_expression(rng, s, depth - 1);
        case 3:
            return random_expression(rng, s, depth - 1) + " - " + random_expression(rng, s, depth - 1);
        case 4:
            return random_expression(rng, s, depth - 1) + "*" + random_expression(rng, s, depth - 1);
        case 5:
            return random_expression(rng, s, depth - 1) + "/" + random_expression(rng, s, depth - 1);
        case 6: {
            std::uniform_int_distribution<int> k(-3, 4);
            return "(" + random_expression(rng, s, depth - 1) + ")^" + std::to_string(k(rng));
        }
        case 7:
            return "-" + random_expression(rng, s, 0);
        case 8: {
            static const char* fns[] = {"sin", "cos", "exp", "log", "sqrt", "abs"};
            std::uniform_int_distribution<int> f(0, 5);
            return std::string(fns[f(rng)]) + "(" + random_expression(rng, s, depth - 1) + ")";
        }
        default:
            return "(" + random_expression(rng, s, depth - 1) + ")";
    }
}

inline Vec random_point(std::mt19937_64& rng, int s, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec x(s);
    for (int i = 0; i < s; ++i) x[i] = u(rng);
    return x;
}

}  // namespace vopt::testing
