#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vopt/errors.hpp"
#include "vopt/expr.hpp"

namespace vopt {
namespace {

const std::vector<std::string> kXY = {"x1", "x2"};
constexpr const char* kF1 = "(x1^2 + x2^2)^2 - 2*x1^2 + 2*x2^2";
constexpr const char* kF2 = "(x1^2 - 1)^2 + 2*x2^2";
constexpr const char* kExC1 = "2*x1*x2 - 2*x1^2 - x2^2 + 8*x1 - 6*x2";

Vec v2(double a, double b) { return Vec{{a, b}}; }

TEST(ParseExpr, CircleConstraintEvaluatesToZeroOnBoundary) {
    const Expr g = parse_expr("x1^2 + x2^2 - 1", kXY);
    EXPECT_EQ(eval(g, v2(1, 0)), 0.0);
    EXPECT_EQ(eval(g, v2(0, 0)), -1.0);
}

TEST(ParseExpr, ZeroIsConstant) {
    const Expr z = parse_expr("0", {"x1"});
    EXPECT_EQ(z.root().op, Op::Const);
    EXPECT_EQ(eval(z, Vec{{3.5}}), 0.0);
}

TEST(ParseExpr, DoublePlusReportsSecondPlus) {
    try {
        parse_expr("x1 + + 3", {"x1"});
        FAIL() << "expected SyntaxError";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.position(), 5u);
        EXPECT_FALSE(e.expected().empty());
    }
}

TEST(ParseExpr, UnknownVariable) {
    try {
        parse_expr("x1 + y", {"x1"});
        FAIL() << "expected UnknownVariable";
    } catch (const UnknownVariable& e) {
        EXPECT_EQ(e.name(), "y");
    }
}

TEST(ParseExpr, MalformedInputs) {
    EXPECT_THROW(parse_expr("", {"x1"}), SyntaxError);
    EXPECT_THROW(parse_expr("(x1", {"x1"}), SyntaxError);
    EXPECT_THROW(parse_expr("x1^2.5", {"x1"}), SyntaxError);
    EXPECT_THROW(parse_expr("x1^2^3", {"x1"}), SyntaxError);
    EXPECT_THROW(parse_expr("sin x1", {"x1"}), SyntaxError);
    EXPECT_THROW(parse_expr("x1 $ 2", {"x1"}), SyntaxError);
    EXPECT_THROW(parse_expr("x1 x1", {"x1"}), SyntaxError);
}

TEST(ParseExpr, UnaryMinusBindsTighterThanPower) {
    const Expr e = parse_expr("-x1^2", {"x1"});
    EXPECT_EQ(eval(e, Vec{{3.0}}), 9.0);
    EXPECT_EQ(eval(parse_expr("-(x1^2)", {"x1"}), Vec{{3.0}}), -9.0);
}

TEST(ParseExpr, NegativeIntegerExponent) {
    EXPECT_DOUBLE_EQ(eval(parse_expr("x1^-2", {"x1"}), Vec{{2.0}}), 0.25);
}

TEST(ParseExpr, RoundTripThroughPrinter) {
    std::mt19937_64 rng(7);
    const auto vars = testing::var_names(3);
    for (int trial = 0; trial < 500; ++trial) {
        const std::string text = testing::random_expression(rng, 3, 4);
        const Expr a = parse_expr(text, vars);
        const std::string printed = a.to_string(vars);
        const Expr b = parse_expr(printed, vars);
        EXPECT_TRUE(a == b) << text << "  printed as  " << printed;
        EXPECT_EQ(b.to_string(vars), printed);
    }
}

TEST(Eval, ExampleValues) {
    EXPECT_EQ(eval(parse_expr(kF1, kXY), v2(1, 0)), -1.0);
    EXPECT_EQ(eval(parse_expr("x1^2 + x2^2 - 1", kXY), v2(0, 0)), -1.0);
}

TEST(Eval, PowZeroIsOneEverywhere) {
    const Expr e = parse_expr("x1^0", {"x1"});
    EXPECT_EQ(eval(e, Vec{{0.0}}), 1.0);
    EXPECT_EQ(eval(e, Vec{{-4.0}}), 1.0);
    EXPECT_TRUE(grad(e, Vec{{0.0}}).isZero());
}

TEST(Eval, DomainErrors) {
    const std::vector<std::string> x = {"x1"};
    EXPECT_THROW(eval(parse_expr("log(x1)", x), Vec{{0.0}}), DomainError);
    EXPECT_THROW(eval(parse_expr("log(x1)", x), Vec{{-1.0}}), DomainError);
    EXPECT_THROW(eval(parse_expr("sqrt(x1)", x), Vec{{-1.0}}), DomainError);
    EXPECT_THROW(eval(parse_expr("1/x1", x), Vec{{0.0}}), DomainError);
    EXPECT_THROW(eval(parse_expr("x1^-1", x), Vec{{0.0}}), DomainError);
    EXPECT_THROW(eval(parse_expr("x1", x), Vec{{std::numeric_limits<double>::infinity()}}), DomainError);
}

TEST(Grad, ExampleGradients) {
    const Expr f1 = parse_expr(kF1, kXY);
    EXPECT_TRUE(grad(f1, v2(1, 0)).isZero());
    const Vec g = grad(f1, v2(0.5, 0));
    EXPECT_DOUBLE_EQ(g[0], -1.5);
    EXPECT_DOUBLE_EQ(g[1], 0.0);
    EXPECT_TRUE(grad(parse_expr("3.25", kXY), v2(0.3, -2)).isZero());
}

TEST(Grad, AbsAtZeroIsNondifferentiable) {
    const Expr e = parse_expr("abs(x1) + x2", kXY);
    EXPECT_EQ(eval(e, v2(0, 1)), 1.0);
    EXPECT_THROW(grad(e, v2(0, 1)), NondifferentiablePoint);
    EXPECT_DOUBLE_EQ(grad(e, v2(-2, 1))[0], -1.0);
}

TEST(Grad, MatchesCentralDifferencesOnPolynomials) {
    std::mt19937_64 rng(11);
    const auto vars = testing::var_names(3);
    const double eps = std::numeric_limits<double>::epsilon();
    for (int trial = 0; trial < 100; ++trial) {
        const Expr e = parse_expr(testing::random_polynomial(rng, 3, 4), vars);
        const Vec x = testing::random_point(rng, 3, -2, 2);
        const Vec g = grad(e, x);
        for (int i = 0; i < 3; ++i) {
            const double h = std::cbrt(eps) * std::max(1.0, std::abs(x[i]));
            Vec xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd = (eval(e, xp) - eval(e, xm)) / (xp[i] - xm[i]);
            EXPECT_LE(std::abs(fd - g[i]), 1e-6 * std::max(1.0, std::abs(g[i])));
        }
    }
}

TEST(Grad, TranscendentalFunctions) {
    const Expr e = parse_expr("sin(x1)*exp(x2) + log(x1) - sqrt(x2) + cos(x1*x2)", kXY);
    const Vec x = v2(0.7, 1.3);
    const Vec g = grad(e, x);
    EXPECT_NEAR(g[0], std::cos(0.7) * std::exp(1.3) + 1 / 0.7 - 1.3 * std::sin(0.91), 1e-14);
    EXPECT_NEAR(g[1], std::sin(0.7) * std::exp(1.3) - 0.5 / std::sqrt(1.3) - 0.7 * std::sin(0.91), 1e-14);
}

TEST(SecondDirDeriv, ExampleValues) {
    EXPECT_DOUBLE_EQ(second_dir_deriv(parse_expr(kF1, kXY), v2(0, 0), v2(1, 0)), -4.0);
    EXPECT_DOUBLE_EQ(second_dir_deriv(parse_expr(kExC1, kXY), v2(1, -1), v2(1, 1)), -2.0);
    EXPECT_EQ(second_dir_deriv(parse_expr(kF1, kXY), v2(0.3, 0.8), v2(0, 0)), 0.0);
}

TEST(SecondDirDeriv, QuadraticScalingInDirection) {
    std::mt19937_64 rng(3);
    const auto vars = testing::var_names(3);
    for (int trial = 0; trial < 50; ++trial) {
        const Expr e = parse_expr(testing::random_polynomial(rng, 3, 4), vars);
        const Vec x = testing::random_point(rng, 3, -2, 2);
        const Vec d = testing::random_point(rng, 3, -1, 1);
        const double base = second_dir_deriv(e, x, d);
        for (double t : {0.5, 2.0, -3.0}) {
            const double scaled = second_dir_deriv(e, x, t * d);
            EXPECT_NEAR(scaled, t * t * base, 1e-12 * std::max(1.0, std::abs(t * t * base)));
        }
    }
}

TEST(SecondDirDeriv, MatchesHessianOnQuadratics) {
    std::mt19937_64 rng(5);
    const auto vars = testing::var_names(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto q = testing::random_quadratic(rng, 3);
        const Expr e = parse_expr(q.text, vars);
        const Vec x = testing::random_point(rng, 3, -2, 2);
        const Vec d = testing::random_point(rng, 3, -1, 1);
        EXPECT_NEAR(second_dir_deriv(e, x, d), d.dot(q.hessian * d), 1e-10);
    }
}

TEST(SecondDirDerivLimit, QuadraticQuotientIsExact) {
    const auto est = second_dir_deriv_limit(parse_expr("x1^2", {"x1"}), Vec{{0.0}}, Vec{{1.0}});
    EXPECT_NEAR(est.value, 2.0, 1e-9);
    EXPECT_LE(est.error_bound, 1e-9);
}

TEST(SecondDirDerivLimit, ExampleValues) {
    const auto a = second_dir_deriv_limit(parse_expr(kF1, kXY), v2(0, 0), v2(0, 1));
    EXPECT_NEAR(a.value, 4.0, 1e-6);
    const auto b = second_dir_deriv_limit(parse_expr(kF2, kXY), v2(1, 0), v2(0, 1));
    EXPECT_NEAR(b.value, 4.0, 1e-6);
}

TEST(SecondDirDerivLimit, AgreesWithHyperDualWithinBound) {
    std::mt19937_64 rng(17);
    const auto vars = testing::var_names(2);
    for (int trial = 0; trial < 100; ++trial) {
        const Expr e = parse_expr(testing::random_polynomial(rng, 2, 4), vars);
        const Vec x = testing::random_point(rng, 2, -2, 2);
        const Vec d = testing::random_point(rng, 2, -1, 1);
        const auto est = second_dir_deriv_limit(e, x, d);
        EXPECT_LE(std::abs(est.value - second_dir_deriv(e, x, d)), est.error_bound);
    }
}

TEST(SecondDirDerivLimit, NoStepsCannotConverge) {
    EXPECT_THROW(second_dir_deriv_limit(parse_expr("x1^3", {"x1"}), Vec{{1.0}}, Vec{{1.0}}, 0),
                 NonConvergent);
}

}  // namespace
}  // namespace vopt
