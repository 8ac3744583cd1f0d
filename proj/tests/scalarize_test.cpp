#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vopt/errors.hpp"
#include "vopt/ktcheck.hpp"
#include "vopt/scalarize.hpp"

namespace vopt {
namespace {

const std::string kDir = VOPT_FIXTURE_DIR;

ProblemDef fixture(const char* name) { return load_problem(kDir + "/" + name); }
Vec v2(double a, double b) { return Vec{{a, b}}; }
const Vec kNoMu = Vec::Zero(0);

bool has_cluster_near(const MinimizerSet& ms, const Vec& x, double tol = 1e-4) {
    return std::any_of(ms.clusters.begin(), ms.clusters.end(),
                       [&](const Cluster& c) { return (c.point - x).norm() <= tol; });
}

void expect_consistent(const ProblemDef& P, const MinimizerSet& ms, const Vec& lambda, const Vec* mu) {
    for (const auto& c : ms.clusters) {
        EXPECT_TRUE(P.in_box(c.point));
        const double v = mu ? lagrangian(P, lambda, *mu, c.point) : lambda.dot(P.f(c.point));
        EXPECT_NEAR(v, c.value, 1e-9);
        if (!mu && P.m() > 0) EXPECT_LE(P.g(c.point).maxCoeff(), kDefaultTol);
    }
    for (std::size_t a = 0; a < ms.clusters.size(); ++a)
        for (std::size_t b = a + 1; b < ms.clusters.size(); ++b)
            EXPECT_GE(((ms.clusters[a].point - ms.clusters[b].point).array() / (P.hi - P.lo).array()).matrix().norm(),
                      1e-4);
}

TEST(Lagrangian, Examples) {
    const auto A = fixture("exA.vopt");
    const Vec mu = Vec::Zero(1);
    EXPECT_DOUBLE_EQ(lagrangian(A, v2(0.5, 0.5), mu, v2(0, 0)), 0.5);
    for (double eps : {0.1, 0.3, 0.7}) {
        const double l1 = 0.3, l2 = 0.7;
        const double expect = l1 * (std::pow(eps, 4) - 2 * eps * eps) + l2 * std::pow(eps * eps - 1, 2);
        EXPECT_NEAR(lagrangian(A, v2(l1, l2), mu, v2(eps, 0)), expect, 1e-15);
    }
    EXPECT_EQ(lagrangian(A, v2(1, 0), mu, v2(0.3, -0.4)), A.f(v2(0.3, -0.4))[0]);
}

TEST(CheckSaddle, Examples) {
    const auto A = fixture("exA.vopt");
    const Vec mu = Vec::Zero(1);
    const auto bad = check_saddle(A, v2(0.5, 0.5), v2(0, 0), mu);
    EXPECT_TRUE(bad.left_ok);
    ASSERT_TRUE(bad.counterexample);
    EXPECT_TRUE(A.in_box(bad.x));
    EXPECT_LT(lagrangian(A, v2(0.5, 0.5), mu, bad.x), lagrangian(A, v2(0.5, 0.5), mu, v2(0, 0)) - 1e-9);

    const auto good = check_saddle(A, v2(1, 0), v2(1, 0), mu);
    EXPECT_TRUE(good.left_ok);
    EXPECT_FALSE(good.counterexample);

    const auto slack = check_saddle(A, v2(1, 0), v2(0, 0), Vec::Constant(1, 0.5));
    EXPECT_FALSE(slack.left_ok);
}

TEST(SolveWeighting, Examples) {
    const auto B = fixture("exB.vopt");
    const auto w1 = solve_weighting(B, v2(1, 0));
    EXPECT_NEAR(w1.value, -1.0, 1e-9);
    EXPECT_EQ(w1.clusters.size(), 2u);
    EXPECT_TRUE(has_cluster_near(w1, v2(1, 0)));
    EXPECT_TRUE(has_cluster_near(w1, v2(-1, 0)));
    expect_consistent(B, w1, v2(1, 0), nullptr);

    const auto A = fixture("exA.vopt");
    const auto w2 = solve_weighting(A, v2(0, 1));
    EXPECT_NEAR(w2.value, 0.0, 1e-9);
    EXPECT_EQ(w2.clusters.size(), 2u);
    EXPECT_TRUE(has_cluster_near(w2, v2(1, 0)));
    EXPECT_TRUE(has_cluster_near(w2, v2(-1, 0)));
    expect_consistent(A, w2, v2(0, 1), nullptr);
}

TEST(SolveWeighting, ConstantObjectives) {
    const auto P = parse_problem("var x in [0, 1]\nvar y in [0, 1]\nmin 2.5\nmin 2.5 + 0*x\n");
    const auto ms = solve_weighting(P, v2(0.5, 0.5));
    EXPECT_EQ(ms.value, 2.5);
    EXPECT_GE(ms.clusters.size(), 2u);
    for (const auto& c : ms.clusters) EXPECT_EQ(c.value, 2.5);
    expect_consistent(P, ms, v2(0.5, 0.5), nullptr);
}

TEST(SolveWeighting, NoFeasiblePoint) {
    const auto P = parse_problem("var x in [0, 1]\nmin x\nst 2 - x <= 0\n");
    EXPECT_THROW(solve_weighting(P, Vec::Ones(1)), NoFeasiblePointInBox);
}

TEST(SolveWeighting, RejectsInvalidWeights) {
    const auto B = fixture("exB.vopt");
    EXPECT_THROW(solve_weighting(B, v2(0.5, 0.6)), std::invalid_argument);
    EXPECT_THROW(solve_weighting(B, v2(-0.5, 1.5)), std::invalid_argument);
}

// The optimal value is a pointwise minimum of functions linear in λ.
TEST(SolveWeighting, ValueIsConcaveInLambda) {
    const auto A = fixture("exA.vopt");
    const GridCache cache(A, 101);
    std::vector<double> vals;
    for (int k = 0; k <= 10; ++k) vals.push_back(solve_weighting(A, cache, v2(k / 10.0, 1 - k / 10.0)).value);
    for (std::size_t k = 1; k + 1 < vals.size(); ++k)
        EXPECT_GE(vals[k] + 1e-9, 0.5 * (vals[k - 1] + vals[k + 1])) << k;
}

TEST(SolveUnconstrained, Examples) {
    const auto A = fixture("exA.vopt");
    const Vec mu = Vec::Zero(1);
    const auto u = solve_unconstrained(A, v2(1, 0), mu);
    EXPECT_NEAR(u.value, -1.0, 1e-9);
    EXPECT_TRUE(has_cluster_near(u, v2(1, 0)));
    EXPECT_TRUE(has_cluster_near(u, v2(-1, 0)));
    expect_consistent(A, u, v2(1, 0), &mu);

    const auto C = parse_problem(
        "var x1 in [-3, 3]\nvar x2 in [-3, 3]\nmin 2*x1*x2 - 2*x1^2 - x2^2 + 8*x1 - 6*x2\nmin -x1 + x2\n"
        "st x1 - x1^2 + x2 <= 0\n");
    const auto c = solve_unconstrained(C, v2(0, 1), Vec::Zero(1));
    ASSERT_EQ(c.clusters.size(), 1u);
    EXPECT_EQ(c.clusters[0].point, v2(3, -3));
    EXPECT_EQ(c.value, -6.0);

    const auto B = fixture("exB.vopt");
    EXPECT_NEAR(solve_unconstrained(B, v2(0.5, 0.5), kNoMu).value, solve_weighting(B, v2(0.5, 0.5)).value, 1e-12);
}

// A minimizer of the Lagrangian with complementary slackness passes the
// saddle check, and a saddle point is grid-minimal for L(·,μ̄).
TEST(CheckSaddle, RoundTripWithUnconstrainedMinimizer) {
    const auto P = fixture("exB_prime.vopt");
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const GridCache cache(P, 81);
    for (int trial = 0; trial < 6; ++trial) {
        const double l = u(rng);
        const Vec lambda = v2(l, 1 - l);
        const Vec mu = v2(0.0, 4 * l + 2 * (1 - l));
        const Vec xbar = v2(1, 0);
        const auto U = solve_unconstrained(P, cache, lambda, mu);
        const bool in_argmin = lagrangian(P, lambda, mu, xbar) <= U.value + 1e-9;
        const auto sv = check_saddle(P, cache, lambda, xbar, mu);
        EXPECT_TRUE(sv.left_ok);
        EXPECT_EQ(in_argmin, !sv.counterexample);
    }
}

TEST(RelationChain, Examples) {
    const auto A = fixture("exA.vopt");
    const Vec mu = Vec::Zero(1);
    const auto r = relation_chain(A, v2(1, 0), mu, v2(1, 0));
    EXPECT_TRUE(r.in_unconstrained_argmin);
    EXPECT_TRUE(r.in_weighting_argmin);
    EXPECT_TRUE(r.in_weak_efficient);
    EXPECT_TRUE(r.in_kt);
    EXPECT_TRUE(r.anomalies.empty());

    const auto z = relation_chain(A, v2(0.5, 0.5), mu, v2(0, 0));
    EXPECT_TRUE(z.in_kt);
    EXPECT_FALSE(z.in_weak_efficient);
    ASSERT_TRUE(z.dominating_point);
    EXPECT_TRUE(((A.f(*z.dominating_point) - A.f(v2(0, 0))).array() < 0).all());
    EXPECT_TRUE(z.anomalies.empty());

    EXPECT_THROW(relation_chain(A, v2(1, 0), mu, v2(2, 2)), InfeasiblePoint);
}

}  // namespace
}  // namespace vopt
