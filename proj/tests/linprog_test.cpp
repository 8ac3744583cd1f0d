#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "vopt/errors.hpp"
#include "vopt/linprog.hpp"

namespace vopt {
namespace {

Mat rows(std::initializer_list<std::initializer_list<double>> r) {
    Mat m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
    Eigen::Index i = 0;
    for (auto row : r) {
        Eigen::Index j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

TEST(SolveLp, LemmaPrimalWithSingleGradientIsInfeasible) {
    // min 0 s.t. y·1 = 0, y >= 0, y = 1
    LpProblem lp = LpProblem::with_vars(1);
    lp.add_row(Vec{{1.0}}, RowSense::Equal, 0.0);
    lp.add_row(Vec{{1.0}}, RowSense::Equal, 1.0);
    EXPECT_EQ(solve_lp(lp).status, LpStatus::Infeasible);
}

TEST(SolveLp, MaxOfNonPositive) {
    LpProblem lp = LpProblem::with_vars(1, ObjectiveSense::Maximize);
    lp.set_free(0);
    lp.objective[0] = 1.0;
    lp.add_row(Vec{{1.0}}, RowSense::LessEqual, 0.0);
    const auto out = solve_lp(lp);
    ASSERT_EQ(out.status, LpStatus::Optimal);
    EXPECT_NEAR(out.primal[0], 0.0, 1e-12);
    EXPECT_NEAR(out.objective, 0.0, 1e-12);
}

TEST(SolveLp, UnboundedRay) {
    LpProblem lp = LpProblem::with_vars(1, ObjectiveSense::Maximize);
    lp.objective[0] = 1.0;
    lp.add_row(Vec{{1.0}}, RowSense::GreaterEqual, 0.0);
    EXPECT_EQ(solve_lp(lp).status, LpStatus::Unbounded);
}

TEST(SolveLp, TextbookProblemWithDuals) {
    // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36
    LpProblem lp = LpProblem::with_vars(2, ObjectiveSense::Maximize);
    lp.objective << 3, 5;
    lp.add_row(Vec{{1, 0}}, RowSense::LessEqual, 4);
    lp.add_row(Vec{{0, 2}}, RowSense::LessEqual, 12);
    lp.add_row(Vec{{3, 2}}, RowSense::LessEqual, 18);
    const auto out = solve_lp(lp);
    ASSERT_EQ(out.status, LpStatus::Optimal);
    EXPECT_NEAR(out.primal[0], 2.0, 1e-12);
    EXPECT_NEAR(out.primal[1], 6.0, 1e-12);
    EXPECT_NEAR(out.objective, 36.0, 1e-12);
    EXPECT_NEAR(out.dual[0], 0.0, 1e-12);
    EXPECT_NEAR(out.dual[1], 1.5, 1e-12);
    EXPECT_NEAR(out.dual[2], 1.0, 1e-12);
}

TEST(SolveLp, MixedSensesNegativeRhsAndFreeVariables) {
    // min x - y s.t. x + y = 2, x - y >= -4, y <= 10, x free, y >= 0 -> x=-1, y=3
    LpProblem lp = LpProblem::with_vars(2);
    lp.objective << 1, -1;
    lp.set_free(0);
    lp.add_row(Vec{{1, 1}}, RowSense::Equal, 2);
    lp.add_row(Vec{{1, -1}}, RowSense::GreaterEqual, -4);
    lp.add_row(Vec{{0, 1}}, RowSense::LessEqual, 10);
    const auto out = solve_lp(lp);
    ASSERT_EQ(out.status, LpStatus::Optimal);
    EXPECT_NEAR(out.primal[0], -1.0, 1e-12);
    EXPECT_NEAR(out.primal[1], 3.0, 1e-12);
    EXPECT_NEAR(out.objective, -4.0, 1e-12);
    EXPECT_NEAR(lp.rhs.dot(out.dual), out.objective, 1e-10);
}

TEST(SolveLp, RedundantEqualityRows) {
    LpProblem lp = LpProblem::with_vars(2);
    lp.objective << 1, 2;
    lp.add_row(Vec{{1, 1}}, RowSense::Equal, 1);
    lp.add_row(Vec{{2, 2}}, RowSense::Equal, 2);
    const auto out = solve_lp(lp);
    ASSERT_EQ(out.status, LpStatus::Optimal);
    EXPECT_NEAR(out.objective, 1.0, 1e-12);
    EXPECT_NEAR(lp.rhs.dot(out.dual), out.objective, 1e-10);
}

TEST(SolveLp, DegenerateCyclingExampleTerminates) {
    // Beale's classic cycling example (cycles under Dantzig's rule without anti-cycling).
    LpProblem lp = LpProblem::with_vars(4);
    lp.objective << -0.75, 150, -0.02, 6;
    lp.add_row(Vec{{0.25, -60, -0.04, 9}}, RowSense::LessEqual, 0);
    lp.add_row(Vec{{0.5, -90, -0.02, 3}}, RowSense::LessEqual, 0);
    lp.add_row(Vec{{0, 0, 1, 0}}, RowSense::LessEqual, 1);
    const auto out = solve_lp(lp);
    ASSERT_EQ(out.status, LpStatus::Optimal);
    EXPECT_NEAR(out.objective, -0.05, 1e-12);
}

// Property: on random feasible bounded LPs the primal is feasible and the
// duality gap closes.
TEST(SolveLp, StrongDualityOnRandomProblems) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::uniform_int_distribution<int> dim(1, 6);
    int optimal = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const int n = dim(rng), m = dim(rng);
        LpProblem lp = LpProblem::with_vars(n, trial % 2 ? ObjectiveSense::Maximize : ObjectiveSense::Minimize);
        for (int j = 0; j < n; ++j) {
            lp.objective[j] = u(rng);
            if (trial % 3 == 0 && j == 0) lp.set_free(j);
        }
        for (int i = 0; i < m; ++i) {
            Vec row(n);
            for (int j = 0; j < n; ++j) row[j] = u(rng);
            const auto s = static_cast<RowSense>(i % 3);
            lp.add_row(row, s, u(rng));
        }
        // box keeps the problem bounded
        for (int j = 0; j < n; ++j) {
            Vec e = Vec::Zero(n);
            e[j] = 1.0;
            lp.add_row(e, RowSense::LessEqual, 5.0);
            if (std::isinf(lp.lower[j])) lp.add_row(e, RowSense::GreaterEqual, -5.0);
        }
        const auto out = solve_lp(lp);
        ASSERT_NE(out.status, LpStatus::Unbounded);
        if (out.status != LpStatus::Optimal) continue;
        ++optimal;
        const double scale = 1.0 + std::abs(out.objective);
        const Vec act = lp.matrix * out.primal;
        for (Eigen::Index i = 0; i < lp.matrix.rows(); ++i) {
            const double b = lp.rhs[i];
            const double tol = 1e-9 * (1.0 + std::abs(b));
            switch (lp.senses[static_cast<std::size_t>(i)]) {
                case RowSense::LessEqual: EXPECT_LE(act[i], b + tol); break;
                case RowSense::GreaterEqual: EXPECT_GE(act[i], b - tol); break;
                case RowSense::Equal: EXPECT_NEAR(act[i], b, tol); break;
            }
        }
        for (Eigen::Index j = 0; j < lp.lower.size(); ++j)
            if (lp.lower[j] == 0.0) EXPECT_GE(out.primal[j], 0.0);
        EXPECT_NEAR(lp.rhs.dot(out.dual), out.objective, 1e-8 * scale);
    }
    EXPECT_GT(optimal, 50);
}

TEST(SolveLp, RejectsInconsistentShapes) {
    LpProblem lp = LpProblem::with_vars(2);
    lp.rhs = Vec::Zero(1);
    EXPECT_THROW(solve_lp(lp), std::invalid_argument);
}

TEST(DecideAlternative, SingleEntryGivesSys7) {
    AlternativeBlocks b{rows({{1.0}}), {}, {}, {}};
    const auto c = decide_alternative(b);
    ASSERT_EQ(c.variant, AlternativeVariant::Sys7);
    EXPECT_LT(c.first[0], 0.0);
    EXPECT_TRUE(verify_certificate(c, b));
}

TEST(DecideAlternative, GordanPairGivesSys8) {
    AlternativeBlocks b{rows({{1.0, -1.0}}), {}, {}, {}};
    const auto c = decide_alternative(b);
    ASSERT_EQ(c.variant, AlternativeVariant::Sys8);
    EXPECT_NEAR(c.first[0], 1.0, 1e-12);
    EXPECT_NEAR(c.first[1], 1.0, 1e-12);
    EXPECT_TRUE(verify_certificate(c, b));
}

TEST(DecideAlternative, ZeroGradientsGiveSys8) {
    AlternativeBlocks b{Mat::Zero(2, 2), {}, {}, {}};
    const auto c = decide_alternative(b);
    EXPECT_EQ(c.variant, AlternativeVariant::Sys8);
    EXPECT_TRUE(verify_certificate(c, b));
}

TEST(DecideAlternative, FarkasAndMotzkinSpecialCases) {
    // Motzkin: Aᵀx < 0, Bᵀx <= 0 with A = [1], B = [-1]: x < 0 and -x <= 0 clash.
    AlternativeBlocks motzkin{rows({{1.0}}), rows({{-1.0}}), {}, {}};
    EXPECT_EQ(decide_alternative(motzkin).variant, AlternativeVariant::Sys8);
    // With the u block: Aᵀx + Cᵀu < 0, u >= 0; A = 0, C = [-1] is solved by u = 1.
    AlternativeBlocks with_u{Mat::Zero(1, 1), {}, rows({{-1.0}}), {}};
    const auto c = decide_alternative(with_u);
    EXPECT_EQ(c.variant, AlternativeVariant::Sys7);
    EXPECT_TRUE(verify_certificate(c, with_u));
    // And C = [+1] is not.
    AlternativeBlocks no_u{Mat::Zero(1, 1), {}, rows({{1.0}}), {}};
    const auto c2 = decide_alternative(no_u);
    EXPECT_EQ(c2.variant, AlternativeVariant::Sys8);
    EXPECT_TRUE(verify_certificate(c2, no_u));
}

TEST(VerifyCertificate, ExampleWitnesses) {
    AlternativeBlocks single{rows({{1.0}}), {}, {}, {}};
    EXPECT_TRUE(verify_certificate({AlternativeVariant::Sys7, Vec{{-1.0}}, Vec(0)}, single));
    EXPECT_FALSE(verify_certificate({AlternativeVariant::Sys7, Vec{{1.0}}, Vec(0)}, single));
    AlternativeBlocks gordan{rows({{1.0, -1.0}}), {}, {}, {}};
    EXPECT_TRUE(verify_certificate({AlternativeVariant::Sys8, Vec{{1.0, 1.0}}, Vec(0)}, gordan));
    EXPECT_FALSE(verify_certificate({AlternativeVariant::Sys8, Vec{{1.0, 0.0}}, Vec(0)}, gordan));
    EXPECT_FALSE(verify_certificate({AlternativeVariant::Sys8, Vec{{0.0, 0.0}}, Vec(0)}, gordan));
}

TEST(DecideAlternative, RejectsInconsistentShapes) {
    AlternativeBlocks b{Mat::Zero(2, 3), Mat::Zero(3, 1), {}, {}};
    EXPECT_THROW(decide_alternative(b), std::invalid_argument);
}

}  // namespace
}  // namespace vopt
