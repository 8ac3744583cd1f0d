#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "vopt/expr.hpp"

namespace vopt {

enum class ObjectiveSense { Minimize, Maximize };
enum class RowSense { LessEqual, Equal, GreaterEqual };
enum class LpStatus { Optimal, Infeasible, Unbounded };

/// Dense LP: optimize cᵀx subject to row_i(x) {≤,=,≥} b_i with per-variable
/// lower bounds of 0 or −∞.
struct LpProblem {
    Vec objective;
    Mat matrix;
    std::vector<RowSense> senses;
    Vec rhs;
    Vec lower;  // each entry 0 or -infinity
    ObjectiveSense sense = ObjectiveSense::Minimize;

    /// Empty problem with `num_vars` nonnegative variables and no rows.
    static LpProblem with_vars(Eigen::Index num_vars, ObjectiveSense sense = ObjectiveSense::Minimize);

    /// Appends a row; returns its index.
    Eigen::Index add_row(const Vec& coeffs, RowSense s, double b);
    void set_free(Eigen::Index var) { lower[var] = -std::numeric_limits<double>::infinity(); }
};

/// `dual` holds one multiplier per row with bᵀy equal to the optimal
/// objective (for either sense): y is the sensitivity of the optimum to b.
struct LpOutcome {
    LpStatus status = LpStatus::Infeasible;
    Vec primal;
    Vec dual;
    double objective = 0.0;
};

/// Two-phase dense tableau simplex with Bland's rule. Throws
/// NumericalBreakdown when only pivots below 1e-12 remain.
LpOutcome solve_lp(const LpProblem& p);

// ---- theorem of the alternative ------------------------------------------

/// Blocks of the alternative pair. Shapes: A s×p, B s×r, C q×p, D q×r. Any
/// block may be empty (0 rows or 0 columns); missing dimensions are taken
/// from the other blocks.
///
///   Sys7:  Aᵀx + Cᵀu < 0,   Bᵀx + Dᵀu ≤ 0,   u ≥ 0
///   Sys8:  Ay + Bz = 0,     Cy + Dz ≥ 0,     y ≥ 0, y ≠ 0, z ≥ 0
///
/// Exactly one of the two systems is solvable.
struct AlternativeBlocks {
    Mat A, B, C, D;

    Eigen::Index s() const;
    Eigen::Index p() const;
    Eigen::Index q() const;
    Eigen::Index r() const;
    /// Throws std::invalid_argument on inconsistent shapes.
    void validate() const;
};

enum class AlternativeVariant { Sys7, Sys8 };

struct AlternativeCertificate {
    AlternativeVariant variant;
    Vec first;   // x for Sys7, y for Sys8
    Vec second;  // u for Sys7, z for Sys8
    double margin = 0.0;  // optimal v of the deciding LP
};

AlternativeCertificate decide_alternative(const AlternativeBlocks& blocks);

/// Recomputes the witness inequalities directly; independent of the simplex.
bool verify_certificate(const AlternativeCertificate& c, const AlternativeBlocks& blocks);

/// Strictness margin for Sys7: accepted iff the deciding LP yields v > this.
inline constexpr double kStrictMargin = 1e-9;

}  // namespace vopt
