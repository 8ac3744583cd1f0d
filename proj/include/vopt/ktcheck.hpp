#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vopt/linprog.hpp"
#include "vopt/problem.hpp"

namespace vopt {

enum class Normalization { SumLambdaOne, FritzJohn };

/// Plain: Eq. (4) products are checked on the returned pair.
/// Strict4: λ_i = 0 off I(x,d) and μ_j = 0 off J(x,d) are imposed.
enum class Eq4Mode { Plain, Strict4 };

struct MultiplierPair {
    Vec lambda;
    Vec mu;  // length m, zero off the active set
    Normalization normalization = Normalization::SumLambdaOne;
    double residual = 0.0;  // ‖Σλ_i∇f_i + Σμ_j∇g_j‖₂
    /// L''(x,d) for second-order pairs, NaN for first-order ones.
    double curvature = std::numeric_limits<double>::quiet_NaN();
    bool eq4_holds = true;
};

/// Least ℓ∞ residual of Σλ_i∇f_i + Σμ_j∇g_j over normalized multipliers with
/// μ supported on `support`. `scale` is 1 + the largest gradient entry.
struct KtResidual {
    double residual;
    double scale;
    Vec lambda;
    Vec mu;
};
KtResidual kt_residual(const ProblemDef& P, const Vec& x, const std::vector<int>& support,
                       Normalization norm = Normalization::SumLambdaOne);

/// Some iff the least residual is at most tol·scale.
std::optional<MultiplierPair> first_order_kt(const ProblemDef& P, const Vec& x, double tol = kDefaultTol,
                                             Normalization norm = Normalization::SumLambdaOne);

/// Multipliers satisfying stationarity and L''(x,d) >= 0 along a critical d.
/// Throws NotCritical or MissingSecondDerivative.
std::optional<MultiplierPair> second_order_multipliers(const ProblemDef& P, const Vec& x,
                                                       const DirectionAnalysis& d,
                                                       Normalization norm = Normalization::SumLambdaOne,
                                                       Eq4Mode mode = Eq4Mode::Plain,
                                                       double tol = kDefaultTol);

enum class StationarityLevel { NotStationary, FirstOrderOnly, SecondOrderKT };

struct DirectionResult {
    DirectionAnalysis direction;
    std::optional<MultiplierPair> multipliers;
    bool missing_second_derivative = false;
};

struct StationarityVerdict {
    StationarityLevel level = StationarityLevel::NotStationary;
    std::optional<MultiplierPair> first_order;
    std::vector<DirectionResult> directions;
    int directions_tested = 0;
};

struct ClassifyOptions {
    int directions = 64;
    std::uint64_t seed = 0;
    Normalization normalization = Normalization::SumLambdaOne;
    Eq4Mode mode = Eq4Mode::Plain;
    double tol = kDefaultTol;
};

StationarityVerdict classify_point(const ProblemDef& P, const Vec& x, const ClassifyOptions& opt = {});

enum class PrimalStatus { Inconsistent, Consistent, EmptyIndexSets };

struct PrimalVerdict {
    PrimalStatus status = PrimalStatus::EmptyIndexSets;
    std::optional<Vec> witness;  // z with ∇h(x)z + h''(x,d) < 0 on I ∪ J
    std::optional<AlternativeCertificate> certificate;
    std::vector<int> I;
    std::vector<int> J;
};

/// Decides solvability of ∇f_i(x)z + f_i''(x,d) < 0 (i ∈ I), ∇g_j(x)z + g_j''(x,d) < 0 (j ∈ J).
PrimalVerdict primal_necessary(const ProblemDef& P, const Vec& x, const DirectionAnalysis& d);

struct ScanOptions {
    int grid = 201;
    double tol = kDefaultTol;
    int directions = 64;
    std::uint64_t seed = 0;
    /// Upper bound on reported points; continua are subsampled evenly.
    int max_points = 256;
};

struct KtPoint {
    Vec x;
    StationarityVerdict verdict;
    bool polished = false;  // false when the grid node itself was stationary
};

struct ScanResult {
    std::vector<KtPoint> points;
    int grid_per_axis = 0;
    std::int64_t feasible_nodes = 0;
    int polished_candidates = 0;
};

/// Grid scan for first-order KT points, with Gauss-Newton polish of residual
/// local minima, 1e-5 deduplication and classification of each point.
ScanResult scan_kt_points(const ProblemDef& P, const ScanOptions& opt = {});

const char* to_string(StationarityLevel level);
const char* to_string(Normalization n);
const char* to_string(Eq4Mode m);
const char* to_string(PrimalStatus s);

}  // namespace vopt
