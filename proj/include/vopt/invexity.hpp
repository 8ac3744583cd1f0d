#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vopt/ktcheck.hpp"
#include "vopt/problem.hpp"
#include "vopt/scalarize.hpp"

namespace vopt {

enum class InvexityClass {
    KTSPInvex,
    SecondOrderKTSPInvex,
    KTPseudoinvexI,
    KTPseudoinvexII,
    KTInvex,
    SecondOrderKTPseudoinvexI,
    SecondOrderKTPseudoinvexII,
    SecondOrderKTInvex,
};

inline constexpr InvexityClass kAllClasses[] = {
    InvexityClass::KTSPInvex,          InvexityClass::SecondOrderKTSPInvex,
    InvexityClass::KTPseudoinvexI,     InvexityClass::KTPseudoinvexII,
    InvexityClass::KTInvex,            InvexityClass::SecondOrderKTPseudoinvexI,
    InvexityClass::SecondOrderKTPseudoinvexII, InvexityClass::SecondOrderKTInvex,
};

bool is_second_order(InvexityClass c);
/// Second-order superclass of a first-order class, and vice versa.
InvexityClass counterpart(InvexityClass c);

/// Tie tolerance for component-wise comparisons of objective values.
inline constexpr double kDominationMargin = 1e-9;

enum class WitnessKind {
    SaddleViolation,    // L_λ(y,μ) < L_λ(x,μ)
    WeakDomination,     // f(y) < f(x)
    Domination,         // f(y) ≤ f(x), f(y) ≠ f(x)
    WeightingViolation, // ⟨λ,f(y)⟩ < ⟨λ,f(x)⟩, y feasible
};

struct WitnessBundle {
    WitnessKind kind = WitnessKind::WeakDomination;
    Vec x;  // stationary point
    Vec y;  // comparison point
    Vec lambda;  // empty for the domination kinds
    Vec mu;
    Vec fx, fy;
    Vec gy;
    double gap = 0.0;  // amount by which the characterization fails
    StationarityLevel level = StationarityLevel::FirstOrderOnly;
    bool from_pair_sample = false;
};

/// Re-checks a witness from raw evaluations of f and g only.
bool verify_witness(const ProblemDef& P, const WitnessBundle& w, double tol = kDefaultTol);

struct Resolution {
    int grid_per_axis = 0;
    int stationary_points = 0;
    int second_order_points = 0;
    int directions_per_point = 0;
    int multiplier_candidates = 0;
    int pair_samples = 0;
};

enum class VerdictStatus { Falsified, ConsistentAtResolution };

struct ClassVerdict {
    InvexityClass cls = InvexityClass::KTSPInvex;
    VerdictStatus status = VerdictStatus::ConsistentAtResolution;
    std::optional<WitnessBundle> witness;
    Resolution resolution;
};

struct InvexityConfig {
    ScanOptions scan;
    /// Random box points paired with each stationary base point.
    int pair_samples = 64;
    /// Stationary points used as bases of pair samples.
    int max_bases = 16;
};

/// Scan, grid cache and multiplier candidates shared by all class checks.
class InvexityContext {
public:
    /// Throws NoFeasiblePointInBox.
    InvexityContext(const ProblemDef& P, const InvexityConfig& cfg = {});

    const ProblemDef& problem() const { return P_; }
    const ScanResult& scan() const { return scan_; }
    const GridCache& cache() const { return *cache_; }
    const InvexityConfig& config() const { return cfg_; }

    ClassVerdict check(InvexityClass cls) const;

private:
    ProblemDef P_;
    InvexityConfig cfg_;
    ScanResult scan_;
    std::unique_ptr<GridCache> cache_;
};

ClassVerdict check_class(const ProblemDef& P, InvexityClass cls, const InvexityConfig& cfg = {});

/// Vertices of {(λ,μ) : Σλ_i∇f_i + Σ_{A(x)} μ_j∇g_j = 0, Σλ = 1, λ, μ ≥ 0},
/// stationarity held to tol·scale. μ has length m.
std::vector<std::pair<Vec, Vec>> multiplier_vertices(const ProblemDef& P, const Vec& x, double tol = kDefaultTol);

enum class EtaOrder { First, Second };

struct EtaWitness {
    int system = 1;  // 1: inequalities against f(y)−f(x); 2: strict descent system
    Vec eta;
    double omega = 0.0;
    double slack = 0.0;  // optimal v of the first system, or the deciding margin of the second
};

/// Multipliers showing that neither system is solvable:
/// ⟨λ,f(y)−f(x)⟩ + ⟨μ,g(y)⟩ = value < 0 with stationarity (and L''(x,d) ≥ 0).
struct EtaRefutation {
    Vec lambda;
    Vec mu;  // length m
    double value = 0.0;
};

struct EtaResult {
    std::optional<EtaWitness> witness;
    std::optional<EtaRefutation> refutation;
};

/// Decides whether η (and ω ≥ 0 for Second) solve one of the two KTSP-invex
/// systems for base point x, comparison point y and critical direction d.
/// Throws InfeasiblePoint, NotCritical, MissingSecondDerivative.
EtaResult pointwise_eta_feasibility(const ProblemDef& P, const Vec& x, const Vec& y, const DirectionAnalysis& d,
                                    EtaOrder order, double tol = kDefaultTol);

struct InclusionRow {
    InvexityClass first;
    InvexityClass second;
    VerdictStatus first_status;
    VerdictStatus second_status;
    bool violated = false;  // first Consistent while second Falsified
};

struct InclusionReport {
    std::vector<InclusionRow> rows;
    bool any_violation = false;
};

InclusionReport inclusion_audit(const ProblemDef& P, const InvexityConfig& cfg = {});
InclusionReport inclusion_audit(const InvexityContext& ctx);

const char* to_string(InvexityClass c);
const char* to_string(VerdictStatus s);
const char* to_string(WitnessKind k);
/// Parses the CLI spelling (e.g. "ktsp-invex", "so-kt-pseudoinvex-i").
std::optional<InvexityClass> parse_class(std::string_view name);

}  // namespace vopt
