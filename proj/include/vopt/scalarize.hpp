#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vopt/problem.hpp"

namespace vopt {

/// L_λ(x,μ) = ⟨λ,f(x)⟩ + ⟨μ,g(x)⟩.
double lagrangian(const ProblemDef& P, const Vec& lambda, const Vec& mu, const Vec& x);

/// Throws std::invalid_argument unless λ ∈ Λ (to 1e-12) and μ >= 0.
void validate_weights(const ProblemDef& P, const Vec& lambda, const Vec* mu = nullptr);

struct SearchConfig {
    int grid = 201;
    int polish_starts = 16;
    double merge_radius = 1e-4;  // in box units
    double tol = kDefaultTol;
};

/// f and g at every grid node, evaluated once and shared by all scans.
class GridCache {
public:
    GridCache(const ProblemDef& P, int requested_per_axis);

    const Grid& grid() const { return grid_; }
    std::int64_t size() const { return grid_.size(); }
    bool valid(std::int64_t k) const { return valid_[static_cast<std::size_t>(k)] != 0; }
    bool feasible(std::int64_t k, double tol) const;
    /// Row k of F (n values) and G (m values).
    auto f(std::int64_t k) const { return F_.row(k); }
    auto g(std::int64_t k) const { return G_.row(k); }
    const Mat& F() const { return F_; }
    const Mat& G() const { return G_; }

private:
    Grid grid_;
    Mat F_, G_;
    std::vector<char> valid_;
};

struct Cluster {
    Vec point;
    double value;
};

struct MinimizerSet {
    std::vector<Cluster> clusters;
    double value = 0.0;
    int grid_per_axis = 0;
    int polish_starts = 0;
    int polish_iterations = 0;
};

/// Argmin of ⟨λ,f⟩ over feasible box points. Throws NoFeasiblePointInBox.
MinimizerSet solve_weighting(const ProblemDef& P, const Vec& lambda, const SearchConfig& cfg = {});
MinimizerSet solve_weighting(const ProblemDef& P, const GridCache& cache, const Vec& lambda,
                             const SearchConfig& cfg = {});

/// Argmin of L_λ(·,μ) over the box, feasibility ignored.
MinimizerSet solve_unconstrained(const ProblemDef& P, const Vec& lambda, const Vec& mu,
                                 const SearchConfig& cfg = {});
MinimizerSet solve_unconstrained(const ProblemDef& P, const GridCache& cache, const Vec& lambda,
                                 const Vec& mu, const SearchConfig& cfg = {});

struct SaddleVerdict {
    bool left_ok = false;
    bool counterexample = false;
    Vec x;             // counterexample point when found
    double gap = 0.0;  // L(x̄,μ̄) − L(x,μ̄)
    double value_at_point = 0.0;
    int grid_per_axis = 0;
    int polish_starts = 0;
    int polish_iterations = 0;
};

/// Gap a right-side counterexample must exceed.
inline constexpr double kSaddleGap = 1e-9;

/// Left inequality decided in closed form; right inequality by grid scan
/// plus descent polish over the box.
SaddleVerdict check_saddle(const ProblemDef& P, const Vec& lambda, const Vec& xbar, const Vec& mubar,
                           const SearchConfig& cfg = {});
SaddleVerdict check_saddle(const ProblemDef& P, const GridCache& cache, const Vec& lambda, const Vec& xbar,
                           const Vec& mubar, const SearchConfig& cfg = {});

struct ChainReport {
    bool complementary_slackness = false;
    bool in_unconstrained_argmin = false;  // includes complementary slackness
    bool in_weighting_argmin = false;
    bool in_weak_efficient = false;
    bool in_kt = false;
    double unconstrained_value = 0.0;
    double weighting_value = 0.0;
    std::optional<Vec> dominating_point;
    std::vector<std::string> anomalies;
};

/// Membership of x̄ in Argmin(P_λμ), Argmin(P_λ), WE(P) and KT(P) at scan
/// resolution; failed forward implications are listed as anomalies.
ChainReport relation_chain(const ProblemDef& P, const Vec& lambda, const Vec& mu, const Vec& xbar,
                           const SearchConfig& cfg = {});

/// Feasible grid node y maximizing min_i (f_i(x̄) − f_i(y)) among those that
/// strictly dominate x̄ by more than `margin`, if any; ties go to the last
/// node in grid order.
std::optional<std::int64_t> find_weak_dominator(const GridCache& cache, const Vec& fx, double tol,
                                                double margin = 1e-9);

}  // namespace vopt
