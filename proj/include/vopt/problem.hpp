#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vopt/expr.hpp"

namespace vopt {

/// Vector problem: minimize (f_1..f_n) subject to g_j(x) <= 0, scanned over a box.
struct ProblemDef {
    std::vector<std::string> names;
    Vec lo;
    Vec hi;
    std::vector<Expr> objectives;
    std::vector<Expr> constraints;
    std::vector<std::string> objective_text;
    std::vector<std::string> constraint_text;

    Eigen::Index s() const { return lo.size(); }
    Eigen::Index n() const { return static_cast<Eigen::Index>(objectives.size()); }
    Eigen::Index m() const { return static_cast<Eigen::Index>(constraints.size()); }

    Vec f(const Vec& x) const;
    Vec g(const Vec& x) const;
    /// Rows are gradients.
    Mat jacobian_f(const Vec& x) const;
    Mat jacobian_g(const Vec& x) const;

    bool in_box(const Vec& x) const;
    /// max_j g_j(x), or -inf when m = 0.
    double max_violation(const Vec& x) const;

    /// Canonical text form; parse_problem(to_text()) reproduces the problem.
    std::string to_text() const;
};

/// Parses the line format
///   var <name> in [<lo>, <hi>]
///   min <expr>
///   st  <expr> <= 0
/// with '#' comments. Throws ParseError, EmptyObjectives or BadBounds.
ProblemDef parse_problem(std::string_view text);
ProblemDef load_problem(const std::filesystem::path& path);

inline constexpr double kDefaultTol = 1e-8;

struct ActiveSet {
    Vec point;
    double tol = kDefaultTol;
    std::vector<int> indices;
    Vec values;
};

/// Indices with |g_j(x)| <= tol. Throws InfeasiblePoint if some g_j(x) > tol.
ActiveSet active_set(const ProblemDef& P, const Vec& x, double tol = kDefaultTol);

struct DirectionAnalysis {
    Vec direction;
    bool is_critical = false;
    std::vector<int> I;
    std::vector<int> J;
    std::vector<int> active;
    Vec f_products;
    Vec g_products;  // aligned with `active`
};

/// Normalizes d (unless zero) and evaluates the critical-direction tests at x.
DirectionAnalysis analyze_direction(const ProblemDef& P, const Vec& x, const Vec& d,
                                    double tol = kDefaultTol);

/// Critical subset of {0} ∪ {±e_k} ∪ {face directions}, followed by the
/// first `count` critical points of the sphere sequence (at most 32·count drawn).
///
/// Face directions span null spaces of subsets of the active gradient rows.
/// They catch critical cones of lower dimension, which sphere points almost
/// never hit exactly.
std::vector<DirectionAnalysis> sample_critical_directions(const ProblemDef& P, const Vec& x,
                                                          int count, std::uint64_t seed,
                                                          double tol = kDefaultTol);

/// Unit directions on the sphere: golden angle for s = 2, Halton rejection otherwise.
std::vector<Vec> sphere_directions(Eigen::Index s, int count, std::uint64_t seed);

/// Uniform grid over the box. Points are lo + (hi - lo)·i/(N-1) per axis.
class Grid {
public:
    Grid(const Vec& lo, const Vec& hi, int per_axis);

    /// Per-axis size for a requested resolution; caps the total near 201³.
    static int points_per_axis(int requested, Eigen::Index s);

    int per_axis() const { return per_axis_; }
    Eigen::Index dim() const { return lo_.size(); }
    std::int64_t size() const { return total_; }
    double spacing(Eigen::Index k) const { return (hi_[k] - lo_[k]) / (per_axis_ - 1); }

    Vec point(std::int64_t flat) const;
    std::vector<int> coords(std::int64_t flat) const;
    std::int64_t flat(const std::vector<int>& coords) const;
    /// Flat indices of the 3^s - 1 neighbours inside the grid.
    std::vector<std::int64_t> neighbours(std::int64_t flat) const;

private:
    Vec lo_, hi_;
    int per_axis_;
    std::int64_t total_;
};

}  // namespace vopt
