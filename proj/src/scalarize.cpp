#include "vopt/scalarize.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "vopt/errors.hpp"
#include "vopt/ktcheck.hpp"

namespace vopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Objective {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
    bool feasible_only;
};

// Projected gradient descent with Armijo backtracking. Trial points outside
// the feasible set are rejected when `feasible_only`.
Vec descend(const ProblemDef& P, const Objective& obj, Vec x, double tol, int& iterations) {
    double v = obj.value(x);
    double alpha = 1.0;
    for (int it = 0; it < 500; ++it) {
        Vec g;
        try {
            g = obj.gradient(x);
        } catch (const DomainError&) {
            break;
        }
        if (!(g.norm() > 1e-14)) break;
        ++iterations;
        bool accepted = false;
        Vec y;
        for (double a = std::min(2.0 * alpha, 1e3); a > 1e-18; a *= 0.5) {
            y = (x - a * g).cwiseMax(P.lo).cwiseMin(P.hi);
            if (y == x) break;
            try {
                if (obj.feasible_only && P.max_violation(y) > tol) continue;
                const double vy = obj.value(y);
                if (vy <= v - 1e-4 * g.dot(x - y)) {
                    alpha = a;
                    v = vy;
                    accepted = true;
                    break;
                }
            } catch (const DomainError&) {
            }
        }
        if (!accepted) break;
        const double moved = (y - x).norm();
        x = y;
        if (moved <= 1e-15 * (1.0 + x.norm())) break;
    }
    return x;
}

MinimizerSet minimize(const ProblemDef& P, const GridCache& cache, const std::vector<double>& node_values,
                      const Objective& obj, const SearchConfig& cfg) {
    const Grid& grid = cache.grid();
    const std::int64_t N = grid.size();
    std::vector<std::int64_t> minima;
    for (std::int64_t k = 0; k < N; ++k) {
        const double v = node_values[static_cast<std::size_t>(k)];
        if (!std::isfinite(v)) continue;
        bool is_min = true;
        for (auto nb : grid.neighbours(k))
            if (node_values[static_cast<std::size_t>(nb)] < v) {
                is_min = false;
                break;
            }
        if (is_min) minima.push_back(k);
    }
    if (minima.empty()) throw NoFeasiblePointInBox();
    std::stable_sort(minima.begin(), minima.end(), [&](std::int64_t a, std::int64_t b) {
        return node_values[static_cast<std::size_t>(a)] < node_values[static_cast<std::size_t>(b)];
    });
    if (minima.size() > static_cast<std::size_t>(cfg.polish_starts))
        minima.resize(static_cast<std::size_t>(std::max(cfg.polish_starts, 1)));

    MinimizerSet out;
    out.grid_per_axis = grid.per_axis();
    out.polish_starts = static_cast<int>(minima.size());
    std::vector<Cluster> cand;
    for (auto k : minima) {
        const Vec x = descend(P, obj, grid.point(k), cfg.tol, out.polish_iterations);
        cand.push_back({x, obj.value(x)});
    }
    std::stable_sort(cand.begin(), cand.end(), [](const Cluster& a, const Cluster& b) { return a.value < b.value; });
    out.value = cand.front().value;
    const double keep = out.value + 1e-7 * (1.0 + std::abs(out.value));
    const Vec width = P.hi - P.lo;
    for (const auto& c : cand) {
        if (c.value > keep) break;
        const bool merged = std::any_of(out.clusters.begin(), out.clusters.end(), [&](const Cluster& r) {
            return ((r.point - c.point).array() / width.array()).matrix().norm() < cfg.merge_radius;
        });
        if (!merged) out.clusters.push_back(c);
    }
    return out;
}

Vec weighted_gradient(const ProblemDef& P, const Vec& lambda, const Vec& mu, const Vec& x) {
    Vec g = P.jacobian_f(x).transpose() * lambda;
    if (P.m() > 0 && mu.size() > 0) g += P.jacobian_g(x).transpose() * mu;
    return g;
}

}  // namespace

double lagrangian(const ProblemDef& P, const Vec& lambda, const Vec& mu, const Vec& x) {
    double v = lambda.dot(P.f(x));
    if (P.m() > 0) v += mu.dot(P.g(x));
    return v;
}

void validate_weights(const ProblemDef& P, const Vec& lambda, const Vec* mu) {
    if (lambda.size() != P.n()) throw std::invalid_argument("lambda must have one entry per objective");
    if (!lambda.allFinite() || lambda.minCoeff() < 0.0 || std::abs(lambda.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("lambda must be nonnegative and sum to 1");
    if (mu) {
        if (mu->size() != P.m()) throw std::invalid_argument("mu must have one entry per constraint");
        if (P.m() > 0 && (!mu->allFinite() || mu->minCoeff() < 0.0))
            throw std::invalid_argument("mu must be nonnegative");
    }
}

GridCache::GridCache(const ProblemDef& P, int requested_per_axis)
    : grid_(P.lo, P.hi, Grid::points_per_axis(requested_per_axis, P.s())) {
    const std::int64_t N = grid_.size();
    F_.resize(N, P.n());
    G_.resize(N, P.m());
    valid_.assign(static_cast<std::size_t>(N), 0);
    for (std::int64_t k = 0; k < N; ++k) {
        const Vec x = grid_.point(k);
        try {
            F_.row(k) = P.f(x).transpose();
            G_.row(k) = P.g(x).transpose();
            valid_[static_cast<std::size_t>(k)] = 1;
        } catch (const DomainError&) {
            F_.row(k).setConstant(kInf);
            G_.row(k).setConstant(kInf);
        }
    }
}

bool GridCache::feasible(std::int64_t k, double tol) const {
    return valid(k) && (G_.cols() == 0 || G_.row(k).maxCoeff() <= tol);
}

MinimizerSet solve_weighting(const ProblemDef& P, const Vec& lambda, const SearchConfig& cfg) {
    return solve_weighting(P, GridCache(P, cfg.grid), lambda, cfg);
}

MinimizerSet solve_weighting(const ProblemDef& P, const GridCache& cache, const Vec& lambda, const SearchConfig& cfg) {
    validate_weights(P, lambda);
    std::vector<double> vals(static_cast<std::size_t>(cache.size()), kInf);
    for (std::int64_t k = 0; k < cache.size(); ++k)
        if (cache.feasible(k, cfg.tol)) vals[static_cast<std::size_t>(k)] = cache.f(k).dot(lambda);
    const Vec none;
    Objective obj{[&](const Vec& x) { return lambda.dot(P.f(x)); },
                  [&](const Vec& x) { return weighted_gradient(P, lambda, none, x); }, true};
    return minimize(P, cache, vals, obj, cfg);
}

MinimizerSet solve_unconstrained(const ProblemDef& P, const Vec& lambda, const Vec& mu, const SearchConfig& cfg) {
    return solve_unconstrained(P, GridCache(P, cfg.grid), lambda, mu, cfg);
}

MinimizerSet solve_unconstrained(const ProblemDef& P, const GridCache& cache, const Vec& lambda, const Vec& mu,
                                 const SearchConfig& cfg) {
    validate_weights(P, lambda, &mu);
    std::vector<double> vals(static_cast<std::size_t>(cache.size()), kInf);
    for (std::int64_t k = 0; k < cache.size(); ++k) {
        if (!cache.valid(k)) continue;
        double v = cache.f(k).dot(lambda);
        if (P.m() > 0) v += cache.g(k).dot(mu);
        vals[static_cast<std::size_t>(k)] = v;
    }
    Objective obj{[&](const Vec& x) { return lagrangian(P, lambda, mu, x); },
                  [&](const Vec& x) { return weighted_gradient(P, lambda, mu, x); }, false};
    return minimize(P, cache, vals, obj, cfg);
}

SaddleVerdict check_saddle(const ProblemDef& P, const Vec& lambda, const Vec& xbar, const Vec& mubar,
                           const SearchConfig& cfg) {
    return check_saddle(P, GridCache(P, cfg.grid), lambda, xbar, mubar, cfg);
}

SaddleVerdict check_saddle(const ProblemDef& P, const GridCache& cache, const Vec& lambda, const Vec& xbar,
                           const Vec& mubar, const SearchConfig& cfg) {
    validate_weights(P, lambda, &mubar);
    if (!P.in_box(xbar)) throw std::invalid_argument("saddle point candidate lies outside the box");
    SaddleVerdict v;
    // sup over μ >= 0 of ⟨μ, g(x̄)⟩ is finite iff g(x̄) <= 0, and then equals 0.
    const Vec g = P.g(xbar);
    const double scale = 1.0 + (P.m() > 0 ? mubar.cwiseAbs().maxCoeff() : 0.0);
    v.left_ok = (P.m() == 0 || g.maxCoeff() <= cfg.tol) && (P.m() == 0 || std::abs(mubar.dot(g)) <= cfg.tol * scale);
    v.value_at_point = lagrangian(P, lambda, mubar, xbar);

    const MinimizerSet ms = solve_unconstrained(P, cache, lambda, mubar, cfg);
    v.grid_per_axis = ms.grid_per_axis;
    v.polish_starts = ms.polish_starts;
    v.polish_iterations = ms.polish_iterations;
    const Vec& best = ms.clusters.front().point;
    const double gap = v.value_at_point - lagrangian(P, lambda, mubar, best);
    if (gap > kSaddleGap && P.in_box(best)) {
        v.counterexample = true;
        v.x = best;
        v.gap = gap;
    }
    return v;
}

std::optional<std::int64_t> find_weak_dominator(const GridCache& cache, const Vec& fx, double tol, double margin) {
    std::optional<std::int64_t> best;
    double best_gap = margin;
    for (std::int64_t k = 0; k < cache.size(); ++k) {
        if (!cache.feasible(k, tol)) continue;
        const double gap = (fx.transpose() - cache.f(k)).minCoeff();
        // Exact ties go to the later node in grid order.
        if (gap > margin && gap >= best_gap) {
            best_gap = gap;
            best = k;
        }
    }
    return best;
}

ChainReport relation_chain(const ProblemDef& P, const Vec& lambda, const Vec& mu, const Vec& xbar,
                           const SearchConfig& cfg) {
    validate_weights(P, lambda, &mu);
    active_set(P, xbar, cfg.tol);  // throws InfeasiblePoint
    const GridCache cache(P, cfg.grid);
    ChainReport r;

    const Vec g = P.g(xbar);
    r.complementary_slackness = true;
    for (Eigen::Index j = 0; j < P.m(); ++j)
        if (std::abs(mu[j] * g[j]) > cfg.tol) r.complementary_slackness = false;

    auto member = [](double at, double best) { return at <= best + 1e-7 * (1.0 + std::abs(best)); };
    const MinimizerSet U = solve_unconstrained(P, cache, lambda, mu, cfg);
    r.unconstrained_value = U.value;
    r.in_unconstrained_argmin = r.complementary_slackness && member(lagrangian(P, lambda, mu, xbar), U.value);

    const MinimizerSet W = solve_weighting(P, cache, lambda, cfg);
    r.weighting_value = W.value;
    r.in_weighting_argmin = member(lambda.dot(P.f(xbar)), W.value);

    if (const auto k = find_weak_dominator(cache, P.f(xbar), cfg.tol)) r.dominating_point = cache.grid().point(*k);
    r.in_weak_efficient = !r.dominating_point;
    r.in_kt = first_order_kt(P, xbar, cfg.tol).has_value();

    if (r.in_unconstrained_argmin && !r.in_weighting_argmin)
        r.anomalies.push_back("member of Argmin(P_lambda,mu) but not of Argmin(P_lambda)");
    if (r.in_weighting_argmin && !r.in_weak_efficient)
        r.anomalies.push_back("member of Argmin(P_lambda) but dominated on the grid");
    if (r.in_weak_efficient && !r.in_kt)
        r.anomalies.push_back("undominated on the grid but not a KT point");
    return r;
}

}  // namespace vopt
