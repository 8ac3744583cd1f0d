#include "vopt/ktcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "vopt/errors.hpp"

namespace vopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCurvatureFloor = -1e-9;

// Multiplier columns: the first `nl` are objective gradients, the rest are
// constraint gradients. `lambda_idx` and `mu_idx` map columns back to f_i, g_j.
struct Columns {
    Mat G;  // s × k
    std::vector<int> lambda_idx;
    std::vector<int> mu_idx;
    Vec second;  // optional curvature row, length k

    Eigen::Index nl() const { return static_cast<Eigen::Index>(lambda_idx.size()); }
    Eigen::Index k() const { return G.cols(); }
    double scale() const { return 1.0 + (G.size() ? G.cwiseAbs().maxCoeff() : 0.0); }
};

Columns make_columns(const Mat& Jf, const Mat& Jg, const std::vector<int>& lambda_idx,
                     const std::vector<int>& mu_idx) {
    Columns c;
    c.lambda_idx = lambda_idx;
    c.mu_idx = mu_idx;
    c.G.resize(Jf.cols(), static_cast<Eigen::Index>(lambda_idx.size() + mu_idx.size()));
    Eigen::Index col = 0;
    for (int i : lambda_idx) c.G.col(col++) = Jf.row(i).transpose();
    for (int j : mu_idx) c.G.col(col++) = Jg.row(j).transpose();
    return c;
}

std::vector<int> iota(Eigen::Index n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i);
    return v;
}

void add_normalization(LpProblem& lp, const Columns& c, Normalization norm) {
    Vec row = Vec::Zero(lp.objective.size());
    row.head(norm == Normalization::SumLambdaOne ? c.nl() : c.k()).setOnes();
    lp.add_row(row, RowSense::Equal, 1.0);
}

// min r s.t. |G w|_∞ <= r, normalization, optional second·w >= floor.
std::optional<std::pair<Vec, double>> min_residual(const Columns& c, Normalization norm,
                                                   std::optional<double> floor = std::nullopt) {
    const Eigen::Index k = c.k(), nv = k + 1;
    if (norm == Normalization::SumLambdaOne ? c.nl() == 0 : k == 0) return std::nullopt;
    LpProblem lp = LpProblem::with_vars(nv);
    lp.objective[k] = 1.0;
    for (Eigen::Index row = 0; row < c.G.rows(); ++row) {
        Vec a = Vec::Zero(nv);
        a.head(k) = c.G.row(row).transpose();
        a[k] = -1.0;
        lp.add_row(a, RowSense::LessEqual, 0.0);
        a[k] = 1.0;
        lp.add_row(a, RowSense::GreaterEqual, 0.0);
    }
    add_normalization(lp, c, norm);
    if (floor) {
        Vec a = Vec::Zero(nv);
        a.head(k) = c.second;
        lp.add_row(a, RowSense::GreaterEqual, *floor);
    }
    const auto out = solve_lp(lp);
    if (out.status == LpStatus::Infeasible) return std::nullopt;
    if (out.status != LpStatus::Optimal) throw NumericalBreakdown("multiplier LP is unbounded");
    return std::pair{Vec(out.primal.head(k).cwiseMax(0.0)), out.objective};
}

// max t s.t. |G w|_∞ <= eps, second·w >= t, t <= 1, normalization.
std::optional<std::pair<Vec, double>> max_curvature(const Columns& c, Normalization norm, double eps) {
    const Eigen::Index k = c.k(), nv = k + 1;
    if (norm == Normalization::SumLambdaOne ? c.nl() == 0 : k == 0) return std::nullopt;
    LpProblem lp = LpProblem::with_vars(nv, ObjectiveSense::Maximize);
    lp.set_free(k);
    lp.objective[k] = 1.0;
    for (Eigen::Index row = 0; row < c.G.rows(); ++row) {
        Vec a = Vec::Zero(nv);
        a.head(k) = c.G.row(row).transpose();
        lp.add_row(a, RowSense::LessEqual, eps);
        lp.add_row(a, RowSense::GreaterEqual, -eps);
    }
    Vec a = Vec::Zero(nv);
    a.head(k) = c.second;
    a[k] = -1.0;
    lp.add_row(a, RowSense::GreaterEqual, 0.0);
    lp.add_row(Vec::Unit(nv, k), RowSense::LessEqual, 1.0);
    add_normalization(lp, c, norm);
    const auto out = solve_lp(lp);
    if (out.status == LpStatus::Infeasible) return std::nullopt;
    if (out.status != LpStatus::Optimal) throw NumericalBreakdown("curvature LP is unbounded");
    return std::pair{Vec(out.primal.head(k).cwiseMax(0.0)), out.objective};
}

MultiplierPair assemble(const ProblemDef& P, const Columns& c, const Vec& w, Normalization norm) {
    MultiplierPair mp;
    mp.lambda = Vec::Zero(P.n());
    mp.mu = Vec::Zero(P.m());
    mp.normalization = norm;
    for (Eigen::Index col = 0; col < c.k(); ++col) {
        if (col < c.nl())
            mp.lambda[c.lambda_idx[static_cast<std::size_t>(col)]] = w[col];
        else
            mp.mu[c.mu_idx[static_cast<std::size_t>(col - c.nl())]] = w[col];
    }
    mp.residual = (c.G * w).norm();
    return mp;
}

double second_derivative(const Expr& e, const Vec& x, const Vec& d) {
    try {
        return second_dir_deriv(e, x, d);
    } catch (const DomainError& err) {
        throw MissingSecondDerivative(std::string("second directional derivative unavailable: ") + err.what());
    }
}

KtResidual residual_from(const Columns& c, Eigen::Index n, Eigen::Index m, Normalization norm) {
    KtResidual kr{kInf, c.scale(), Vec::Zero(n), Vec::Zero(m)};
    const auto sol = min_residual(c, norm);
    if (!sol) return kr;
    kr.residual = sol->second;
    for (Eigen::Index col = 0; col < c.k(); ++col) {
        if (col < c.nl())
            kr.lambda[c.lambda_idx[static_cast<std::size_t>(col)]] = sol->first[col];
        else
            kr.mu[c.mu_idx[static_cast<std::size_t>(col - c.nl())]] = sol->first[col];
    }
    return kr;
}

}  // namespace

KtResidual kt_residual(const ProblemDef& P, const Vec& x, const std::vector<int>& support, Normalization norm) {
    const Columns c = make_columns(P.jacobian_f(x), P.jacobian_g(x), iota(P.n()), support);
    return residual_from(c, P.n(), P.m(), norm);
}

std::optional<MultiplierPair> first_order_kt(const ProblemDef& P, const Vec& x, double tol, Normalization norm) {
    const ActiveSet act = active_set(P, x, tol);
    const Columns c = make_columns(P.jacobian_f(x), P.jacobian_g(x), iota(P.n()), act.indices);
    const auto sol = min_residual(c, norm);
    if (!sol || sol->second > tol * c.scale()) return std::nullopt;
    return assemble(P, c, sol->first, norm);
}

std::optional<MultiplierPair> second_order_multipliers(const ProblemDef& P, const Vec& x, const DirectionAnalysis& d,
                                                       Normalization norm, Eq4Mode mode, double tol) {
    if (!d.is_critical) throw NotCritical("direction is not critical at the point");
    const ActiveSet act = active_set(P, x, tol);
    const Vec& dir = d.direction;

    const bool strict = mode == Eq4Mode::Strict4;
    Columns c = make_columns(P.jacobian_f(x), P.jacobian_g(x), strict ? d.I : iota(P.n()),
                             strict ? d.J : act.indices);
    c.second.resize(c.k());
    for (Eigen::Index col = 0; col < c.k(); ++col) {
        const Expr& e = col < c.nl() ? P.objectives[static_cast<std::size_t>(c.lambda_idx[static_cast<std::size_t>(col)])]
                                     : P.constraints[static_cast<std::size_t>(c.mu_idx[static_cast<std::size_t>(col - c.nl())])];
        c.second[col] = second_derivative(e, x, dir);
    }

    // Stage 1 finds the best curvature margin; stage 2 keeps half of it and
    // minimizes the stationarity residual.
    const double eps = tol * c.scale();
    const auto best = max_curvature(c, norm, eps);
    if (!best || best->second < kCurvatureFloor) return std::nullopt;
    const double t = best->second;
    const auto refined = min_residual(c, norm, t > 0.0 ? 0.5 * t : t);
    const Vec& w = refined && refined->second <= eps ? refined->first : best->first;

    MultiplierPair mp = assemble(P, c, w, norm);
    mp.curvature = c.second.dot(w);
    const Vec fprod = P.jacobian_f(x) * dir;
    const Mat Jg = P.jacobian_g(x);
    mp.eq4_holds = true;
    for (Eigen::Index i = 0; i < P.n(); ++i)
        if (std::abs(mp.lambda[i] * fprod[i]) > tol) mp.eq4_holds = false;
    for (int j : act.indices)
        if (std::abs(mp.mu[j] * Jg.row(j).dot(dir)) > tol) mp.eq4_holds = false;
    return mp;
}

StationarityVerdict classify_point(const ProblemDef& P, const Vec& x, const ClassifyOptions& opt) {
    StationarityVerdict v;
    active_set(P, x, opt.tol);
    v.first_order = first_order_kt(P, x, opt.tol, opt.normalization);
    if (!v.first_order) return v;
    bool all = true;
    for (auto& d : sample_critical_directions(P, x, opt.directions, opt.seed, opt.tol)) {
        DirectionResult r;
        try {
            r.multipliers = second_order_multipliers(P, x, d, opt.normalization, opt.mode, opt.tol);
        } catch (const MissingSecondDerivative&) {
            r.missing_second_derivative = true;
        }
        if (!r.missing_second_derivative) {
            ++v.directions_tested;
            all = all && r.multipliers.has_value();
        }
        r.direction = std::move(d);
        v.directions.push_back(std::move(r));
    }
    v.level = all ? StationarityLevel::SecondOrderKT : StationarityLevel::FirstOrderOnly;
    return v;
}

PrimalVerdict primal_necessary(const ProblemDef& P, const Vec& x, const DirectionAnalysis& d) {
    if (!d.is_critical) throw NotCritical("direction is not critical at the point");
    PrimalVerdict pv;
    pv.I = d.I;
    pv.J = d.J;
    const Eigen::Index p = static_cast<Eigen::Index>(d.I.size() + d.J.size());
    if (p == 0) return pv;

    AlternativeBlocks blk;
    blk.A.resize(P.s(), p);
    blk.C.resize(1, p);
    Eigen::Index col = 0;
    for (int i : d.I) {
        const Expr& e = P.objectives[static_cast<std::size_t>(i)];
        blk.A.col(col) = grad(e, x);
        blk.C(0, col++) = second_derivative(e, x, d.direction);
    }
    for (int j : d.J) {
        const Expr& e = P.constraints[static_cast<std::size_t>(j)];
        blk.A.col(col) = grad(e, x);
        blk.C(0, col++) = second_derivative(e, x, d.direction);
    }

    const auto cert = decide_alternative(blk);
    pv.certificate = cert;
    if (cert.variant == AlternativeVariant::Sys8) {
        pv.status = PrimalStatus::Inconsistent;
        return pv;
    }
    pv.status = PrimalStatus::Consistent;
    const double u = cert.second[0];
    const Vec hpp = blk.C.row(0).transpose();
    auto worst = [&](const Vec& z) { return (blk.A.transpose() * z + hpp).maxCoeff(); };
    Vec z = u > 1e-12 ? Vec(cert.first / u)
                      : Vec(cert.first * (2.0 * (1.0 + std::max(0.0, hpp.maxCoeff())) / cert.margin));
    for (int k = 0; k < 60 && !(worst(z) < 0.0); ++k) z *= 2.0;
    if (!(worst(z) < 0.0)) throw NumericalBreakdown("could not scale the alternative witness");
    pv.witness = z;
    return pv;
}

namespace {

// Gauss-Newton on the KT system with the constraints in E held active.
// Unknowns (x, λ, μ_E); equations ∇L = 0, Σλ = 1, g_E(x) = 0. The system is
// underdetermined for n > 1, so each step is the minimum-norm one.
std::optional<Vec> polish(const ProblemDef& P, Vec x, const KtResidual& start, const std::vector<int>& support) {
    std::vector<int> E;
    for (int j : support)
        if (start.mu[j] > 1e-12) E.push_back(j);
    const Eigen::Index s = P.s(), n = P.n(), e = static_cast<Eigen::Index>(E.size());
    Vec lambda = start.lambda, mu(e);
    for (Eigen::Index k = 0; k < e; ++k) mu[k] = start.mu[E[static_cast<std::size_t>(k)]];

    auto residual = [&](const Vec& xx, const Vec& lam, const Vec& mm) {
        Vec F(s + 1 + e);
        const Mat Jf = P.jacobian_f(xx);
        F.head(s) = Jf.transpose() * lam;
        for (Eigen::Index k = 0; k < e; ++k) {
            const Expr& g = P.constraints[static_cast<std::size_t>(E[static_cast<std::size_t>(k)])];
            F.head(s) += mm[k] * grad(g, xx);
            F[s + 1 + k] = eval(g, xx);
        }
        F[s] = lam.sum() - 1.0;
        return F;
    };

    try {
        Vec F = residual(x, lambda, mu);
        for (int iter = 0; iter < 60 && F.norm() > 1e-14 * start.scale; ++iter) {
            Mat J = Mat::Zero(s + 1 + e, s + n + e);
            Mat H = Mat::Zero(s, s);
            const Mat Jf = P.jacobian_f(x);
            for (Eigen::Index i = 0; i < n; ++i)
                if (lambda[i] != 0.0) H += lambda[i] * hessian(P.objectives[static_cast<std::size_t>(i)], x);
            for (Eigen::Index k = 0; k < e; ++k) {
                const Expr& g = P.constraints[static_cast<std::size_t>(E[static_cast<std::size_t>(k)])];
                const Vec gg = grad(g, x);
                if (mu[k] != 0.0) H += mu[k] * hessian(g, x);
                J.block(0, s + n + k, s, 1) = gg;
                J.block(s + 1 + k, 0, 1, s) = gg.transpose();
            }
            J.topLeftCorner(s, s) = H;
            J.block(0, s, s, n) = Jf.transpose();
            J.block(s, s, 1, n).setOnes();
            const Vec step = -J.completeOrthogonalDecomposition().solve(F);

            bool accepted = false;
            for (double alpha = 1.0; alpha > 1e-9; alpha *= 0.5) {
                const Vec xn = x + alpha * step.head(s);
                if (!P.in_box(xn)) continue;
                const Vec ln = (lambda + alpha * step.segment(s, n)).cwiseMax(0.0);
                const Vec mn = (mu + alpha * step.tail(e)).cwiseMax(0.0);
                const Vec Fn = residual(xn, ln, mn);
                if (Fn.norm() < F.norm()) {
                    x = xn;
                    lambda = ln;
                    mu = mn;
                    F = Fn;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;
        }
    } catch (const DomainError&) {
        return std::nullopt;
    }
    return x;
}

// Lexicographic on a 1e-9 lattice, so rounding noise in a leading
// coordinate does not scramble points of a segment.
bool lex_less(const Vec& a, const Vec& b) {
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        const double ka = std::round(a[k] * 1e9), kb = std::round(b[k] * 1e9);
        if (ka != kb) return ka < kb;
    }
    return false;
}

}  // namespace

ScanResult scan_kt_points(const ProblemDef& P, const ScanOptions& opt) {
    ScanResult res;
    res.grid_per_axis = Grid::points_per_axis(opt.grid, P.s());
    const Grid grid(P.lo, P.hi, res.grid_per_axis);
    const std::int64_t N = grid.size();

    double h = 0.0;
    for (Eigen::Index k = 0; k < P.s(); ++k) h = std::max(h, grid.spacing(k));
    const double reach = h * std::sqrt(static_cast<double>(P.s()));

    // Residual on feasible nodes, with constraints within one cell of the
    // boundary allowed to carry multipliers.
    std::vector<double> rho(static_cast<std::size_t>(N), kInf);
    const auto all_f = iota(P.n());
    for (std::int64_t flat = 0; flat < N; ++flat) {
        const Vec x = grid.point(flat);
        try {
            const Vec g = P.g(x);
            if (P.m() > 0 && g.maxCoeff() > opt.tol) continue;
            ++res.feasible_nodes;
            const Mat Jg = P.jacobian_g(x);
            std::vector<int> band;
            for (Eigen::Index j = 0; j < P.m(); ++j)
                if (g[j] >= -opt.tol - reach * Jg.row(j).norm()) band.push_back(static_cast<int>(j));
            const Columns c = make_columns(P.jacobian_f(x), Jg, all_f, band);
            const auto sol = min_residual(c, Normalization::SumLambdaOne);
            if (sol) rho[static_cast<std::size_t>(flat)] = sol->second / c.scale();
        } catch (const DomainError&) {
        }
    }

    std::vector<std::int64_t> exact, minima;
    for (std::int64_t flat = 0; flat < N; ++flat) {
        const double r = rho[static_cast<std::size_t>(flat)];
        if (!std::isfinite(r)) continue;
        if (r <= opt.tol) {
            exact.push_back(flat);
            continue;
        }
        bool is_min = true;
        for (auto nb : grid.neighbours(flat))
            if (rho[static_cast<std::size_t>(nb)] < r) {
                is_min = false;
                break;
            }
        if (is_min) minima.push_back(flat);
    }
    std::stable_sort(minima.begin(), minima.end(), [&](std::int64_t a, std::int64_t b) {
        return rho[static_cast<std::size_t>(a)] < rho[static_cast<std::size_t>(b)];
    });
    if (minima.size() > 128) minima.resize(128);

    std::vector<std::pair<Vec, bool>> found;
    auto accept = [&](const Vec& x, bool polished) {
        for (const auto& [y, _] : found)
            if ((y - x).norm() <= 1e-5) return;
        found.emplace_back(x, polished);
    };

    // Exactly stationary nodes; a continuum is subsampled evenly.
    // Nodes stationary only with a near-active constraint go to the polish queue.
    std::vector<std::int64_t> exact_kt, near;
    for (auto flat : exact) {
        try {
            if (first_order_kt(P, grid.point(flat), opt.tol)) {
                exact_kt.push_back(flat);
                continue;
            }
        } catch (const Error&) {
        }
        near.push_back(flat);
    }
    minima.insert(minima.begin(), near.begin(), near.end());
    if (minima.size() > 128) minima.resize(128);
    const std::size_t cap = static_cast<std::size_t>(std::max(opt.max_points, 1));
    if (exact_kt.size() > cap) {
        std::vector<std::int64_t> pick;
        for (std::size_t k = 0; k < cap; ++k) pick.push_back(exact_kt[k * (exact_kt.size() - 1) / std::max<std::size_t>(cap - 1, 1)]);
        exact_kt = std::move(pick);
    }
    for (auto flat : exact_kt) accept(grid.point(flat), false);

    for (auto flat : minima) {
        if (found.size() >= cap) break;
        const Vec x0 = grid.point(flat);
        const Vec g = P.g(x0);
        const Mat Jg = P.jacobian_g(x0);
        std::vector<int> band;
        for (Eigen::Index j = 0; j < P.m(); ++j)
            if (g[j] >= -opt.tol - reach * Jg.row(j).norm()) band.push_back(static_cast<int>(j));
        const KtResidual start = kt_residual(P, x0, band);
        ++res.polished_candidates;
        const auto x = polish(P, x0, start, band);
        if (!x) continue;
        try {
            if (first_order_kt(P, *x, opt.tol)) accept(*x, true);
        } catch (const Error&) {
        }
    }

    std::stable_sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return lex_less(a.first, b.first); });
    ClassifyOptions co;
    co.directions = opt.directions;
    co.seed = opt.seed;
    co.tol = opt.tol;
    for (auto& [x, polished] : found) res.points.push_back({x, classify_point(P, x, co), polished});
    return res;
}

const char* to_string(StationarityLevel level) {
    switch (level) {
        case StationarityLevel::NotStationary: return "NotStationary";
        case StationarityLevel::FirstOrderOnly: return "FirstOrderOnly";
        case StationarityLevel::SecondOrderKT: return "SecondOrderKT";
    }
    return "?";
}

const char* to_string(Normalization n) {
    return n == Normalization::SumLambdaOne ? "SumLambdaOne" : "FritzJohn";
}

const char* to_string(Eq4Mode m) { return m == Eq4Mode::Plain ? "Plain" : "Strict4"; }

const char* to_string(PrimalStatus s) {
    switch (s) {
        case PrimalStatus::Inconsistent: return "Inconsistent";
        case PrimalStatus::Consistent: return "Consistent";
        case PrimalStatus::EmptyIndexSets: return "EmptyIndexSets";
    }
    return "?";
}

}  // namespace vopt
