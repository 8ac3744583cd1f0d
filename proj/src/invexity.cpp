#include "vopt/invexity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/SVD>

#include "vopt/errors.hpp"
#include "vopt/linprog.hpp"

namespace vopt {

namespace {

constexpr int kMaxVertexColumns = 12;

double gradient_scale(const Mat& Jf, const Mat& Jg) {
    double s = Jf.size() ? Jf.cwiseAbs().maxCoeff() : 0.0;
    if (Jg.size()) s = std::max(s, Jg.cwiseAbs().maxCoeff());
    return 1.0 + s;
}

double second_derivative(const Expr& e, const Vec& x, const Vec& d) {
    try {
        return second_dir_deriv(e, x, d);
    } catch (const DomainError& err) {
        throw MissingSecondDerivative(std::string("second directional derivative unavailable: ") + err.what());
    }
}

bool feasible(const ProblemDef& P, const Vec& x, double tol) {
    return P.in_box(x) && (P.m() == 0 || P.g(x).maxCoeff() <= tol);
}

// Stationarity, sign and complementarity of (λ,μ) at x from raw gradients.
bool multipliers_valid(const ProblemDef& P, const Vec& x, const Vec& lambda, const Vec& mu, double tol) {
    if (lambda.size() != P.n() || mu.size() != P.m()) return false;
    if (!lambda.allFinite() || lambda.minCoeff() < 0.0 || std::abs(lambda.sum() - 1.0) > 1e-9) return false;
    const Mat Jf = P.jacobian_f(x);
    const Mat Jg = P.jacobian_g(x);
    const double scale = gradient_scale(Jf, Jg);
    Vec r = Jf.transpose() * lambda;
    if (P.m() > 0) {
        if (!mu.allFinite() || mu.minCoeff() < 0.0) return false;
        r += Jg.transpose() * mu;
        const Vec g = P.g(x);
        for (Eigen::Index j = 0; j < P.m(); ++j)
            if (g[j] > tol || mu[j] * std::abs(g[j]) > tol * scale) return false;
    }
    return r.cwiseAbs().maxCoeff() <= 10.0 * tol * scale;
}

Vec uniform_in_box(const ProblemDef& P, std::mt19937_64& rng) {
    Vec x(P.s());
    for (Eigen::Index k = 0; k < P.s(); ++k) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        x[k] = P.lo[k] + (P.hi[k] - P.lo[k]) * u;
    }
    return x;
}

// ⟨λ,f(x)−f(y)⟩ less the first-order gain y can draw from constraint slack
// within the feasibility tolerance.
double weighting_gap(const ProblemDef& P, const Vec& lambda, const Vec& mu, const Vec& x, const Vec& y) {
    double gap = lambda.dot(P.f(x) - P.f(y));
    if (P.m() > 0) gap -= mu.dot(P.g(y).cwiseMax(0.0));
    return gap;
}

WitnessBundle make_bundle(const ProblemDef& P, WitnessKind kind, const KtPoint& pt, const Vec& y) {
    WitnessBundle w;
    w.kind = kind;
    w.x = pt.x;
    w.y = y;
    w.fx = P.f(pt.x);
    w.fy = P.f(y);
    w.gy = P.g(y);
    w.level = pt.verdict.level;
    return w;
}

}  // namespace

bool is_second_order(InvexityClass c) {
    switch (c) {
        case InvexityClass::SecondOrderKTSPInvex:
        case InvexityClass::SecondOrderKTPseudoinvexI:
        case InvexityClass::SecondOrderKTPseudoinvexII:
        case InvexityClass::SecondOrderKTInvex:
            return true;
        default:
            return false;
    }
}

InvexityClass counterpart(InvexityClass c) {
    switch (c) {
        case InvexityClass::KTSPInvex: return InvexityClass::SecondOrderKTSPInvex;
        case InvexityClass::SecondOrderKTSPInvex: return InvexityClass::KTSPInvex;
        case InvexityClass::KTPseudoinvexI: return InvexityClass::SecondOrderKTPseudoinvexI;
        case InvexityClass::SecondOrderKTPseudoinvexI: return InvexityClass::KTPseudoinvexI;
        case InvexityClass::KTPseudoinvexII: return InvexityClass::SecondOrderKTPseudoinvexII;
        case InvexityClass::SecondOrderKTPseudoinvexII: return InvexityClass::KTPseudoinvexII;
        case InvexityClass::KTInvex: return InvexityClass::SecondOrderKTInvex;
        case InvexityClass::SecondOrderKTInvex: return InvexityClass::KTInvex;
    }
    return c;
}

bool verify_witness(const ProblemDef& P, const WitnessBundle& w, double tol) {
    if (w.x.size() != P.s() || w.y.size() != P.s()) return false;
    if (P.m() > 0 && P.g(w.x).maxCoeff() > tol) return false;
    const Vec fx = P.f(w.x);
    const Vec fy = P.f(w.y);
    const Vec d = fx - fy;
    switch (w.kind) {
        case WitnessKind::WeakDomination:
            return feasible(P, w.y, tol) && d.minCoeff() > kDominationMargin;
        case WitnessKind::Domination:
            return feasible(P, w.y, tol) && d.minCoeff() >= -kDominationMargin && d.maxCoeff() > kDominationMargin;
        case WitnessKind::SaddleViolation:
            return P.in_box(w.y) && multipliers_valid(P, w.x, w.lambda, w.mu, tol) &&
                   lagrangian(P, w.lambda, w.mu, w.x) - lagrangian(P, w.lambda, w.mu, w.y) > kSaddleGap;
        case WitnessKind::WeightingViolation:
            return feasible(P, w.y, tol) && multipliers_valid(P, w.x, w.lambda, w.mu, tol) &&
                   weighting_gap(P, w.lambda, w.mu, w.x, w.y) > kSaddleGap;
    }
    return false;
}

std::vector<std::pair<Vec, Vec>> multiplier_vertices(const ProblemDef& P, const Vec& x, double tol) {
    const ActiveSet as = active_set(P, x, tol);
    const Mat Jf = P.jacobian_f(x);
    const Mat Jg = P.jacobian_g(x);
    const double scale = gradient_scale(Jf, Jg);
    const Eigen::Index n = P.n(), s = P.s();
    const auto na = static_cast<Eigen::Index>(as.indices.size());
    const Eigen::Index k = n + na;

    // Columns: ∇f_i, then active ∇g_j, each with a trailing normalization entry.
    Mat M(s + 1, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        M.col(i).head(s) = Jf.row(i).transpose();
        M(s, i) = 1.0;
    }
    for (Eigen::Index a = 0; a < na; ++a) {
        M.col(n + a).head(s) = Jg.row(as.indices[static_cast<std::size_t>(a)]).transpose();
        M(s, n + a) = 0.0;
    }
    Vec rhs = Vec::Zero(s + 1);
    rhs[s] = 1.0;

    std::vector<std::pair<Vec, Vec>> out;
    auto push = [&](const Vec& lambda, const Vec& mu) {
        for (const auto& [l, m] : out)
            if ((l - lambda).cwiseAbs().maxCoeff() <= 1e-9 && (m - mu).cwiseAbs().maxCoeff() <= 1e-9) return;
        out.emplace_back(lambda, mu);
    };

    if (k <= kMaxVertexColumns) {
        const Eigen::Index max_size = std::min(k, s + 1);
        for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
            const auto size = static_cast<Eigen::Index>(__builtin_popcount(mask));
            if (size > max_size) continue;
            std::vector<Eigen::Index> cols;
            for (Eigen::Index c = 0; c < k; ++c)
                if (mask & (1u << c)) cols.push_back(c);
            if (cols.front() >= n) continue;  // λ ≠ 0 is forced by Σλ = 1
            Mat S(s + 1, size);
            for (Eigen::Index c = 0; c < size; ++c) S.col(c) = M.col(cols[static_cast<std::size_t>(c)]);
            Eigen::JacobiSVD<Mat> svd(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
            const auto& sv = svd.singularValues();
            if (sv[size - 1] <= 1e-10 * std::max(1.0, sv[0])) continue;
            const Vec w = svd.solve(rhs);
            if (!w.allFinite() || w.minCoeff() < -1e-12) continue;
            const Vec r = S * w - rhs;
            if (r.head(s).cwiseAbs().maxCoeff() > 10.0 * tol * scale || std::abs(r[s]) > 1e-9) continue;
            Vec lambda = Vec::Zero(n), mu = Vec::Zero(P.m());
            for (Eigen::Index c = 0; c < size; ++c) {
                const Eigen::Index col = cols[static_cast<std::size_t>(c)];
                const double v = std::max(w[c], 0.0);
                if (col < n)
                    lambda[col] = v;
                else
                    mu[as.indices[static_cast<std::size_t>(col - n)]] = v;
            }
            const double sum = lambda.sum();
            if (!(sum > 0.0)) continue;
            push(lambda / sum, mu / sum);
        }
    }
    if (out.empty())
        if (const auto mp = first_order_kt(P, x, tol)) push(mp->lambda, mp->mu);
    return out;
}

EtaResult pointwise_eta_feasibility(const ProblemDef& P, const Vec& x, const Vec& y, const DirectionAnalysis& d,
                                    EtaOrder order, double tol) {
    const ActiveSet as = active_set(P, x, tol);
    const bool second = order == EtaOrder::Second;
    if (second && !d.is_critical) throw NotCritical("direction is not critical at the base point");
    const Eigen::Index n = P.n(), s = P.s();
    const auto na = static_cast<Eigen::Index>(as.indices.size());
    const Mat Jf = P.jacobian_f(x);
    const Mat Jg = P.jacobian_g(x);
    Mat JgA(na, s);
    Vec hf = Vec::Zero(n), hg = Vec::Zero(na);
    for (Eigen::Index a = 0; a < na; ++a) JgA.row(a) = Jg.row(as.indices[static_cast<std::size_t>(a)]);
    if (second) {
        for (Eigen::Index i = 0; i < n; ++i)
            hf[i] = second_derivative(P.objectives[static_cast<std::size_t>(i)], x, d.direction);
        for (Eigen::Index a = 0; a < na; ++a)
            hg[a] = second_derivative(P.constraints[static_cast<std::size_t>(as.indices[static_cast<std::size_t>(a)])],
                                      x, d.direction);
    }
    const Vec rf = P.f(y) - P.f(x);
    Vec rg(na);
    if (na > 0) {
        const Vec gy = P.g(y);
        for (Eigen::Index a = 0; a < na; ++a) rg[a] = gy[as.indices[static_cast<std::size_t>(a)]];
    }
    double rmax = rf.cwiseAbs().maxCoeff();
    if (na > 0) rmax = std::max(rmax, rg.cwiseAbs().maxCoeff());
    const double margin = 1e-9 * (1.0 + rmax);
    EtaResult res;

    // First system: max v s.t. ∇f η + ω f'' + v ≤ f(y) − f(x), ∇g_A η + ω g_A'' ≤ g_A(y), v ≤ 0.
    {
        const Eigen::Index nv = s + 2;  // η, ω, v
        LpProblem lp = LpProblem::with_vars(nv, ObjectiveSense::Maximize);
        for (Eigen::Index k = 0; k < s; ++k) lp.set_free(k);
        lp.set_free(s + 1);
        lp.objective[s + 1] = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Vec row = Vec::Zero(nv);
            row.head(s) = Jf.row(i).transpose();
            row[s] = hf[i];
            row[s + 1] = 1.0;
            lp.add_row(row, RowSense::LessEqual, rf[i]);
        }
        for (Eigen::Index a = 0; a < na; ++a) {
            Vec row = Vec::Zero(nv);
            row.head(s) = JgA.row(a).transpose();
            row[s] = hg[a];
            lp.add_row(row, RowSense::LessEqual, rg[a]);
        }
        Vec cap = Vec::Zero(nv);
        cap[s + 1] = 1.0;
        lp.add_row(cap, RowSense::LessEqual, 0.0);
        if (!second) {
            Vec fix = Vec::Zero(nv);
            fix[s] = 1.0;
            lp.add_row(fix, RowSense::Equal, 0.0);
        }
        const LpOutcome out = solve_lp(lp);
        if (out.status == LpStatus::Optimal && out.objective >= -margin) {
            res.witness = EtaWitness{1, out.primal.head(s), out.primal[s], out.objective};
            return res;
        }
    }

    // Second system: ∇f η + ω f'' < 0, ∇g_A η + ω g_A'' ≤ 0, ω ≥ 0.
    {
        AlternativeBlocks blk;
        blk.A = Jf.transpose();
        blk.B = JgA.transpose();
        if (second) {
            blk.C = hf.transpose();
            blk.D = hg.transpose();
        } else {
            blk.C = Mat(0, n);
            blk.D = Mat(0, na);
        }
        const AlternativeCertificate cert = decide_alternative(blk);
        if (cert.variant == AlternativeVariant::Sys7) {
            res.witness = EtaWitness{2, cert.first, second ? cert.second[0] : 0.0, cert.margin};
            return res;
        }
    }

    // Refutation: min ⟨λ,f(y)−f(x)⟩ + ⟨μ,g_A(y)⟩ over stationary normalized
    // multipliers (with L''(x,d) ≥ 0 for Second).
    const double scale = gradient_scale(Jf, Jg);
    const Eigen::Index nv = n + na;
    LpProblem lp = LpProblem::with_vars(nv, ObjectiveSense::Minimize);
    lp.objective.head(n) = rf;
    lp.objective.tail(na) = rg;
    for (Eigen::Index k = 0; k < s; ++k) {
        Vec row(nv);
        row.head(n) = Jf.col(k);
        row.tail(na) = JgA.col(k);
        lp.add_row(row, RowSense::LessEqual, tol * scale);
        lp.add_row(row, RowSense::GreaterEqual, -tol * scale);
    }
    if (second) {
        Vec row(nv);
        row.head(n) = hf;
        row.tail(na) = hg;
        lp.add_row(row, RowSense::GreaterEqual, 0.0);
    }
    Vec norm = Vec::Zero(nv);
    norm.head(n).setOnes();
    lp.add_row(norm, RowSense::Equal, 1.0);
    if (na > 0) {
        Vec cap = Vec::Zero(nv);
        cap.tail(na).setOnes();
        lp.add_row(cap, RowSense::LessEqual, 1e6);
    }
    const LpOutcome out = solve_lp(lp);
    if (out.status != LpStatus::Optimal || !(out.objective < -margin))
        throw NumericalBreakdown("KTSP systems undecided: neither system solvable but no refuting multipliers");
    EtaRefutation ref;
    ref.lambda = out.primal.head(n).cwiseMax(0.0);
    ref.mu = Vec::Zero(P.m());
    for (Eigen::Index a = 0; a < na; ++a)
        ref.mu[as.indices[static_cast<std::size_t>(a)]] = std::max(out.primal[n + a], 0.0);
    ref.value = rf.dot(out.primal.head(n)) + rg.dot(out.primal.tail(na));
    res.refutation = ref;
    return res;
}

InvexityContext::InvexityContext(const ProblemDef& P, const InvexityConfig& cfg) : P_(P), cfg_(cfg) {
    cache_ = std::make_unique<GridCache>(P_, cfg_.scan.grid);
    bool any = false;
    for (std::int64_t k = 0; k < cache_->size() && !any; ++k) any = cache_->feasible(k, cfg_.scan.tol);
    if (!any) throw NoFeasiblePointInBox();
    scan_ = scan_kt_points(P_, cfg_.scan);
}

ClassVerdict InvexityContext::check(InvexityClass cls) const {
    ClassVerdict v;
    v.cls = cls;
    const double tol = cfg_.scan.tol;
    const bool so = is_second_order(cls);

    std::vector<const KtPoint*> bases;
    for (const auto& pt : scan_.points) {
        if (pt.verdict.level == StationarityLevel::SecondOrderKT) ++v.resolution.second_order_points;
        if (!so || pt.verdict.level == StationarityLevel::SecondOrderKT) bases.push_back(&pt);
    }
    v.resolution.grid_per_axis = cache_->grid().per_axis();
    v.resolution.stationary_points = static_cast<int>(scan_.points.size());
    v.resolution.directions_per_point = cfg_.scan.directions;

    SearchConfig sc;
    sc.grid = cfg_.scan.grid;
    sc.tol = tol;

    auto falsify = [&](WitnessBundle w) {
        if (!verify_witness(P_, w, tol)) return false;
        v.status = VerdictStatus::Falsified;
        v.witness = std::move(w);
        return true;
    };

    switch (cls) {
        case InvexityClass::KTPseudoinvexI:
        case InvexityClass::SecondOrderKTPseudoinvexI:
            for (const KtPoint* pt : bases) {
                const Vec fx = P_.f(pt->x);
                if (const auto k = find_weak_dominator(*cache_, fx, tol, kDominationMargin)) {
                    WitnessBundle w = make_bundle(P_, WitnessKind::WeakDomination, *pt, cache_->grid().point(*k));
                    w.gap = (w.fx - w.fy).minCoeff();
                    if (falsify(std::move(w))) return v;
                }
            }
            return v;

        case InvexityClass::KTPseudoinvexII:
        case InvexityClass::SecondOrderKTPseudoinvexII:
            for (const KtPoint* pt : bases) {
                const Vec fx = P_.f(pt->x);
                std::optional<std::int64_t> best;
                double best_gain = kDominationMargin;
                for (std::int64_t k = 0; k < cache_->size(); ++k) {
                    if (!cache_->feasible(k, tol)) continue;
                    const Vec d = fx - cache_->f(k).transpose();
                    if (d.minCoeff() < -kDominationMargin) continue;
                    if (d.maxCoeff() > best_gain) {
                        best_gain = d.maxCoeff();
                        best = k;
                    }
                }
                if (best) {
                    WitnessBundle w = make_bundle(P_, WitnessKind::Domination, *pt, cache_->grid().point(*best));
                    w.gap = (w.fx - w.fy).maxCoeff();
                    if (falsify(std::move(w))) return v;
                }
            }
            return v;

        case InvexityClass::KTInvex:
        case InvexityClass::SecondOrderKTInvex:
            for (const KtPoint* pt : bases) {
                const auto verts = multiplier_vertices(P_, pt->x, tol);
                v.resolution.multiplier_candidates += static_cast<int>(verts.size());
                for (const auto& [lambda, mu] : verts) {
                    const MinimizerSet ms = solve_weighting(P_, *cache_, lambda, sc);
                    const Vec& y = ms.clusters.front().point;
                    const double gap = weighting_gap(P_, lambda, mu, pt->x, y);
                    if (gap <= kSaddleGap) continue;
                    WitnessBundle w = make_bundle(P_, WitnessKind::WeightingViolation, *pt, y);
                    w.lambda = lambda;
                    w.mu = mu;
                    w.gap = gap;
                    if (falsify(std::move(w))) return v;
                }
            }
            return v;

        case InvexityClass::KTSPInvex:
        case InvexityClass::SecondOrderKTSPInvex: {
            for (const KtPoint* pt : bases) {
                const auto verts = multiplier_vertices(P_, pt->x, tol);
                v.resolution.multiplier_candidates += static_cast<int>(verts.size());
                for (const auto& [lambda, mu] : verts) {
                    const SaddleVerdict sv = check_saddle(P_, *cache_, lambda, pt->x, mu, sc);
                    if (!sv.counterexample) continue;
                    WitnessBundle w = make_bundle(P_, WitnessKind::SaddleViolation, *pt, sv.x);
                    w.lambda = lambda;
                    w.mu = mu;
                    w.gap = sv.gap;
                    if (falsify(std::move(w))) return v;
                }
            }
            // Point-wise systems on sampled pairs, at d = 0 where the
            // multiplier set is largest.
            std::vector<Vec> others;
            for (const auto& pt : scan_.points) others.push_back(pt.x);
            std::mt19937_64 rng(cfg_.scan.seed);
            for (int k = 0; k < cfg_.pair_samples; ++k) others.push_back(uniform_in_box(P_, rng));
            const EtaOrder order = so ? EtaOrder::Second : EtaOrder::First;
            const std::size_t nb = std::min(bases.size(), static_cast<std::size_t>(std::max(cfg_.max_bases, 0)));
            for (std::size_t b = 0; b < nb; ++b) {
                const KtPoint& pt = *bases[b];
                const DirectionAnalysis zero = analyze_direction(P_, pt.x, Vec::Zero(P_.s()), tol);
                for (const Vec& y : others) {
                    EtaResult r;
                    try {
                        ++v.resolution.pair_samples;
                        r = pointwise_eta_feasibility(P_, pt.x, y, zero, order, tol);
                    } catch (const DomainError&) {
                        continue;
                    }
                    if (!r.refutation) continue;
                    WitnessBundle w = make_bundle(P_, WitnessKind::SaddleViolation, pt, y);
                    w.lambda = r.refutation->lambda;
                    w.mu = r.refutation->mu;
                    w.gap = -r.refutation->value;
                    w.from_pair_sample = true;
                    if (falsify(std::move(w))) return v;
                }
            }
            return v;
        }
    }
    return v;
}

ClassVerdict check_class(const ProblemDef& P, InvexityClass cls, const InvexityConfig& cfg) {
    return InvexityContext(P, cfg).check(cls);
}

InclusionReport inclusion_audit(const ProblemDef& P, const InvexityConfig& cfg) {
    return inclusion_audit(InvexityContext(P, cfg));
}

InclusionReport inclusion_audit(const InvexityContext& ctx) {
    InclusionReport rep;
    for (InvexityClass c : {InvexityClass::KTSPInvex, InvexityClass::KTPseudoinvexI, InvexityClass::KTPseudoinvexII,
                            InvexityClass::KTInvex}) {
        InclusionRow row;
        row.first = c;
        row.second = counterpart(c);
        row.first_status = ctx.check(row.first).status;
        row.second_status = ctx.check(row.second).status;
        row.violated = row.first_status == VerdictStatus::ConsistentAtResolution &&
                       row.second_status == VerdictStatus::Falsified;
        rep.any_violation = rep.any_violation || row.violated;
        rep.rows.push_back(row);
    }
    return rep;
}

namespace {

struct ClassName {
    InvexityClass cls;
    const char* display;
    const char* flag;
};

constexpr ClassName kNames[] = {
    {InvexityClass::KTSPInvex, "KTSPInvex", "ktsp-invex"},
    {InvexityClass::SecondOrderKTSPInvex, "SecondOrderKTSPInvex", "so-ktsp-invex"},
    {InvexityClass::KTPseudoinvexI, "KTPseudoinvexI", "kt-pseudoinvex-i"},
    {InvexityClass::KTPseudoinvexII, "KTPseudoinvexII", "kt-pseudoinvex-ii"},
    {InvexityClass::KTInvex, "KTInvex", "kt-invex"},
    {InvexityClass::SecondOrderKTPseudoinvexI, "SecondOrderKTPseudoinvexI", "so-kt-pseudoinvex-i"},
    {InvexityClass::SecondOrderKTPseudoinvexII, "SecondOrderKTPseudoinvexII", "so-kt-pseudoinvex-ii"},
    {InvexityClass::SecondOrderKTInvex, "SecondOrderKTInvex", "so-kt-invex"},
};

}  // namespace

const char* to_string(InvexityClass c) {
    for (const auto& n : kNames)
        if (n.cls == c) return n.display;
    return "?";
}

const char* to_string(VerdictStatus s) {
    return s == VerdictStatus::Falsified ? "Falsified" : "ConsistentAtResolution";
}

const char* to_string(WitnessKind k) {
    switch (k) {
        case WitnessKind::SaddleViolation: return "SaddleViolation";
        case WitnessKind::WeakDomination: return "WeakDomination";
        case WitnessKind::Domination: return "Domination";
        case WitnessKind::WeightingViolation: return "WeightingViolation";
    }
    return "?";
}

std::optional<InvexityClass> parse_class(std::string_view name) {
    std::string key(name);
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    const std::string prefix = "second-order-";
    if (key.rfind(prefix, 0) == 0) key = "so-" + key.substr(prefix.size());
    for (const auto& n : kNames) {
        std::string disp(n.display);
        std::transform(disp.begin(), disp.end(), disp.begin(), [](unsigned char c) { return std::tolower(c); });
        if (key == n.flag || key == disp) return n.cls;
    }
    return std::nullopt;
}

}  // namespace vopt
