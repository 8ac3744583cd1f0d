#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vopt/errors.hpp"
#include "vopt/linprog.hpp"

namespace vopt {

namespace {

Eigen::Index pick(Eigen::Index a, Eigen::Index b) { return a > 0 ? a : b; }

double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }
double max_abs(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Product Mᵀv where M may be an empty placeholder block.
Vec tmul(const Mat& M, const Vec& v, Eigen::Index out_dim) {
    if (M.size() == 0) return Vec::Zero(out_dim);
    return M.transpose() * v;
}

Vec mul(const Mat& M, const Vec& v, Eigen::Index out_dim) {
    if (M.size() == 0) return Vec::Zero(out_dim);
    return M * v;
}

}  // namespace

Eigen::Index AlternativeBlocks::s() const { return pick(A.rows(), B.rows()); }
Eigen::Index AlternativeBlocks::p() const { return pick(A.cols(), C.cols()); }
Eigen::Index AlternativeBlocks::q() const { return pick(C.rows(), D.rows()); }
Eigen::Index AlternativeBlocks::r() const { return pick(B.cols(), D.cols()); }

void AlternativeBlocks::validate() const {
    auto check = [](const Mat& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
        if (m.size() == 0) return;
        if (m.rows() != rows || m.cols() != cols)
            throw std::invalid_argument(std::string("alternative block ") + name + " has inconsistent shape");
    };
    check(A, s(), p(), "A");
    check(B, s(), r(), "B");
    check(C, q(), p(), "C");
    check(D, q(), r(), "D");
}

AlternativeCertificate decide_alternative(const AlternativeBlocks& blk) {
    blk.validate();
    const Eigen::Index s = blk.s(), p = blk.p(), q = blk.q(), r = blk.r();

    // Variables: x (s, free), u (q, >= 0), v (free). Maximize v subject to
    //   Aᵀx + Cᵀu + v·e <= 0,  Bᵀx + Dᵀu <= 0,  v <= 1.
    const Eigen::Index nv = s + q + 1;
    LpProblem lp = LpProblem::with_vars(nv, ObjectiveSense::Maximize);
    for (Eigen::Index j = 0; j < s; ++j) lp.set_free(j);
    lp.set_free(s + q);
    lp.objective[s + q] = 1.0;
    for (Eigen::Index k = 0; k < p; ++k) {
        Vec row = Vec::Zero(nv);
        if (blk.A.size()) row.head(s) = blk.A.col(k);
        if (blk.C.size()) row.segment(s, q) = blk.C.col(k);
        row[s + q] = 1.0;
        lp.add_row(row, RowSense::LessEqual, 0.0);
    }
    for (Eigen::Index l = 0; l < r; ++l) {
        Vec row = Vec::Zero(nv);
        if (blk.B.size()) row.head(s) = blk.B.col(l);
        if (blk.D.size()) row.segment(s, q) = blk.D.col(l);
        lp.add_row(row, RowSense::LessEqual, 0.0);
    }
    Vec cap = Vec::Zero(nv);
    cap[s + q] = 1.0;
    lp.add_row(cap, RowSense::LessEqual, 1.0);

    const LpOutcome out = solve_lp(lp);
    if (out.status != LpStatus::Optimal)
        throw NumericalBreakdown("alternative LP did not reach an optimum");

    AlternativeCertificate cert;
    cert.margin = out.objective;
    if (out.objective > kStrictMargin) {
        cert.variant = AlternativeVariant::Sys7;
        cert.first = out.primal.head(s);
        cert.second = out.primal.segment(s, q).cwiseMax(0.0);
        return cert;
    }
    cert.variant = AlternativeVariant::Sys8;
    cert.first = out.dual.head(p).cwiseMax(0.0);
    cert.second = out.dual.segment(p, r).cwiseMax(0.0);
    // Sys8 is homogeneous; scale so the largest y entry is 1.
    if (const double top = cert.first.size() ? cert.first.maxCoeff() : 0.0; top > 0.0) {
        cert.first /= top;
        cert.second /= top;
    }
    return cert;
}

bool verify_certificate(const AlternativeCertificate& c, const AlternativeBlocks& blk) {
    blk.validate();
    const Eigen::Index s = blk.s(), p = blk.p(), q = blk.q(), r = blk.r();
    const double data = std::max({1.0, max_abs(blk.A), max_abs(blk.B), max_abs(blk.C), max_abs(blk.D)});
    if (c.variant == AlternativeVariant::Sys7) {
        if (c.first.size() != s || c.second.size() != q) return false;
        if (q > 0 && c.second.minCoeff() < 0.0) return false;
        const double tol = 1e-9 * data * std::max({1.0, max_abs(c.first), max_abs(c.second)});
        const Vec strict = tmul(blk.A, c.first, p) + tmul(blk.C, c.second, p);
        const Vec weak = tmul(blk.B, c.first, r) + tmul(blk.D, c.second, r);
        if (p > 0 && strict.maxCoeff() > -kStrictMargin) return false;
        if (r > 0 && weak.maxCoeff() > tol) return false;
        return true;
    }
    if (c.first.size() != p || c.second.size() != r) return false;
    if (p == 0) return false;
    if (c.first.minCoeff() < 0.0 || (r > 0 && c.second.minCoeff() < 0.0)) return false;
    const double wscale = std::max({max_abs(c.first), max_abs(c.second)});
    if (!(c.first.maxCoeff() > 1e-9 * std::max(1.0, wscale))) return false;  // y ≠ 0
    const double tol = 1e-9 * data * std::max(1.0, wscale);
    const Vec eq = mul(blk.A, c.first, s) + mul(blk.B, c.second, s);
    const Vec ge = mul(blk.C, c.first, q) + mul(blk.D, c.second, q);
    if (s > 0 && max_abs(eq) > tol) return false;
    if (q > 0 && ge.minCoeff() < -tol) return false;
    return true;
}

}  // namespace vopt
