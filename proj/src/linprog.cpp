#include "vopt/linprog.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "vopt/errors.hpp"

namespace vopt {

namespace {

constexpr double kPivotTol = 1e-9;     // preferred pivot magnitude
constexpr double kTinyPivot = 1e-12;   // below this an entry counts as zero
constexpr double kCostTol = 1e-11;     // reduced-cost optimality tolerance

/// Standard form: min cᵀx, Mx = b, x ≥ 0, b ≥ 0.
struct StandardForm {
    Mat M;
    Vec b;
    Vec c;
    std::vector<int> row_sign;            // +1 or -1 applied to each original row
    std::vector<Eigen::Index> pos_col;    // original var -> column of x⁺
    std::vector<Eigen::Index> neg_col;    // original var -> column of x⁻, or -1
    std::vector<Eigen::Index> initial_basis;  // per row: slack column or -1 (needs artificial)
};

StandardForm to_standard(const LpProblem& p) {
    const Eigen::Index m = p.matrix.rows();
    const Eigen::Index n = p.matrix.cols();
    StandardForm sf;
    sf.pos_col.resize(static_cast<std::size_t>(n));
    sf.neg_col.assign(static_cast<std::size_t>(n), -1);

    Eigen::Index cols = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        sf.pos_col[static_cast<std::size_t>(j)] = cols++;
        if (std::isinf(p.lower[j])) sf.neg_col[static_cast<std::size_t>(j)] = cols++;
    }
    Eigen::Index slack_cols = 0;
    for (auto s : p.senses)
        if (s != RowSense::Equal) ++slack_cols;

    sf.M = Mat::Zero(m, cols + slack_cols);
    sf.b = Vec::Zero(m);
    sf.c = Vec::Zero(cols + slack_cols);
    sf.row_sign.assign(static_cast<std::size_t>(m), 1);
    sf.initial_basis.assign(static_cast<std::size_t>(m), -1);

    const double obj_sign = p.sense == ObjectiveSense::Maximize ? -1.0 : 1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        sf.c[sf.pos_col[static_cast<std::size_t>(j)]] = obj_sign * p.objective[j];
        if (auto nc = sf.neg_col[static_cast<std::size_t>(j)]; nc >= 0) sf.c[nc] = -obj_sign * p.objective[j];
    }

    Eigen::Index slack = cols;
    for (Eigen::Index i = 0; i < m; ++i) {
        const int sign = p.rhs[i] < 0.0 ? -1 : 1;
        sf.row_sign[static_cast<std::size_t>(i)] = sign;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double a = sign * p.matrix(i, j);
            sf.M(i, sf.pos_col[static_cast<std::size_t>(j)]) = a;
            if (auto nc = sf.neg_col[static_cast<std::size_t>(j)]; nc >= 0) sf.M(i, nc) = -a;
        }
        sf.b[i] = sign * p.rhs[i];
        RowSense s = p.senses[static_cast<std::size_t>(i)];
        if (sign < 0 && s != RowSense::Equal)
            s = s == RowSense::LessEqual ? RowSense::GreaterEqual : RowSense::LessEqual;
        if (s == RowSense::LessEqual) {
            sf.M(i, slack) = 1.0;
            sf.initial_basis[static_cast<std::size_t>(i)] = slack;
            ++slack;
        } else if (s == RowSense::GreaterEqual) {
            sf.M(i, slack) = -1.0;
            ++slack;
        }
    }
    return sf;
}

/// Dense tableau: rows 0..m-1 are constraints, last column is the rhs,
/// `cost` holds reduced costs with the negated objective value at the end.
class Tableau {
public:
    Tableau(const Mat& M, const Vec& b, std::vector<Eigen::Index> basis)
        : T_(M.rows(), M.cols() + 1), cost_(M.cols() + 1), basis_(std::move(basis)) {
        T_.leftCols(M.cols()) = M;
        T_.col(M.cols()) = b;
        cost_.setZero();
        max_iter_ = 200 * (M.rows() + M.cols()) + 1000;
    }

    Eigen::Index rows() const { return T_.rows(); }
    Eigen::Index cols() const { return T_.cols() - 1; }
    const std::vector<Eigen::Index>& basis() const { return basis_; }
    double rhs(Eigen::Index i) const { return T_(i, cols()); }
    double entry(Eigen::Index i, Eigen::Index j) const { return T_(i, j); }
    double objective() const { return -cost_[cols()]; }

    /// Installs costs c over the structural columns and prices out the basis.
    void set_costs(const Vec& c) {
        cost_.setZero();
        cost_.head(c.size()) = c;
        for (Eigen::Index i = 0; i < rows(); ++i) {
            const double cb = cost_[basis_[static_cast<std::size_t>(i)]];
            if (cb != 0.0) cost_ -= cb * T_.row(i).transpose();
        }
    }

    void pivot(Eigen::Index r, Eigen::Index col) {
        T_.row(r) /= T_(r, col);
        for (Eigen::Index i = 0; i < rows(); ++i) {
            if (i == r) continue;
            const double f = T_(i, col);
            if (f != 0.0) T_.row(i) -= f * T_.row(r);
        }
        const double f = cost_[col];
        if (f != 0.0) cost_ -= f * T_.row(r).transpose();
        basis_[static_cast<std::size_t>(r)] = col;
    }

    void drop_row(Eigen::Index r) {
        Mat T(rows() - 1, T_.cols());
        T << T_.topRows(r), T_.bottomRows(rows() - r - 1);
        T_.swap(T);
        basis_.erase(basis_.begin() + r);
    }

    enum class Result { Optimal, Unbounded };

    /// Bland's rule: lowest-index improving column, ties in the ratio test
    /// broken by lowest basic index. `allowed` limits entering columns.
    Result run(Eigen::Index allowed) {
        for (long iter = 0;; ++iter) {
            if (iter > max_iter_) throw NumericalBreakdown("simplex iteration limit exceeded");
            bool any_candidate = false;
            bool tiny_only = false;
            Eigen::Index enter = -1, leave = -1;
            for (Eigen::Index j = 0; j < allowed; ++j) {
                if (!(cost_[j] < -kCostTol)) continue;
                any_candidate = true;
                Eigen::Index best_row = -1;
                double best_ratio = std::numeric_limits<double>::infinity();
                double col_max = 0.0;
                for (Eigen::Index i = 0; i < rows(); ++i) {
                    const double a = T_(i, j);
                    col_max = std::max(col_max, a);
                    if (a <= kPivotTol) continue;
                    const double ratio = std::max(0.0, rhs(i)) / a;
                    if (best_row < 0) {
                        best_ratio = ratio;
                        best_row = i;
                        continue;
                    }
                    const double slack = 1e-12 * (1.0 + best_ratio);
                    if (ratio < best_ratio - slack ||
                        (ratio <= best_ratio + slack &&
                         basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(best_row)])) {
                        best_ratio = ratio;
                        best_row = i;
                    }
                }
                if (best_row >= 0) {
                    enter = j;
                    leave = best_row;
                    break;
                }
                if (col_max <= kTinyPivot) return Result::Unbounded;
                tiny_only = true;  // only sub-threshold pivots here; try the next column
            }
            if (!any_candidate) return Result::Optimal;
            if (enter < 0) {
                if (tiny_only) throw NumericalBreakdown("only pivots below tolerance remain");
                return Result::Optimal;
            }
            pivot(leave, enter);
        }
    }

private:
    Mat T_;
    Vec cost_;
    std::vector<Eigen::Index> basis_;
    long max_iter_;
};

}  // namespace

LpProblem LpProblem::with_vars(Eigen::Index num_vars, ObjectiveSense sense) {
    LpProblem p;
    p.objective = Vec::Zero(num_vars);
    p.matrix = Mat::Zero(0, num_vars);
    p.rhs = Vec::Zero(0);
    p.lower = Vec::Zero(num_vars);
    p.sense = sense;
    return p;
}

Eigen::Index LpProblem::add_row(const Vec& coeffs, RowSense s, double b) {
    const Eigen::Index r = matrix.rows();
    matrix.conservativeResize(r + 1, Eigen::NoChange);
    matrix.row(r) = coeffs.transpose();
    rhs.conservativeResize(r + 1);
    rhs[r] = b;
    senses.push_back(s);
    return r;
}

LpOutcome solve_lp(const LpProblem& p) {
    const Eigen::Index m = p.matrix.rows();
    const Eigen::Index n = p.matrix.cols();
    if (p.objective.size() != n || p.rhs.size() != m || p.lower.size() != n ||
        static_cast<Eigen::Index>(p.senses.size()) != m)
        throw std::invalid_argument("LpProblem: inconsistent dimensions");
    for (Eigen::Index j = 0; j < n; ++j)
        if (!(p.lower[j] == 0.0 || (std::isinf(p.lower[j]) && p.lower[j] < 0)))
            throw std::invalid_argument("LpProblem: lower bounds must be 0 or -inf");
    if (!p.matrix.allFinite() || !p.rhs.allFinite() || !p.objective.allFinite())
        throw std::invalid_argument("LpProblem: non-finite data");

    const StandardForm sf = to_standard(p);
    const Eigen::Index ns = sf.M.cols();

    // Phase 1: artificials for rows without a slack in the basis.
    std::vector<Eigen::Index> basis = sf.initial_basis;
    Eigen::Index n_art = 0;
    for (auto b : basis)
        if (b < 0) ++n_art;
    Mat M1 = Mat::Zero(m, ns + n_art);
    M1.leftCols(ns) = sf.M;
    Eigen::Index art = ns;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (basis[static_cast<std::size_t>(i)] < 0) {
            M1(i, art) = 1.0;
            basis[static_cast<std::size_t>(i)] = art++;
        }
    }
    Tableau tab(M1, sf.b, basis);
    const double scale = 1.0 + (m > 0 ? sf.b.cwiseAbs().maxCoeff() : 0.0);
    if (n_art > 0) {
        Vec c1 = Vec::Zero(ns + n_art);
        c1.tail(n_art).setOnes();
        tab.set_costs(c1);
        tab.run(ns + n_art);
        if (tab.objective() > 1e-9 * scale) {
            LpOutcome out;
            out.status = LpStatus::Infeasible;
            return out;
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        for (Eigen::Index i = tab.rows() - 1; i >= 0; --i) {
            if (tab.basis()[static_cast<std::size_t>(i)] < ns) continue;
            Eigen::Index col = -1;
            double best = kPivotTol;
            for (Eigen::Index j = 0; j < ns; ++j) {
                if (std::abs(tab.entry(i, j)) > best) {
                    best = std::abs(tab.entry(i, j));
                    col = j;
                }
            }
            if (col >= 0) {
                tab.pivot(i, col);
            } else {
                tab.drop_row(i);
            }
        }
    }

    tab.set_costs(sf.c);
    LpOutcome out;
    if (tab.run(ns) == Tableau::Result::Unbounded) {
        out.status = LpStatus::Unbounded;
        return out;
    }

    Vec xs = Vec::Zero(ns);
    for (Eigen::Index i = 0; i < tab.rows(); ++i) {
        const Eigen::Index col = tab.basis()[static_cast<std::size_t>(i)];
        if (col < ns) xs[col] = std::max(0.0, tab.rhs(i));
    }
    out.status = LpStatus::Optimal;
    out.primal = Vec(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double v = xs[sf.pos_col[static_cast<std::size_t>(j)]];
        if (auto nc = sf.neg_col[static_cast<std::size_t>(j)]; nc >= 0) v -= xs[nc];
        out.primal[j] = v;
    }
    out.objective = p.objective.dot(out.primal);

    // Duals from the final basis: B_kᵀ w = c_B over the surviving rows.
    out.dual = Vec::Zero(m);
    if (tab.rows() > 0) {
        const Eigen::Index k = tab.rows();
        Mat Bt(m, k);
        Vec cB(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            const Eigen::Index col = tab.basis()[static_cast<std::size_t>(i)];
            Bt.col(i) = sf.M.col(col);
            cB[i] = sf.c[col];
        }
        Vec w;
        if (k == m) {
            w = Bt.transpose().fullPivLu().solve(cB);
        } else {
            // Redundant rows were dropped; the minimum-norm solution keeps
            // their multipliers consistent with the remaining rows.
            w = Bt.transpose().completeOrthogonalDecomposition().solve(cB);
        }
        const double obj_sign = p.sense == ObjectiveSense::Maximize ? -1.0 : 1.0;
        for (Eigen::Index i = 0; i < m; ++i) out.dual[i] = obj_sign * sf.row_sign[static_cast<std::size_t>(i)] * w[i];
    }
    return out;
}

}  // namespace vopt
