#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "vopt/autodiff.hpp"

namespace vopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Op { Const, Var, Neg, Sin, Cos, Exp, Log, Sqrt, Abs, Add, Sub, Mul, Div, Pow };

/// Immutable expression tree over an ordered list of declared variables.
///
/// Grammar:
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := atom ['^' integer]
///   atom   := number | ident | '(' expr ')' | '-' atom | func '(' expr ')'
///   func   := sin | cos | exp | log | sqrt | abs
///
/// Unary minus is part of `atom`, so `-x^2` reads as `(-x)^2`.
class Expr {
public:
    struct Node {
        Op op;
        double value = 0.0;    // Const
        long index = 0;        // Var: variable index; Pow: integer exponent
        std::shared_ptr<const Node> lhs;
        std::shared_ptr<const Node> rhs;
    };

    Expr() = default;

    /// Parses `text` against `vars`. Throws SyntaxError or UnknownVariable.
    static Expr parse(std::string_view text, const std::vector<std::string>& vars);

    static Expr constant(double c, std::size_t num_vars);

    std::size_t num_vars() const noexcept { return num_vars_; }
    const Node& root() const { return *root_; }

    double eval(std::span<const double> x) const;
    double eval(const Vec& x) const { return eval(std::span<const double>(x.data(), x.size())); }

    /// Generic forward evaluation; instantiated for double, Dual, HyperDual.
    template <class T>
    T evaluate(std::span<const T> x) const;

    /// Pretty-prints with minimal parentheses using `vars` for identifiers.
    std::string to_string(const std::vector<std::string>& vars) const;

    friend bool operator==(const Expr& a, const Expr& b);

private:
    Expr(std::shared_ptr<const Node> root, std::size_t num_vars)
        : root_(std::move(root)), num_vars_(num_vars) {}

    std::shared_ptr<const Node> root_;
    std::size_t num_vars_ = 0;
};

Expr parse_expr(std::string_view text, const std::vector<std::string>& vars);

double eval(const Expr& e, const Vec& x);

/// Exact gradient by forward-mode dual numbers, one pass per coordinate.
Vec grad(const Expr& e, const Vec& x);

/// dᵀ∇²e(x)d by hyper-dual forward propagation.
double second_dir_deriv(const Expr& e, const Vec& x, const Vec& d);

/// Full Hessian from s(s+1)/2 hyper-dual passes with ε₁ = e_i, ε₂ = e_j.
Mat hessian(const Expr& e, const Vec& x);

/// Directional first derivative ∇e(x)d from the same hyper-dual pass.
struct DirectionalJet {
    double value;
    double first;
    double second;
};
DirectionalJet directional_jet(const Expr& e, const Vec& x, const Vec& d);

struct LimitEstimate {
    double value;
    double error_bound;
    int iterations;
};

/// Richardson-extrapolated limit of 2t⁻²[h(x+td) − h(x) − t∇h(x)d] over
/// t = t0·2⁻ᵏ, k = 0..steps. Throws NonConvergent if the bound stays above 1e-4.
LimitEstimate second_dir_deriv_limit(const Expr& e, const Vec& x, const Vec& d,
                                     int steps = 20, double t0 = 1e-1);

}  // namespace vopt
