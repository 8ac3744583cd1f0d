#include "vopt/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "vopt/errors.hpp"

namespace vopt {

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Token {
    Tok kind;
    std::size_t pos;
    std::string_view text;
    double number = 0.0;
    bool integral = false;
};

const std::vector<std::string> kAtomStart = {"number", "identifier", "'('", "'-'", "function"};

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    Token next() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        const std::size_t start = pos_;
        if (pos_ >= text_.size()) return {Tok::End, start, {}};
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number(start);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
                ++pos_;
            return {Tok::Ident, start, text_.substr(start, pos_ - start)};
        }
        ++pos_;
        switch (c) {
            case '+': return {Tok::Plus, start, text_.substr(start, 1)};
            case '-': return {Tok::Minus, start, text_.substr(start, 1)};
            case '*': return {Tok::Star, start, text_.substr(start, 1)};
            case '/': return {Tok::Slash, start, text_.substr(start, 1)};
            case '^': return {Tok::Caret, start, text_.substr(start, 1)};
            case '(': return {Tok::LParen, start, text_.substr(start, 1)};
            case ')': return {Tok::RParen, start, text_.substr(start, 1)};
            default:
                throw SyntaxError(start, {"token"}, std::string(1, c));
        }
    }

private:
    Token number(std::size_t start) {
        bool integral = true;
        auto digits = [&] {
            std::size_t n = 0;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                ++pos_;
                ++n;
            }
            return n;
        };
        std::size_t mantissa = digits();
        if (pos_ < text_.size() && text_[pos_] == '.') {
            integral = false;
            ++pos_;
            mantissa += digits();
        }
        if (mantissa == 0) throw SyntaxError(start, {"number"}, ".");
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            const std::size_t save = pos_;
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
            if (digits() == 0) {
                pos_ = save;  // 'e' starts an identifier instead
            } else {
                integral = false;
            }
        }
        const auto text = text_.substr(start, pos_ - start);
        double value = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
        if (res.ec != std::errc() || !std::isfinite(value))
            throw SyntaxError(start, {"finite number"}, std::string(text));
        return {Tok::Number, start, text, value, integral};
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

Op function_op(std::string_view name, bool& ok) {
    ok = true;
    if (name == "sin") return Op::Sin;
    if (name == "cos") return Op::Cos;
    if (name == "exp") return Op::Exp;
    if (name == "log") return Op::Log;
    if (name == "sqrt") return Op::Sqrt;
    if (name == "abs") return Op::Abs;
    ok = false;
    return Op::Const;
}

NodePtr make(Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
    auto n = std::make_shared<Expr::Node>();
    n->op = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
}

class Parser {
public:
    Parser(std::string_view text, const std::vector<std::string>& vars) : lex_(text), vars_(vars) {
        advance();
    }

    NodePtr parse() {
        auto e = expr();
        if (cur_.kind != Tok::End) fail({"'+'", "'-'", "'*'", "'/'", "end of input"});
        return e;
    }

private:
    void advance() { cur_ = lex_.next(); }

    [[noreturn]] void fail(std::vector<std::string> expected) const {
        throw SyntaxError(cur_.pos, std::move(expected),
                          cur_.kind == Tok::End ? "end of input" : std::string(cur_.text));
    }

    NodePtr expr() {
        auto lhs = term();
        while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
            const Op op = cur_.kind == Tok::Plus ? Op::Add : Op::Sub;
            advance();
            lhs = make(op, lhs, term());
        }
        return lhs;
    }

    NodePtr term() {
        auto lhs = factor();
        while (cur_.kind == Tok::Star || cur_.kind == Tok::Slash) {
            const Op op = cur_.kind == Tok::Star ? Op::Mul : Op::Div;
            advance();
            lhs = make(op, lhs, factor());
        }
        return lhs;
    }

    NodePtr factor() {
        auto base = atom();
        if (cur_.kind != Tok::Caret) return base;
        advance();
        bool negative = false;
        if (cur_.kind == Tok::Minus) {
            negative = true;
            advance();
        }
        if (cur_.kind != Tok::Number || !cur_.integral) fail({"integer"});
        long k = 0;
        const auto res = std::from_chars(cur_.text.data(), cur_.text.data() + cur_.text.size(), k);
        if (res.ec != std::errc()) fail({"integer"});
        advance();
        auto n = std::make_shared<Expr::Node>();
        n->op = Op::Pow;
        n->index = negative ? -k : k;
        n->lhs = std::move(base);
        return n;
    }

    NodePtr atom() {
        switch (cur_.kind) {
            case Tok::Number: {
                auto n = std::make_shared<Expr::Node>();
                n->op = Op::Const;
                n->value = cur_.number;
                advance();
                return n;
            }
            case Tok::Minus:
                advance();
                return make(Op::Neg, atom());
            case Tok::LParen: {
                advance();
                auto e = expr();
                if (cur_.kind != Tok::RParen) fail({"')'", "'+'", "'-'", "'*'", "'/'"});
                advance();
                return e;
            }
            case Tok::Ident: {
                bool is_func = false;
                const Op fop = function_op(cur_.text, is_func);
                if (is_func) {
                    advance();
                    if (cur_.kind != Tok::LParen) fail({"'('"});
                    advance();
                    auto arg = expr();
                    if (cur_.kind != Tok::RParen) fail({"')'"});
                    advance();
                    return make(fop, arg);
                }
                const auto it = std::find(vars_.begin(), vars_.end(), cur_.text);
                if (it == vars_.end()) throw UnknownVariable(std::string(cur_.text));
                auto n = std::make_shared<Expr::Node>();
                n->op = Op::Var;
                n->index = static_cast<long>(it - vars_.begin());
                advance();
                return n;
            }
            default:
                fail(kAtomStart);
        }
    }

    Lexer lex_;
    const std::vector<std::string>& vars_;
    Token cur_{Tok::End, 0, {}};
};

// ---- evaluation -----------------------------------------------------------

template <class T>
T lift(double c) {
    if constexpr (std::is_same_v<T, double>) {
        return c;
    } else {
        T t{};
        t.re = c;
        return t;
    }
}

template <class T>
T eval_node(const Expr::Node& n, std::span<const T> x) {
    switch (n.op) {
        case Op::Const:
            return lift<T>(n.value);
        case Op::Var:
            return x[static_cast<std::size_t>(n.index)];
        case Op::Neg:
            return -eval_node(*n.lhs, x);
        case Op::Add:
            return eval_node(*n.lhs, x) + eval_node(*n.rhs, x);
        case Op::Sub:
            return eval_node(*n.lhs, x) - eval_node(*n.rhs, x);
        case Op::Mul:
            return eval_node(*n.lhs, x) * eval_node(*n.rhs, x);
        case Op::Div: {
            const T num = eval_node(*n.lhs, x);
            const T den = eval_node(*n.rhs, x);
            if (real_part(den) == 0.0) throw DomainError("division by zero");
            return num / den;
        }
        case Op::Pow: {
            const long k = n.index;
            if (k == 0) return lift<T>(1.0);
            const T a = eval_node(*n.lhs, x);
            const double v = real_part(a);
            if (k < 0 && v == 0.0) throw DomainError("zero raised to a negative power");
            const double kd = static_cast<double>(k);
            if constexpr (std::is_same_v<T, double>) {
                return std::pow(v, static_cast<int>(k));
            } else {
                const double f0 = std::pow(v, static_cast<int>(k));
                const double f1 = kd * std::pow(v, static_cast<int>(k - 1));
                const double f2 = (k == 1) ? 0.0 : kd * (kd - 1.0) * std::pow(v, static_cast<int>(k - 2));
                return chain(a, f0, f1, f2);
            }
        }
        case Op::Sin:
        case Op::Cos:
        case Op::Exp:
        case Op::Log:
        case Op::Sqrt:
        case Op::Abs: {
            const T a = eval_node(*n.lhs, x);
            const double v = real_part(a);
            double f0 = 0.0, f1 = 0.0, f2 = 0.0;
            switch (n.op) {
                case Op::Sin:
                    f0 = std::sin(v), f1 = std::cos(v), f2 = -f0;
                    break;
                case Op::Cos:
                    f0 = std::cos(v), f1 = -std::sin(v), f2 = -f0;
                    break;
                case Op::Exp:
                    f0 = f1 = f2 = std::exp(v);
                    break;
                case Op::Log:
                    if (!(v > 0.0)) throw DomainError("log of non-positive argument");
                    f0 = std::log(v), f1 = 1.0 / v, f2 = -1.0 / (v * v);
                    break;
                case Op::Sqrt:
                    if (!(v > 0.0)) throw DomainError("sqrt of non-positive argument");
                    f0 = std::sqrt(v), f1 = 0.5 / f0, f2 = -0.25 / (v * f0);
                    break;
                default:  // Abs
                    if (v == 0.0 && has_derivative_part(a))
                        throw NondifferentiablePoint("abs is not differentiable at 0");
                    f0 = std::abs(v), f1 = v > 0.0 ? 1.0 : -1.0, f2 = 0.0;
                    break;
            }
            if constexpr (std::is_same_v<T, double>) {
                return f0;
            } else {
                return chain(a, f0, f1, f2);
            }
        }
    }
    return lift<T>(0.0);
}

// ---- printing -------------------------------------------------------------

int level(const Expr::Node& n) {
    switch (n.op) {
        case Op::Add:
        case Op::Sub:
            return 1;
        case Op::Mul:
        case Op::Div:
            return 2;
        case Op::Pow:
            return 3;
        default:
            return 4;
    }
}

void print(const Expr::Node& n, int required, const std::vector<std::string>& vars,
           std::string& out) {
    const bool paren = level(n) < required;
    if (paren) out += '(';
    switch (n.op) {
        case Op::Const: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", n.value);
            out += buf;
            break;
        }
        case Op::Var:
            out += vars.at(static_cast<std::size_t>(n.index));
            break;
        case Op::Neg:
            out += '-';
            print(*n.lhs, 4, vars, out);
            break;
        case Op::Add:
        case Op::Sub:
            print(*n.lhs, 1, vars, out);
            out += n.op == Op::Add ? " + " : " - ";
            print(*n.rhs, 2, vars, out);
            break;
        case Op::Mul:
        case Op::Div:
            print(*n.lhs, 2, vars, out);
            out += n.op == Op::Mul ? "*" : "/";
            print(*n.rhs, 3, vars, out);
            break;
        case Op::Pow:
            print(*n.lhs, 4, vars, out);
            out += '^';
            out += std::to_string(n.index);
            break;
        default: {
            static const char* names[] = {"sin", "cos", "exp", "log", "sqrt", "abs"};
            out += names[static_cast<int>(n.op) - static_cast<int>(Op::Sin)];
            out += '(';
            print(*n.lhs, 1, vars, out);
            out += ')';
            break;
        }
    }
    if (paren) out += ')';
}

bool equal_nodes(const Expr::Node* a, const Expr::Node* b) {
    if (a == b) return true;
    if (!a || !b) return false;
    if (a->op != b->op || a->index != b->index) return false;
    if (a->op == Op::Const && !(a->value == b->value)) return false;
    return equal_nodes(a->lhs.get(), b->lhs.get()) && equal_nodes(a->rhs.get(), b->rhs.get());
}

}  // namespace

// ---- error types ----------------------------------------------------------

namespace {
std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += items[i];
    }
    return out;
}
}  // namespace

SyntaxError::SyntaxError(std::size_t position, std::vector<std::string> expected,
                         const std::string& found)
    : Error("syntax error at position " + std::to_string(position) + ": expected " +
            join(expected) + ", found '" + found + "'"),
      position_(position),
      expected_(std::move(expected)) {}

UnknownVariable::UnknownVariable(std::string name)
    : Error("unknown variable '" + name + "'"), name_(std::move(name)) {}

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& what)
    : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

InfeasiblePoint::InfeasiblePoint(std::size_t constraint, double value)
    : Error("point is infeasible: g" + std::to_string(constraint + 1) + " = " +
            [&] {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.10g", value);
                return std::string(buf);
            }() + " > 0"),
      constraint_(constraint),
      value_(value) {}

// ---- Expr -----------------------------------------------------------------

Expr Expr::parse(std::string_view text, const std::vector<std::string>& vars) {
    Parser p(text, vars);
    return Expr(p.parse(), vars.size());
}

Expr Expr::constant(double c, std::size_t num_vars) {
    auto n = std::make_shared<Node>();
    n->op = Op::Const;
    n->value = c;
    return Expr(n, num_vars);
}

template <class T>
T Expr::evaluate(std::span<const T> x) const {
    if (x.size() != num_vars_) throw std::invalid_argument("point dimension does not match variables");
    return eval_node(*root_, x);
}

template double Expr::evaluate<double>(std::span<const double>) const;
template Dual Expr::evaluate<Dual>(std::span<const Dual>) const;
template HyperDual Expr::evaluate<HyperDual>(std::span<const HyperDual>) const;

double Expr::eval(std::span<const double> x) const {
    for (double v : x)
        if (!std::isfinite(v)) throw DomainError("evaluation point has a non-finite component");
    const double r = evaluate(x);
    if (!std::isfinite(r)) throw DomainError("expression value is not finite");
    return r;
}

std::string Expr::to_string(const std::vector<std::string>& vars) const {
    std::string out;
    print(*root_, 1, vars, out);
    return out;
}

bool operator==(const Expr& a, const Expr& b) {
    return a.num_vars_ == b.num_vars_ && equal_nodes(a.root_.get(), b.root_.get());
}

Expr parse_expr(std::string_view text, const std::vector<std::string>& vars) {
    return Expr::parse(text, vars);
}

double eval(const Expr& e, const Vec& x) { return e.eval(x); }

Vec grad(const Expr& e, const Vec& x) {
    const auto s = static_cast<std::size_t>(x.size());
    std::vector<Dual> seed(s);
    for (std::size_t i = 0; i < s; ++i) seed[i] = {x[static_cast<Eigen::Index>(i)], 0.0};
    Vec g(x.size());
    for (std::size_t k = 0; k < s; ++k) {
        seed[k].eps = 1.0;
        const Dual r = e.evaluate<Dual>(seed);
        seed[k].eps = 0.0;
        if (!std::isfinite(r.eps)) throw DomainError("gradient is not finite");
        g[static_cast<Eigen::Index>(k)] = r.eps;
    }
    return g;
}

DirectionalJet directional_jet(const Expr& e, const Vec& x, const Vec& d) {
    const auto s = static_cast<std::size_t>(x.size());
    std::vector<HyperDual> seed(s);
    for (std::size_t i = 0; i < s; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        seed[i] = {x[k], d[k], d[k], 0.0};
    }
    const HyperDual r = e.evaluate<HyperDual>(seed);
    if (!std::isfinite(r.e12) || !std::isfinite(r.e1))
        throw DomainError("directional derivative is not finite");
    return {r.re, r.e1, r.e12};
}

Mat hessian(const Expr& e, const Vec& x) {
    const auto s = static_cast<std::size_t>(x.size());
    std::vector<HyperDual> seed(s);
    for (std::size_t i = 0; i < s; ++i) seed[i] = {x[static_cast<Eigen::Index>(i)], 0.0, 0.0, 0.0};
    Mat H(x.size(), x.size());
    for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t j = i; j < s; ++j) {
            seed[i].e1 = 1.0;
            seed[j].e2 = 1.0;
            const double v = e.evaluate<HyperDual>(seed).e12;
            seed[i].e1 = 0.0;
            seed[j].e2 = 0.0;
            if (!std::isfinite(v)) throw DomainError("Hessian is not finite");
            const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
            H(a, b) = H(b, a) = v;
        }
    }
    return H;
}

double second_dir_deriv(const Expr& e, const Vec& x, const Vec& d) {
    return directional_jet(e, x, d).second;
}

LimitEstimate second_dir_deriv_limit(const Expr& e, const Vec& x, const Vec& d, int steps,
                                     double t0) {
    constexpr double kEps = std::numeric_limits<double>::epsilon();
    constexpr double kSafe = 2.0;
    const double h0 = e.eval(x);
    const double slope = grad(e, x).dot(d);

    // tableau rows: prev[j] = R(k-1, j), row[j] = R(k, j)
    std::vector<double> prev, row;
    std::vector<double> roundoff;  // rounding level of Q at each row
    double best = std::numeric_limits<double>::quiet_NaN();
    double best_err = std::numeric_limits<double>::infinity();
    double best_round = 0.0;
    int iterations = 0;
    double t = t0;
    for (int k = 0; k <= steps; ++k, t *= 0.5) {
        const Vec xt = x + t * d;
        const double ht = e.eval(xt);
        const double q = 2.0 / (t * t) * (ht - h0 - t * slope);
        roundoff.push_back(8.0 * kEps * (std::abs(ht) + std::abs(h0) + std::abs(t * slope)) * 2.0 / (t * t));
        iterations = k + 1;
        row.assign(static_cast<std::size_t>(k) + 1, 0.0);
        row[0] = q;
        double amplification = 1.0;
        for (int j = 1; j <= k; ++j) {
            const double p = std::ldexp(1.0, j);
            const auto uj = static_cast<std::size_t>(j);
            row[uj] = (p * row[uj - 1] - prev[uj - 1]) / (p - 1.0);
            amplification *= (p + 1.0) / (p - 1.0);
            const double err = std::max(std::abs(row[uj] - row[uj - 1]), std::abs(row[uj] - prev[uj - 1]));
            if (err <= best_err) {
                best_err = err;
                best = row[uj];
                best_round = amplification * *std::max_element(roundoff.end() - j - 1, roundoff.end());
            }
        }
        if (k >= 1) {
            const auto uk = static_cast<std::size_t>(k);
            if (std::abs(row[uk] - prev[uk - 1]) >= kSafe * best_err) {
                prev.swap(row);
                break;
            }
        }
        prev.swap(row);
    }
    const double bound = best_err + best_round;
    if (!(bound <= 1e-4) || !std::isfinite(best))
        throw NonConvergent("second-order difference quotient did not converge (bound " +
                            std::to_string(bound) + ")");
    return {best, bound, iterations};
}

}  // namespace vopt
