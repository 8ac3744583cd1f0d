#include "vopt/problem.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <regex>
#include <sstream>

#include <Eigen/SVD>

#include "vopt/errors.hpp"

namespace vopt {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

bool is_function_name(const std::string& s) {
    return s == "sin" || s == "cos" || s == "exp" || s == "log" || s == "sqrt" || s == "abs";
}

std::size_t first_non_space(std::string_view s, std::size_t from) {
    while (from < s.size() && std::isspace(static_cast<unsigned char>(s[from]))) ++from;
    return from;
}

std::string_view rtrim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

struct Line {
    std::size_t number;
    std::string text;  // comment stripped
};

struct PendingExpr {
    std::size_t line;
    std::size_t column;  // 1-based column of the expression start
    std::string text;
};

Expr parse_at(const PendingExpr& pe, const std::vector<std::string>& vars) {
    try {
        return Expr::parse(pe.text, vars);
    } catch (const SyntaxError& e) {
        throw ParseError(pe.line, pe.column + e.position(), e.what());
    } catch (const UnknownVariable& e) {
        const auto at = pe.text.find(e.name());
        throw ParseError(pe.line, pe.column + (at == std::string::npos ? 0 : at), e.what());
    }
}

double parse_bound(const std::string& text, std::size_t line, std::size_t column) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ParseError(line, column, "expected a number, found '" + text + "'");
    return v;
}

}  // namespace

Vec ProblemDef::f(const Vec& x) const {
    Vec out(n());
    for (Eigen::Index i = 0; i < n(); ++i) out[i] = eval(objectives[static_cast<std::size_t>(i)], x);
    return out;
}

Vec ProblemDef::g(const Vec& x) const {
    Vec out(m());
    for (Eigen::Index j = 0; j < m(); ++j) out[j] = eval(constraints[static_cast<std::size_t>(j)], x);
    return out;
}

Mat ProblemDef::jacobian_f(const Vec& x) const {
    Mat J(n(), s());
    for (Eigen::Index i = 0; i < n(); ++i) J.row(i) = grad(objectives[static_cast<std::size_t>(i)], x).transpose();
    return J;
}

Mat ProblemDef::jacobian_g(const Vec& x) const {
    Mat J(m(), s());
    for (Eigen::Index j = 0; j < m(); ++j) J.row(j) = grad(constraints[static_cast<std::size_t>(j)], x).transpose();
    return J;
}

bool ProblemDef::in_box(const Vec& x) const {
    return x.size() == s() && (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

double ProblemDef::max_violation(const Vec& x) const {
    if (m() == 0) return -std::numeric_limits<double>::infinity();
    return g(x).maxCoeff();
}

std::string ProblemDef::to_text() const {
    std::ostringstream out;
    for (Eigen::Index k = 0; k < s(); ++k)
        out << "var " << names[static_cast<std::size_t>(k)] << " in [" << fmt17(lo[k]) << ", " << fmt17(hi[k]) << "]\n";
    for (const auto& e : objectives) out << "min " << e.to_string(names) << "\n";
    for (const auto& e : constraints) out << "st " << e.to_string(names) << " <= 0\n";
    return out.str();
}

ProblemDef parse_problem(std::string_view text) {
    std::vector<Line> lines;
    {
        std::size_t number = 1, start = 0;
        while (start <= text.size()) {
            const auto end = std::min(text.find('\n', start), text.size());
            std::string line(text.substr(start, end - start));
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            lines.push_back({number++, std::move(line)});
            if (end == text.size()) break;
            start = end + 1;
        }
    }

    static const std::regex var_re(
        R"(^\s*var\s+([A-Za-z_][A-Za-z0-9_]*)\s+in\s*\[\s*([^,\]\s]+)\s*,\s*([^\]\s]+)\s*\]\s*$)");

    ProblemDef P;
    std::vector<double> lo, hi;
    std::vector<PendingExpr> mins, sts;
    for (const auto& [number, line] : lines) {
        const std::size_t kw = first_non_space(line, 0);
        if (kw == line.size()) continue;
        std::size_t kw_end = kw;
        while (kw_end < line.size() && !std::isspace(static_cast<unsigned char>(line[kw_end]))) ++kw_end;
        const std::string keyword = line.substr(kw, kw_end - kw);
        if (keyword == "var") {
            std::smatch m;
            if (!std::regex_match(line, m, var_re))
                throw ParseError(number, kw + 1, "expected 'var <name> in [<lo>, <hi>]'");
            const std::string name = m[1];
            if (is_function_name(name))
                throw ParseError(number, static_cast<std::size_t>(m.position(1)) + 1,
                                 "'" + name + "' is a reserved function name");
            if (std::find(P.names.begin(), P.names.end(), name) != P.names.end())
                throw ParseError(number, static_cast<std::size_t>(m.position(1)) + 1,
                                 "variable '" + name + "' declared twice");
            const double l = parse_bound(m[2], number, static_cast<std::size_t>(m.position(2)) + 1);
            const double h = parse_bound(m[3], number, static_cast<std::size_t>(m.position(3)) + 1);
            if (!std::isfinite(l) || !std::isfinite(h) || !(l < h))
                throw BadBounds("variable '" + name + "' has bounds [" + std::string(m[2]) + ", " +
                                std::string(m[3]) + "]; need finite lo < hi");
            P.names.push_back(name);
            lo.push_back(l);
            hi.push_back(h);
        } else if (keyword == "min") {
            const std::size_t at = first_non_space(line, kw_end);
            mins.push_back({number, at + 1, std::string(rtrim(std::string_view(line).substr(at)))});
        } else if (keyword == "st") {
            const std::size_t at = first_non_space(line, kw_end);
            const std::string_view rest = std::string_view(line).substr(at);
            const auto le = rest.rfind("<=");
            if (le == std::string_view::npos)
                throw ParseError(number, line.size() + 1, "expected '<= 0' after constraint");
            const std::string rhs(rtrim(rest.substr(first_non_space(rest, le + 2))));
            double zero = 1.0;
            const auto res = std::from_chars(rhs.data(), rhs.data() + rhs.size(), zero);
            if (res.ec != std::errc() || res.ptr != rhs.data() + rhs.size() || zero != 0.0)
                throw ParseError(number, at + le + 3, "constraint right-hand side must be 0");
            sts.push_back({number, at + 1, std::string(rtrim(rest.substr(0, le)))});
        } else {
            throw ParseError(number, kw + 1, "unknown keyword '" + keyword + "'; expected var, min or st");
        }
    }

    if (P.names.empty()) throw ParseError(lines.back().number, 1, "no variables declared");
    if (mins.empty()) throw EmptyObjectives();
    P.lo = Eigen::Map<const Vec>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    P.hi = Eigen::Map<const Vec>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    for (const auto& pe : mins) {
        P.objectives.push_back(parse_at(pe, P.names));
        P.objective_text.push_back(pe.text);
    }
    for (const auto& pe : sts) {
        P.constraints.push_back(parse_at(pe, P.names));
        P.constraint_text.push_back(pe.text);
    }
    return P;
}

ProblemDef load_problem(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open problem file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_problem(buf.str());
}

ActiveSet active_set(const ProblemDef& P, const Vec& x, double tol) {
    ActiveSet a;
    a.point = x;
    a.tol = tol;
    a.values = P.g(x);
    for (Eigen::Index j = 0; j < a.values.size(); ++j) {
        if (a.values[j] > tol) throw InfeasiblePoint(static_cast<std::size_t>(j), a.values[j]);
        if (std::abs(a.values[j]) <= tol) a.indices.push_back(static_cast<int>(j));
    }
    return a;
}

DirectionAnalysis analyze_direction(const ProblemDef& P, const Vec& x, const Vec& d, double tol) {
    if (d.size() != P.s()) throw std::invalid_argument("direction dimension does not match the problem");
    if (!d.allFinite()) throw std::invalid_argument("direction is not finite");
    const ActiveSet act = active_set(P, x, tol);
    DirectionAnalysis out;
    const double norm = d.norm();
    out.direction = norm > 0.0 ? Vec(d / norm) : Vec(d);
    out.active = act.indices;
    out.f_products = P.jacobian_f(x) * out.direction;
    out.g_products.resize(static_cast<Eigen::Index>(act.indices.size()));
    for (std::size_t k = 0; k < act.indices.size(); ++k)
        out.g_products[static_cast<Eigen::Index>(k)] =
            grad(P.constraints[static_cast<std::size_t>(act.indices[k])], x).dot(out.direction);

    out.is_critical = (out.f_products.array() <= tol).all() && (out.g_products.array() <= tol).all();
    for (Eigen::Index i = 0; i < out.f_products.size(); ++i)
        if (std::abs(out.f_products[i]) <= tol) out.I.push_back(static_cast<int>(i));
    for (std::size_t k = 0; k < act.indices.size(); ++k)
        if (std::abs(out.g_products[static_cast<Eigen::Index>(k)]) <= tol) out.J.push_back(act.indices[k]);
    return out;
}

std::vector<Vec> sphere_directions(Eigen::Index s, int count, std::uint64_t seed) {
    std::vector<Vec> out;
    if (count <= 0 || s <= 0) return out;
    if (s == 1) {
        out.push_back(Vec::Constant(1, 1.0));
        if (count > 1) out.push_back(Vec::Constant(1, -1.0));
        return out;
    }
    std::mt19937_64 rng(seed);
    if (s == 2) {
        const double offset = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int k = 0; k < count; ++k) {
            const double t = offset + golden * k;
            out.push_back(Vec{{std::cos(t), std::sin(t)}});
        }
        return out;
    }
    // Halton points in the cube, kept when inside the unit ball, then projected.
    static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
    if (s > static_cast<Eigen::Index>(std::size(primes)))
        throw std::invalid_argument("sphere sampling supports at most 16 dimensions");
    auto radical_inverse = [](std::uint64_t i, int base) {
        double f = 1.0, r = 0.0;
        while (i > 0) {
            f /= base;
            r += f * static_cast<double>(i % static_cast<std::uint64_t>(base));
            i /= static_cast<std::uint64_t>(base);
        }
        return r;
    };
    std::uint64_t index = 1 + std::uniform_int_distribution<std::uint64_t>(0, 1u << 20)(rng);
    const std::uint64_t limit = index + 10000ull * static_cast<std::uint64_t>(count);
    while (static_cast<int>(out.size()) < count && index < limit) {
        Vec z(s);
        for (Eigen::Index k = 0; k < s; ++k) z[k] = 2.0 * radical_inverse(index, primes[k]) - 1.0;
        ++index;
        const double r = z.norm();
        if (r <= 1.0 && r > 1e-3) out.push_back(z / r);
    }
    return out;
}

std::vector<DirectionAnalysis> sample_critical_directions(const ProblemDef& P, const Vec& x, int count,
                                                          std::uint64_t seed, double tol) {
    const Eigen::Index s = P.s();
    const ActiveSet act = active_set(P, x, tol);

    std::vector<Vec> cand;
    auto add = [&](const Vec& d) {
        const double nd = d.norm();
        for (const auto& c : cand) {
            const double nc = c.norm();
            if (nd == 0.0 || nc == 0.0) {
                if (nd == nc) return;
                continue;
            }
            if (c.dot(d) / (nc * nd) > 1.0 - 1e-12) return;
        }
        cand.push_back(nd > 0.0 ? Vec(d / nd) : d);
    };

    add(Vec::Zero(s));
    for (Eigen::Index k = 0; k < s; ++k) {
        add(Vec::Unit(s, k));
        add(-Vec::Unit(s, k));
    }

    Mat rows(P.n() + static_cast<Eigen::Index>(act.indices.size()), s);
    rows.topRows(P.n()) = P.jacobian_f(x);
    for (std::size_t k = 0; k < act.indices.size(); ++k)
        rows.row(P.n() + static_cast<Eigen::Index>(k)) =
            grad(P.constraints[static_cast<std::size_t>(act.indices[k])], x).transpose();
    const int r = static_cast<int>(std::min<Eigen::Index>(rows.rows(), 12));
    std::vector<std::uint32_t> masks;
    for (std::uint32_t mask = 1; mask < (1u << r); ++mask) masks.push_back(mask);
    std::stable_sort(masks.begin(), masks.end(),
                     [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) < std::popcount(b); });
    if (masks.size() > 1024) masks.resize(1024);
    for (const auto mask : masks) {
        Mat sub(std::popcount(mask), s);
        for (int i = 0, k = 0; i < r; ++i)
            if (mask & (1u << i)) sub.row(k++) = rows.row(i);
        Eigen::JacobiSVD<Mat> svd(sub, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const double cut = 1e-10 * std::max(1.0, sv.size() ? sv[0] : 0.0);
        Eigen::Index rank = 0;
        while (rank < sv.size() && sv[rank] > cut) ++rank;
        if (rank == 0 || rank == s) continue;
        for (Eigen::Index k = rank; k < s; ++k) {
            add(svd.matrixV().col(k));
            add(-svd.matrixV().col(k));
        }
    }

    const Mat Jf = rows.topRows(P.n());
    const Mat Jg = rows.bottomRows(rows.rows() - P.n());
    auto critical = [&](const Vec& d) {
        return (Jf * d).maxCoeff() <= tol && (Jg.rows() == 0 || (Jg * d).maxCoeff() <= tol);
    };
    std::vector<DirectionAnalysis> out;
    for (const auto& d : cand)
        if (critical(d)) out.push_back(analyze_direction(P, x, d, tol));

    // Sphere points are drawn until `count` of them are critical or 32·count were tried.
    const auto sphere = sphere_directions(s, 32 * std::max(count, 0), seed);
    int taken = 0;
    for (std::size_t k = 0; k < sphere.size() && taken < count; ++k) {
        if (!critical(sphere[k])) continue;
        const auto before = cand.size();
        add(sphere[k]);
        if (cand.size() == before) continue;
        out.push_back(analyze_direction(P, x, cand.back(), tol));
        ++taken;
    }
    return out;
}

Grid::Grid(const Vec& lo, const Vec& hi, int per_axis) : lo_(lo), hi_(hi), per_axis_(per_axis) {
    if (per_axis < 2) throw std::invalid_argument("grid needs at least 2 points per axis");
    total_ = 1;
    for (Eigen::Index k = 0; k < lo.size(); ++k) total_ *= per_axis;
}

int Grid::points_per_axis(int requested, Eigen::Index s) {
    constexpr double cap = 201.0 * 201.0 * 201.0;
    int per = std::max(requested, 2);
    while (per > 2 && std::pow(static_cast<double>(per), static_cast<double>(s)) > cap) --per;
    return per;
}

Vec Grid::point(std::int64_t flat) const {
    Vec x(dim());
    const auto c = coords(flat);
    for (Eigen::Index k = 0; k < dim(); ++k)
        x[k] = lo_[k] + (hi_[k] - lo_[k]) * c[static_cast<std::size_t>(k)] / (per_axis_ - 1);
    return x;
}

std::vector<int> Grid::coords(std::int64_t flat) const {
    std::vector<int> c(static_cast<std::size_t>(dim()));
    for (Eigen::Index k = dim() - 1; k >= 0; --k) {
        c[static_cast<std::size_t>(k)] = static_cast<int>(flat % per_axis_);
        flat /= per_axis_;
    }
    return c;
}

std::int64_t Grid::flat(const std::vector<int>& c) const {
    std::int64_t f = 0;
    for (int v : c) f = f * per_axis_ + v;
    return f;
}

std::vector<std::int64_t> Grid::neighbours(std::int64_t flat_index) const {
    const auto base = coords(flat_index);
    std::vector<std::int64_t> out;
    std::vector<int> offset(base.size(), -1);
    while (true) {
        bool centre = true, inside = true;
        std::vector<int> c(base.size());
        for (std::size_t k = 0; k < base.size(); ++k) {
            c[k] = base[k] + offset[k];
            centre = centre && offset[k] == 0;
            inside = inside && c[k] >= 0 && c[k] < per_axis_;
        }
        if (!centre && inside) out.push_back(flat(c));
        std::size_t k = 0;
        while (k < offset.size() && offset[k] == 1) offset[k++] = -1;
        if (k == offset.size()) break;
        ++offset[k];
    }
    return out;
}

}  // namespace vopt
