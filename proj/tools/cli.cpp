#include "cli.hpp"

#include <chrono>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "vopt/errors.hpp"
#include "vopt/invexity.hpp"
#include "vopt/ktcheck.hpp"
#include "vopt/linprog.hpp"
#include "vopt/problem.hpp"
#include "vopt/scalarize.hpp"

#ifndef VOPT_FIXTURE_DIR
#define VOPT_FIXTURE_DIR "fixtures"
#endif

namespace vopt::cli {

using nlohmann::json;

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

namespace {

// ---- serialization ----------------------------------------------------------

json to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(std::isfinite(v[i]) ? json(v[i]) : json(nullptr));
    return a;
}

json to_json(const std::vector<int>& v) { return json(v); }

json to_json(const MultiplierPair& mp) {
    return {{"lambda", to_json(mp.lambda)},
            {"mu", to_json(mp.mu)},
            {"normalization", to_string(mp.normalization)},
            {"residual", mp.residual},
            {"curvature", std::isfinite(mp.curvature) ? json(mp.curvature) : json(nullptr)},
            {"eq4_holds", mp.eq4_holds}};
}

json to_json(const std::optional<MultiplierPair>& mp) { return mp ? to_json(*mp) : json(nullptr); }

json verdict_json(const StationarityVerdict& v) {
    int with = 0, missing = 0;
    json failing = nullptr;
    for (const auto& d : v.directions) {
        if (d.missing_second_derivative)
            ++missing;
        else if (d.multipliers)
            ++with;
        else if (failing.is_null())
            failing = to_json(d.direction.direction);
    }
    return {{"level", to_string(v.level)},
            {"first_order", to_json(v.first_order)},
            {"directions_tested", v.directions_tested},
            {"directions_with_multipliers", with},
            {"directions_missing_second_derivative", missing},
            {"failing_direction", failing}};
}

json to_json(const ScanResult& s) {
    json pts = json::array();
    for (const auto& p : s.points) {
        json j = verdict_json(p.verdict);
        j["x"] = to_json(p.x);
        j["polished"] = p.polished;
        pts.push_back(j);
    }
    return {{"grid_per_axis", s.grid_per_axis},
            {"feasible_nodes", s.feasible_nodes},
            {"polished_candidates", s.polished_candidates},
            {"points", pts}};
}

json to_json(const MinimizerSet& ms) {
    json cl = json::array();
    for (const auto& c : ms.clusters) cl.push_back({{"point", to_json(c.point)}, {"value", c.value}});
    return {{"value", ms.value},
            {"clusters", cl},
            {"grid_per_axis", ms.grid_per_axis},
            {"polish_starts", ms.polish_starts},
            {"polish_iterations", ms.polish_iterations}};
}

json to_json(const SaddleVerdict& v) {
    return {{"left_ok", v.left_ok},
            {"counterexample", v.counterexample},
            {"x", v.counterexample ? to_json(v.x) : json(nullptr)},
            {"gap", v.gap},
            {"value_at_point", v.value_at_point},
            {"grid_per_axis", v.grid_per_axis},
            {"polish_starts", v.polish_starts},
            {"polish_iterations", v.polish_iterations}};
}

json to_json(const ChainReport& r) {
    return {{"complementary_slackness", r.complementary_slackness},
            {"in_unconstrained_argmin", r.in_unconstrained_argmin},
            {"in_weighting_argmin", r.in_weighting_argmin},
            {"in_weak_efficient", r.in_weak_efficient},
            {"in_kt", r.in_kt},
            {"unconstrained_value", r.unconstrained_value},
            {"weighting_value", r.weighting_value},
            {"dominating_point", r.dominating_point ? to_json(*r.dominating_point) : json(nullptr)},
            {"anomalies", r.anomalies}};
}

json to_json(const ClassVerdict& v) {
    json w = nullptr;
    if (v.witness) {
        const auto& b = *v.witness;
        w = {{"kind", to_string(b.kind)},
             {"x", to_json(b.x)},
             {"y", to_json(b.y)},
             {"lambda", b.lambda.size() ? to_json(b.lambda) : json(nullptr)},
             {"mu", b.lambda.size() ? to_json(b.mu) : json(nullptr)},
             {"fx", to_json(b.fx)},
             {"fy", to_json(b.fy)},
             {"gy", to_json(b.gy)},
             {"gap", b.gap},
             {"level", to_string(b.level)},
             {"from_pair_sample", b.from_pair_sample}};
    }
    const auto& r = v.resolution;
    return {{"class", to_string(v.cls)},
            {"status", to_string(v.status)},
            {"witness", w},
            {"resolution",
             {{"grid_per_axis", r.grid_per_axis},
              {"stationary_points", r.stationary_points},
              {"second_order_points", r.second_order_points},
              {"directions_per_point", r.directions_per_point},
              {"multiplier_candidates", r.multiplier_candidates},
              {"pair_samples", r.pair_samples}}}};
}

json to_json(const AlternativeCertificate& c, bool verified) {
    return {{"variant", c.variant == AlternativeVariant::Sys7 ? "Sys7" : "Sys8"},
            {"first", to_json(c.first)},
            {"second", to_json(c.second)},
            {"margin", c.margin},
            {"verified", verified}};
}

// ---- input helpers ----------------------------------------------------------

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Vec parse_list(const std::string& text, const char* what) {
    std::vector<double> vals;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find(',', pos), text.size());
        double v = 0.0;
        const char* b = text.data() + pos;
        const char* e = text.data() + end;
        while (b < e && *b == ' ') ++b;
        if (b < e && *b == '+') ++b;
        const auto [ptr, ec] = std::from_chars(b, e, v);
        if (ec != std::errc() || ptr != e || !std::isfinite(v))
            throw UsageError(std::string("invalid number in ") + what + ": '" + text.substr(pos, end - pos) + "'");
        vals.push_back(v);
        pos = end + 1;
    }
    return Eigen::Map<const Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void expect_size(const Vec& v, Eigen::Index n, const char* what) {
    if (v.size() != n)
        throw UsageError(std::string(what) + " needs " + std::to_string(n) + " entries, got " +
                         std::to_string(v.size()));
}

Mat matrix_from_json(const json& j, const char* name) {
    if (!j.contains(name)) return Mat(0, 0);
    const json& rows = j.at(name);
    if (!rows.is_array()) throw UsageError(std::string("matrix ") + name + " must be an array of rows");
    if (rows.empty()) return Mat(0, 0);
    const std::size_t cols = rows.at(0).size();
    Mat M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!rows[r].is_array() || rows[r].size() != cols)
            throw UsageError(std::string("matrix ") + name + " has ragged rows");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!rows[r][c].is_number()) throw UsageError(std::string("matrix ") + name + " has a non-numeric entry");
            M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
        }
    }
    return M;
}

std::string fmt(const Vec& v) {
    std::ostringstream os;
    os << std::setprecision(6) << "(";
    for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << (std::abs(v[i]) < 5e-13 ? 0.0 : v[i]);
    os << ")";
    return os.str();
}

// ---- commands ---------------------------------------------------------------

struct Common {
    double tol = kDefaultTol;
    int grid = 201;
    int dirs = 64;
    std::uint64_t seed = 0;
    std::string json_path;
    bool timing = false;
    std::string fixtures = VOPT_FIXTURE_DIR;

    ScanOptions scan() const {
        ScanOptions o;
        o.grid = grid;
        o.tol = tol;
        o.directions = dirs;
        o.seed = seed;
        return o;
    }
    ClassifyOptions classify() const {
        ClassifyOptions o;
        o.directions = dirs;
        o.seed = seed;
        o.tol = tol;
        return o;
    }
    SearchConfig search() const {
        SearchConfig c;
        c.grid = grid;
        c.tol = tol;
        return c;
    }
    InvexityConfig invexity() const {
        InvexityConfig c;
        c.scan = scan();
        return c;
    }
};

struct Outcome {
    json payload;
    std::string digest;
};

void print_scan(std::ostream& out, const ScanResult& s) {
    out << s.points.size() << " KT point(s) on a " << s.grid_per_axis << "-per-axis grid\n";
    for (const auto& p : s.points) out << "  " << fmt(p.x) << "  " << to_string(p.verdict.level) << "\n";
}

void print_verdict(std::ostream& out, const ClassVerdict& v) {
    out << to_string(v.cls) << ": " << to_string(v.status);
    if (v.witness)
        out << " (x = " << fmt(v.witness->x) << ", y = " << fmt(v.witness->y) << ", "
            << to_string(v.witness->kind) << ")";
    out << "\n";
}

Outcome cmd_analyze(const std::string& file, const std::string& point, const Common& c, std::ostream& out) {
    const std::string text = read_file(file);
    const ProblemDef P = parse_problem(text);
    const Vec x = parse_list(point, "--point");
    expect_size(x, P.s(), "--point");
    const ActiveSet as = active_set(P, x, c.tol);
    const StationarityVerdict v = classify_point(P, x, c.classify());
    json p = verdict_json(v);
    p["point"] = to_json(x);
    p["active"] = to_json(as.indices);
    p["f"] = to_json(P.f(x));
    p["g"] = to_json(P.g(x));
    p["chain"] = nullptr;
    out << "point " << fmt(x) << ": " << to_string(v.level) << "\n";
    if (v.first_order) {
        const ChainReport r = relation_chain(P, v.first_order->lambda, v.first_order->mu, x, c.search());
        p["chain"] = to_json(r);
        out << "  lambda = " << fmt(v.first_order->lambda) << ", mu = " << fmt(v.first_order->mu) << "\n";
        out << "  weak efficient on grid: " << (r.in_weak_efficient ? "yes" : "no") << "\n";
    }
    return {p, sha256_hex(text)};
}

Outcome cmd_scan(const std::string& file, const Common& c, std::ostream& out) {
    const std::string text = read_file(file);
    const ProblemDef P = parse_problem(text);
    const ScanResult s = scan_kt_points(P, c.scan());
    print_scan(out, s);
    return {to_json(s), sha256_hex(text)};
}

Outcome cmd_classify(const std::string& file, const std::string& cls, const Common& c, std::ostream& out) {
    const std::string text = read_file(file);
    const ProblemDef P = parse_problem(text);
    std::vector<InvexityClass> classes;
    if (cls == "all") {
        classes.assign(std::begin(kAllClasses), std::end(kAllClasses));
    } else {
        const auto parsed = parse_class(cls);
        if (!parsed) throw UsageError("unknown class '" + cls + "'");
        classes.push_back(*parsed);
    }
    const InvexityContext ctx(P, c.invexity());
    json verdicts = json::array();
    for (auto k : classes) {
        const ClassVerdict v = ctx.check(k);
        print_verdict(out, v);
        verdicts.push_back(to_json(v));
    }
    json p = {{"verdicts", verdicts}, {"stationary_points", static_cast<int>(ctx.scan().points.size())}};
    if (cls == "all") {
        const InclusionReport rep = inclusion_audit(ctx);
        json rows = json::array();
        for (const auto& r : rep.rows)
            rows.push_back({{"first", to_string(r.first)},
                            {"second", to_string(r.second)},
                            {"first_status", to_string(r.first_status)},
                            {"second_status", to_string(r.second_status)},
                            {"violated", r.violated}});
        p["inclusion"] = {{"rows", rows}, {"any_violation", rep.any_violation}};
    }
    return {p, sha256_hex(text)};
}

Outcome cmd_saddle(const std::string& file, const std::string& point, const std::string& lambda,
                   const std::string& mu, const Common& c, std::ostream& out) {
    const std::string text = read_file(file);
    const ProblemDef P = parse_problem(text);
    const Vec x = parse_list(point, "--point");
    const Vec l = parse_list(lambda, "--lambda");
    const Vec m = P.m() == 0 && mu.empty() ? Vec(0) : parse_list(mu, "--mu");
    expect_size(x, P.s(), "--point");
    expect_size(l, P.n(), "--lambda");
    expect_size(m, P.m(), "--mu");
    validate_weights(P, l, &m);
    const SaddleVerdict v = check_saddle(P, l, x, m, c.search());
    out << (!v.left_ok ? "NotSaddle (left inequality fails)"
                       : v.counterexample ? "Counterexample" : "SaddleAtResolution");
    if (v.counterexample) out << " at " << fmt(v.x) << ", gap " << v.gap;
    out << "\n";
    json p = to_json(v);
    p["point"] = to_json(x);
    p["lambda"] = to_json(l);
    p["mu"] = to_json(m);
    return {p, sha256_hex(text)};
}

Outcome cmd_weighting(const std::string& file, const std::string& lambda, const Common& c, std::ostream& out) {
    const std::string text = read_file(file);
    const ProblemDef P = parse_problem(text);
    const Vec l = parse_list(lambda, "--lambda");
    expect_size(l, P.n(), "--lambda");
    validate_weights(P, l);
    const MinimizerSet ms = solve_weighting(P, l, c.search());
    out << "min <lambda,f> = " << ms.value << " at";
    for (const auto& cl : ms.clusters) out << " " << fmt(cl.point);
    out << "\n";
    json p = to_json(ms);
    p["lambda"] = to_json(l);
    return {p, sha256_hex(text)};
}

Outcome cmd_alternative(const std::string& file, std::ostream& out) {
    const std::string text = read_file(file);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw UsageError(std::string("malformed matrix file: ") + e.what());
    }
    if (!j.is_object()) throw UsageError("matrix file must hold a JSON object");
    AlternativeBlocks blk{matrix_from_json(j, "A"), matrix_from_json(j, "B"), matrix_from_json(j, "C"),
                          matrix_from_json(j, "D")};
    blk.validate();
    const AlternativeCertificate cert = decide_alternative(blk);
    const bool ok = verify_certificate(cert, blk);
    out << (cert.variant == AlternativeVariant::Sys7 ? "Sys7" : "Sys8") << ": first = " << fmt(cert.first)
        << ", second = " << fmt(cert.second) << (ok ? "" : " (verification FAILED)") << "\n";
    return {to_json(cert, ok), sha256_hex(text)};
}

Outcome cmd_reproduce(const std::string& which, const Common& c, std::ostream& out) {
    auto load = [&](const char* name, std::string* bytes = nullptr) {
        const std::string text = read_file(c.fixtures + "/" + name);
        if (bytes) *bytes = text;
        return parse_problem(text);
    };
    std::string main_text;
    json p;
    p["example"] = which;
    if (which == "4.1") {
        const ProblemDef A = load("exA.vopt", &main_text);
        const InvexityContext ctx(A, c.invexity());
        out << "example 4.1\n";
        print_scan(out, ctx.scan());
        p["scan"] = to_json(ctx.scan());
        const SaddleVerdict sv =
            check_saddle(A, ctx.cache(), Vec{{0.5, 0.5}}, Vec::Zero(2), Vec::Zero(1), c.search());
        out << "saddle at (0, 0), lambda = (0.5, 0.5), mu = 0: "
            << (sv.counterexample ? "Counterexample at " + fmt(sv.x) : std::string("SaddleAtResolution")) << "\n";
        p["saddle"] = to_json(sv);
        json v = json::array();
        for (auto k : {InvexityClass::KTSPInvex, InvexityClass::SecondOrderKTSPInvex}) {
            const auto cv = ctx.check(k);
            print_verdict(out, cv);
            v.push_back(to_json(cv));
        }
        p["verdicts"] = v;
    } else if (which == "5.1") {
        const ProblemDef B = load("exB.vopt", &main_text);
        const InvexityContext ctx(B, c.invexity());
        out << "example 5.1\n";
        print_scan(out, ctx.scan());
        p["scan"] = to_json(ctx.scan());
        json w = json::array();
        for (const Vec& l : {Vec{{1.0, 0.0}}, Vec{{0.0, 1.0}}}) {
            const MinimizerSet ms = solve_weighting(B, ctx.cache(), l, c.search());
            out << "weighting lambda = " << fmt(l) << ": value " << ms.value << " at";
            for (const auto& cl : ms.clusters) out << " " << fmt(cl.point);
            out << "\n";
            json j = to_json(ms);
            j["lambda"] = to_json(l);
            w.push_back(j);
        }
        p["weighting"] = w;
        json v = json::array();
        for (auto k : {InvexityClass::KTPseudoinvexI, InvexityClass::SecondOrderKTPseudoinvexI}) {
            const auto cv = ctx.check(k);
            print_verdict(out, cv);
            v.push_back(to_json(cv));
        }
        p["verdicts"] = v;
        const ProblemDef Pp = load("exB_prime.vopt");
        const InvexityContext pctx(Pp, c.invexity());
        out << "variant P':\n";
        print_scan(out, pctx.scan());
        const auto pv = pctx.check(InvexityClass::KTPseudoinvexI);
        print_verdict(out, pv);
        p["prime"] = {{"scan", to_json(pctx.scan())}, {"verdict", to_json(pv)}};
    } else if (which == "5.2") {
        const ProblemDef C = load("exC.vopt", &main_text);
        const InvexityContext ctx(C, c.invexity());
        out << "example 5.2\n";
        out << ctx.scan().points.size() << " KT point(s) on the segment, levels:";
        std::map<std::string, int> levels;
        for (const auto& pt : ctx.scan().points) ++levels[to_string(pt.verdict.level)];
        for (const auto& [k, n] : levels) out << " " << k << " x" << n;
        out << "\n";
        p["scan"] = to_json(ctx.scan());
        json v = json::array();
        for (auto k : {InvexityClass::KTPseudoinvexI, InvexityClass::SecondOrderKTPseudoinvexI}) {
            const auto cv = ctx.check(k);
            print_verdict(out, cv);
            v.push_back(to_json(cv));
        }
        p["verdicts"] = v;
    } else {
        throw UsageError("unknown example '" + which + "' (expected 4.1, 5.1 or 5.2)");
    }
    return {p, sha256_hex(main_text)};
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--tol", c.tol, "Activity and stationarity tolerance")->capture_default_str();
    sub->add_option("--grid", c.grid, "Grid points per axis (capped at 201^3 in total)")->capture_default_str();
    sub->add_option("--dirs", c.dirs, "Sampled critical directions per point")->capture_default_str();
    sub->add_option("--seed", c.seed, "Seed for direction and pair sampling")->capture_default_str();
    sub->add_option("--json", c.json_path, "Write the JSON report to PATH");
    sub->add_flag("--timing", c.timing, "Record wall-clock time in the report");
}

// Command echo without the output location, so reports do not depend on it.
json echo(const std::vector<std::string>& args) {
    json a = json::array();
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--json") {
            ++i;
            continue;
        }
        if (args[i].rfind("--json=", 0) == 0 || args[i] == "--timing") continue;
        a.push_back(args[i]);
    }
    return a;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Kuhn-Tucker analysis of smooth vector optimization problems"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Common c;
    std::string file, point, lambda, mu, cls = "all", which;

    auto* analyze = app.add_subcommand("analyze", "Classify one point and place it in the relation chain");
    analyze->add_option("problem", file, "Problem file")->required();
    analyze->add_option("--point", point, "Comma-separated coordinates")->required();
    auto* scan = app.add_subcommand("scan", "Find and classify KT points over the box");
    scan->add_option("problem", file, "Problem file")->required();
    auto* classify = app.add_subcommand("classify", "Invexity class verdicts");
    classify->add_option("problem", file, "Problem file")->required();
    classify->add_option("--class", cls, "Class name (e.g. ktsp-invex, so-kt-pseudoinvex-i) or 'all'")
        ->capture_default_str();
    auto* saddle = app.add_subcommand("saddle", "Saddle-point check of the scalar Lagrangian");
    saddle->add_option("problem", file, "Problem file")->required();
    saddle->add_option("--point", point, "Comma-separated coordinates")->required();
    saddle->add_option("--lambda", lambda, "Objective weights")->required();
    saddle->add_option("--mu", mu, "Constraint multipliers");
    auto* weighting = app.add_subcommand("weighting", "Solve the weighting problem");
    weighting->add_option("problem", file, "Problem file")->required();
    weighting->add_option("--lambda", lambda, "Objective weights")->required();
    auto* alternative = app.add_subcommand("alternative", "Decide the theorem-of-the-alternative pair");
    alternative->add_option("matrices", file, "JSON file with blocks A, B, C, D")->required();
    auto* reproduce = app.add_subcommand("reproduce-example", "Rerun a bundled worked example");
    reproduce->add_option("example", which, "4.1, 5.1 or 5.2")->required();
    reproduce->add_option("--fixtures", c.fixtures, "Directory holding the bundled problem files");
    for (auto* sub : {analyze, scan, classify, saddle, weighting, alternative, reproduce}) add_common(sub, c);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    if (c.grid < 2 || c.dirs < 0 || !(c.tol > 0.0)) {
        err << "error: --grid must be >= 2, --dirs >= 0 and --tol > 0\n";
        return 1;
    }

    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        if (*analyze) {
            o = cmd_analyze(file, point, c, out);
        } else if (*scan) {
            o = cmd_scan(file, c, out);
        } else if (*classify) {
            o = cmd_classify(file, cls, c, out);
        } else if (*saddle) {
            o = cmd_saddle(file, point, lambda, mu, c, out);
        } else if (*weighting) {
            o = cmd_weighting(file, lambda, c, out);
        } else if (*alternative) {
            o = cmd_alternative(file, out);
        } else {
            o = cmd_reproduce(which, c, out);
        }
    } catch (const ParseError& e) {
        err << file << ":" << e.line() << ":" << e.column() << ": " << e.what() << "\n";
        return e.exit_code();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    const double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    if (!c.json_path.empty()) {
        json report = {{"version", kVersion},
                       {"problem_sha256", o.digest},
                       {"command", echo(args)},
                       {"seed", c.seed},
                       {"payload", o.payload},
                       {"elapsed_ms", c.timing ? json(elapsed) : json(nullptr)}};
        std::ofstream f(c.json_path, std::ios::binary);
        if (!f) {
            err << "error: cannot write " << c.json_path << "\n";
            return 1;
        }
        f << report.dump(2) << "\n";
        if (!f) {
            err << "error: failed writing " << c.json_path << "\n";
            return 1;
        }
    }
    return 0;
}

}  // namespace vopt::cli
