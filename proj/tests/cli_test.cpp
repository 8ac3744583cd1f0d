#include <cstdio>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"

namespace vopt::cli {
namespace {

using nlohmann::json;

const std::string kDir = VOPT_FIXTURE_DIR;

struct Invocation {
    int code;
    std::string out;
    std::string err;
};

Invocation invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& tag) {
    return ::testing::TempDir() + "vopt_cli_" + tag + "_" +
           ::testing::UnitTest::GetInstance()->current_test_info()->name() + ".json";
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json report(std::vector<std::string> args, int expected_code = 0) {
    const std::string path = temp_path("report");
    args.push_back("--json");
    args.push_back(path);
    const Invocation r = invoke(args);
    EXPECT_EQ(r.code, expected_code) << r.err;
    return json::parse(slurp(path));
}

std::string write_temp(const std::string& tag, const std::string& text) {
    const std::string path = ::testing::TempDir() + "vopt_cli_" + tag;
    std::ofstream(path, std::ios::binary) << text;
    return path;
}

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Analyze, Levels) {
    const json a = report({"analyze", kDir + "/exA.vopt", "--point", "1,0"});
    EXPECT_EQ(a["payload"]["level"], "SecondOrderKT");
    EXPECT_GE(a["payload"]["directions_tested"].get<int>(), 64);
    const json b = report({"analyze", kDir + "/exA.vopt", "--point", "0,0"});
    EXPECT_EQ(b["payload"]["level"], "FirstOrderOnly");
    EXPECT_FALSE(b["payload"]["chain"]["in_weak_efficient"].get<bool>());
}

TEST(Analyze, InfeasiblePointExitsWithTwo) {
    const Invocation r = invoke({"analyze", kDir + "/exA.vopt", "--point", "2,2"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("infeasible"), std::string::npos);
}

TEST(Errors, UsageAndParseFailuresExitWithOne) {
    EXPECT_EQ(invoke({}).code, 1);
    EXPECT_EQ(invoke({"frobnicate"}).code, 1);
    EXPECT_EQ(invoke({"analyze", kDir + "/exA.vopt"}).code, 1);
    EXPECT_EQ(invoke({"analyze", kDir + "/exA.vopt", "--point", "1,x"}).code, 1);
    EXPECT_EQ(invoke({"analyze", kDir + "/exA.vopt", "--point", "1,0,0"}).code, 1);
    EXPECT_EQ(invoke({"scan", kDir + "/missing.vopt"}).code, 1);
    EXPECT_EQ(invoke({"classify", kDir + "/exA.vopt", "--class", "convex"}).code, 1);
    EXPECT_EQ(invoke({"weighting", kDir + "/exB.vopt", "--lambda", "0.7,0.7"}).code, 1);
    EXPECT_EQ(invoke({"reproduce-example", "9.9"}).code, 1);

    const std::string bad = write_temp("bad.vopt", "var x in [0, 1]\nmin x +* 2\n");
    const Invocation r = invoke({"scan", bad});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find(":2:"), std::string::npos) << r.err;
}

TEST(Errors, NoFeasiblePointExitsWithTwo) {
    const std::string p = write_temp("nofeas.vopt", "var x in [0, 1]\nmin x\nst 2 - x <= 0\n");
    EXPECT_EQ(invoke({"weighting", p, "--lambda", "1"}).code, 2);
    EXPECT_EQ(invoke({"classify", p}).code, 2);
}

TEST(Help, ExitsWithZero) { EXPECT_EQ(invoke({"--help"}).code, 0); }

TEST(Scan, ConvexQuadratic) {
    const std::string p = write_temp("sq.vopt", "var x1 in [-1, 1]\nmin x1^2\n");
    const json j = report({"scan", p});
    const auto& pts = j["payload"]["points"];
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_EQ(pts[0]["level"], "SecondOrderKT");
    EXPECT_NEAR(pts[0]["x"][0].get<double>(), 0.0, 1e-9);
}

TEST(Classify, KtspWitness) {
    const json j = report({"classify", kDir + "/exA.vopt", "--class", "ktsp-invex", "--seed", "42"});
    const auto& v = j["payload"]["verdicts"];
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0]["status"], "Falsified");
    EXPECT_NEAR(v[0]["witness"]["x"][0].get<double>(), 0.0, 1e-9);
    EXPECT_NEAR(v[0]["witness"]["x"][1].get<double>(), 0.0, 1e-9);
    EXPECT_EQ(j["seed"], 42);
}

TEST(Classify, AllClassesWithInclusionAudit) {
    const json j = report({"classify", kDir + "/exB_prime.vopt", "--grid", "81"});
    EXPECT_EQ(j["payload"]["verdicts"].size(), 8u);
    EXPECT_FALSE(j["payload"]["inclusion"]["any_violation"].get<bool>());
}

TEST(Saddle, Counterexample) {
    const Invocation r = invoke({"saddle", kDir + "/exA.vopt", "--point", "0,0", "--lambda", "0.5,0.5", "--mu", "0"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("Counterexample"), std::string::npos);
    const json j = report({"saddle", kDir + "/exA.vopt", "--point", "1,0", "--lambda", "1,0", "--mu", "0"});
    EXPECT_FALSE(j["payload"]["counterexample"].get<bool>());
}

TEST(Weighting, ExampleB) {
    const json j = report({"weighting", kDir + "/exB.vopt", "--lambda", "1,0"});
    EXPECT_NEAR(j["payload"]["value"].get<double>(), -1.0, 1e-9);
    EXPECT_EQ(j["payload"]["clusters"].size(), 2u);
}

TEST(Alternative, GordanPair) {
    const json j = report({"alternative", kDir + "/gordan.json"});
    EXPECT_EQ(j["payload"]["variant"], "Sys8");
    EXPECT_NEAR(j["payload"]["first"][0].get<double>(), 1.0, 1e-12);
    EXPECT_NEAR(j["payload"]["first"][1].get<double>(), 1.0, 1e-12);
    EXPECT_TRUE(j["payload"]["verified"].get<bool>());
    EXPECT_EQ(j["problem_sha256"], sha256_hex(slurp(kDir + "/gordan.json")));

    const std::string ragged = write_temp("ragged.json", R"({"A": [[1, 2], [3]]})");
    EXPECT_EQ(invoke({"alternative", ragged}).code, 1);
    const std::string junk = write_temp("junk.json", "not json");
    EXPECT_EQ(invoke({"alternative", junk}).code, 1);
}

TEST(Report, SchemaAndTiming) {
    const json j = report({"scan", kDir + "/exB_prime.vopt", "--grid", "41"});
    for (const char* key : {"version", "problem_sha256", "command", "seed", "payload", "elapsed_ms"})
        EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_EQ(j.size(), 6u);
    EXPECT_TRUE(j["elapsed_ms"].is_null());
    EXPECT_EQ(j["version"], kVersion);
    EXPECT_EQ(j["command"], json({"scan", kDir + "/exB_prime.vopt", "--grid", "41"}));
    const json t = report({"scan", kDir + "/exB_prime.vopt", "--grid", "41", "--timing"});
    EXPECT_TRUE(t["elapsed_ms"].is_number());
    EXPECT_EQ(t["payload"], j["payload"]);
}

TEST(Report, ByteIdenticalAcrossRuns) {
    const std::vector<std::string> args = {"classify", kDir + "/exA.vopt", "--grid", "61", "--seed", "7"};
    const std::string p1 = temp_path("a"), p2 = temp_path("b");
    auto a = args, b = args;
    a.insert(a.end(), {"--json", p1});
    b.insert(b.end(), {"--json", p2});
    ASSERT_EQ(invoke(a).code, 0);
    ASSERT_EQ(invoke(b).code, 0);
    EXPECT_EQ(slurp(p1), slurp(p2));
}

}  // namespace
}  // namespace vopt::cli
