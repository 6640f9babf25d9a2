#include <gtest/gtest.h>

#include <filesystem>

#include "cli.hpp"

namespace fs = std::filesystem;
using fracmin::cli::json;

namespace {

struct Run {
    int rc;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "fracmin");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int rc = fracmin::cli::run(int(argv.size()), argv.data(), out, err);
    return {rc, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

class Cli : public ::testing::Test {
protected:
    fs::path dir;
    void SetUp() override {
        dir = fs::temp_directory_path() / ("fracmin_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_F(Cli, Schedule) {
    const auto r = cli({"schedule", "--mu", "0.5", "--M", "4"});
    EXPECT_EQ(r.rc, 0);
    EXPECT_EQ(r.out, "k0=2 d=1/32\n");
    const auto j = json::parse(cli({"schedule", "--mu", "0.5", "--M", "4", "--json"}).out);
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_EQ(j["command"], "schedule");
    EXPECT_EQ(j["status"], "ok");
    EXPECT_EQ(j["result"]["k0"], 2);
    EXPECT_DOUBLE_EQ(j["result"]["d"].get<double>(), 1.0 / 32);
    EXPECT_DOUBLE_EQ(j["params"]["M"].get<double>(), 4.0);
}

TEST_F(Cli, CurvatureOfHalfspaceVanishes) {
    ASSERT_EQ(cli({"gen-fixture", "halfspace", "--grid", "64", "--out", path("hs.nlsg")}).rc, 0);
    const auto r = cli({"curvature", "--set", path("hs.nlsg"), "--json", "--out", path("c.json")});
    ASSERT_EQ(r.rc, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_NEAR(j["result"]["normalized"].get<double>(), 0.0, 1e-12);
    EXPECT_EQ(slurp(path("c.json")), r.out);
}

TEST_F(Cli, GenFixtureIsDeterministic) {
    for (const std::string name : {"cosine", "graph-cone"}) {
        ASSERT_EQ(cli({"gen-fixture", name, "--grid", "48", "--out", path("a.nlsg")}).rc, 0);
        ASSERT_EQ(cli({"gen-fixture", name, "--grid", "48", "--out", path("b.nlsg")}).rc, 0);
        EXPECT_EQ(slurp(path("a.nlsg")), slurp(path("b.nlsg")));
        EXPECT_GT(slurp(path("a.nlsg")).size(), 48u);
    }
    const auto bad = cli({"gen-fixture", "nonsense", "--out", path("x.nlsg")});
    EXPECT_EQ(bad.rc, 1);
    EXPECT_NE(bad.err.find("graph-quadratic"), std::string::npos);
}

TEST_F(Cli, HypothesisFailureNamesTheHypothesis) {
    ASSERT_EQ(cli({"gen-fixture", "halfspace", "--grid", "64", "--out", path("hs.nlsg")}).rc, 0);
    const auto bad = cli({"levelset-check", "--set", path("hs.nlsg"), "--gamma", "0.1", "--report", path("r.json")});
    EXPECT_EQ(bad.rc, 2);
    EXPECT_NE(bad.out.find("gamma/delta"), std::string::npos);
    const auto j = json::parse(slurp(path("r.json")));
    EXPECT_EQ(j["status"], "FAIL");
    EXPECT_EQ(j["hypothesis"], "gamma/delta");

    const auto good = cli({"levelset-check", "--set", path("hs.nlsg"), "--gamma", "0.005"});
    EXPECT_EQ(good.rc, 0);
    EXPECT_NE(good.out.find("PASS"), std::string::npos);
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(cli({}).rc, 64);
    EXPECT_EQ(cli({"schedule", "--mu", "abc", "--M", "4"}).rc, 64);
    EXPECT_EQ(cli({"schedule", "--mu", "0.5"}).rc, 64);
    EXPECT_EQ(cli({"schedule", "--mu", "0.5", "--M", "4", "--bogus"}).rc, 64);
    ASSERT_EQ(cli({"gen-fixture", "halfspace", "--grid", "32", "--out", path("hs.nlsg")}).rc, 0);
    EXPECT_EQ(cli({"curvature", "--set", path("hs.nlsg"), "--point", "1,2,3"}).rc, 64);
    EXPECT_EQ(cli({"curvature", "--set", path("missing.nlsg")}).rc, 1);
    EXPECT_EQ(cli({"minimize", "--data", "wobble:1"}).rc, 64);
    EXPECT_EQ(cli({"schedule", "--help"}).rc, 0);
    EXPECT_EQ(cli({"--version"}).rc, 0);
    // a value outside the allowed range is an error, not a usage problem
    EXPECT_EQ(cli({"schedule", "--mu", "1.5", "--M", "4"}).rc, 1);
}

TEST_F(Cli, ConfigFile) {
    {
        std::ofstream f(path("ok.cfg"));
        f << "# schedule\nmu = 0.5\nM = 8  # overridden below\njson = true\n";
    }
    const auto r = cli({"schedule", "--config", path("ok.cfg"), "--M", "4"});
    ASSERT_EQ(r.rc, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["result"]["k0"], 2);
    EXPECT_DOUBLE_EQ(j["params"]["M"].get<double>(), 4.0);

    {
        std::ofstream f(path("bad.cfg"));
        f << "mu = 0.5\nM = 4\nmystery = 1\n";
    }
    const auto bad = cli({"schedule", "--config", path("bad.cfg")});
    EXPECT_EQ(bad.rc, 64);
    EXPECT_NE(bad.err.find("mystery"), std::string::npos);
}

TEST_F(Cli, TablesAndChecks) {
    const auto b = cli({"barrier-check", "--samples", "8", "--csv", path("b.csv"), "--json"});
    EXPECT_EQ(b.rc, 2);  // the annulus curvature bound does not hold for every sample
    const auto j = json::parse(b.out);
    EXPECT_EQ(j["status"], "FAIL");
    EXPECT_TRUE(j["result"]["properties"]["pass"].get<bool>());
    const auto csv = slurp(path("b.csv"));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "radius,value,classical,classical_bound,pass");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);

    const auto s = cli({"sweep-s", "--s", "0.9,0.99", "--csv", path("s.csv")});
    EXPECT_EQ(s.rc, 0);
    EXPECT_EQ(slurp(path("s.csv")).substr(0, 34), "s,normalized,classical,abs_error,h");

    ASSERT_EQ(cli({"gen-fixture", "graph-quadratic", "--grid", "200", "--out", path("g.nlsg")}).rc, 0);
    EXPECT_EQ(cli({"abp", "--graph", path("g.nlsg")}).rc, 0);
    EXPECT_EQ(cli({"ring", "--graph", path("g.nlsg"), "--csv", path("r.csv")}).rc, 0);
    // schedule has no table
    EXPECT_EQ(cli({"schedule", "--mu", "0.5", "--M", "4", "--csv", path("x.csv")}).rc, 64);
}

TEST_F(Cli, MinimizeWritesSetAndTrace) {
    const auto r = cli({"minimize", "--data", "cosine:0.05", "--grid", "32", "--out", path("m.nlsg"), "--trace",
                        path("t.csv"), "--json"});
    ASSERT_EQ(r.rc, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_LT(j["result"]["final_energy"].get<double>(), j["result"]["initial_energy"].get<double>());
    EXPECT_EQ(j["params"]["data"], "cosine:0.05");
    const auto E = fracmin::nlsg::decode_voxels(fracmin::nlsg::read_file(path("m.nlsg")));
    EXPECT_EQ(E.grid.dims[0], 32);
    EXPECT_EQ(slurp(path("t.csv")).substr(0, 12), "sweep,energy");

    // same invocation, same bytes
    const auto again = cli({"minimize", "--data", "cosine:0.05", "--grid", "32", "--out", path("m.nlsg"), "--trace",
                            path("t.csv"), "--json"});
    EXPECT_EQ(again.out, r.out);
}
