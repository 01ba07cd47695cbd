#include <catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "spatx/errors.hpp"
#include "spatx/io.hpp"
#include "spatx/simulate.hpp"

using namespace spatx;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("spatx_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SPATX_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("csv parsing handles quotes, BOM and blank lines", "[io]") {
    const auto t = parse_csv("\xEF\xBB\xBF" "a,b\n\"x,1\",\"say \"\"hi\"\"\"\n\n2,3\n", "mem");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    CHECK(t.rows[0][0] == "x,1");
    CHECK(t.rows[0][1] == "say \"hi\"");
    CHECK(t.column("b") == 1);
    CHECK(t.column("zz") == -1);
    CHECK_THROWS_AS(parse_csv("a,b\n1\n", "mem"), ParseError);
}

TEST_CASE("number parsing names the location", "[io]") {
    CHECK(parse_double("1.5", "here") == 1.5);
    CHECK(parse_int("-3", "here") == -3);
    CHECK(parse_bool("true", "here"));
    CHECK_FALSE(parse_bool("0", "here"));
    try {
        parse_double("abc", "file.csv:3:x");
        FAIL("expected parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("file.csv:3:x") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_int("2.5", "w"), ParseError);
}

TEST_CASE("config records effective settings", "[io]") {
    auto c = Config::parse("# comment\ndesign = bernoulli\npi = 0.3  # trailing\n", "mem");
    CHECK(c.get("design", "x") == "bernoulli");
    CHECK(c.get_double("pi", 0.5) == 0.3);
    CHECK(c.get_int("k", 2) == 2);
    CHECK(c.used().count("k") == 1);
    CHECK_THROWS_AS(c.require("missing"), ValidationError);
    CHECK_THROWS_AS(Config::parse("no equals sign\n", "mem"), ParseError);
    c.set("a", "1");
    CHECK(c.canonical().find("a=1") != std::string::npos);
}

TEST_CASE("missing files are named", "[io]") {
    try {
        read_csv("/nonexistent/file.csv");
        FAIL("expected missing file");
    } catch (const MissingFileError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/file.csv") != std::string::npos);
    }
}

TEST_CASE("study files round trip through the writers", "[io]") {
    const auto st = fixtures::study("fam_j3_m2_cr");
    const auto dir = scratch("roundtrip");
    {
        std::ofstream a(dir / "individuals.csv"), b(dir / "locations.csv");
        write_individuals(a, st);
        write_locations(b, st);
    }
    const auto back = load_study((dir / "individuals.csv").string(), (dir / "locations.csv").string(),
                                 fixtures::config("fam_j3_m2_cr"));
    REQUIRE(back.people.size() == st.people.size());
    for (std::size_t i = 0; i < st.people.size(); ++i) CHECK(back.people[i].y == Approx(st.people[i].y).epsilon(1e-11));
    CHECK(back.assignment == st.assignment);
}

TEST_CASE("loader reports unknown references", "[io]") {
    const auto dir = scratch("badref");
    std::ofstream(dir / "loc.csv") << "id,region,x,y,treated\nL1,A,0,0,1\nL2,B,0,0,0\n";
    std::ofstream(dir / "ind.csv") << "id,region,x,y,outcome\nI1,A,0,0,1\nI2,C,0,0,1\n";
    CHECK_THROWS_AS(load_study((dir / "ind.csv").string(), (dir / "loc.csv").string(), Config{}), UnknownRegionError);
}

TEST_CASE("hashing is stable", "[io]") {
    CHECK(hex64(fnv1a("")) == "cbf29ce484222325");
    CHECK(fnv1a("a") != fnv1a("b"));
}

TEST_CASE("simulation is reproducible for a seed", "[io]") {
    SimulationSpec spec;
    spec.regions = 4;
    spec.individuals = 10;
    spec.locations = 2;
    spec.seed = 5;
    const auto a = simulate(spec), b = simulate(spec);
    std::ostringstream x, y;
    write_potential(x, a);
    write_potential(y, b);
    CHECK(x.str() == y.str());
    spec.seed = 6;
    std::ostringstream z;
    write_potential(z, simulate(spec));
    CHECK(z.str() != x.str());
    CHECK(spec.effect(0.0) == Approx(1.0));
    CHECK(spec.effect(0.6) == 0.0);
}

TEST_CASE("command line end to end", "[cli]") {
    const auto dir = scratch("cli");
    const std::string d = dir.string();
    REQUIRE(run_cli("simulate --seed 4 --out-dir " + d + "/sim --set sim.regions=6 --set sim.individuals=60 "
                    "--set sim.locations=2") == 0);
    const std::string in = " --individuals " + d + "/sim/individuals.csv --locations " + d + "/sim/locations.csv --config " +
                           d + "/sim/design.cfg";
    CHECK(run_cli("estimate" + in + " --method att --bins 0:0.5:0.25 --out-dir " + d + "/est") == 0);
    CHECK(fs::exists(dir / "est" / "effect_curve.csv"));
    CHECK(fs::exists(dir / "est" / "manifest.txt"));
    CHECK(slurp(dir / "est" / "manifest.txt").find("command=estimate") != std::string::npos);
    CHECK(run_cli("oracle" + in + " --potential " + d + "/sim/potential.csv --bins 0:0.5:0.25 --out-dir " + d + "/orc") == 0);
    CHECK(run_cli("aggregate" + in + " --dmax 0.5 --out-dir " + d + "/agg") == 0);
    CHECK(run_cli("parametric" + in + " --dmax 0.5 --out-dir " + d + "/par") == 0);
    CHECK(run_cli("estimate --individuals /nonexistent.csv --locations " + d + "/sim/locations.csv") == 2);
    CHECK(run_cli("estimate" + in + " --method nosuch") == 2);
    CHECK(run_cli("--help") == 0);
}
