#include <catch2/catch_amalgamated.hpp>

#include <stairwind/experiments.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

using namespace stairwind;
using namespace stairwind::lab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("stairwind_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.push_back("");
        rows.push_back(std::move(cells));
    }
    return rows;
}

json ring_widths() { return {{"tail", {{"kind", "zero"}}}, {"window_start", 0}, {"window", {"1/2"}}}; }

}  // namespace

TEST_CASE("boxes run reproduces the closed-form escape measures") {
    json cfg{{"widths", {{"tail", {{"kind", "reciprocal"}}}}},
             {"direction", {{"slope", "1/2"}}},
             {"m_max", 50},
             {"epsilon", "1/25"}};
    auto out = fresh_dir("boxes");
    RunResult res = run("boxes", cfg, {out});
    REQUIRE(res.exit_code == 0);
    auto rows = csv_rows(out / "boxes.csv");
    REQUIRE(rows.size() == 51);  // header + 50 data rows
    for (std::size_t i = 1; i < rows.size(); ++i) {
        std::int64_t m = std::stoll(rows[i][0]);
        CHECK(parse_rational_or_throw(rows[i][1]) == Rat(2, m + 2));
    }
    json summary = json::parse(slurp(out / "summary.json"));
    CHECK(summary["certified"] == true);   // 2/52 < 1/25
    CHECK(summary["first_within"] == 47);  // m = 48 is the first with 2/50 <= 1/25
}

TEST_CASE("every output file cross-references the manifest hash") {
    json cfg{{"widths", ring_widths()},
             {"direction", {{"slope", "2/7"}}},
             {"N", 1}};
    auto out = fresh_dir("sigma");
    RunResult res = run("sigma", cfg, {out});
    REQUIRE(res.exit_code == 0);
    json man = json::parse(slurp(out / "manifest.json"));
    std::string hash = man["hash"].get<std::string>();
    CHECK(hash.size() == 16);
    std::string csv = slurp(out / "sigma.csv");
    CHECK(csv.rfind("# manifest " + hash, 0) == 0);
    // the hash is a pure function of kind + params + version
    Manifest again{"sigma", cfg};
    CHECK(again.hash() == hash);
}

TEST_CASE("malformed rational in the config exits 2 with error JSON") {
    json cfg{{"widths", ring_widths()},
             {"direction", {{"slope", "1/0"}}},
             {"N", 1}};
    auto out = fresh_dir("badrat");
    RunResult res = run("sigma", cfg, {out});
    CHECK(res.exit_code == 2);
    json err = json::parse(slurp(out / "error.json"));
    CHECK(err["error"] == "invalid-config");
    CHECK(err["message"].get<std::string>().find("1/0") != std::string::npos);
}

TEST_CASE("float slopes are refused") {
    json cfg{{"widths", ring_widths()},
             {"direction", {{"slope", 0.285714}}},
             {"N", 1}};
    auto out = fresh_dir("floatslope");
    RunResult res = run("sigma", cfg, {out});
    CHECK(res.exit_code == 2);
}

TEST_CASE("hopf run is byte-for-byte deterministic") {
    json cfg{{"widths", ring_widths()},
             {"direction", {{"slope", "2521/8191"}}},
             {"start", {{"level", 0}, {"x", "17/64"}}},
             {"checkpoints", {100, 1000, 10000}},
             {"numerator",
              {{"N", 1},
               {"floor_q", 6},
               {"tents", {{{"level", 0}, {"center", "1/2"}, {"halfwidth", "1/4"}, {"height", "1"}}}}}},
             {"denominator", {{"N", 1}, {"floor_q", 6}}}};
    auto out1 = fresh_dir("hopf1");
    auto out2 = fresh_dir("hopf2");
    REQUIRE(run("hopf", cfg, {out1}).exit_code == 0);
    REQUIRE(run("hopf", cfg, {out2}).exit_code == 0);
    CHECK(slurp(out1 / "hopf.csv") == slurp(out2 / "hopf.csv"));
    CHECK(slurp(out1 / "summary.json") == slurp(out2 / "summary.json"));
    // the final ratio approaches the exact target
    auto rows = csv_rows(out1 / "hopf.csv");
    REQUIRE(rows.size() == 4);
    double dev = std::stod(rows.back()[5]);
    double target = to_double(parse_rational_or_throw(
        json::parse(slurp(out1 / "summary.json"))["target"].get<std::string>()));
    CHECK(dev < 0.05 * target);
}

TEST_CASE("maharam run emits density, residuals and manifest") {
    json cfg{{"widths", {{"tail", {{"kind", "constant"}, {"constant", "1/2"}}}}},
             {"direction", {{"slope", "1/64"}}},
             {"a", 0.1},
             {"cells", 256},
             {"cylinder_depth", 5}};
    auto out = fresh_dir("maharam");
    RunResult res = run("maharam", cfg, {out});
    REQUIRE(res.exit_code == 0);
    json summary = json::parse(slurp(out / "summary.json"));
    CHECK(summary["residual"].get<double>() < 1e-8);
    CHECK(summary["invariance_residual"].get<double>() < 1e-6);
    auto rows = csv_rows(out / "density.csv");
    CHECK(rows.size() == 257);  // header + one residue class of 256 cells
}

TEST_CASE("non-convergent maharam config exits 3 with a residual trace") {
    json cfg{{"widths", {{"tail", {{"kind", "constant"}, {"constant", "1/2"}}}}},
             {"direction", {{"slope", "1/3"}}},
             {"a", 0.3},
             {"cells", 8}};
    auto out = fresh_dir("maharam_bad");
    RunResult res = run("maharam", cfg, {out});
    CHECK(res.exit_code == 3);
    json err = json::parse(slurp(out / "error.json"));
    CHECK(err["error"] == "non-convergence");
    CHECK(err["residual_trace"].size() > 0);
}

TEST_CASE("windtree orbit run records the collision sequence") {
    json cfg{{"configuration", {{"s", "1"}, {"source", {{"type", "ringed"}, {"n", 1}}}}},
             {"slope", "2/7"},
             {"steps", 50},
             {"start", {{"tree_x", "1/2"}, {"tree_y", "1/2"}, {"s_coord", "1/5"}, {"quadrant", 2}}}};
    auto out1 = fresh_dir("wt1");
    auto out2 = fresh_dir("wt2");
    REQUIRE(run("windtree-orbit", cfg, {out1}).exit_code == 0);
    REQUIRE(run("windtree-orbit", cfg, {out2}).exit_code == 0);
    CHECK(slurp(out1 / "windtree.csv") == slurp(out2 / "windtree.csv"));
    auto rows = csv_rows(out1 / "windtree.csv");
    json summary = json::parse(slurp(out1 / "summary.json"));
    if (summary["end"] == "budget") CHECK(rows.size() == 52);  // header + start + 50 steps
    else CHECK(rows.size() >= 2);
}

TEST_CASE("theta scan flags slope zero and honors the budget monotonically") {
    json base{{"widths", ring_widths()},
              {"N", 1},
              {"hopf_ell", 2000},
              {"slopes", {"0", "2/7", "9973/31337", "1/2", "10007/31627"}}};

    json cfg_deep = base;
    cfg_deep["ell"] = 60;
    json cfg_shallow = base;
    cfg_shallow["ell"] = 2;

    auto count_flagged = [&](const json& cfg, const std::string& tag) {
        auto out = fresh_dir(tag);
        RunResult res = run("theta-scan", cfg, {out, 4});
        REQUIRE(res.exit_code == 0);
        auto rows = csv_rows(out / "theta_scan.csv");
        REQUIRE(rows.size() == 6);
        CHECK(rows[1][0] == "0/1");
        CHECK(rows[1][1] == "1");  // vertical slope carries a saddle connection
        int flagged = 0;
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i][1] == "1") ++flagged;
            else {
                CHECK(parse_rational_or_throw(rows[i][2]) > 0);  // eta
                CHECK(parse_rational_or_throw(rows[i][3]) > 0);  // iota
            }
        return flagged;
    };
    int deep = count_flagged(cfg_deep, "theta_deep");
    int shallow = count_flagged(cfg_shallow, "theta_shallow");
    CHECK(shallow <= deep);
    CHECK(deep >= 1);
}

TEST_CASE("theta scan of an empty grid emits a header-only CSV") {
    json cfg{{"widths", ring_widths()},
             {"N", 1},
             {"ell", 5},
             {"hopf_ell", 100},
             {"slopes", json::array()}};
    auto out = fresh_dir("theta_empty");
    REQUIRE(run("theta-scan", cfg, {out}).exit_code == 0);
    auto rows = csv_rows(out / "theta_scan.csv");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0] == std::vector<std::string>{"slope", "saddle", "eta", "iota", "hopf_dev"});
}

TEST_CASE("thread count never changes scan output bytes") {
    json cfg{{"widths", ring_widths()},
             {"N", 1},
             {"ell", 30},
             {"hopf_ell", 500},
             {"slopes", {"2/7", "1/3", "3/8", "2521/8191", "5/13", "9973/31337"}}};
    auto out1 = fresh_dir("theta_t1");
    auto out4 = fresh_dir("theta_t4");
    REQUIRE(run("theta-scan", cfg, {out1, 1}).exit_code == 0);
    REQUIRE(run("theta-scan", cfg, {out4, 4}).exit_code == 0);
    CHECK(slurp(out1 / "theta_scan.csv") == slurp(out4 / "theta_scan.csv"));
}

TEST_CASE("unknown subcommand and missing config file are reported cleanly") {
    auto out = fresh_dir("unknown");
    CHECK(run("frobnicate", json::object(), {out}).exit_code == 2);
    CHECK(run_file("sigma", "/nonexistent/config.json", {fresh_dir("noconf")}).exit_code == 2);
}

TEST_CASE("orbit plus partition plus uniform runs produce coherent files") {
    json ocfg{{"widths", ring_widths()},
              {"direction", {{"slope", "9973/31337"}}},
              {"start", {{"level", 0}, {"x", "17/64"}}},
              {"steps", 200}};
    auto oo = fresh_dir("orbit");
    REQUIRE(run("orbit", ocfg, {oo}).exit_code == 0);
    auto orows = csv_rows(oo / "orbit.csv");
    REQUIRE(orows.size() == 202);
    for (std::size_t i = 1; i < orows.size(); ++i) {
        std::int64_t lvl = std::stoll(orows[i][1]);
        CHECK(lvl >= 0);  // ring levels are {0, 1}
        CHECK(lvl <= 1);
    }

    json pcfg{{"widths", ring_widths()},
              {"direction", {{"slope", "9973/31337"}}},
              {"N", 1},
              {"ell", 10}};
    auto po = fresh_dir("partition");
    REQUIRE(run("partition", pcfg, {po}).exit_code == 0);
    json psum = json::parse(slurp(po / "summary.json"));
    CHECK(parse_rational_or_throw(psum["min_gap"].get<std::string>()) > 0);
    auto prows = csv_rows(po / "partition.csv");
    std::set<std::pair<std::string, std::string>> distinct_cuts;
    for (std::size_t i = 1; i < prows.size(); ++i) distinct_cuts.insert({prows[i][0], prows[i][1]});
    CHECK(psum["cuts"].get<std::int64_t>() == static_cast<std::int64_t>(distinct_cuts.size()));
    CHECK(prows.size() - 1 >= distinct_cuts.size());  // one row per source identity

    json ucfg{{"widths", ring_widths()},
              {"direction", {{"slope", "2521/8191"}}},
              {"checkpoints", {500, 5000}},
              {"numerator",
               {{"N", 1},
                {"floor_q", 6},
                {"tents", {{{"level", 1}, {"center", "1"}, {"halfwidth", "1/2"}, {"height", "1"}}}}}},
              {"denominator", {{"N", 1}, {"floor_q", 6}}},
              {"grid_per_level", 8}};
    auto uo = fresh_dir("uniform");
    REQUIRE(run("uniform", ucfg, {uo}).exit_code == 0);
    auto urows = csv_rows(uo / "uniform.csv");
    REQUIRE(urows.size() == 3);
    CHECK(std::stod(urows[2][1]) < std::stod(urows[1][1]));  // sup deviation shrinks
}
