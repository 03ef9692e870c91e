#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include "wlf/runner.hpp"

using namespace wlf;

namespace {

json minkowski(int n) { return {{"builtin", "minkowski"}, {"params", {{"n", n}}}}; }

json geodesic_config() {
    return {{"scenario", "geodesic"},
            {"model", minkowski(2)},
            {"numeric", {{"t_span", {0.0, 2.0}}, {"grid", 11}}},
            {"geodesic", {{"x", {0.0, 0.0, 0.0}}, {"v", {1.0, 0.3, 0.1}}}}};
}

std::string config_error(const json& j) {
    try {
        (void)parse_run_config(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

bool contains(const std::string& text, const std::string& part) { return text.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("config errors name the offending key") {
    auto j = geodesic_config();
    j["numeric"]["tolerance"] = 1e-8;
    CHECK(contains(config_error(j), "config.numeric.tolerance"));

    j = geodesic_config();
    j["numeric"]["tol"] = "small";
    CHECK(contains(config_error(j), "config.numeric.tol"));

    j = geodesic_config();
    j["numeric"]["tol"] = 0.5;
    CHECK(contains(config_error(j), "config.numeric.tol"));

    j = geodesic_config();
    j.erase("scenario");
    CHECK(contains(config_error(j), "scenario"));

    j = geodesic_config();
    j["numeric"]["t_span"] = {2.0, 1.0};
    CHECK(contains(config_error(j), "t_span"));

    j = geodesic_config();
    j["cones"] = json::object();
    CHECK(!config_error(j).empty());

    j = geodesic_config();
    j["scenario"] = "sailing";
    CHECK(!config_error(j).empty());

    CHECK(!config_error({{"scenario", "suite"}, {"model", minkowski(2)}}).empty());

    json c = {{"scenario", "congruence"}, {"model", minkowski(2)}, {"congruence", {{"x", {0, 0, 0}}, {"v", {1, 0, 0}}, {"J0", {{1, 0}, {0, 1}}}}}};
    CHECK(contains(config_error(c), "J0"));
    c["congruence"]["tensor"] = "custom";
    CHECK(contains(config_error(c), "J1"));
}

TEST_CASE("echo fills in defaults") {
    const auto c = parse_run_config(geodesic_config());
    CHECK(c.echo["seed"] == 0);
    CHECK(c.echo["numeric"]["tol"].get<double>() == 1e-10);
    CHECK(c.echo["numeric"]["N"] == "inf");
    CHECK(c.echo["output"]["directory"] == "wlf_out");
    CHECK(c.block["unit_speed"] == false);
    CHECK(c.numeric.grid == 11);
    // the echo is a fixed point of parsing
    CHECK(parse_run_config(c.echo).echo == c.echo);
}

TEST_CASE("geodesic scenario on Minkowski") {
    const auto c = parse_run_config(geodesic_config());
    const auto r = run_scenario(c);
    CHECK(r.exit_code() == 0);
    REQUIRE(r.verdicts.count("conservation"));
    CHECK(r.verdicts.at("conservation").outcome == Outcome::pass);
    CHECK(r.verdicts.at("extent").outcome == Outcome::pass);
    // straight line: x(2) = 2 v
    CHECK(std::abs(r.details["x_end"][1].get<double>() - 0.6) <= 1e-9);
    REQUIRE(r.tables.count("geodesic.csv"));
    const auto& csv = r.tables.at("geodesic.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 12);
}

TEST_CASE("summaries are reproducible and hashed") {
    const auto c = parse_run_config(geodesic_config());
    auto strip = [](std::string s) {
        auto j = json::parse(s);
        return j.dump();
    };
    const auto a = strip(summary_json(run_scenario(c), c));
    const auto b = strip(summary_json(run_scenario(c), c));
    CHECK(a == b);
    const auto s = json::parse(a);
    CHECK(s["config_hash"].get<std::string>().size() == 16);
    CHECK(s["version"] == kVersion);
    CHECK(s["exit_code"] == 0);

    auto other = geodesic_config();
    other["seed"] = 5;
    const auto c2 = parse_run_config(other);
    CHECK(json::parse(summary_json(run_scenario(c2), c2))["config_hash"] != s["config_hash"]);
}

TEST_CASE("fnv1a reference values") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("exit codes") {
    SUBCASE("non-Lorentzian model gives a failed verdict") {
        json j = geodesic_config();
        j["model"] = {{"expression_L", "0.5*(v0^2 + v1^2 + v2^2)"}, {"dim", 3}, {"future_seed", {1.0, 0.0, 0.0}}};
        const auto r = run_scenario(parse_run_config(j));
        REQUIRE(r.verdicts.count("model_integrity"));
        CHECK(r.exit_code() == 2);
    }
    SUBCASE("leaving the chart is inconclusive") {
        json j = geodesic_config();
        j["model"] = {{"builtin", "warped_product"}, {"params", {{"n", 2}, {"f", "exp"}, {"rate", 1.0}}}};
        j["numeric"]["t_span"] = {0.0, 50.0};
        j["geodesic"]["v"] = {1.0, 0.9, 0.0};
        const auto r = run_scenario(parse_run_config(j));
        CHECK(r.verdicts.at("extent").outcome == Outcome::inconclusive);
        CHECK(r.exit_code() == 3);
    }
}

TEST_CASE("cone counting scenario") {
    json j = {{"scenario", "cones"},
              {"model", {{"builtin", "beem"}, {"params", {{"k", 3}}}}},
              {"cones", {{"x", {0.0, 0.0}}, {"expected", 3}}}};
    auto r = run_scenario(parse_run_config(j));
    CHECK(r.verdicts.at("components").outcome == Outcome::pass);
    j["cones"]["expected"] = 2;
    r = run_scenario(parse_run_config(j));
    CHECK(r.verdicts.at("components").outcome == Outcome::fail);
}

TEST_CASE("Bonnet-Myers sweep") {
    SUBCASE("anti-de Sitter meets the bound") {
        const auto M = model_from_config({{"builtin", "constant_curvature"}, {"params", {{"n", 2}, {"K", 1.0}}}});
        BonnetMyersOptions o;
        o.x = {0.0, 0.0, 0.0};
        o.N = ExtendedReal(2.0);
        o.K = 2.0;
        o.directions = 4;
        const auto res = bonnet_myers_sweep(M, o);
        CHECK(res.outcome == Outcome::pass);
        CHECK(std::abs(res.bound - M_PI) <= 1e-12);
        for (const auto& row : res.rows) {
            REQUIRE(row.first_zero);
            CHECK(std::abs(*row.first_zero - M_PI) <= 1e-3);
        }
    }
    SUBCASE("flat space violates a positive lower bound") {
        json j = {{"scenario", "bonnet_myers"},
                  {"model", minkowski(2)},
                  {"numeric", {{"N", 3}}},
                  {"bonnet_myers", {{"x", {0.0, 0.0, 0.0}}, {"K", 1.0}, {"directions", 2}}}};
        const auto r = run_scenario(parse_run_config(j));
        CHECK(r.verdicts.at("ricci_lower_bound").outcome == Outcome::fail);
        CHECK(r.exit_code() == 2);
    }
    SUBCASE("K must be positive") {
        const auto M = model_from_config(minkowski(2));
        BonnetMyersOptions o;
        o.x = {0.0, 0.0, 0.0};
        o.N = ExtendedReal(3.0);
        o.K = 0.0;
        CHECK_THROWS_AS((void)bonnet_myers_sweep(M, o), ParameterError);
    }
}

TEST_CASE("custom tensor focuses where the oracle says") {
    // J = (2.5 - t) I, theta = -2 / (2.5 - t) at t = 0 is negative, first zero at 2.5
    json j = {{"scenario", "congruence"},
              {"model", minkowski(2)},
              {"numeric", {{"t_span", {0.0, 4.0}}}},
              {"congruence",
               {{"x", {0.0, 0.0, 0.0}},
                {"v", {1.0, 0.0, 0.0}},
                {"tensor", "custom"},
                {"J0", {{2.5, 0.0}, {0.0, 2.5}}},
                {"J1", {{-1.0, 0.0}, {0.0, -1.0}}}}}};
    const auto r = run_scenario(parse_run_config(j));
    REQUIRE(r.verdicts.count("focusing"));
    CHECK(r.verdicts.at("focusing").outcome == Outcome::pass);
    const auto& times = r.details["conjugate_times"];
    REQUIRE(times.size() >= 1);
    CHECK(std::abs(times[0]["t"].get<double>() - 2.5) <= 1e-3);
    for (const auto& [key, v] : r.verdicts) CHECK_MESSAGE(v.outcome == Outcome::pass, key);
}

TEST_CASE("round sphere patch") {
    Vec center(4);
    center << 0.3, 1.0, -2.0, 0.5;
    const auto patch = sphere_patch(4, center, 1.7);
    CHECK(patch.param_dim == 2);
    for (double a : {0.3, 1.1, 2.0})
        for (double b : {0.0, 2.5, 5.0}) {
            Vec p(2);
            p << a, b;
            const Vec x = patch.map(p);
            CHECK(x[0] == center[0]);
            CHECK(std::abs((x - center).tail(3).norm() - 1.7) <= 1e-12);
            CHECK(patch.outward(p)[0] == 0.0);
        }
    CHECK_THROWS_AS((void)sphere_patch(1, Vec::Zero(1), 1.0), ParameterError);
    CHECK_THROWS_AS((void)sphere_patch(3, Vec::Zero(2), 1.0), ParameterError);
}

TEST_CASE("surface scenario trapping") {
    json j = {{"scenario", "surface"},
              {"model",
               {{"builtin", "weighted"},
                {"params", {{"base", minkowski(3)}, {"weight", {{"type", "linear_t"}, {"lambda", -3.0}}}}}}},
              {"surface", {{"center", {0.0, 0.0, 0.0, 0.0}}, {"radius", 1.0}, {"expect_trapped", true}, {"focal", false}}}};
    auto r = run_scenario(parse_run_config(j));
    CHECK(r.verdicts.at("normals").outcome == Outcome::pass);
    CHECK(r.verdicts.at("psi_trapped").outcome == Outcome::pass);
    j["surface"]["expect_trapped"] = false;
    r = run_scenario(parse_run_config(j));
    CHECK(r.verdicts.at("psi_trapped").outcome == Outcome::fail);
}

TEST_CASE("emit_report writes the requested files") {
    const auto dir = std::filesystem::temp_directory_path() / ("wlf_report_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    auto j = geodesic_config();
    j["output"] = {{"directory", dir.string()}, {"formats", {"csv", "json"}}};
    const auto c = parse_run_config(j);
    auto r = run_scenario(c);
    const auto paths = emit_report(r, c);
    std::set<std::string> names;
    for (const auto& p : paths) {
        CHECK(std::filesystem::exists(p));
        names.insert(std::filesystem::path(p).filename().string());
    }
    CHECK(names.count("summary.json"));
    CHECK(names.count("geodesic.csv"));
    std::ifstream in(dir / "summary.json");
    const auto s = json::parse(in);
    CHECK(s["verdicts"]["conservation"]["outcome"] == "pass");

    j["output"]["formats"] = {"json"};
    std::filesystem::remove_all(dir);
    const auto c2 = parse_run_config(j);
    auto r2 = run_scenario(c2);
    for (const auto& p : emit_report(r2, c2)) CHECK(std::filesystem::path(p).extension() != ".csv");
    std::filesystem::remove_all(dir);
}

TEST_CASE("parallel_for covers every index and rethrows") {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(97, 4, [&](int i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
    CHECK_THROWS_AS(parallel_for(10, 3, [](int i) {
                        if (i == 7) throw ParameterError("seven");
                    }),
                    ParameterError);
}

TEST_CASE("weighted anti-de Sitter stays inside the weighted diameter bound") {
    auto M = model_from_config({{"builtin", "constant_curvature"},
                                {"params", {{"n", 2}, {"K", 1.0}}},
                                {"weight", {{"type", "linear_t"}, {"lambda", 0.2}}}});
    BonnetMyersOptions o;
    o.x = {0.0, 0.0, 0.0};
    o.N = ExtendedReal(4.0);
    o.K = 1.5;
    o.directions = 3;
    const auto res = bonnet_myers_sweep(M, o);
    CHECK(res.ricci_margin > 0.0);
    CHECK(res.outcome == Outcome::pass);
    CHECK(std::abs(res.bound - M_PI * std::sqrt(4.0 / 1.5)) <= 1e-12);
    for (const auto& row : res.rows) {
        REQUIRE(row.first_zero);
        CHECK(*row.first_zero < res.bound);
    }
}

TEST_CASE("point congruence in flat space has no conjugate points") {
    json j = {{"scenario", "congruence"},
              {"model", minkowski(2)},
              {"congruence", {{"x", {0.0, 0.0, 0.0}}, {"v", {1.0, 0.3, 0.0}}}}};
    const auto r = run_scenario(parse_run_config(j));
    CHECK(r.details["conjugate_verdict"] == "no conjugate points");
    CHECK(r.exit_code() == 0);
}
