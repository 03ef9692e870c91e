#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "wlf/runner.hpp"

using namespace wlf;

namespace {

constexpr int kUsage = 64;

struct Common {
    std::string model = "minkowski";
    std::vector<std::string> params;
    std::string weight;
    double tol = 1e-10;
    double t_end = 10.0;
    std::string N = "inf";
    std::vector<double> eps{0.0};
    std::string out = "wlf_out";
    std::string format = "csv,json";
    std::uint64_t seed = 0;
};

json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;
    }
}

json model_block(const Common& c) {
    json params = json::object();
    for (const auto& kv : c.params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--param " + kv + ": expected key=value");
        params[kv.substr(0, eq)] = parse_value(kv.substr(eq + 1));
    }
    json m = {{"builtin", c.model}, {"params", params}};
    if (!c.weight.empty()) {
        try {
            m["weight"] = json::parse(c.weight);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("--weight: ") + e.what());
        }
    }
    return m;
}

json output_block(const Common& c) {
    json formats = json::array();
    std::stringstream ss(c.format);
    for (std::string f; std::getline(ss, f, ',');)
        if (!f.empty()) formats.push_back(f);
    return {{"directory", c.out}, {"formats", formats}};
}

json base_config(const Common& c, const std::string& scenario) {
    json N = c.N == "inf" ? json("inf") : parse_value(c.N);
    return {{"scenario", scenario},
            {"seed", c.seed},
            {"model", model_block(c)},
            {"numeric", {{"tol", c.tol}, {"t_span", {0.0, c.t_end}}, {"N", N}, {"epsilon", c.eps}}},
            {"output", output_block(c)}};
}

void add_common(CLI::App* app, Common& c, bool model = true) {
    if (model) {
        app->add_option("--model", c.model, "builtin model name")->capture_default_str();
        app->add_option("--param", c.params, "model parameter key=value (repeatable)");
        app->add_option("--weight", c.weight, "weight block as JSON");
        app->add_option("--t-end", c.t_end, "end of the parameter interval")->capture_default_str();
        app->add_option("--N", c.N, "effective dimension, a number or inf")->capture_default_str();
        app->add_option("--eps", c.eps, "epsilon values (repeatable)");
    }
    app->add_option("--tol", c.tol, "integrator tolerance")->capture_default_str();
    app->add_option("--out", c.out, "output directory")->capture_default_str();
    app->add_option("--format", c.format, "comma-separated subset of csv,json")->capture_default_str();
    app->add_option("--seed", c.seed, "random seed")->capture_default_str();
}

void print_verdicts(const ScenarioResult& r) {
    for (const auto& [key, v] : r.verdicts) {
        std::printf("%-22s %-12s worst=%.4g limit=%.4g", key.c_str(), to_string(v.outcome).c_str(), v.worst, v.limit);
        if (!v.detail.empty()) std::printf("  %s", v.detail.c_str());
        std::printf("\n");
    }
}

int execute(const RunConfig& config) {
    auto result = run_scenario(config);
    const auto paths = emit_report(result, config);
    print_verdicts(result);
    for (const auto& p : paths) std::printf("wrote %s\n", p.c_str());
    return result.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weighted Lorentz-Finsler geometry toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override, format_override;
    auto* run = app.add_subcommand("run", "run a JSON config");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--out", out_override, "override output.directory");
    run->add_option("--format", format_override, "override output.formats (comma-separated)");

    Common suite_opts;
    int workers = 0;
    auto* suite = app.add_subcommand("suite", "the full invariant battery");
    add_common(suite, suite_opts, false);
    suite->add_option("--workers", workers, "worker threads (default WLF_WORKERS or hardware)");

    Common geo_opts;
    std::vector<double> x, v;
    auto* geodesic = app.add_subcommand("geodesic", "integrate one geodesic");
    add_common(geodesic, geo_opts);
    geodesic->add_option("--x", x, "initial point")->required()->delimiter(',');
    geodesic->add_option("--v", v, "initial velocity")->required()->delimiter(',');
    bool unit_speed = false;
    geodesic->add_flag("--unit-speed", unit_speed, "rescale a timelike velocity to F = 1");

    Common con_opts;
    auto* congruence = app.add_subcommand("congruence", "point congruence along one geodesic");
    add_common(congruence, con_opts);
    congruence->add_option("--x", x, "initial point")->required()->delimiter(',');
    congruence->add_option("--v", v, "initial velocity")->required()->delimiter(',');
    congruence->add_flag("--unit-speed", unit_speed, "rescale a timelike velocity to F = 1");

    Common cone_opts;
    int samples = 1024, expected = -1;
    auto* cones = app.add_subcommand("cones", "count cone components at a point");
    add_common(cones, cone_opts);
    cones->add_option("--x", x, "base point (default origin)")->delimiter(',');
    cones->add_option("--samples", samples, "angular samples")->capture_default_str();
    cones->add_option("--expected", expected, "expected component count");

    Common bm_opts;
    double K = 0.0;
    int directions = 8;
    auto* bonnet = app.add_subcommand("bonnet-myers", "conjugate-time sweep against pi sqrt(N/K)");
    add_common(bonnet, bm_opts);
    bonnet->add_option("--K", K, "lower Ricci bound Ric_N >= K F^2")->required();
    bonnet->add_option("--directions", directions, "number of directions")->capture_default_str();
    bonnet->add_option("--x", x, "base point (default origin)")->delimiter(',');

    Common surf_opts;
    double radius = 1.0;
    int resolution = 3;
    std::string expect_trapped;
    auto* surface = app.add_subcommand("surface", "lightlike normals and expansions of a round sphere");
    add_common(surface, surf_opts);
    surface->add_option("--radius", radius, "sphere radius")->capture_default_str();
    surface->add_option("--resolution", resolution, "samples per angle")->capture_default_str();
    surface->add_option("--expect-trapped", expect_trapped, "true or false")->check(CLI::IsMember({"true", "false"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try {
        if (*run) {
            auto config = load_run_config(config_path);
            if (!out_override.empty() || !format_override.empty()) {
                json j = config.echo;
                if (!out_override.empty()) j["output"]["directory"] = out_override;
                if (!format_override.empty()) {
                    Common c;
                    c.format = format_override;
                    j["output"]["formats"] = output_block(c)["formats"];
                }
                config = parse_run_config(j);
            }
            return execute(config);
        }
        if (*suite) {
            json j = {{"scenario", "suite"}, {"seed", suite_opts.seed}, {"output", output_block(suite_opts)}};
            auto config = parse_run_config(j);
            SuiteOptions so{workers > 0 ? workers : worker_count(), suite_opts.seed};
            auto result = run_suite(so);
            const auto paths = emit_report(result, config);
            print_verdicts(result);
            for (const auto& p : paths) std::printf("wrote %s\n", p.c_str());
            return result.exit_code();
        }
        json j;
        if (*geodesic || *congruence) {
            const bool g = geodesic->parsed();
            j = base_config(g ? geo_opts : con_opts, g ? "geodesic" : "congruence");
            j[g ? "geodesic" : "congruence"] = {{"x", x}, {"v", v}, {"unit_speed", unit_speed}};
        } else if (*cones) {
            j = base_config(cone_opts, "cones");
            j["cones"] = {{"x", x}, {"samples", samples}};
            if (expected >= 0) j["cones"]["expected"] = expected;
        } else if (*bonnet) {
            j = base_config(bm_opts, "bonnet_myers");
            j["bonnet_myers"] = {{"x", x}, {"K", K}, {"directions", directions}};
        } else if (*surface) {
            j = base_config(surf_opts, "surface");
            j["surface"] = {{"radius", radius}, {"resolution", resolution}};
            if (!expect_trapped.empty()) j["surface"]["expect_trapped"] = expect_trapped == "true";
        }
        return execute(parse_run_config(j));
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kUsage;
    } catch (const ParameterError& e) {
        std::fprintf(stderr, "parameter error: %s\n", e.what());
        return kUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
