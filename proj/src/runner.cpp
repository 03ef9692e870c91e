#include "wlf/runner.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

namespace wlf {

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::pass: return "pass";
        case Outcome::fail: return "fail";
        case Outcome::inconclusive: return "inconclusive";
    }
    return "?";
}

Verdict Verdict::check(std::string invariant, double worst, double limit, std::string detail) {
    Verdict v;
    v.invariant = std::move(invariant);
    v.worst = worst;
    v.limit = limit;
    v.detail = std::move(detail);
    v.outcome = worst <= limit ? Outcome::pass : Outcome::fail;
    return v;
}

int ScenarioResult::exit_code() const {
    bool inconclusive = false;
    for (const auto& [k, v] : verdicts) {
        if (v.outcome == Outcome::fail) return 2;
        if (v.outcome == Outcome::inconclusive) inconclusive = true;
    }
    return inconclusive ? 3 : 0;
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

int worker_count() {
    if (const char* env = std::getenv("WLF_WORKERS")) {
        char* end = nullptr;
        const long w = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && w >= 1 && w <= 256) return static_cast<int>(w);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int count, int workers, const std::function<void(int)>& f) {
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

namespace {

std::span<const double> span_of(const Vec& v) { return {v.data(), static_cast<size_t>(v.size())}; }

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

json num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

json vec_json(const Vec& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

// Strict reader for one config object.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) fail(path_, "expected an object");
    }

    [[noreturn]] static void fail(const std::string& path, const std::string& what) {
        throw ConfigError(path + ": " + what);
    }

    std::string at(const std::string& key) const { return path_ + "." + key; }

    const json* get(const std::string& key) {
        used_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    double number(const std::string& key, double def) {
        const json* v = get(key);
        if (!v) return def;
        if (!v->is_number()) fail(at(key), "expected a number");
        const double d = v->get<double>();
        if (!std::isfinite(d)) fail(at(key), "expected a finite number");
        return d;
    }

    double required_number(const std::string& key) {
        if (!j_.contains(key)) fail(at(key), "required");
        return number(key, 0.0);
    }

    int integer(const std::string& key, int def, int lo, int hi) {
        const json* v = get(key);
        if (!v) return def;
        if (!v->is_number_integer()) fail(at(key), "expected an integer");
        const auto i = v->get<long long>();
        if (i < lo || i > hi) fail(at(key), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return static_cast<int>(i);
    }

    bool boolean(const std::string& key, bool def) {
        const json* v = get(key);
        if (!v) return def;
        if (!v->is_boolean()) fail(at(key), "expected true or false");
        return v->get<bool>();
    }

    std::optional<bool> optional_boolean(const std::string& key) {
        if (!j_.contains(key)) return std::nullopt;
        return boolean(key, false);
    }

    std::string text(const std::string& key, const std::string& def) {
        const json* v = get(key);
        if (!v) return def;
        if (!v->is_string()) fail(at(key), "expected a string");
        return v->get<std::string>();
    }

    std::vector<double> numbers(const std::string& key, std::vector<double> def) {
        const json* v = get(key);
        if (!v) return def;
        if (!v->is_array()) fail(at(key), "expected an array of numbers");
        std::vector<double> out;
        for (size_t i = 0; i < v->size(); ++i) {
            const auto& e = (*v)[i];
            if (!e.is_number() || !std::isfinite(e.get<double>()))
                fail(at(key) + "[" + std::to_string(i) + "]", "expected a finite number");
            out.push_back(e.get<double>());
        }
        return out;
    }

    std::optional<Mat> matrix(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_array() || v->empty()) fail(at(key), "expected an array of rows");
        const size_t rows = v->size();
        Mat M;
        for (size_t r = 0; r < rows; ++r) {
            const auto& row = (*v)[r];
            const std::string p = at(key) + "[" + std::to_string(r) + "]";
            if (!row.is_array()) fail(p, "expected an array of numbers");
            if (r == 0) M.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(row.size()));
            if (row.size() != static_cast<size_t>(M.cols())) fail(p, "rows must have equal length");
            for (size_t c = 0; c < row.size(); ++c) {
                if (!row[c].is_number()) fail(p + "[" + std::to_string(c) + "]", "expected a number");
                M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
            }
        }
        return M;
    }

    ExtendedReal extended(const std::string& key, ExtendedReal def) {
        const json* v = get(key);
        if (!v) return def;
        if (v->is_string()) {
            const auto s = v->get<std::string>();
            if (s == "inf" || s == "+inf" || s == "infinity") return ExtendedReal::inf();
            fail(at(key), "expected a number or \"inf\"");
        }
        if (!v->is_number() || !std::isfinite(v->get<double>())) fail(at(key), "expected a number or \"inf\"");
        return ExtendedReal::finite(v->get<double>());
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) fail(at(it.key()), "unknown key");
    }

private:
    json j_;
    std::string path_;
    std::set<std::string> used_;
};

json extended_json(const ExtendedReal& N) { return N.is_infinite() ? json("inf") : json(N.value); }

json matrix_json(const Mat& M) {
    json rows = json::array();
    for (int r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        rows.push_back(row);
    }
    return rows;
}

const std::vector<std::string> kScenarios{"geodesic", "congruence", "cones", "bonnet_myers", "surface", "suite"};

}  // namespace

RunConfig parse_run_config(const json& j) {
    Reader top(j, "config");
    RunConfig c;
    c.scenario = top.text("scenario", "");
    if (c.scenario.empty()) Reader::fail("config.scenario", "required");
    if (std::find(kScenarios.begin(), kScenarios.end(), c.scenario) == kScenarios.end())
        Reader::fail("config.scenario", "unknown scenario \"" + c.scenario + "\"");
    {
        const json* s = top.get("seed");
        if (s) {
            if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<long long>() >= 0))
                Reader::fail("config.seed", "expected a non-negative integer");
            c.seed = s->get<std::uint64_t>();
        }
    }
    if (const json* m = top.get("model")) {
        if (!m->is_object()) Reader::fail("config.model", "expected an object");
        c.model = *m;
    } else if (c.scenario != "suite") {
        Reader::fail("config.model", "required");
    }
    if (c.scenario == "suite" && !c.model.is_null()) Reader::fail("config.model", "the suite builds its own models");

    if (const json* nb = top.get("numeric")) {
        Reader r(*nb, "config.numeric");
        auto& n = c.numeric;
        n.tol = r.number("tol", n.tol);
        if (!(n.tol > 0 && n.tol < 1e-2)) Reader::fail("config.numeric.tol", "must lie in (0, 1e-2)");
        const auto span = r.numbers("t_span", {n.t_start, n.t_end});
        if (span.size() != 2 || !(span[1] > span[0])) Reader::fail("config.numeric.t_span", "expected [t0, t1] with t1 > t0");
        n.t_start = span[0];
        n.t_end = span[1];
        n.grid = r.integer("grid", n.grid, 0, 1000000);
        n.N = r.extended("N", n.N);
        n.epsilons = r.numbers("epsilon", n.epsilons);
        if (n.epsilons.empty()) Reader::fail("config.numeric.epsilon", "needs at least one value");
        n.fixed_step = r.boolean("fixed_step", n.fixed_step);
        n.step = r.number("step", n.step);
        if (!(n.step > 0)) Reader::fail("config.numeric.step", "must be positive");
        r.finish();
    }
    if (const json* ob = top.get("output")) {
        Reader r(*ob, "config.output");
        c.output.directory = r.text("directory", c.output.directory);
        if (c.output.directory.empty()) Reader::fail("config.output.directory", "must not be empty");
        if (const json* f = r.get("formats")) {
            if (!f->is_array()) Reader::fail("config.output.formats", "expected an array");
            c.output.csv = c.output.json = false;
            for (const auto& e : *f) {
                if (e == "csv")
                    c.output.csv = true;
                else if (e == "json")
                    c.output.json = true;
                else
                    Reader::fail("config.output.formats", "formats are csv and json");
            }
        }
        r.finish();
    }

    // Scenario block.
    json block = json::object();
    const auto& sc = c.scenario;
    if (sc == "geodesic" || sc == "congruence") {
        const json* b = top.get(sc);
        if (!b) Reader::fail("config." + sc, "required");
        Reader r(*b, "config." + sc);
        block["x"] = r.numbers("x", {});
        block["v"] = r.numbers("v", {});
        if (block["x"].empty()) Reader::fail("config." + sc + ".x", "required");
        if (block["v"].empty()) Reader::fail("config." + sc + ".v", "required");
        block["unit_speed"] = r.boolean("unit_speed", false);
        if (sc == "congruence") {
            const auto tensor = r.text("tensor", "point");
            if (tensor != "point" && tensor != "custom") Reader::fail("config.congruence.tensor", "expected point or custom");
            block["tensor"] = tensor;
            auto J0 = r.matrix("J0");
            auto J1 = r.matrix("J1");
            if (tensor == "custom") {
                if (!J0 || !J1) Reader::fail("config.congruence", "custom tensors need J0 and J1");
                block["J0"] = matrix_json(*J0);
                block["J1"] = matrix_json(*J1);
            } else if (J0 || J1) {
                Reader::fail("config.congruence", "J0 and J1 are only used with tensor = custom");
            }
        }
        r.finish();
    } else if (sc == "cones") {
        Reader r(top.get(sc) ? *top.get(sc) : json::object(), "config.cones");
        block["x"] = r.numbers("x", {});
        block["samples"] = r.integer("samples", 1024, 64, 1 << 20);
        if (j.contains("cones") && j["cones"].contains("expected"))
            block["expected"] = r.integer("expected", 0, 0, 1000);
        r.finish();
    } else if (sc == "bonnet_myers") {
        const json* b = top.get(sc);
        if (!b) Reader::fail("config.bonnet_myers", "required");
        Reader r(*b, "config.bonnet_myers");
        block["x"] = r.numbers("x", {});
        block["K"] = r.required_number("K");
        block["directions"] = r.integer("directions", 8, 1, 4096);
        block["spread"] = r.number("spread", 0.6);
        block["t_max"] = r.number("t_max", 0.0);
        r.finish();
    } else if (sc == "surface") {
        const json* b = top.get(sc);
        if (!b) Reader::fail("config.surface", "required");
        Reader r(*b, "config.surface");
        block["center"] = r.numbers("center", {});
        block["radius"] = r.required_number("radius");
        if (!(block["radius"].get<double>() > 0)) Reader::fail("config.surface.radius", "must be positive");
        block["resolution"] = r.integer("resolution", 3, 1, 64);
        block["focal"] = r.boolean("focal", true);
        if (auto e = r.optional_boolean("expect_trapped")) block["expect_trapped"] = *e;
        r.finish();
    } else if (sc == "suite") {
        Reader r(top.get(sc) ? *top.get(sc) : json::object(), "config.suite");
        r.finish();
    }
    for (const auto& other : kScenarios)
        if (other != sc && j.contains(other)) Reader::fail("config." + other, "block does not match scenario " + sc);
    top.finish();
    c.block = block;

    json echo;
    echo["scenario"] = c.scenario;
    echo["seed"] = c.seed;
    if (!c.model.is_null()) echo["model"] = c.model;
    echo["numeric"] = {{"tol", c.numeric.tol},
                       {"t_span", {c.numeric.t_start, c.numeric.t_end}},
                       {"grid", c.numeric.grid},
                       {"N", extended_json(c.numeric.N)},
                       {"epsilon", c.numeric.epsilons},
                       {"fixed_step", c.numeric.fixed_step},
                       {"step", c.numeric.step}};
    json formats = json::array();
    if (c.output.csv) formats.push_back("csv");
    if (c.output.json) formats.push_back("json");
    echo["output"] = {{"directory", c.output.directory}, {"formats", formats}};
    echo[c.scenario] = block;
    c.echo = echo;
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    json j;
    try {
        j = json::parse(in, nullptr, true, false);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_run_config(j);
}

SurfacePatch sphere_patch(int dim, const Vec& center, double radius) {
    const int n = dim - 1;
    if (n < 2) throw ParameterError("round spheres need n >= 2");
    if (center.size() != dim) throw ParameterError("sphere center must have dim entries");
    SurfacePatch p;
    p.param_dim = n - 1;
    p.map = [n, center, radius](const Vec& a) {
        Vec x = center;
        double s = 1.0;
        for (int i = 0; i < n - 1; ++i) {
            x[1 + i] += radius * s * std::cos(a[i]);
            s *= std::sin(a[i]);
        }
        x[n] += radius * s;
        return x;
    };
    p.outward = [p, center](const Vec& a) {
        Vec d = p.map(a) - center;
        d[0] = 0.0;
        return d;
    };
    p.step = 1e-3;
    return p;
}

BonnetMyersResult bonnet_myers_sweep(const SpacetimeModel& model, const BonnetMyersOptions& o) {
    const int n = model.n();
    if (!(o.K > 0)) throw ParameterError("Bonnet-Myers needs K > 0");
    if (o.N.is_infinite() || o.N.value < n) throw ParameterError("Bonnet-Myers needs finite N >= n");
    if (static_cast<int>(o.x.size()) != model.dim) throw ParameterError("base point must have dim entries");
    BonnetMyersResult res;
    res.K = o.K;
    res.N = o.N;
    res.bound = std::numbers::pi * std::sqrt(o.N.value / o.K);
    const double t_max = o.t_max > 0 ? o.t_max : 1.2 * res.bound + 0.5;

    // Fan of unit timelike directions around the seed.
    std::vector<Vec> dirs;
    const Vec seed = to_vec(model.future_seed);
    for (int i = 0; i < o.directions; ++i) {
        Vec v = seed;
        const double phi = 2.0 * std::numbers::pi * i / o.directions;
        if (n >= 2) {
            v[1] += o.spread * std::cos(phi);
            v[2] += o.spread * std::sin(phi);
        } else {
            v[1] += o.directions > 1 ? o.spread * (2.0 * i / (o.directions - 1) - 1.0) : 0.0;
        }
        dirs.push_back(v);
    }
    const double slack = 1e-8 * std::max(1.0, o.K);
    std::vector<BonnetMyersRow> rows(dirs.size());
    std::vector<double> margins(dirs.size(), std::numeric_limits<double>::infinity());
    parallel_for(static_cast<int>(dirs.size()), o.workers, [&](int i) {
        GeodesicOptions go;
        go.t_end = t_max;
        go.tol = o.tol;
        go.unit_speed = true;
        const auto path = point_congruence_tensor(model, o.x, span_of(dirs[i]), go);
        const auto& sol = path.geodesic;
        double margin = std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < sol.t.size(); ++k) {
            const Vec x = sol.x(k), v = sol.v(k);
            const double F2 = -2.0 * model.L(span_of(x), span_of(v));
            const double ric = weighted_ricci(model, span_of(x), span_of(v), o.N);
            margin = std::min(margin, ric - o.K * F2);
            if (ric < o.K * F2 - slack) {
                std::ostringstream w;
                w << "Ric_N = " << format_number(ric) << " < K F^2 = " << format_number(o.K * F2) << " at t = "
                  << format_number(sol.t[k]) << " on direction " << i;
                throw PreconditionError(w.str());
            }
        }
        margins[i] = margin;
        BonnetMyersRow row;
        row.direction = sol.v(0);
        row.bound = res.bound;
        const auto zeros = detect_conjugate_points(path);
        if (!zeros.empty()) {
            row.first_zero = zeros.front().t;
            row.satisfied = *row.first_zero <= res.bound + o.zero_tol;
            row.note = "zero";
        } else if (!sol.reached_end() && sol.t_end() < res.bound) {
            row.note = "chart exit";
        } else {
            row.note = "no zero";
        }
        rows[i] = row;
    });
    res.rows = std::move(rows);
    res.ricci_margin = *std::min_element(margins.begin(), margins.end());
    bool any_fail = false, any_open = false;
    for (const auto& r : res.rows) {
        if (r.note == "chart exit")
            any_open = true;
        else if (!r.satisfied)
            any_fail = true;
    }
    res.outcome = any_fail ? Outcome::fail : any_open ? Outcome::inconclusive : Outcome::pass;
    return res;
}

FocusingCheck focusing_check(const CongruenceReport& rep, const JacobiTensorPath& path, size_t eps_index) {
    FocusingCheck out;
    if (rep.rows.empty()) {
        out.note = "no rows in the invertibility window";
        return out;
    }
    const auto& first = rep.rows.front();
    if (!(first.theta_eps < 0.0)) {
        out.note = "theta_eps(t0) >= 0";
        return out;
    }
    if (!(rep.min_ricN >= 0.0)) {
        out.note = "Ric_N(eta*) >= 0 fails on the run";
        return out;
    }
    const auto s0 = s0_prediction(first.theta_eps, first.t, rep.c, path.geodesic, eps_index);
    out.s0 = s0.s0;
    Verdict v;
    v.invariant = "det J vanishes in [t0, t0 + s0] plus one grid cell";
    if (!s0.s0) {
        v.outcome = Outcome::inconclusive;
        v.detail = s0.outcome;
        out.note = s0.outcome;
        out.verdict = v;
        return out;
    }
    const auto& ts = path.geodesic.t;
    const double end = first.t + *s0.s0;
    auto it = std::lower_bound(ts.begin(), ts.end(), end);
    const double cell = (it == ts.end() || it == ts.begin()) ? 0.0 : *it - *(it - 1);
    v.limit = end + cell;
    double zero = std::numeric_limits<double>::infinity();
    for (const auto& cp : rep.conjugate_times)
        if (cp.t >= first.t) {
            zero = cp.t;
            break;
        }
    v.worst = zero;
    if (std::isfinite(zero)) {
        v.outcome = zero <= v.limit ? Outcome::pass : Outcome::fail;
    } else if (!path.geodesic.reached_end() && path.geodesic.t_end() < v.limit) {
        v.outcome = Outcome::inconclusive;
        v.detail = "geodesic left the chart before t0 + s0";
    } else {
        v.outcome = Outcome::fail;
        v.detail = "no zero of det J";
    }
    out.note = v.detail.empty() ? "bound" : v.detail;
    out.verdict = v;
    return out;
}

namespace {

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

std::vector<double> output_times(const GeodesicSolution& sol, int grid) {
    if (grid <= 0) return sol.t;
    std::vector<double> ts;
    const double a = sol.t_begin(), b = sol.t_end();
    for (int i = 0; i < grid; ++i) ts.push_back(grid == 1 ? a : a + (b - a) * i / (grid - 1));
    return ts;
}

Vec point_from(const json& a, int dim, const std::string& path, bool default_zero) {
    std::vector<double> v = a.get<std::vector<double>>();
    if (v.empty() && default_zero) v.assign(dim, 0.0);
    if (static_cast<int>(v.size()) != dim)
        throw ConfigError(path + ": expected " + std::to_string(dim) + " entries for this model");
    return to_vec(v);
}

GeodesicOptions geodesic_options(const RunConfig& c) {
    GeodesicOptions o;
    o.t_start = c.numeric.t_start;
    o.t_end = c.numeric.t_end;
    o.tol = c.numeric.tol;
    o.fixed_step = c.numeric.fixed_step;
    o.fixed_step_size = c.numeric.step;
    o.epsilons = c.numeric.epsilons;
    o.unit_speed = c.block.value("unit_speed", false);
    return o;
}

void extent_verdict(ScenarioResult& r, const GeodesicSolution& sol) {
    Verdict v;
    v.invariant = "integration reaches t_end";
    v.worst = sol.t_end();
    v.limit = sol.options.t_end;
    v.detail = to_string(sol.status) + (sol.message.empty() ? "" : ": " + sol.message);
    v.outcome = sol.status == OdeStatus::completed ? Outcome::pass
                : sol.status == OdeStatus::boundary ? Outcome::inconclusive
                                                     : Outcome::fail;
    r.verdicts["extent"] = v;
}

void run_geodesic(ScenarioResult& r, const SpacetimeModel& M, const RunConfig& c) {
    const Vec x = point_from(c.block["x"], M.dim, "config.geodesic.x", false);
    const Vec v = point_from(c.block["v"], M.dim, "config.geodesic.v", false);
    const auto sol = integrate_geodesic(M, span_of(x), span_of(v), geodesic_options(c));
    double drift = 0.0;
    const auto ts = output_times(sol, c.numeric.grid);
    for (size_t i = 0; i < sol.t.size(); ++i)
        drift = std::max(drift, std::abs(M.L(span_of(sol.x(i)), span_of(sol.v(i))) - sol.L_value));
    for (double t : ts) drift = std::max(drift, std::abs(M.L(span_of(sol.x_at(t)), span_of(sol.v_at(t))) - sol.L_value));
    const double rel = drift / std::max(1.0, std::abs(sol.L_value));
    r.verdicts["conservation"] =
        Verdict::check("sup |L(eta') - L(eta'(0))| relative", rel, std::max(1e-7, 1e3 * c.numeric.tol));
    extent_verdict(r, sol);
    json d;
    d["side"] = sol.side == Side::timelike ? "timelike" : "null";
    d["L0"] = num(sol.L_value);
    d["t_reached"] = num(sol.t_end());
    d["status"] = to_string(sol.status);
    d["steps"] = sol.t.size() - 1;
    d["error_estimate"] = num(sol.error_estimate);
    d["x_end"] = vec_json(sol.x(sol.t.size() - 1));
    d["v_end"] = vec_json(sol.v(sol.t.size() - 1));
    json taus = json::object();
    for (size_t e = 0; e < sol.epsilons.size(); ++e) taus[format_number(sol.epsilons[e])] = num(sol.tau(e, sol.t.size() - 1));
    d["tau_end"] = taus;
    r.details = d;

    std::ostringstream csv, plot;
    csv << "t";
    for (int i = 0; i < M.dim; ++i) csv << ",x" << i;
    for (int i = 0; i < M.dim; ++i) csv << ",v" << i;
    csv << ",L,psi";
    for (double e : sol.epsilons) csv << ",tau_" << format_number(e);
    csv << "\n";
    plot << "series,t,value\n";
    for (double t : ts) {
        const Vec xs = sol.x_at(t), vs = sol.v_at(t);
        const double L = M.L(span_of(xs), span_of(vs));
        const double psi = M.weighted() ? M.psi(span_of(xs), span_of(vs)) : 0.0;
        csv << format_number(t);
        for (double q : xs) csv << ',' << format_number(q);
        for (double q : vs) csv << ',' << format_number(q);
        csv << ',' << format_number(L) << ',' << format_number(psi);
        for (size_t e = 0; e < sol.epsilons.size(); ++e) csv << ',' << format_number(sol.tau_at(e, t));
        csv << "\n";
        plot << "L," << format_number(t) << ',' << format_number(L) << "\n";
        plot << "psi," << format_number(t) << ',' << format_number(psi) << "\n";
    }
    r.tables["geodesic.csv"] = csv.str();
    r.tables["plot.csv"] = plot.str();
}

void focusing_verdict(ScenarioResult& r, const std::string& key, const CongruenceReport& rep,
                      const JacobiTensorPath& path, size_t e_idx, json& out) {
    const auto f = focusing_check(rep, path, e_idx);
    out["focusing"] = f.note;
    if (f.s0) out["s0"] = num(*f.s0);
    if (f.verdict) r.verdicts[key] = *f.verdict;
}

void congruence_verdicts(ScenarioResult& r, const std::string& suffix, const CongruenceReport& rep, bool lagrange) {
    r.verdicts["jacobi" + suffix] = Verdict::check("weighted Jacobi residual", rep.max_jacobi, 1e-6);
    r.verdicts["riccati" + suffix] = Verdict::check("weighted Riccati residual", rep.max_riccati, 1e-6);
    r.verdicts["raychaudhuri" + suffix] =
        Verdict::check("Raychaudhuri residual (" + to_string(rep.form) + " form)", rep.max_raychaudhuri, 1e-6);
    r.verdicts["inequality" + suffix] =
        Verdict::check("theta* + c theta^2 + trace sigma^2 + Ric_N <= 0", rep.max_inequality, 1e-6);
    if (rep.side == Side::timelike)
        r.verdicts["bishop" + suffix] = Verdict::check("xi** <= -c xi Ric_N", rep.max_bishop, 1e-6);
    r.verdicts["expansion" + suffix] =
        Verdict::check("theta_eps = e^{k psi}(theta - psi')", rep.max_expansion_consistency, 1e-7);
    r.verdicts["trace_free" + suffix] = Verdict::check("trace sigma_eps = 0", rep.max_trace_free, 1e-9);
    if (std::isfinite(rep.min_ricN))
        r.verdicts["ricci_trace" + suffix] = Verdict::check("trace R_(N,eps) = Ric_N(eta*)", rep.max_ricci_trace, 1e-7);
    if (lagrange) r.verdicts["lagrange" + suffix] = Verdict::check("J'^T h J symmetric", rep.max_lagrange, 1e-7);
    Verdict nt = Verdict::check("min singular value of [J; J'] relative", -rep.min_nontriviality, -1e-10);
    nt.worst = rep.min_nontriviality;
    nt.limit = 1e-10;
    r.verdicts["nontriviality" + suffix] = nt;
}

json conjugate_json(const std::vector<ConjugatePoint>& cps) {
    json a = json::array();
    for (const auto& cp : cps)
        a.push_back({{"t", num(cp.t)}, {"error", num(cp.error)}, {"multiplicity", cp.multiplicity}, {"tangency", cp.tangency}});
    return a;
}

void congruence_tables(ScenarioResult& r, const std::string& suffix, const CongruenceReport& rep) {
    std::ostringstream csv, plot;
    write_congruence_csv(csv, rep);
    r.tables["congruence" + suffix + ".csv"] = csv.str();
    plot << "series,t,value\n";
    for (const auto& row : rep.rows) {
        const std::string t = format_number(row.t);
        plot << "theta," << t << ',' << format_number(row.theta) << "\n";
        plot << "theta_eps," << t << ',' << format_number(row.theta_eps) << "\n";
        plot << "sigma_eps2," << t << ',' << format_number(row.sigma_eps_norm2) << "\n";
        plot << "ricN," << t << ',' << format_number(row.ricN_etastar) << "\n";
        plot << "residual," << t << ',' << format_number(row.raychaudhuri_residual) << "\n";
    }
    r.tables["plot" + suffix + ".csv"] = plot.str();
}

void run_congruence(ScenarioResult& r, const SpacetimeModel& M, const RunConfig& c) {
    const Vec x = point_from(c.block["x"], M.dim, "config.congruence.x", false);
    const Vec v = point_from(c.block["v"], M.dim, "config.congruence.v", false);
    auto go = geodesic_options(c);
    JacobiTensorPath path;
    if (c.block["tensor"] == "custom") {
        const auto read = [&](const char* key) {
            Reader rd(json{{key, c.block[key]}}, "config.congruence");
            return *rd.matrix(key);
        };
        path = jacobi_tensor_path(M, span_of(x), span_of(v), read("J0"), read("J1"), go);
    } else {
        path = point_congruence_tensor(M, span_of(x), span_of(v), go);
    }
    extent_verdict(r, path.geodesic);
    json d;
    d["side"] = path.geodesic.side == Side::timelike ? "timelike" : "null";
    d["m"] = path.m();
    d["tensor"] = to_string(path.kind);
    d["lagrange"] = path.lagrange;
    d["N"] = extended_json(c.numeric.N);
    const auto cps = detect_conjugate_points(path);
    d["conjugate_times"] = conjugate_json(cps);
    d["conjugate_verdict"] = cps.empty() ? "no conjugate points" : std::to_string(cps.size()) + " conjugate points";
    json per = json::object();
    const bool several = c.numeric.epsilons.size() > 1;
    for (size_t e = 0; e < c.numeric.epsilons.size(); ++e) {
        const double eps = c.numeric.epsilons[e];
        const WeightedRicciParams p{c.numeric.N, eps, path.geodesic.side};
        const std::string suffix = several ? "_eps" + std::to_string(e) : "";
        const auto rep = evolve_weighted_congruence(M, path, p);
        congruence_verdicts(r, suffix, rep, path.lagrange);
        json q;
        q["epsilon"] = eps;
        q["c"] = num(rep.c);
        q["form"] = to_string(rep.form);
        q["rows"] = rep.rows.size();
        q["min_ricN"] = num(rep.min_ricN);
        q["theta_eps_t0"] = num(rep.rows.front().theta_eps);
        focusing_verdict(r, "focusing" + suffix, rep, path, e, q);
        per[format_number(eps)] = q;
        congruence_tables(r, suffix, rep);
    }
    d["epsilon"] = per;
    r.details = d;
}

void run_cones(ScenarioResult& r, const SpacetimeModel& M, const RunConfig& c) {
    const Vec x = point_from(c.block["x"], M.dim, "config.cones.x", true);
    const int samples = c.block["samples"].get<int>();
    const int count = count_cone_components(M, span_of(x), samples);
    r.details = {{"components", count}, {"samples", samples}};
    if (c.block.contains("expected")) {
        const int expected = c.block["expected"].get<int>();
        Verdict v;
        v.invariant = "cone components equal the expected count";
        v.worst = count;
        v.limit = expected;
        v.outcome = count == expected ? Outcome::pass : Outcome::fail;
        r.verdicts["components"] = v;
    }
    r.tables["cones.csv"] = "components,samples\n" + std::to_string(count) + "," + std::to_string(samples) + "\n";
}

void run_bonnet_myers(ScenarioResult& r, const SpacetimeModel& M, const RunConfig& c) {
    BonnetMyersOptions o;
    const Vec x = point_from(c.block["x"], M.dim, "config.bonnet_myers.x", true);
    o.x.assign(x.data(), x.data() + x.size());
    o.N = c.numeric.N;
    o.K = c.block["K"].get<double>();
    o.directions = c.block["directions"].get<int>();
    o.spread = c.block["spread"].get<double>();
    o.t_max = c.block["t_max"].get<double>();
    o.tol = c.numeric.tol;
    o.workers = worker_count();
    BonnetMyersResult res;
    try {
        res = bonnet_myers_sweep(M, o);
    } catch (const PreconditionError& e) {
        Verdict v;
        v.invariant = "Ric_N >= K F^2 on sampled directions";
        v.outcome = Outcome::fail;
        v.detail = e.what();
        r.verdicts["ricci_lower_bound"] = v;
        return;
    }
    Verdict lb = Verdict::check("Ric_N >= K F^2 on sampled directions", -res.ricci_margin, 1e-8 * std::max(1.0, o.K));
    lb.worst = res.ricci_margin;
    lb.limit = 0.0;
    r.verdicts["ricci_lower_bound"] = lb;
    Verdict bm;
    bm.invariant = "first conjugate time <= pi sqrt(N/K)";
    bm.outcome = res.outcome;
    bm.limit = res.bound + o.zero_tol;
    double worst = 0.0;
    for (const auto& row : res.rows)
        worst = std::max(worst, row.first_zero ? *row.first_zero : std::numeric_limits<double>::infinity());
    bm.worst = worst;
    r.verdicts["bonnet_myers"] = bm;

    json rows = json::array();
    std::ostringstream csv;
    csv << "direction";
    for (int i = 0; i < M.dim; ++i) csv << ",v" << i;
    csv << ",first_conjugate_time,bound,satisfied,note\n";
    for (size_t i = 0; i < res.rows.size(); ++i) {
        const auto& row = res.rows[i];
        rows.push_back({{"direction", vec_json(row.direction)},
                        {"first_zero", row.first_zero ? num(*row.first_zero) : json(nullptr)},
                        {"satisfied", row.satisfied},
                        {"note", row.note}});
        csv << i;
        for (double q : row.direction) csv << ',' << format_number(q);
        csv << ',' << (row.first_zero ? format_number(*row.first_zero) : std::string("")) << ','
            << format_number(row.bound) << ',' << (row.satisfied ? "true" : "false") << ',' << row.note << "\n";
    }
    r.details = {{"K", res.K}, {"N", extended_json(res.N)}, {"bound", num(res.bound)},
                 {"ricci_margin", num(res.ricci_margin)}, {"rows", rows}};
    r.tables["bonnet_myers.csv"] = csv.str();
}

void run_surface(ScenarioResult& r, const SpacetimeModel& M, const RunConfig& c) {
    const Vec center = point_from(c.block["center"], M.dim, "config.surface.center", true);
    const double radius = c.block["radius"].get<double>();
    const int res = c.block["resolution"].get<int>();
    const auto patch = sphere_patch(M.dim, center, radius);
    const int k = patch.param_dim;
    // Angles avoid the coordinate poles; the last one runs around the full circle.
    std::vector<Vec> params;
    int total = 1;
    for (int i = 0; i < k; ++i) total *= res;
    for (int idx = 0; idx < total; ++idx) {
        Vec a(k);
        int rem = idx;
        for (int i = 0; i < k; ++i) {
            const int q = rem % res;
            rem /= res;
            a[i] = i + 1 < k ? std::numbers::pi * (q + 0.5) / res : 2.0 * std::numbers::pi * (q + 0.25) / res;
        }
        params.push_back(a);
    }
    std::vector<SurfaceSample> samples(params.size());
    parallel_for(static_cast<int>(params.size()), worker_count(),
                 [&](int i) { samples[i] = surface_expansion(M, patch, params[i]); });
    double worst_res = 0.0, closest = std::numeric_limits<double>::infinity();
    bool trapped = true;
    std::ostringstream csv;
    csv << "sample";
    for (int i = 0; i < k; ++i) csv << ",a" << i;
    csv << ",theta_plus,theta_minus,theta1_plus,theta1_minus,psi_trapped,normal_residual\n";
    for (size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        worst_res = std::max(worst_res, s.normal_residual);
        closest = std::min(closest, (s.V_plus.normalized() - s.V_minus.normalized()).norm());
        trapped = trapped && s.psi_trapped;
        csv << i;
        for (double q : s.params) csv << ',' << format_number(q);
        csv << ',' << format_number(s.theta_plus) << ',' << format_number(s.theta_minus) << ','
            << format_number(s.theta1_plus) << ',' << format_number(s.theta1_minus) << ','
            << (s.psi_trapped ? "true" : "false") << ',' << format_number(s.normal_residual) << "\n";
    }
    r.tables["surface.csv"] = csv.str();
    r.verdicts["normals"] = Verdict::check("L(V) = 0 and g_V(V, w) = 0", worst_res, 1e-8);
    Verdict distinct = Verdict::check("V+ and V- on distinct rays", -closest, -1e-6);
    distinct.worst = closest;
    distinct.limit = 1e-6;
    r.verdicts["distinct_rays"] = distinct;
    json d;
    d["samples"] = samples.size();
    d["psi_trapped"] = trapped;
    d["theta_plus_mean"] = 0.0;
    double tp = 0, tm = 0;
    for (const auto& s : samples) {
        tp += s.theta_plus;
        tm += s.theta_minus;
    }
    d["theta_plus_mean"] = num(tp / samples.size());
    d["theta_minus_mean"] = num(tm / samples.size());
    if (c.block.contains("expect_trapped")) {
        const bool expect = c.block["expect_trapped"].get<bool>();
        Verdict v;
        v.invariant = "psi-trapped verdict matches the expectation";
        v.worst = trapped;
        v.limit = expect;
        v.outcome = trapped == expect ? Outcome::pass : Outcome::fail;
        r.verdicts["psi_trapped"] = v;
    }
    if (c.block["focal"].get<bool>()) {
        auto go = geodesic_options(c);
        go.unit_speed = false;
        go.epsilons = {c.numeric.epsilons.front()};
        const auto path = surface_congruence(M, samples.front(), NormalSide::minus, go);
        const WeightedRicciParams p{c.numeric.N, go.epsilons[0], Side::null};
        const auto rep = evolve_weighted_congruence(M, path, p);
        json q;
        q["conjugate_times"] = conjugate_json(rep.conjugate_times);
        q["theta_eps_t0"] = num(rep.rows.front().theta_eps);
        focusing_verdict(r, "focal_bound", rep, path, 0, q);
        d["ingoing"] = q;
    }
    r.details = d;
}

}  // namespace

ScenarioResult run_scenario(const RunConfig& c) {
    ScenarioResult r;
    r.scenario = c.scenario;
    Timer total;
    if (c.scenario == "suite") {
        r = run_suite({worker_count(), c.seed});
        r.scenario = "suite";
        r.timing.emplace_back("total", total.seconds());
        return r;
    }
    try {
        Timer tm;
        const SpacetimeModel M = model_from_config(c.model, "config.model");
        r.timing.emplace_back("model", tm.seconds());
        Timer t;
        if (c.scenario == "geodesic")
            run_geodesic(r, M, c);
        else if (c.scenario == "congruence")
            run_congruence(r, M, c);
        else if (c.scenario == "cones")
            run_cones(r, M, c);
        else if (c.scenario == "bonnet_myers")
            run_bonnet_myers(r, M, c);
        else if (c.scenario == "surface")
            run_surface(r, M, c);
        r.timing.emplace_back(c.scenario, t.seconds());
    } catch (const ModelIntegrityError& e) {
        Verdict v;
        v.invariant = "model is Lorentz-Finsler on its chart";
        v.outcome = Outcome::fail;
        v.detail = e.what();
        r.verdicts["model_integrity"] = v;
    }
    r.timing.emplace_back("total", total.seconds());
    return r;
}

std::string summary_json(const ScenarioResult& result, const RunConfig& config) {
    json s;
    s["version"] = kVersion;
    s["scenario"] = result.scenario;
    s["seed"] = config.seed;
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(config.echo.dump())));
    s["config_hash"] = hash;
    s["config"] = config.echo;
    json verdicts = json::object();
    for (const auto& [key, v] : result.verdicts)
        verdicts[key] = {{"outcome", to_string(v.outcome)},
                         {"invariant", v.invariant},
                         {"worst", num(v.worst)},
                         {"limit", num(v.limit)},
                         {"margin", num(v.limit - v.worst)},
                         {"detail", v.detail}};
    s["verdicts"] = verdicts;
    s["exit_code"] = result.exit_code();
    s["results"] = result.details;
    s["artifacts"] = result.artifacts;
    return s.dump(2) + "\n";
}

std::vector<std::string> emit_report(ScenarioResult& result, const RunConfig& config) {
    namespace fs = std::filesystem;
    const fs::path dir(config.output.directory);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
    result.artifacts.clear();
    if (config.output.csv)
        for (const auto& [name, text] : result.tables) result.artifacts.push_back(name);
    if (config.output.json) {
        result.artifacts.push_back("summary.json");
        result.artifacts.push_back("timing.json");
    }
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary);
        out << text;
        if (!out) throw Error("cannot write " + (dir / name).string());
    };
    std::vector<std::string> paths;
    if (config.output.csv)
        for (const auto& [name, text] : result.tables) {
            write(name, text);
            paths.push_back((dir / name).string());
        }
    if (config.output.json) {
        write("summary.json", summary_json(result, config));
        json timing = json::object();
        for (const auto& [stage, sec] : result.timing) timing[stage] = sec;
        write("timing.json", timing.dump(2) + "\n");
        paths.push_back((dir / "summary.json").string());
        paths.push_back((dir / "timing.json").string());
    }
    return paths;
}

}  // namespace wlf
