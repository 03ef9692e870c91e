#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "wlf/oracles.hpp"
#include "wlf/runner.hpp"

namespace wlf {

const std::vector<std::string>& suite_keys() {
    static const std::vector<std::string> keys{
        "homogeneity_battery", "lorentzian_reduction", "curvature_laws",   "cone_census",
        "geodesic_conservation", "weighted_identities", "epsilon_range",   "conjugate_points",
        "focusing_bound",      "weighted_bishop",      "trapped_surfaces", "determinism"};
    return keys;
}

namespace {

using Std = std::vector<double>;
using Rng = std::mt19937_64;

std::span<const double> sp(const Vec& v) { return {v.data(), static_cast<size_t>(v.size())}; }
Vec from_std(const Std& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }
double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

json builtin(const std::string& name, json params) { return {{"builtin", name}, {"params", std::move(params)}}; }

SpacetimeModel make(json block, json weight = nullptr) {
    if (!weight.is_null()) block["weight"] = std::move(weight);
    return model_from_config(block);
}

json linear_t(double lambda) { return {{"type", "linear_t"}, {"lambda", lambda}}; }
json direction_dependent(double kappa) { return {{"type", "direction_dependent"}, {"kappa", kappa}}; }

Rng rng_for(std::uint64_t seed, int stream) { return Rng(seed * 0x9E3779B97F4A7C15ULL + 0x1000193ULL * (stream + 1)); }

struct Sample {
    Vec x, v;
};

Sample random_timelike(const SpacetimeModel& m, Rng& rng, double spread = 0.5, double tilt = 0.3) {
    std::normal_distribution<double> G;
    for (;;) {
        Sample s{Vec(m.dim), Vec(m.dim)};
        for (auto& c : s.x) c = spread * G(rng);
        for (int i = 0; i < m.dim; ++i) s.v[i] = m.future_seed[i] * (1.0 + 0.3 * std::abs(G(rng))) + tilt * G(rng);
        if (m.chart.contains(sp(s.x)) && m.L(sp(s.x), sp(s.v)) < -1e-3) return s;
    }
}

/// Lightlike vector on the ray v + s e, s > 0, found by bisection on the sign of L.
Vec lightlike_towards(const SpacetimeModel& m, const Vec& x, const Vec& v, const Vec& e) {
    auto L = [&](double s) { return m.L(sp(x), sp(Vec(v + s * e))); };
    double lo = 0.0, hi = 1.0;
    while (L(hi) <= 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw DegeneracyError("no lightlike vector on the ray");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (L(mid) < 0.0 ? lo : hi) = mid;
    }
    return v + 0.5 * (lo + hi) * e;
}

Vec spatial_part(const Vec& v) {
    Vec e = v;
    e[0] = 0.0;
    return e / e.norm();
}

struct Item {
    Verdict verdict;
    json details = json::object();
    // Timelike weighted runs contribute to the Bishop check.
    double bishop = 0.0;
    int bishop_runs = 0;
};

Verdict fail_with(Verdict v, const std::string& why) {
    v.outcome = Outcome::fail;
    v.detail = v.detail.empty() ? why : v.detail + "; " + why;
    return v;
}

// 1
Item homogeneity_battery(std::uint64_t seed) {
    const std::vector<SpacetimeModel> models{
        make(builtin("minkowski", {{"n", 3}}), direction_dependent(0.3)),
        make(builtin("warped_product", {{"n", 3}, {"f", "cosh"}, {"rate", 0.7}}), linear_t(0.4)),
        make(builtin("warped_product", {{"n", 2}, {"f", "exp"}, {"rate", 0.5}}), direction_dependent(-0.5)),
        make(builtin("constant_curvature", {{"n", 3}, {"K", 0.5}}), linear_t(-0.3)),
        make(builtin("randers_perturbed", {{"n", 3}, {"epsilon", 0.15}}), direction_dependent(0.2)),
    };
    Rng rng = rng_for(seed, 1);
    double eL = 0, ePsi = 0, eG = 0;
    int bad_signature = 0, count = 0;
    for (const auto& m : models)
        for (int s = 0; s < 1000; ++s) {
            const auto [x, v] = random_timelike(m, rng, 0.5, 0.4);
            const double L = m.L(sp(x), sp(v)), psi = m.psi(sp(x), sp(v));
            for (double c : {0.5, 2.0, 7.0}) {
                const Vec cv = c * v;
                eL = std::max(eL, std::abs(m.L(sp(x), sp(cv)) - c * c * L) / std::abs(c * c * L));
                ePsi = std::max(ePsi, std::abs(m.psi(sp(x), sp(cv)) - psi) / std::max(1.0, std::abs(psi)));
            }
            const Mat g = vertical_hessian(m, sp(x), sp(v));
            eG = std::max(eG, std::abs(v.dot(g * v) - 2.0 * L) / std::abs(2.0 * L));
            if (negative_index(g) != 1) ++bad_signature;
            ++count;
        }
    Item it;
    it.verdict = Verdict::check("L 2-homogeneous, psi 0-homogeneous, g_v(v, v) = 2L, signature (-,+,..,+)",
                                std::max({eL, ePsi, eG}), 1e-9);
    if (bad_signature) it.verdict = fail_with(it.verdict, std::to_string(bad_signature) + " vectors with wrong signature");
    it.details = {{"models", models.size()}, {"vectors", count}, {"L_homogeneity", eL},
                  {"psi_homogeneity", ePsi}, {"euler", eG},   {"signature_failures", bad_signature}};
    return it;
}

// 2
Item lorentzian_reduction(std::uint64_t seed) {
    const std::vector<SpacetimeModel> models{
        builtin_model("warped_product", {{"n", 3}, {"f", "cosh"}}),
        builtin_model("constant_curvature", {{"n", 3}, {"K", 0.8}}),
    };
    Rng rng = rng_for(seed, 2);
    std::normal_distribution<double> G;
    double eGammaTilde = 0, eGamma = 0, eR = 0, eD = 0;
    for (const auto& m : models) {
        for (int s = 0; s < 8; ++s) {
            const auto [x, v] = random_timelike(m, rng, 0.4);
            const auto ref = oracle::lorentzian_curvature(m, x);
            const auto geo = evaluate_geometry(m, sp(x), sp(v), GeometryLevel::curvature);
            for (int a = 0; a < m.dim; ++a) {
                const double scale = std::max(1.0, max_abs(ref.christoffel[a]));
                eGammaTilde = std::max(eGammaTilde, max_abs(geo.gamma_tilde[a] - ref.christoffel[a]) / scale);
                eGamma = std::max(eGamma, max_abs(geo.gamma[a] - ref.christoffel[a]) / scale);
            }
            for (int k = 0; k < 3; ++k) {
                Vec w(m.dim);
                for (auto& c : w) c = G(rng);
                const Vec theirs = ref.jacobi_operator(geo.v, w);
                eR = std::max(eR, (geo.R * w - theirs).norm() / std::max(1.0, theirs.norm()));
            }
        }
        // D^V_V X along a timelike curve with the velocity as reference.
        Vec x0(m.dim), u(m.dim), b(m.dim), c(m.dim), d(m.dim);
        for (int i = 0; i < m.dim; ++i) {
            x0[i] = 0.2 * G(rng);
            u[i] = m.future_seed[i] + 0.2 * G(rng);
            b[i] = G(rng);
            c[i] = G(rng);
            d[i] = G(rng);
        }
        auto curve = [=](double t) -> Vec { return x0 + 0.5 * t * u + 0.1 * std::sin(t) * b; };
        auto velocity = [=](double t) -> Vec { return 0.5 * u + 0.1 * std::cos(t) * b; };
        auto X = [=](double t) -> Vec { return c + t * d + 0.2 * std::sin(2.0 * t) * b; };
        auto Xdot = [=](double t) -> Vec { return d + 0.4 * std::cos(2.0 * t) * b; };
        const std::vector<double> ts{0.2, 0.6, 1.0};
        const auto mine = covariant_derivative(m, curve, X, velocity, ts);
        for (size_t i = 0; i < ts.size(); ++i) {
            const auto ref = oracle::lorentzian_curvature(m, curve(ts[i]));
            Vec expect = Xdot(ts[i]);
            const Vec xd = velocity(ts[i]);
            for (int a = 0; a < m.dim; ++a) expect[a] += xd.dot(ref.christoffel[a] * X(ts[i]));
            eD = std::max(eD, (mine[i] - expect).norm() / std::max(1.0, expect.norm()));
        }
    }
    Item it;
    it.verdict = Verdict::check("quadratic L: Gamma-tilde, Gamma, R_v and D^V_V match the Christoffel oracle",
                                std::max({eGammaTilde, eGamma, eR, eD}), 1e-6);
    it.details = {{"gamma_tilde", eGammaTilde}, {"gamma", eGamma}, {"curvature", eR}, {"covariant_derivative", eD}};
    return it;
}

// 3
Item curvature_laws(std::uint64_t seed) {
    const std::vector<SpacetimeModel> models{
        builtin_model("warped_product", {{"n", 3}, {"f", "cosh"}}),
        builtin_model("warped_product", {{"n", 2}, {"f", "exp"}, {"rate", 0.7}}),
        builtin_model("constant_curvature", {{"n", 3}, {"K", 0.8}}),
        builtin_model("randers_perturbed", {{"n", 3}, {"epsilon", 0.15}}),
        builtin_model("randers_perturbed", {{"n", 2}, {"epsilon", 0.25}}),
    };
    Rng rng = rng_for(seed, 3);
    std::normal_distribution<double> G;
    double eKernel = 0, eSym = 0;
    int lightlike = 0, total = 0;
    for (const auto& m : models)
        for (int s = 0; s < 500; ++s) {
            auto [x, v] = random_timelike(m, rng);
            if (s % 5 == 0) {
                Vec e = Vec::Zero(m.dim);
                for (int i = 1; i < m.dim; ++i) e[i] = G(rng);
                v = lightlike_towards(m, x, v, e / e.norm());
                ++lightlike;
            }
            ++total;
            const auto cur = curvature_at(m, sp(x), sp(v));
            const auto met = metric_at(m, sp(x), sp(v));
            const double Rn = std::max(1e-12, cur.R.norm());
            eKernel = std::max(eKernel, (cur.R * v).norm() / (Rn * v.norm()));
            Vec w1(m.dim), w2(m.dim);
            for (auto& c : w1) c = G(rng);
            for (auto& c : w2) c = G(rng);
            const double a = w1.dot(met.g * (cur.R * w2)), b = (cur.R * w1).dot(met.g * w2);
            eSym = std::max(eSym, std::abs(a - b) / (Rn * met.g.norm() * w1.norm() * w2.norm()));
        }
    Item it;
    it.verdict = Verdict::check("R_v(v) = 0 and R_v is g_v-symmetric", std::max(eKernel, eSym), 1e-7);
    it.details = {{"vectors", total}, {"lightlike", lightlike}, {"kernel", eKernel}, {"symmetry", eSym}};
    return it;
}

// 4
Item cone_census() {
    json counts = json::array();
    int worst = 0;
    for (int k = 1; k <= 6; ++k) {
        const auto m = builtin_model("beem", {{"k", k}});
        const int c = count_cone_components(m, Std{0.0, 0.0}, 1024);
        counts.push_back({{"k", k}, {"components", c}});
        worst = std::max(worst, std::abs(c - k));
    }
    Item it;
    it.verdict = Verdict::check("beem(k) has k cone components", worst, 0);
    it.details = {{"samples", 1024}, {"census", counts}};
    return it;
}

// 5
Item geodesic_conservation() {
    const std::vector<std::pair<SpacetimeModel, Std>> runs{
        {builtin_model("minkowski", {{"n", 3}}), {1.0, 0.2, -0.3, 0.1}},
        {builtin_model("warped_product", {{"n", 3}, {"f", "cosh"}}), {1.2, 0.5, -0.3, 0.2}},
        {builtin_model("warped_product", {{"n", 2}, {"f", "exp"}, {"rate", 0.1}}), {1.0, 0.4, 0.2}},
        {builtin_model("constant_curvature", {{"n", 3}, {"K", 1.0}}), {1.0, 0.4, 0.1, -0.2}},
        {builtin_model("randers_perturbed", {{"n", 3}, {"epsilon", 0.2}}), {1.3, 0.3, 0.4, -0.1}},
        {builtin_model("beem", {{"k", 3}}), {0.5, std::sqrt(3.0) / 2}},
        {make(builtin("weighted", {{"base", builtin("minkowski", {{"n", 2}})}, {"weight", linear_t(0.5)}})),
         {1.2, 0.3, 0.2}},
    };
    double worst = 0;
    json per = json::array();
    for (const auto& [m, v0] : runs) {
        GeodesicOptions o;
        o.t_end = 20.0;
        o.tol = 1e-10;
        const Std x0(m.dim, 0.0);
        const auto g = integrate_geodesic(m, x0, v0, o);
        double drift = 0;
        for (size_t i = 0; i < g.t.size(); ++i) drift = std::max(drift, std::abs(m.L(sp(g.x(i)), sp(g.v(i))) - g.L_value));
        drift /= std::max(1.0, std::abs(g.L_value));
        worst = std::max(worst, drift);
        per.push_back({{"model", m.name}, {"drift", drift}, {"t_reached", g.t_end()}, {"status", to_string(g.status)}});
    }
    Item it;
    it.verdict = Verdict::check("sup |L(eta') - L0| relative over t in [0, 20] at tol 1e-10", worst, 1e-7);
    it.details = {{"runs", per}};
    return it;
}

// 6
struct IdentityRun {
    SpacetimeModel model;
    Vec x, v;
};

std::vector<IdentityRun> identity_runs() {
    auto V = [](std::initializer_list<double> l) { return from_std(Std(l)); };
    return {
        {make(builtin("warped_product", {{"n", 3}, {"f", "cosh"}, {"rate", 0.7}}), linear_t(0.4)), V({0, 0.1, 0, 0}),
         V({1.3, 0.4, 0.2, 0.1})},
        {make(builtin("warped_product", {{"n", 3}, {"f", "cosh"}, {"rate", 0.7}}), linear_t(0.4)), V({0.1, 0, 0, 0}),
         V({1.1, -0.3, 0.1, 0.2})},
        {make(builtin("constant_curvature", {{"n", 3}, {"K", 1.0}}), linear_t(0.2)), V({0, 0, 0, 0}),
         V({1.2, 0.3, 0, 0.1})},
        {make(builtin("constant_curvature", {{"n", 2}, {"K", 0.6}}), direction_dependent(0.3)), V({0, 0.1, 0}),
         V({1.1, 0.2, -0.3})},
        {make(builtin("warped_product", {{"n", 2}, {"f", "exp"}, {"rate", 0.3}}), linear_t(-0.3)), V({0, 0, 0}),
         V({1.2, 0.3, 0.1})},
        {make(builtin("minkowski", {{"n", 3}}), direction_dependent(0.3)), V({0, 0, 0, 0}), V({1.2, 0.4, 0.1, -0.2})},
        {make(builtin("randers_perturbed", {{"n", 3}, {"epsilon", 0.15}}), linear_t(0.3)), V({0, 0, 0, 0}),
         V({1.3, 0.3, 0.4, -0.1})},
        {make(builtin("randers_perturbed", {{"n", 2}, {"epsilon", 0.2}}), direction_dependent(0.2)), V({0, 0, 0}),
         V({1.2, 0.3, 0.2})},
        {make(builtin("warped_product", {{"n", 3}, {"f", "cosh"}})), V({0, 0, 0, 0}), V({1.2, 0.5, -0.3, 0.2})},
        {make(builtin("constant_curvature", {{"n", 3}, {"K", 0.8}})), V({0, 0, 0, 0}), V({1.1, 0.2, 0.3, 0})},
        {make(builtin("minkowski", {{"n", 2}}), linear_t(0.5)), V({0, 0, 0}), V({1.3, 0.5, 0.2})},
        {make(builtin("warped_product", {{"n", 2}, {"f", "cosh"}, {"rate", 0.5}}), direction_dependent(-0.4)),
         V({0, 0, 0}), V({1.2, 0.2, 0.4})},
    };
}

struct PairResult {
    double jacobi = 0, riccati = 0, raychaudhuri = 0, bishop = 0;
    std::string form, error, label;
    bool timelike = true;
};

Item weighted_identities(int workers) {
    const auto runs = identity_runs();
    const int R = static_cast<int>(runs.size());
    std::vector<std::vector<PairResult>> results(2 * R);
    parallel_for(2 * R, workers, [&](int job) {
        const auto& run = runs[job % R];
        const bool timelike = job < R;
        const auto& M = run.model;
        const int n = M.n();
        const Side side = timelike ? Side::timelike : Side::null;
        const Vec v = timelike ? run.v : lightlike_towards(M, run.x, run.v, spatial_part(run.v));
        std::vector<double> Ns = timelike ? std::vector<double>{0.0, double(n), 2.0 * n, -2.0}
                                          : std::vector<double>{1.0, double(n), 2.0 * n, -1.0};
        std::vector<WeightedRicciParams> pairs;
        const double sign = (job % 2) ? -1.0 : 1.0;
        auto add = [&](ExtendedReal N) {
            if (!N.is_infinite() && N.value == n && M.weighted()) return;  // Ric_n is -inf once psi' != 0
            const auto range = epsilon_range_check({N, 0.0, side}, n);
            pairs.push_back({N, 0.0, side});
            if (std::isinf(range.bound))
                pairs.push_back({N, sign * 1.5, side});
            else if (range.bound > 0)
                pairs.push_back({N, sign * 0.999 * range.bound, side});
        };
        for (double N : Ns) add(ExtendedReal::finite(N));
        add(ExtendedReal::inf());
        GeodesicOptions o;
        o.t_end = 3.0;
        o.tol = 1e-12;
        for (const auto& p : pairs)
            if (std::find(o.epsilons.begin(), o.epsilons.end(), p.epsilon) == o.epsilons.end())
                o.epsilons.push_back(p.epsilon);
        std::vector<PairResult> out;
        try {
            const auto path = point_congruence_tensor(M, sp(run.x), sp(v), o);
            for (const auto& p : pairs) {
                PairResult pr;
                pr.timelike = timelike;
                pr.label = M.name + (timelike ? " timelike" : " null") + " run " + std::to_string(job % R) +
                           " N=" + p.N.to_string() + " eps=" + format_number(p.epsilon);
                try {
                    const auto rep = evolve_weighted_congruence(M, path, p);
                    pr.jacobi = rep.max_jacobi;
                    pr.riccati = rep.max_riccati;
                    pr.raychaudhuri = rep.max_raychaudhuri;
                    pr.bishop = rep.max_bishop;
                    pr.form = to_string(rep.form);
                } catch (const Error& e) {
                    pr.error = e.what();
                }
                out.push_back(pr);
            }
        } catch (const Error& e) {
            PairResult pr;
            pr.timelike = timelike;
            pr.error = e.what();
            out.push_back(pr);
        }
        results[job] = out;
    });
    double jac = 0, ric = 0, ray = 0, bishop = 0;
    int pairs = 0, errors = 0, timelike_runs = 0, null_runs = 0;
    std::map<std::string, int> forms;
    std::string first_error, worst_label;
    double worst = -1;
    for (int job = 0; job < 2 * R; ++job) {
        (job < R ? timelike_runs : null_runs)++;
        for (const auto& pr : results[job]) {
            ++pairs;
            if (!pr.error.empty()) {
                ++errors;
                if (first_error.empty()) first_error = pr.error;
                continue;
            }
            if (std::max({pr.jacobi, pr.riccati, pr.raychaudhuri}) > worst) {
                worst = std::max({pr.jacobi, pr.riccati, pr.raychaudhuri});
                worst_label = pr.label;
            }
            jac = std::max(jac, pr.jacobi);
            ric = std::max(ric, pr.riccati);
            ray = std::max(ray, pr.raychaudhuri);
            if (pr.timelike) bishop = std::max(bishop, pr.bishop);
            forms[(pr.timelike ? "timelike_" : "null_") + pr.form]++;
        }
    }
    Item it;
    it.verdict = Verdict::check("weighted Jacobi, Riccati and Raychaudhuri residuals", std::max({jac, ric, ray}), 1e-6);
    if (errors) it.verdict = fail_with(it.verdict, std::to_string(errors) + " runs failed: " + first_error);
    it.details = {{"timelike_runs", timelike_runs}, {"null_runs", null_runs}, {"pairs", pairs},
                  {"jacobi", jac},  {"riccati", ric}, {"raychaudhuri", ray}, {"forms", forms},
                  {"worst_pair", worst_label}, {"bishop", bishop}};
    it.bishop = bishop;
    it.bishop_runs = timelike_runs;
    return it;
}

// 7
Item epsilon_range(std::uint64_t seed) {
    Rng rng = rng_for(seed, 7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    int failures = 0, tested = 0;
    double min_c = std::numeric_limits<double>::infinity();
    while (tested < 1000) {
        const int n = 2 + static_cast<int>(rng() % 4);
        const Side side = rng() % 2 ? Side::timelike : Side::null;
        const double special = side == Side::timelike ? 0.0 : 1.0;
        ExtendedReal N = ExtendedReal::inf();
        if (rng() % 4) {
            const double v = 10.0 * U(rng);
            if (v > special && v < n) continue;
            N = ExtendedReal::finite(v);
        }
        const double bound = epsilon_range_check({N, 0.0, side}, n).bound;
        const double eps = 0.999 * std::min(bound, 5.0) * U(rng);
        const WeightedRicciParams p{N, eps, side};
        if (!epsilon_range_check(p, n).admissible) continue;
        const double c = c_coefficient(p, n);
        min_c = std::min(min_c, c);
        if (!(c > 0.0)) ++failures;
        ++tested;
    }
    int spot_failures = 0;
    json spots = json::array();
    for (int n : {2, 3, 4}) {
        const auto T = Side::timelike;
        const bool ok = c_coefficient({ExtendedReal::finite(n), 0.7, T}, n) == 1.0 / n &&
                        c_coefficient({ExtendedReal::finite(0), 0.0, T}, n) == 1.0 / n &&
                        c_coefficient({ExtendedReal::finite(1), 0.0, Side::null}, n) == 1.0 / (n - 1) &&
                        !epsilon_range_check({ExtendedReal::inf(), 1.0, T}, n).admissible &&
                        epsilon_range_check({ExtendedReal::finite(n), 1.0, T}, n).admissible;
        if (!ok) ++spot_failures;
        spots.push_back({{"n", n}, {"ok", ok}});
    }
    Item it;
    it.verdict = Verdict::check("c(N, eps) > 0 on admissible pairs and exact spot values", failures + spot_failures, 0);
    it.details = {{"pairs", tested}, {"min_c", min_c}, {"positivity_failures", failures}, {"spot_values", spots}};
    return it;
}

// 8
Item conjugate_points(int workers) {
    Item it;
    json d;
    // Closed-form zero of sin(sqrt(K) t).
    const double K = 1.7, expect = std::numbers::pi / std::sqrt(K);
    GeodesicOptions o;
    o.t_end = 1.2 * expect + 0.5;
    o.tol = 1e-10;
    o.unit_speed = true;
    const auto ads = builtin_model("constant_curvature", {{"n", 3}, {"K", K}});
    const auto path = point_congruence_tensor(ads, Std{0, 0, 0, 0}, Std{1.0, 0.3, 0, 0.1}, o);
    const auto zeros = detect_conjugate_points(path);
    const double err = zeros.empty() ? std::numeric_limits<double>::infinity() : std::abs(zeros.front().t - expect);
    d["first_zero"] = zeros.empty() ? json(nullptr) : json(zeros.front().t);
    d["expected"] = expect;
    it.verdict = Verdict::check("first det J zero at pi/sqrt(K); Bonnet-Myers sweep; no zeros under negative curvature",
                                err, 1e-3);

    BonnetMyersOptions bm;
    bm.x = {0, 0, 0, 0};
    bm.N = ExtendedReal::finite(3);
    bm.K = 3.0;  // Ric = n K_flag F^2
    bm.workers = workers;
    const auto sweep = bonnet_myers_sweep(builtin_model("constant_curvature", {{"n", 3}, {"K", 1.0}}), bm);
    d["bonnet_myers"] = {{"bound", sweep.bound}, {"outcome", to_string(sweep.outcome)}, {"directions", sweep.rows.size()}};
    if (sweep.outcome != Outcome::pass) it.verdict = fail_with(it.verdict, "Bonnet-Myers sweep " + to_string(sweep.outcome));

    GeodesicOptions o2;
    o2.t_end = 20.0;
    o2.tol = 1e-10;
    o2.unit_speed = true;
    const auto warped = builtin_model("warped_product", {{"n", 3}, {"f", "exp"}, {"rate", 0.3}});
    const auto neg = point_congruence_tensor(warped, Std{0, 0, 0, 0}, Std{1.2, 0.3, 0.1, 0}, o2);
    const auto neg_zeros = detect_conjugate_points(neg);
    d["negative_curvature"] = {{"t_reached", neg.geodesic.t_end()}, {"zeros", neg_zeros.size()}};
    if (!neg_zeros.empty()) it.verdict = fail_with(it.verdict, "zero of det J under negative curvature");
    if (!neg.geodesic.reached_end()) it.verdict = fail_with(it.verdict, "negative-curvature run stopped early");
    it.details = d;
    return it;
}

// 9
struct FocusAttempt {
    bool qualifies = false;
    Outcome outcome = Outcome::pass;
    double zero = 0, limit = 0, bishop = 0;
    std::string label;
};

FocusAttempt focus_attempt(std::uint64_t seed, int index) {
    Rng rng = rng_for(seed, 1000 + index);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::normal_distribution<double> G;
    const int n = 2 + static_cast<int>(rng() % 2);
    const bool ads = rng() % 2;
    const double K = 0.5 + U(rng);
    const double lambda = ads ? 0.2 * (U(rng) - 0.5) : (U(rng) - 0.5);
    json base = ads ? builtin("constant_curvature", {{"n", n}, {"K", K}}) : builtin("minkowski", {{"n", n}});
    const auto M = make(base, linear_t(lambda));
    ExtendedReal N = ExtendedReal::inf();
    if (rng() % 3 == 0) N = ExtendedReal::finite(n + 1 + 3 * U(rng));
    const double bound = epsilon_range_check({N, 0.0, Side::timelike}, n).bound;
    const double eps = 0.9 * std::min(bound, 2.0) * (2.0 * U(rng) - 1.0);
    const double a = 0.2 + 1.3 * U(rng);
    Vec x = Vec::Zero(M.dim), v(M.dim);
    for (int i = 1; i < M.dim; ++i) x[i] = 0.1 * G(rng);
    v[0] = 1.0;
    for (int i = 1; i < M.dim; ++i) v[i] = 0.3 * G(rng);
    GeodesicOptions o;
    o.t_end = 8.0;
    o.tol = 1e-10;
    o.unit_speed = true;
    o.epsilons = {eps};
    const auto path = jacobi_tensor_path(M, sp(x), sp(v), Mat::Identity(n, n), -a * Mat::Identity(n, n), o);
    const WeightedRicciParams p{N, eps, Side::timelike};
    const auto rep = evolve_weighted_congruence(M, path, p);
    const auto check = focusing_check(rep, path, 0);
    FocusAttempt out;
    std::ostringstream label;
    label << (ads ? "ads" : "minkowski") << " n=" << n << " N=" << N.to_string() << " eps=" << format_number(eps);
    out.label = label.str();
    out.bishop = rep.max_bishop;
    if (!check.verdict) return out;
    out.qualifies = true;
    out.outcome = check.verdict->outcome;
    out.zero = check.verdict->worst;
    out.limit = check.verdict->limit;
    return out;
}

Item focusing_bound(std::uint64_t seed, int workers) {
    std::vector<FocusAttempt> attempts;
    const int batch = 40;
    auto qualifying = [&] { return std::count_if(attempts.begin(), attempts.end(), [](auto& a) { return a.qualifies; }); };
    while (qualifying() < 20 && attempts.size() < 400) {
        std::vector<FocusAttempt> next(batch);
        const int offset = static_cast<int>(attempts.size());
        parallel_for(batch, workers, [&](int i) { next[i] = focus_attempt(seed, offset + i); });
        attempts.insert(attempts.end(), next.begin(), next.end());
    }
    int used = 0, fails = 0, horizon = 0;
    double bishop = 0;
    json runs = json::array();
    for (const auto& a : attempts) {
        if (!a.qualifies) continue;
        if (used == 20) break;
        ++used;
        bishop = std::max(bishop, a.bishop);
        if (a.outcome == Outcome::fail) ++fails;
        if (a.outcome == Outcome::inconclusive) ++horizon;
        runs.push_back({{"run", a.label}, {"outcome", to_string(a.outcome)}, {"first_zero", a.zero}, {"limit", a.limit}});
    }
    Item it;
    it.verdict = Verdict::check("det J vanishes within [t0, t0 + s0] plus one grid cell, or inconclusive: horizon", fails, 0);
    if (used < 20) it.verdict = fail_with(it.verdict, "only " + std::to_string(used) + " qualifying runs");
    it.details = {{"attempts", attempts.size()}, {"qualifying", used}, {"counterexamples", fails},
                  {"inconclusive_horizon", horizon}, {"bishop", bishop}, {"runs", runs}};
    it.bishop = bishop;
    it.bishop_runs = used;
    return it;
}

// 11
Item trapped_surfaces() {
    const int n = 3;
    const double r = 1.7;
    const auto mink = builtin_model("minkowski", {{"n", n}});
    const auto patch = sphere_patch(n + 1, Vec::Zero(n + 1), r);
    std::vector<Vec> qs;
    for (double a : {0.4, 1.1, 2.3})
        for (double b : {0.0, 2.0, 4.5}) qs.push_back((Vec(2) << a, b).finished());
    const auto data = analyze_surface(mink, patch, qs);
    const double expect = (n - 1) / r;
    double eTheta = 0;
    for (const auto& s : data.samples) {
        eTheta = std::max(eTheta, std::abs(s.theta_plus - expect) / expect);
        eTheta = std::max(eTheta, std::abs(s.theta_minus + expect) / expect);
    }
    GeodesicOptions o;
    o.t_end = 2.5 * r;
    o.tol = 1e-10;
    o.epsilons = {0.0};
    const auto path = surface_congruence(mink, data.samples[4], NormalSide::minus, o);
    const auto zeros = detect_conjugate_points(path);
    const double eFocal = zeros.empty() ? std::numeric_limits<double>::infinity() : std::abs(zeros.front().t - r) / r;

    Vec q(2);
    q << 0.7, 0.3;
    const auto unit = sphere_patch(n + 1, Vec::Zero(n + 1), 1.0);
    const bool trapped = analyze_surface(make(builtin("minkowski", {{"n", n}}), linear_t(-3.0)), unit, {q}).psi_trapped;
    const bool mild = analyze_surface(make(builtin("minkowski", {{"n", n}}), linear_t(-1.0)), unit, {q}).psi_trapped;

    Item it;
    it.verdict = Verdict::check("theta+ = (n-1)/r within 1e-5, focal time r within 2%, psi-trapped verdicts",
                                std::max(eTheta / 1e-5, eFocal / 0.02), 1.0);
    if (!trapped || mild) it.verdict = fail_with(it.verdict, "psi-trapped verdict wrong");
    it.details = {{"theta_relative_error", eTheta}, {"focal_relative_error", eFocal},
                  {"focal_time", zeros.empty() ? json(nullptr) : json(zeros.front().t)},
                  {"trapped_example", trapped}, {"untrapped_example", !mild}};
    return it;
}

// 12
std::vector<json> determinism_configs() {
    const json quiet = {{"directory", "unused"}, {"formats", json::array()}};
    return {
        {{"scenario", "geodesic"},
         {"seed", 3},
         {"model", builtin("randers_perturbed", {{"n", 3}, {"epsilon", 0.2}})},
         {"numeric", {{"t_span", {0, 5}}, {"grid", 11}, {"epsilon", {0.0, 1.0}}}},
         {"geodesic", {{"x", {0, 0, 0, 0}}, {"v", {1.3, 0.3, 0.4, -0.1}}}},
         {"output", quiet}},
        {{"scenario", "congruence"},
         {"model", {{"builtin", "warped_product"}, {"params", {{"n", 3}, {"rate", 0.7}}}, {"weight", linear_t(0.4)}}},
         {"numeric", {{"t_span", {0, 2}}, {"N", 6}, {"epsilon", {0.0, 0.5}}}},
         {"congruence", {{"x", {0, 0.1, 0, 0}}, {"v", {1.3, 0.4, 0.2, 0.1}}}},
         {"output", quiet}},
        {{"scenario", "surface"},
         {"model", {{"builtin", "minkowski"}, {"params", {{"n", 3}}}, {"weight", linear_t(-3.0)}}},
         {"numeric", {{"t_span", {0, 2}}}},
         {"surface", {{"radius", 1.0}, {"resolution", 2}, {"expect_trapped", true}}},
         {"output", quiet}},
    };
}

std::string sweep_text(const BonnetMyersResult& r) {
    std::ostringstream out;
    for (const auto& row : r.rows)
        out << format_number(row.first_zero.value_or(-1.0)) << ' ' << row.note << ' ' << row.satisfied << '\n';
    return out.str();
}

Item determinism(int workers) {
    int mismatches = 0;
    json per = json::array();
    for (const auto& j : determinism_configs()) {
        const auto config = parse_run_config(j);
        const auto a = summary_json(run_scenario(config), config);
        const auto b = summary_json(run_scenario(config), config);
        per.push_back({{"scenario", config.scenario}, {"identical", a == b}, {"hash", fnv1a(a)}});
        if (a != b) ++mismatches;
    }
    BonnetMyersOptions bm;
    bm.x = {0, 0, 0};
    bm.N = ExtendedReal::finite(2);
    bm.K = 2.0;
    bm.directions = 6;
    const auto ads = builtin_model("constant_curvature", {{"n", 2}, {"K", 1.0}});
    bm.workers = 1;
    const auto serial = sweep_text(bonnet_myers_sweep(ads, bm));
    bm.workers = std::max(2, workers);
    const auto threaded = sweep_text(bonnet_myers_sweep(ads, bm));
    per.push_back({{"scenario", "bonnet_myers sweep, 1 vs several workers"}, {"identical", serial == threaded}});
    if (serial != threaded) ++mismatches;
    Item it;
    it.verdict = Verdict::check("identical configs give byte-identical summaries", mismatches, 0);
    it.details = {{"checks", per}};
    return it;
}

}  // namespace

ScenarioResult run_suite(const SuiteOptions& options) {
    const auto& keys = suite_keys();
    const int workers = std::max(1, options.workers);
    const std::uint64_t seed = options.seed;
    std::vector<std::function<Item()>> jobs{
        [&] { return homogeneity_battery(seed); },
        [&] { return lorentzian_reduction(seed); },
        [&] { return curvature_laws(seed); },
        [] { return cone_census(); },
        [] { return geodesic_conservation(); },
        [&] { return weighted_identities(workers); },
        [&] { return epsilon_range(seed); },
        [&] { return conjugate_points(workers); },
        [&] { return focusing_bound(seed, workers); },
        {},  // Bishop collects the timelike runs of the others
        [] { return trapped_surfaces(); },
        [&] { return determinism(workers); },
    };
    std::vector<Item> items(jobs.size());
    std::vector<double> seconds(jobs.size(), 0.0);
    parallel_for(static_cast<int>(jobs.size()), workers, [&](int i) {
        if (!jobs[i]) return;
        const auto start = std::chrono::steady_clock::now();
        try {
            items[i] = jobs[i]();
        } catch (const std::exception& e) {
            items[i].verdict.outcome = Outcome::fail;
            items[i].verdict.detail = std::string("error: ") + e.what();
        }
        seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    {
        double bishop = 0;
        int runs = 0;
        for (const auto& it : items) {
            bishop = std::max(bishop, it.bishop);
            runs += it.bishop_runs;
        }
        Item& b = items[9];
        b.verdict = Verdict::check("xi** <= -c xi Ric_N(eta*) on all timelike suite runs", bishop, 1e-6);
        if (runs == 0) b.verdict = fail_with(b.verdict, "no timelike runs");
        b.details = {{"timelike_runs", runs}, {"max_relative_excess", bishop}};
    }
    ScenarioResult r;
    r.scenario = "suite";
    for (size_t i = 0; i < keys.size(); ++i) {
        r.verdicts[keys[i]] = items[i].verdict;
        r.details[keys[i]] = items[i].details;
        r.timing.emplace_back(keys[i], seconds[i]);
    }
    std::ostringstream csv;
    csv << "criterion,key,outcome,worst,limit\n";
    for (size_t i = 0; i < keys.size(); ++i) {
        const auto& v = items[i].verdict;
        csv << i + 1 << ',' << keys[i] << ',' << to_string(v.outcome) << ',' << format_number(v.worst) << ','
            << format_number(v.limit) << '\n';
    }
    r.tables["suite.csv"] = csv.str();
    return r;
}

}  // namespace wlf
