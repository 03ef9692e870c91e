#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "wlf/congruence.hpp"

using namespace wlf;

namespace {

using Std = std::vector<double>;

std::span<const double> span_of_std(const Vec& v) { return {v.data(), static_cast<size_t>(v.size())}; }

SpacetimeModel with_weight(json model, json weight) {
    model["weight"] = std::move(weight);
    return model_from_config(model);
}

json builtin(const std::string& name, json params) { return {{"builtin", name}, {"params", std::move(params)}}; }

GeodesicOptions run(double T, Std eps = {0.0}) {
    GeodesicOptions o;
    o.t_end = T;
    o.tol = 1e-10;
    o.epsilons = std::move(eps);
    return o;
}

WeightedRicciParams params(double N, double eps) { return {ExtendedReal::finite(N), eps, Side::timelike}; }
WeightedRicciParams params_inf(double eps) { return {ExtendedReal::inf(), eps, Side::timelike}; }

}  // namespace

TEST_CASE("point congruence in Minkowski space") {
    const auto M = builtin_model("minkowski", {{"n", 3}});
    const Std x{0, 0, 0, 0}, v{1.4, 0.3, -0.5, 0.6};
    auto o = run(5.0, {0.0, 1.0});
    o.unit_speed = true;
    const auto path = point_congruence_tensor(M, x, v, o);
    CHECK(path.kind == TensorKind::from_point);
    CHECK(path.lagrange);
    CHECK(path.m() == 3);
    for (double t : {0.3, 1.7, 4.9}) {
        const Mat J = path.geodesic.J_at(t);
        CHECK((J - t * Mat::Identity(3, 3)).norm() <= 1e-8 * t);
    }
    CHECK(detect_conjugate_points(path).empty());
    for (const auto& R : frame_curvature(M, path)) CHECK(R.norm() == 0.0);

    for (const auto& p : {params(3, 1.0), params_inf(0.0), params(0, 0.0), params(-2, 0.0)}) {
        const auto rep = evolve_weighted_congruence(M, path, p);
        CHECK(rep.rows.size() > 10);
        for (const auto& r : rep.rows) {
            CHECK(std::abs(r.theta_eps - 3.0 / r.t) <= 1e-8 * 3.0 / r.t);
            CHECK(r.theta_eps == doctest::Approx(r.theta).epsilon(1e-15));
            CHECK(r.raychaudhuri_residual <= 1e-8);
            CHECK(std::abs(r.sigma_eps_norm2) <= 1e-12 / (r.t * r.t));
        }
        CHECK(rep.conjugate_times.empty());
    }
}

TEST_CASE("conjugate points of anti-de Sitter space") {
    const double K = 1.7;
    const auto M = builtin_model("constant_curvature", {{"n", 3}, {"K", K}});
    auto o = run(4.0);
    o.unit_speed = true;
    const Std x{0, 0.2, -0.1, 0.3}, v{1.5, 0.2, 0.4, -0.3};
    const auto path = point_congruence_tensor(M, x, v, o);
    for (const auto& R : frame_curvature(M, path)) CHECK((R - K * Mat::Identity(3, 3)).norm() <= 1e-7);
    const double rk = std::sqrt(K);
    for (double t : {0.5, 1.5, 2.0}) CHECK((path.geodesic.J_at(t) - std::sin(rk * t) / rk * Mat::Identity(3, 3)).norm() <= 1e-7);
    const auto cp = detect_conjugate_points(path);
    REQUIRE(cp.size() == 1);
    CHECK(std::abs(cp[0].t - std::numbers::pi / rk) <= 1e-4);
    CHECK(cp[0].error <= 1e-9);
    CHECK(cp[0].multiplicity == 3);
    CHECK_FALSE(cp[0].tangency);

    // Even m: det J touches zero without a sign change.
    const auto M2 = builtin_model("constant_curvature", {{"n", 2}, {"K", K}});
    const auto path2 = point_congruence_tensor(M2, Std{0, 0.1, 0.2}, Std{1.3, 0.2, -0.1}, o);
    const auto cp2 = detect_conjugate_points(path2);
    REQUIRE(cp2.size() == 1);
    CHECK(cp2[0].tangency);
    CHECK(cp2[0].multiplicity == 2);
    CHECK(std::abs(cp2[0].t - std::numbers::pi / rk) <= 1e-4);
}

TEST_CASE("no conjugate points under negative curvature") {
    const auto M = builtin_model("warped_product", {{"n", 3}, {"f", "exp"}, {"rate", 0.3}});
    auto o = run(20.0);
    o.unit_speed = true;
    const auto path = point_congruence_tensor(M, Std{0, 0, 0, 0}, Std{1.0, 0, 0, 0}, o);
    REQUIRE(path.geodesic.reached_end());
    for (const auto& R : frame_curvature(M, path)) CHECK((R + 0.09 * Mat::Identity(3, 3)).norm() <= 1e-8);
    CHECK(detect_conjugate_points(path).empty());

    const auto tilted = point_congruence_tensor(M, Std{0, 0, 0, 0}, Std{1.0, 0.3, 0.1, 0}, o);
    CHECK(detect_conjugate_points(tilted).empty());
}

TEST_CASE("Lagrange property and non-triviality on warped products") {
    const auto M = builtin_model("warped_product", {{"n", 3}, {"f", "cosh"}, {"rate", 0.8}});
    const auto path = point_congruence_tensor(M, Std{0.1, 0, 0, 0}, Std{1.3, 0.4, 0.2, 0.1}, run(3.0));
    const auto rep = evolve_weighted_congruence(M, path, params_inf(0.0));
    CHECK(rep.max_lagrange <= 1e-7);
    CHECK(rep.min_nontriviality > 1e-10);

    // Non-Lagrange initial data is not flagged.
    Mat J1 = Mat::Identity(3, 3);
    J1(0, 1) = 0.5;
    const auto custom = jacobi_tensor_path(M, Std{0.1, 0, 0, 0}, Std{1.3, 0.4, 0.2, 0.1}, Mat::Identity(3, 3), J1, run(1.0));
    CHECK_FALSE(custom.lagrange);
}

TEST_CASE("weighted curvature in the frame") {
    const auto plain = builtin_model("warped_product", {{"n", 3}, {"f", "cosh"}, {"rate", 0.7}});
    const auto path0 = point_congruence_tensor(plain, Std{0, 0, 0, 0}, Std{1.2, 0.3, 0.5, 0}, run(2.0));
    const auto R = frame_curvature(plain, path0);
    for (const auto& p : {params(6, 0.5), params_inf(0.2), params(-1, 0.4)}) {
        const auto Rw = frame_curvature(plain, path0, p);
        for (size_t i = 0; i < R.size(); ++i) CHECK((Rw[i] - R[i]).norm() <= 1e-14 * (1 + R[i].norm()));
    }

    const auto M = with_weight(builtin("warped_product", {{"n", 3}, {"f", "cosh"}, {"rate", 0.7}}),
                               {{"type", "linear_t"}, {"lambda", 0.4}});
    const auto path = point_congruence_tensor(M, Std{0, 0, 0, 0}, Std{1.2, 0.3, 0.5, 0}, run(2.0, {0.5, 0.0}));
    for (const auto& p : {params(6, 0.5), params_inf(0.0), params(0, 0.0)}) {
        const auto Rw = frame_curvature(M, path, p);
        for (size_t i = 0; i < Rw.size(); ++i) {
            const auto s = sample_congruence(M, path, path.geodesic.t[i]);
            const double k = 2.0 * (1.0 - p.epsilon) / 3.0;
            const double ric = std::exp(2 * k * s.geo.psi) * weighted_ricci(M, span_of_std(s.x), span_of_std(s.v), p.N);
            CHECK(std::abs(Rw[i].trace() - ric) <= 1e-7 * (1 + std::abs(ric)));
        }
    }
}

TEST_CASE("weighted identities on a warped product") {
    const auto M = with_weight(builtin("warped_product", {{"n", 3}, {"f", "cosh"}, {"rate", 0.7}}),
                               {{"type", "linear_t"}, {"lambda", 0.4}});
    const auto path = point_congruence_tensor(M, Std{0, 0.1, 0, 0}, Std{1.3, 0.4, 0.2, 0.1}, run(3.0, {0.5, 0.0, -0.9}));
    for (const auto& p : {params(6, 0.5), params_inf(0.0), params(0, 0.0), params(3, -0.9), params(-4, 0.5)}) {
        CAPTURE(p.N.to_string());
        CAPTURE(p.epsilon);
        const auto rep = evolve_weighted_congruence(M, path, p);
        CHECK(rep.max_jacobi <= 1e-6);
        CHECK(rep.max_riccati <= 1e-6);
        CHECK(rep.max_raychaudhuri <= 1e-6);
        CHECK(rep.max_expansion_consistency <= 1e-7);
        CHECK(rep.max_trace_free <= 1e-9);
        CHECK(rep.max_inequality <= 1e-6);
        CHECK(rep.max_bishop <= 1e-6);
        if (std::isfinite(rep.min_ricN)) CHECK(rep.max_ricci_trace <= 1e-7);
        for (const auto& r : rep.rows) {
            CHECK((r.theta_eps < 0) == (r.theta_1 < 0));
            CHECK((r.theta_eps < 0) == (r.theta_psi < 0));
        }
    }
    CHECK(evolve_weighted_congruence(M, path, params(6, 0.5)).form == RaychaudhuriForm::finite);
    CHECK(evolve_weighted_congruence(M, path, params_inf(0.0)).form == RaychaudhuriForm::infinite);
    CHECK(evolve_weighted_congruence(M, path, params(0, 0.0)).form == RaychaudhuriForm::extremal);
    CHECK_THROWS_AS(evolve_weighted_congruence(M, path, params_inf(1.0)), ParameterError);
    CHECK_THROWS_AS(evolve_weighted_congruence(M, path, params(0, 0.5)), ParameterError);
    CHECK_THROWS_AS(evolve_weighted_congruence(M, path, params(6, 0.2)), PreconditionError);
}

TEST_CASE("weighted identities along null geodesics") {
    const auto M = with_weight(builtin("warped_product", {{"n", 3}, {"f", "cosh"}, {"rate", 0.7}}),
                               {{"type", "direction_dependent"}, {"kappa", 0.3}});
    const Std x{0.2, 0, 0, 0};
    const double w = std::cosh(0.7 * 0.2);
    const Std v{1.0, 0.6 / w, 0.8 / w, 0};
    const auto path = point_congruence_tensor(M, x, v, run(3.0, {0.0, 0.5}));
    CHECK(path.m() == 2);
    CHECK(path.geodesic.side == Side::null);
    auto null = [](double N, double e) { return WeightedRicciParams{ExtendedReal::finite(N), e, Side::null}; };
    for (const auto& p : {null(6, 0.5), null(1, 0.0), WeightedRicciParams{ExtendedReal::inf(), 0.0, Side::null},
                          null(3, 0.5), null(-2, 0.0)}) {
        CAPTURE(p.N.to_string());
        const auto rep = evolve_weighted_congruence(M, path, p);
        CHECK(rep.side == Side::null);
        CHECK(rep.max_jacobi <= 1e-6);
        CHECK(rep.max_riccati <= 1e-6);
        CHECK(rep.max_raychaudhuri <= 1e-6);
        CHECK(rep.max_inequality <= 1e-6);
        CHECK(rep.max_trace_free <= 1e-9);
        CHECK(rep.max_lagrange <= 1e-7);
    }
}

TEST_CASE("s0 prediction") {
    const auto M = builtin_model("minkowski", {{"n", 3}});
    const double T = 2.5;
    auto o = run(4.0, {0.0, 1.0});
    o.unit_speed = true;
    const auto path = jacobi_tensor_path(M, Std{0, 0, 0, 0}, Std{1, 0, 0, 0}, T * Mat::Identity(3, 3),
                                         -Mat::Identity(3, 3), o);
    CHECK(path.lagrange);
    const auto rep = evolve_weighted_congruence(M, path, params_inf(0.0));
    CHECK(rep.c == doctest::Approx(1.0 / 3.0));
    const double theta0 = rep.rows.front().theta_eps;
    CHECK(theta0 == doctest::Approx(-3.0 / T).epsilon(1e-12));
    const auto s0 = s0_prediction(theta0, 0.0, rep.c, path.geodesic, 0);
    REQUIRE(s0.s0);
    CHECK(s0.outcome == "bound");
    CHECK(*s0.s0 == doctest::Approx(T).epsilon(1e-9));
    REQUIRE(rep.conjugate_times.size() == 1);
    CHECK(std::abs(rep.conjugate_times[0].t - T) <= 1e-8);

    // tau_1 = t without a weight: s0 = -1/(c theta).
    const auto s1 = s0_prediction(-2.0, 0.5, 0.25, path.geodesic, 1);
    REQUIRE(s1.s0);
    CHECK(*s1.s0 == doctest::Approx(2.0).epsilon(1e-10));

    const auto far = s0_prediction(-0.1, 0.0, 1.0 / 3.0, path.geodesic, 0);
    CHECK_FALSE(far.s0);
    CHECK(far.outcome == "inconclusive: horizon");
    CHECK_THROWS_AS(s0_prediction(0.0, 0.0, 1.0, path.geodesic, 0), ParameterError);
    CHECK_THROWS_AS(s0_prediction(-1.0, 0.0, 0.0, path.geodesic, 0), ParameterError);
}

TEST_CASE("focusing bound on a weighted anti-de Sitter run") {
    const auto M = with_weight(builtin("constant_curvature", {{"n", 3}, {"K", 1.0}}),
                               {{"type", "linear_t"}, {"lambda", 0.05}});
    Mat J1 = -0.4 * Mat::Identity(3, 3);
    auto o = run(6.0, {0.0, 0.3});
    o.unit_speed = true;
    const auto path = jacobi_tensor_path(M, Std{0, 0.1, 0, 0}, Std{1.2, 0.3, 0, 0.1}, Mat::Identity(3, 3), J1, o);
    for (const auto& p : {params_inf(0.0), params(6, 0.3)}) {
        const auto rep = evolve_weighted_congruence(M, path, p);
        CHECK(rep.min_ricN >= 0.0);
        const double th0 = rep.rows.front().theta_eps;
        REQUIRE(th0 < 0.0);
        const auto s0 = s0_prediction(th0, 0.0, rep.c, path.geodesic, epsilon_index(path.geodesic, p.epsilon));
        REQUIRE(s0.s0);
        REQUIRE(!rep.conjugate_times.empty());
        CHECK(rep.conjugate_times[0].t <= *s0.s0 + 1e-9);
    }
}

TEST_CASE("genericity probe") {
    const auto M = builtin_model("minkowski", {{"n", 3}});
    const auto flat = point_congruence_tensor(M, Std{0, 0, 0, 0}, Std{1, 0.2, 0, 0}, run(1.0));
    const auto g0 = genericity_probe(M, flat, false);
    CHECK(g0.margin == 0.0);
    CHECK_FALSE(g0.generic);

    const auto W = builtin_model("warped_product", {{"n", 3}, {"f", "cosh"}, {"rate", 0.7}});
    CHECK(genericity_probe(W, point_congruence_tensor(W, Std{0, 0, 0, 0}, Std{1, 0.2, 0, 0}, run(1.0)), false).generic);

    const double lambda = 0.6;
    const auto Mw = with_weight(builtin("minkowski", {{"n", 3}}), {{"type", "linear_t"}, {"lambda", lambda}});
    const Std v{1.3, 0.5, 0.2, 0.1};
    const auto path = point_congruence_tensor(Mw, Std{0, 0, 0, 0}, v, run(1.0));
    const auto gw = genericity_probe(Mw, path, true);
    CHECK(gw.generic);
    CHECK(gw.margin == doctest::Approx(lambda * lambda * v[0] * v[0] / 9.0).epsilon(1e-10));
    CHECK_FALSE(genericity_probe(Mw, path, false).generic);
}

namespace {

SurfacePatch sphere(double r) {
    SurfacePatch p;
    p.param_dim = 2;
    p.map = [r](const Vec& q) {
        Vec x(4);
        x << 0.0, r * std::sin(q[0]) * std::cos(q[1]), r * std::sin(q[0]) * std::sin(q[1]), r * std::cos(q[0]);
        return x;
    };
    p.outward = [p](const Vec& q) {
        Vec x = p.map(q);
        x[0] = 0.0;
        return x;
    };
    p.step = 1e-3;
    return p;
}

}  // namespace

TEST_CASE("lightlike normals and expansions of a round sphere") {
    const auto M = builtin_model("minkowski", {{"n", 3}});
    const double r = 1.7;
    const auto patch = sphere(r);
    std::vector<Vec> qs;
    for (double a : {0.4, 1.1, 2.3})
        for (double b : {0.0, 2.0, 4.5}) qs.push_back((Vec(2) << a, b).finished());
    const auto data = analyze_surface(M, patch, qs);
    CHECK_FALSE(data.psi_trapped);
    for (const auto& s : data.samples) {
        Vec radial = s.point / r;
        radial[0] = 0.0;
        Vec expect(4);
        expect << 1.0, radial[1], radial[2], radial[3];
        CHECK((s.V_plus - expect).norm() <= 1e-12);
        expect.tail(3) *= -1.0;
        CHECK((s.V_minus - expect).norm() <= 1e-12);
        CHECK(std::abs(s.theta_plus - 2.0 / r) <= 1e-5 * 2.0 / r);
        CHECK(std::abs(s.theta_minus + 2.0 / r) <= 1e-5 * 2.0 / r);
        CHECK(s.theta1_plus == s.theta_plus);
        CHECK(s.theta1_minus == s.theta_minus);
        CHECK(s.normal_residual <= 1e-9);
    }

    // Ingoing congruence focuses at t = r.
    const auto& s = data.samples[4];
    auto o = run(2.5 * r, {0.0});
    const auto path = surface_congruence(M, s, NormalSide::minus, o);
    CHECK(path.kind == TensorKind::from_surface);
    CHECK(path.lagrange);
    const WeightedRicciParams p{ExtendedReal::inf(), 0.0, Side::null};
    const auto rep = evolve_weighted_congruence(M, path, p);
    REQUIRE(!rep.conjugate_times.empty());
    const auto s0 = s0_prediction(s.theta_minus, 0.0, rep.c, path.geodesic, 0);
    REQUIRE(s0.s0);
    CHECK(std::abs(*s0.s0 - r) <= 0.02 * r);
    CHECK(std::abs(rep.conjugate_times[0].t - *s0.s0) <= 0.02 * r);
    CHECK(rep.conjugate_times[0].multiplicity == 2);
}

TEST_CASE("a weight can trap a round sphere") {
    // psi = 3 x0 raises psi' = 3 along both normals above the expansion 2/r.
    const double r = 1.0;
    const auto M = with_weight(builtin("minkowski", {{"n", 3}}), {{"type", "linear_t"}, {"lambda", -3.0}});
    const auto patch = sphere(r);
    const auto data = analyze_surface(M, patch, {(Vec(2) << 0.7, 0.3).finished(), (Vec(2) << 2.0, 5.0).finished()});
    CHECK(data.psi_trapped);
    for (const auto& s : data.samples) {
        CHECK(s.theta_plus > 0.0);
        CHECK(s.theta1_plus == doctest::Approx(2.0 / r - 3.0).epsilon(1e-5));
        CHECK(s.theta1_minus == doctest::Approx(-2.0 / r - 3.0).epsilon(1e-5));
    }
    const auto mild = with_weight(builtin("minkowski", {{"n", 3}}), {{"type", "linear_t"}, {"lambda", -1.0}});
    CHECK_FALSE(analyze_surface(mild, patch, {(Vec(2) << 0.7, 0.3).finished()}).psi_trapped);
}

TEST_CASE("lightlike normals of a Randers perturbation") {
    const auto M = builtin_model("randers_perturbed", {{"n", 3}, {"epsilon", 0.15}});
    const auto patch = sphere(1.3);
    for (double a : {0.5, 1.2, 2.6}) {
        const Vec q = (Vec(2) << a, 0.8).finished();
        const auto s = surface_expansion(M, patch, q);
        CHECK(s.normal_residual <= 1e-9);
        const Mat gp = vertical_hessian(M, span_of_std(s.point), span_of_std(s.V_plus));
        const Mat gm = vertical_hessian(M, span_of_std(s.point), span_of_std(s.V_minus));
        CHECK((s.tangent.transpose() * gp * s.V_plus).norm() <= 1e-8);
        CHECK((s.tangent.transpose() * gm * s.V_minus).norm() <= 1e-8);
        CHECK(std::abs(M.L(span_of_std(s.point), span_of_std(s.V_plus))) <= 1e-9);
        const Vec a1 = s.V_plus.normalized(), a2 = s.V_minus.normalized();
        CHECK((a1 - a2).norm() > 1e-3);
    }
    Mat bad(4, 2);
    bad << 1, 0, 0, 1, 0, 0, 0, 0;
    CHECK_THROWS_AS(lightlike_normals(M, Std{0, 0, 0, 0}, bad, Vec::Ones(4)), PreconditionError);
}

TEST_CASE("congruence CSV") {
    const auto M = builtin_model("minkowski", {{"n", 2}});
    const auto path = point_congruence_tensor(M, Std{0, 0, 0}, Std{1, 0.1, 0}, run(1.0));
    const auto rep = evolve_weighted_congruence(M, path, params_inf(0.0));
    std::ostringstream os;
    write_congruence_csv(os, rep);
    const auto text = os.str();
    CHECK(text.rfind("t,tau_eps,theta,theta_eps,sigma_eps2,ricN,residual\n", 0) == 0);
    CHECK(static_cast<size_t>(std::count(text.begin(), text.end(), '\n')) == rep.rows.size() + 1);
}
