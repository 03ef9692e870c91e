#include <doctest.h>

#include <cmath>
#include <sstream>

#include "wlf/geodesic.hpp"
#include "wlf/oracles.hpp"

using namespace wlf;

namespace {

using Std = std::vector<double>;

SpacetimeModel weighted_minkowski(int n, double lambda) {
    return model_from_config(
        {{"builtin", "minkowski"}, {"params", {{"n", n}}}, {"weight", {{"type", "linear_t"}, {"lambda", lambda}}}});
}

}  // namespace

TEST_CASE("integrator on a harmonic oscillator") {
    OdeRhs rhs = [](double, const Vec& y, Vec& dy) {
        dy.resize(2);
        dy << y[1], -y[0];
    };
    Vec y0(2);
    y0 << 1.0, 0.0;
    OdeOptions o;
    auto r = integrate_ode(rhs, 0.0, y0, 10.0, o);
    CHECK(r.status == OdeStatus::completed);
    CHECK(r.t.back() == 10.0);
    CHECK(std::abs(r.y.back()[0] - std::cos(10.0)) <= 1e-8);
    for (double t = 0.05; t < 10.0; t += 0.37) {
        CHECK(std::abs(r.dense.value(t)[0] - std::cos(t)) <= 1e-8);
        CHECK(std::abs(r.dense.derivative(t)[0] + std::sin(t)) <= 1e-6);
        CHECK(std::abs(r.dense.derivative(t)[1] + std::cos(t)) <= 1e-6);
    }
    CHECK(r.error_estimate > 0.0);

    o.fixed_step = true;
    o.step = 1e-2;
    auto f = integrate_ode(rhs, 0.0, y0, 10.0, o);
    CHECK(std::abs(f.y.back()[0] - std::cos(10.0)) <= 1e-7);
    CHECK(std::abs(f.dense.value(3.333)[0] - std::cos(3.333)) <= 1e-7);
}

TEST_CASE("integrator events and failures") {
    OdeRhs unit = [](double, const Vec& y, Vec& dy) { dy = Vec::Ones(y.size()); };
    auto r = integrate_ode(unit, 0.0, Vec::Zero(1), 2.0, {}, [](double, const Vec& y) { return y[0] < 0.5; });
    CHECK(r.status == OdeStatus::boundary);
    CHECK(std::abs(r.t.back() - 0.5) <= 1e-10);

    OdeRhs wall = [](double t, const Vec& y, Vec& dy) {
        if (t > 1.0) throw DomainError("wall");
        dy = Vec::Ones(y.size());
    };
    auto w = integrate_ode(wall, 0.0, Vec::Zero(1), 2.0, {});
    CHECK(w.status == OdeStatus::step_collapse);
    CHECK(w.t.back() <= 1.0);
    CHECK(w.t.back() > 0.99);
    CHECK_THROWS_AS((void)integrate_ode(unit, 1.0, Vec::Zero(1), 0.0, {}), ParameterError);
}

TEST_CASE("Minkowski geodesics are straight lines") {
    auto m = builtin_model("minkowski", {{"n", 3}});
    const Std x0{0, 0, 0, 0}, v0{1, 0.3, 0, 0};
    GeodesicOptions o;
    o.t_end = 5.0;
    auto g = integrate_geodesic(m, x0, v0, o);
    CHECK(g.reached_end());
    for (size_t i = 0; i < g.t.size(); ++i) {
        const Vec x = g.x(i);
        CHECK(std::abs(x[0] - g.t[i]) <= 1e-13);
        CHECK(std::abs(x[1] - 0.3 * g.t[i]) <= 1e-13);
        CHECK(m.L(Std(x.data(), x.data() + 4), v0) == g.L_value);
    }
    CHECK(exponential_map(m, x0, v0)[1] == doctest::Approx(0.3));
    CHECK_THROWS_AS((void)integrate_geodesic(m, x0, Std{0, 1, 0, 0}, o), ParameterError);
}

TEST_CASE("conservation of L on builtin models") {
    std::vector<std::pair<SpacetimeModel, Std>> runs{
        {builtin_model("minkowski", {{"n", 3}}), {1.0, 0.2, -0.3, 0.1}},
        {builtin_model("warped_product", {{"n", 3}, {"f", "cosh"}}), {1.2, 0.5, -0.3, 0.2}},
        {builtin_model("warped_product", {{"n", 2}, {"f", "exp"}, {"rate", 0.1}}), {1.0, 0.4, 0.2}},
        {builtin_model("constant_curvature", {{"n", 3}, {"K", 1.0}}), {1.0, 0.4, 0.1, -0.2}},
        {builtin_model("randers_perturbed", {{"n", 3}, {"epsilon", 0.2}}), {1.3, 0.3, 0.4, -0.1}},
        {builtin_model("beem", {{"k", 3}}), {0.5, std::sqrt(3.0) / 2}},
    };
    for (auto& [m, v0] : runs) {
        const Std x0(m.dim, 0.0);
        GeodesicOptions o;
        o.t_end = 20.0;
        auto g = integrate_geodesic(m, x0, v0, o);
        double drift = 0.0;
        for (size_t i = 0; i < g.t.size(); ++i) {
            const Vec x = g.x(i), v = g.v(i);
            drift = std::max(drift, std::abs(m.L(Std(x.data(), x.data() + m.dim), Std(v.data(), v.data() + m.dim)) - g.L_value));
        }
        INFO(m.name);
        CHECK(drift <= 1e-7 * std::max(1.0, std::abs(g.L_value)));
    }
}

TEST_CASE("unit speed and chart exit") {
    auto m = builtin_model("warped_product", {{"n", 1}, {"f", "exp"}, {"rate", 10.0}});
    GeodesicOptions o;
    o.t_end = 20.0;
    o.unit_speed = true;
    o.epsilons = {1.0};
    auto g = integrate_geodesic(m, Std{0, 0}, Std{2.0, 0.0}, o);
    CHECK(g.L_value == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(g.status == OdeStatus::boundary);
    CHECK(g.t_end() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(g.tau(0, g.t.size() - 1) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS((void)exponential_map(m, Std{0, 0}, Std{1.0, 0.0}, 5.0), ChartExitError);
}

TEST_CASE("epsilon-proper time") {
    const int n = 3;
    const double lambda = 0.4;
    auto m = weighted_minkowski(n, lambda);
    GeodesicOptions o;
    o.t_end = 6.0;
    o.epsilons = {0.0, 1.0, 0.5};
    auto g = integrate_geodesic(m, Std{0, 0, 0, 0}, Std{1, 0, 0, 0}, o);
    for (size_t i = 0; i < g.t.size(); ++i) {
        const double t = g.t[i];
        const double closed = (n / (2 * lambda)) * (std::exp(2 * lambda * t / n) - 1);
        CHECK(std::abs(g.tau(0, i) - closed) <= 1e-9 * std::max(1.0, closed));
        CHECK(std::abs(g.tau(1, i) - t) <= 1e-12 * std::max(1.0, t));
        if (i) CHECK(g.tau(2, i) > g.tau(2, i - 1));
    }
    // dtau/dt against the integrand off the grid.
    for (double t = 0.013; t < 6.0; t += 0.41) {
        const Vec x = g.x_at(t), v = g.v_at(t);
        const double psi = m.psi(Std(x.data(), x.data() + 4), Std(v.data(), v.data() + 4));
        for (size_t e = 0; e < 3; ++e) {
            const double integrand = std::exp(2 * (o.epsilons[e] - 1) / n * psi);
            const double d = g.dense.derivative(t, g.layout.tau() + static_cast<int>(e), 1)[0];
            CHECK(std::abs(d - integrand) <= 1e-6 * integrand);
        }
    }
    auto inv = g.tau_inverse(0, 2.0);
    REQUIRE(inv.has_value());
    CHECK(g.tau_at(0, *inv) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(!g.tau_inverse(0, 1e6).has_value());

    // Null geodesics use the n - 1 exponent.
    auto gn = integrate_geodesic(m, Std{0, 0, 0, 0}, Std{1, 1, 0, 0}, o);
    const size_t last = gn.t.size() - 1;
    const double closed = ((n - 1) / (2 * lambda)) * (std::exp(2 * lambda * gn.t[last] / (n - 1)) - 1);
    CHECK(gn.tau(0, last) == doctest::Approx(closed).epsilon(1e-9));
}

TEST_CASE("parallel frames") {
    SUBCASE("Minkowski frame is constant") {
        auto m = builtin_model("minkowski", {{"n", 3}});
        GeodesicOptions o;
        o.t_end = 3.0;
        auto g = integrate_geodesic(m, Std{0, 0, 0, 0}, Std{1, 0.2, 0, 0}, o);
        const Mat E0 = default_frame(m, Std{0, 0, 0, 0}, Std{1, 0.2, 0, 0});
        auto pf = transport_frame(m, g, E0);
        for (const auto& E : pf.basis) CHECK((E - E0).cwiseAbs().maxCoeff() <= 1e-13);
    }
    SUBCASE("warped product gram and orthogonality") {
        auto m = builtin_model("warped_product", {{"n", 3}, {"f", "cosh"}});
        const Std x0{0.2, 0, 0, 0}, v0{1.0, 0.6, -0.2, 0.3};
        GeodesicOptions o;
        o.t_end = 10.0;
        o.unit_speed = true;
        auto g = integrate_geodesic(m, x0, v0, o);
        const Vec v = g.v(0);
        auto pf = transport_frame(m, g, default_frame(m, x0, Std(v.data(), v.data() + 4)));
        const Mat h0 = pf.gram.front();
        CHECK((h0 - Mat::Identity(3, 3)).norm() <= 1e-12);
        for (size_t i = 0; i < pf.t.size(); ++i) {
            CHECK((pf.gram[i] - h0).cwiseAbs().maxCoeff() <= 1e-6);
            const Vec xi = pf.solution.x(i), vi = pf.solution.v(i);
            const auto geo = evaluate_geometry(m, Std(xi.data(), xi.data() + 4), Std(vi.data(), vi.data() + 4),
                                               GeometryLevel::metric);
            CHECK((pf.basis[i].transpose() * geo.g * vi).cwiseAbs().maxCoeff() <= 1e-7);
        }
        // D e = 0 checked with differences of the continuous output.
        const auto& s = pf.solution;
        std::vector<double> ts{0.7, 3.1, 6.4, 9.2};
        for (int col = 0; col < 3; ++col) {
            auto D = covariant_derivative(
                m, [&](double t) { return s.x_at(t); }, [&](double t) { return Vec(s.frame_at(t).col(col)); },
                [&](double t) { return s.v_at(t); }, ts);
            for (const auto& d : D) CHECK(d.norm() <= 1e-6);
        }
        CHECK_THROWS_AS((void)transport_frame(m, g, Mat::Identity(4, 4).leftCols(3)), PreconditionError);
    }
    SUBCASE("null quotient frame in Minkowski") {
        auto m = builtin_model("minkowski", {{"n", 3}});
        const Std x0{0, 0, 0, 0}, v0{1, 0, 1, 0};
        GeodesicOptions o;
        o.t_end = 4.0;
        auto g = integrate_geodesic(m, x0, v0, o);
        CHECK(g.side == Side::null);
        CHECK(g.m == 2);
        const Mat E0 = default_frame(m, x0, v0);
        auto pf = transport_frame(m, g, E0);
        const Mat h0 = pf.gram.front();
        CHECK(h0.determinant() > 0.0);
        for (const auto& h : pf.gram) CHECK((h - h0).cwiseAbs().maxCoeff() <= 1e-13);
    }
}

TEST_CASE("covariant derivative") {
    SUBCASE("Minkowski reduces to the ordinary derivative") {
        auto m = builtin_model("minkowski", {{"n", 2}});
        auto curve = [](double t) { Vec x(3); x << t, std::sin(t), 0.0; return x; };
        auto X = [](double t) { Vec x(3); x << t * t, 1.0, std::cos(t); return x; };
        auto ref = [](double) { Vec x(3); x << 1.0, 0.1, 0.0; return x; };
        auto D = covariant_derivative(m, curve, X, ref, {0.5, 1.5});
        CHECK(D[0][0] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(D[1][2] == doctest::Approx(-std::sin(1.5)).epsilon(1e-9));
        CHECK_THROWS_AS((void)covariant_derivative(m, Vec::Zero(3), Vec::Ones(3), Vec::Ones(3), Vec::Ones(3), Vec::Zero(3)),
                        ParameterError);
    }
    SUBCASE("geodesic velocity is parallel") {
        auto m = builtin_model("randers_perturbed", {{"n", 3}, {"epsilon", 0.2}});
        GeodesicOptions o;
        o.t_end = 5.0;
        auto g = integrate_geodesic(m, Std{0, 0, 0, 0}, Std{1.2, 0.3, 0.1, 0.2}, o);
        auto pos = [&](double t) { return g.x_at(t); };
        auto vel = [&](double t) { return g.v_at(t); };
        for (const auto& d : covariant_derivative(m, pos, vel, vel, {0.5, 2.0, 4.0})) CHECK(d.norm() <= 1e-7);
    }
    SUBCASE("quadratic model matches the Christoffel oracle") {
        auto m = builtin_model("constant_curvature", {{"n", 2}, {"K", 0.6}});
        auto curve = [](double t) { Vec x(3); x << 0.3 * t, 0.2 * std::sin(t), 0.1 * t * t; return x; };
        auto X = [](double t) { Vec x(3); x << 1.0 + t, 0.5 * std::cos(t), -0.3; return x; };
        auto ref = [](double t) { Vec x(3); x << 1.0, 0.2 * t, 0.1; return x; };
        for (double t : {0.2, 0.9}) {
            const Vec mine = covariant_derivative(m, curve, X, ref, {t})[0];
            auto Lc = oracle::lorentzian_curvature(m, curve(t));
            const double h = 1e-4;
            const Vec xd = (curve(t + h) - curve(t - h)) / (2 * h), Xd = (X(t + h) - X(t - h)) / (2 * h);
            Vec expect = Xd;
            for (int a = 0; a < 3; ++a) expect[a] += xd.dot(Lc.christoffel[a] * X(t));
            CHECK((mine - expect).norm() <= 1e-6);
        }
    }
}

TEST_CASE("exponential map") {
    auto mk = builtin_model("minkowski", {{"n", 2}});
    const Vec e = exponential_map(mk, Std{1, 2, 3}, Std{1, 0.5, 0});
    CHECK((e - Eigen::Vector3d(2, 2.5, 3)).norm() <= 1e-13);

    auto m = builtin_model("warped_product", {{"n", 2}, {"f", "cosh"}});
    const Std x{0.1, 0.2, -0.1}, v{1.0, 0.4, 0.3};
    for (double c : {0.5, 2.0}) {
        const Std cv{c * v[0], c * v[1], c * v[2]};
        const Vec a = exponential_map(m, x, cv, 1.0), b = exponential_map(m, x, v, c);
        CHECK((a - b).norm() <= 1e-8);
    }
    CHECK((exponential_map(m, x, v, 1.0, 1e-10) - exponential_map(m, x, v, 1.0, 1e-12)).norm() <= 1e-8);
}

TEST_CASE("self-convergence against the reported error estimate") {
    auto m = builtin_model("randers_perturbed", {{"n", 3}, {"epsilon", 0.2}});
    GeodesicOptions o;
    o.t_end = 10.0;
    o.tol = 1e-8;
    auto a = integrate_geodesic(m, Std{0, 0, 0, 0}, Std{1.2, 0.3, 0.1, 0.2}, o);
    o.tol = 5e-9;
    auto b = integrate_geodesic(m, Std{0, 0, 0, 0}, Std{1.2, 0.3, 0.1, 0.2}, o);
    CHECK((a.x(a.t.size() - 1) - b.x(b.t.size() - 1)).cwiseAbs().maxCoeff() <= 10 * a.error_estimate);
}

TEST_CASE("curve length") {
    auto mk = builtin_model("minkowski", {{"n", 3}});
    GeodesicOptions o;
    o.t_end = 7.0;
    o.unit_speed = true;
    auto g = integrate_geodesic(mk, Std{0, 0, 0, 0}, Std{2, 1, 0, 0}, o);
    CHECK(curve_length(mk, g) == doctest::Approx(7.0).epsilon(1e-12));
    auto nul = integrate_geodesic(mk, Std{0, 0, 0, 0}, Std{1, 0, 0, 1}, o);
    CHECK(curve_length(mk, nul) == 0.0);

    auto m = builtin_model("warped_product", {{"n", 2}, {"f", "cosh"}});
    auto w = integrate_geodesic(m, Std{0.1, 0, 0}, Std{1.0, 0.5, 0.2}, o);
    const double direct = curve_length(m, w);
    const double S = 6.0;
    auto phi = [&](double s) { return w.t_end() * (s + 0.2 * std::sin(s)) / (S + 0.2 * std::sin(S)); };
    auto dphi = [&](double s) { return w.t_end() * (1 + 0.2 * std::cos(s)) / (S + 0.2 * std::sin(S)); };
    const double re = curve_length(
        m, [&](double s) { return w.x_at(phi(s)); }, [&](double s) { return Vec(dphi(s) * w.v_at(phi(s))); }, 0.0, S);
    CHECK(std::abs(re - direct) <= 1e-7 * direct);
    CHECK_THROWS_AS((void)curve_length(
                        mk, [](double) { return Vec(Vec::Zero(4)); }, [](double) { return Vec(Vec::Unit(4, 1)); }, 0, 1),
                    ParameterError);
}

TEST_CASE("csv export") {
    auto m = weighted_minkowski(2, 0.3);
    GeodesicOptions o;
    o.t_end = 1.0;
    o.epsilons = {0.0, 0.5};
    auto g = integrate_geodesic(m, Std{0, 0, 0}, Std{1, 0, 0}, o);
    std::ostringstream s;
    write_geodesic_csv(s, m, g);
    std::istringstream in(s.str());
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,x0,x1,x2,v0,v1,v2,L,psi,tau_0,tau_0.5");
    CHECK(format_number(0.1) == "0.10000000000000001");
}
