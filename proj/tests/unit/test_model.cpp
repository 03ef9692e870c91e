#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "wlf/expression.hpp"
#include "wlf/model.hpp"

using namespace wlf;

TEST_CASE("expression parsing") {
    auto e = parse_expression("-(v0^2)/2 + (v1^2)/2", 2);
    const double x[2] = {0, 0}, v[2] = {2.0, 1.0};
    CHECK(e.evaluate(x, v) == doctest::Approx(-1.5));

    auto beem3 = parse_expression("(v0*v0 + v1*v1) * cos(3*atan2(v1,v0))", 2);
    const double w[2] = {std::cos(std::numbers::pi / 3), std::sin(std::numbers::pi / 3)};
    CHECK(beem3.evaluate(x, w) == doctest::Approx(-1.0));

    try {
        (void)parse_expression("v0 +* v1", 2);
        FAIL("expected a syntax error");
    } catch (const ParseError& err) {
        CHECK(err.offset() == 3);
    }
    CHECK_THROWS_AS((void)parse_expression("v2 + 1", 2), ParseError);
    CHECK_THROWS_AS((void)parse_expression("foo(v0)", 2), ParseError);
    CHECK_THROWS_AS((void)parse_expression("atan2(v0)", 2), ParseError);
    CHECK_THROWS_AS((void)parse_expression("y", 2), ParseError);
    CHECK_THROWS_AS((void)parse_expression("", 2), ParseError);
    CHECK_THROWS_AS((void)parse_expression("(v0 + 1", 2), ParseError);
}

TEST_CASE("precedence of unary minus and powers") {
    const double x[1] = {0}, v[1] = {3.0};
    CHECK(parse_expression("-v0^2", 1).evaluate(x, v) == doctest::Approx(-9.0));
    CHECK(parse_expression("2^3^2", 1).evaluate(x, v) == doctest::Approx(512.0));
    CHECK(parse_expression("v0^-1", 1).evaluate(x, v) == doctest::Approx(1.0 / 3.0));
    CHECK(parse_expression("1 - 2 - 3", 1).evaluate(x, v) == doctest::Approx(-4.0));
    CHECK(parse_expression("8 / 2 / 2", 1).evaluate(x, v) == doctest::Approx(2.0));
}

TEST_CASE("print and reparse round trip") {
    const char* sources[] = {
        "-(v0^2)/2 + (v1^2)/2",
        "(v0*v0 + v1*v1) * cos(3*atan2(v1,v0))",
        "exp(0.1*x0) * v1^2 - sqrt(1 + v0^2) + log(2 + sin(x1)) - -v0",
        "pow(cosh(x0), 2.5) * sinh(v1) / (1 + atan(v0)) ^ -2",
        "pi * 1e-3 + 0.1",
    };
    for (const char* s : sources) {
        auto a = parse_expression(s, 2);
        auto b = parse_expression(a.to_string(), 2);
        CHECK(same_tree(a.root(), b.root()));
        CHECK(b.to_string() == a.to_string());
    }
}

TEST_CASE("jet evaluation of an expression matches a hand-written Lagrangian") {
    auto e = parse_expression("0.5*(-(v0^2) + exp(2*x0)*v1^2)", 2);
    JetSpace s(2, kCurvatureTruncation);
    const std::vector<double> x{0.3, 0.0}, v{1.2, 0.4};
    auto [xs, vs] = s.lift_point(x, v);
    Jet L = e.evaluate(std::span<const Jet>(xs), std::span<const Jet>(vs));
    MultiIndex a(4, 0);
    a[0] = 1;
    a[3] = 2;
    CHECK(L.partial(a) == doctest::Approx(2.0 * std::exp(0.6)));
}

namespace {

std::vector<SpacetimeModel> battery() {
    return {
        builtin_model("minkowski", {{"n", 3}}),
        builtin_model("warped_product", {{"n", 3}, {"f", "cosh"}}),
        builtin_model("warped_product", {{"n", 2}, {"f", "exp"}, {"rate", 0.5}}),
        builtin_model("constant_curvature", {{"n", 3}, {"K", 0.5}}),
        builtin_model("randers_perturbed", {{"n", 3}, {"epsilon", 0.15}}),
        model_from_config({{"builtin", "minkowski"}, {"params", {{"n", 2}}}, {"weight", {{"type", "direction_dependent"}, {"kappa", 0.3}}}}),
    };
}

}  // namespace

TEST_CASE("builtin registry") {
    auto m = builtin_model("minkowski", {{"n", 3}});
    CHECK(m.dim == 4);
    CHECK(!m.weighted());
    CHECK(count_cone_components(builtin_model("beem", {{"k", 3}}), std::vector<double>{0, 0}, 1024) == 3);
    CHECK_THROWS_AS((void)builtin_model("nope", json::object()), ConfigError);
    CHECK_THROWS_AS((void)builtin_model("minkowski", {{"n", 3}, {"bogus", 1}}), ConfigError);
    CHECK_THROWS_AS((void)builtin_model("randers_perturbed", {{"epsilon", 0.9}}), ParameterError);
    CHECK_THROWS_AS((void)model_from_config({{"builtin", "minkowski"}, {"extra", 1}}), ConfigError);

    // Signature at random base points for the cosh warped product.
    auto w = builtin_model("warped_product", {{"n", 3}, {"f", "cosh"}});
    std::mt19937_64 rng(0);
    std::uniform_real_distribution<double> U(-3, 3);
    for (int s = 0; s < 1000; ++s) {
        std::vector<double> x{U(rng), U(rng), U(rng), U(rng)};
        CHECK(negative_index(vertical_hessian(w, x, w.future_seed)) == 1);
    }
}

TEST_CASE("expression model block") {
    auto m = model_from_config({{"expression_L", "0.5*(-(v0^2) + v1^2)"},
                                {"expression_psi", "-0.2*x0"},
                                {"dim", 2},
                                {"future_seed", {1.0, 0.0}}});
    CHECK(m.weighted());
    const double x[2] = {1.0, 0.0}, v[2] = {1.0, 0.0};
    CHECK(m.psi(x, v) == doctest::Approx(-0.2));
    CHECK_THROWS_AS((void)model_from_config({{"expression_L", "0.5*(v0^2 + v1^2)"}, {"dim", 2}, {"future_seed", {1.0, 0.0}}}),
                    ModelIntegrityError);
    CHECK_THROWS_AS((void)model_from_config({{"expression_L", "v0 +* v1"}, {"dim", 2}, {"future_seed", {1.0, 0.0}}}),
                    ConfigError);
}

TEST_CASE("classification") {
    auto m = builtin_model("minkowski", {{"n", 1}});
    const std::vector<double> x{0, 0};
    auto c = classify_vector(m, x, std::vector<double>{1, 0});
    CHECK(c.kind == CausalClass::Kind::timelike);
    CHECK(c.future_directed);
    CHECK(classify_vector(m, x, std::vector<double>{1, 1}).kind == CausalClass::Kind::lightlike);
    CHECK(classify_vector(m, x, std::vector<double>{1, 1}).future_directed);
    CHECK(!classify_vector(m, x, std::vector<double>{-1, 0}).future_directed);
    CHECK(classify_vector(m, x, std::vector<double>{0, 1}).kind == CausalClass::Kind::spacelike);
    CHECK(classify_vector(m, x, std::vector<double>{0, 0}).kind == CausalClass::Kind::zero);

    auto b = builtin_model("beem", {{"k", 3}});
    const double th = std::numbers::pi / 3;
    CHECK(classify_vector(b, x, std::vector<double>{std::cos(th), std::sin(th)}).kind == CausalClass::Kind::timelike);

    // Scale invariance on random vectors.
    auto r = builtin_model("randers_perturbed", {{"n", 1}, {"epsilon", 0.2}});
    std::mt19937_64 rng(3);
    std::normal_distribution<double> G;
    for (int s = 0; s < 200; ++s) {
        std::vector<double> v{G(rng), G(rng)}, cv{3.7 * v[0], 3.7 * v[1]};
        auto a = classify_vector(r, x, v), bb = classify_vector(r, x, cv);
        CHECK(a.kind == bb.kind);
        CHECK(a.future_directed == bb.future_directed);
    }
}

TEST_CASE("cone census") {
    const std::vector<double> x{0, 0};
    for (int k = 1; k <= 6; ++k) CHECK(count_cone_components(builtin_model("beem", {{"k", k}}), x, 1024) == k);
    CHECK(count_cone_components(builtin_model("minkowski", {{"n", 1}}), x, 256) == 2);
    CHECK(count_cone_components(builtin_model("minkowski", {{"n", 2}}), std::vector<double>{0, 0, 0}, 128) == 2);

    auto b2 = builtin_model("beem", {{"k", 2}});
    for (int i = 0; i < 64; ++i) {
        const double th = 0.1 * i;
        const double v[2] = {std::cos(th), std::sin(th)}, w[2] = {-v[0], -v[1]};
        CHECK(b2.L(x, v) == doctest::Approx(b2.L(x, w)).epsilon(1e-12));
    }
    CHECK_THROWS_AS((void)count_cone_components(b2, x, 10), ParameterError);
}

TEST_CASE("Lorentz-Finsler norm") {
    auto m = builtin_model("minkowski", {{"n", 3}});
    const std::vector<double> x(4, 0.0);
    CHECK(lorentz_finsler_norm(m, x, std::vector<double>{2, 0, 0, 0}) == doctest::Approx(2.0));
    CHECK(lorentz_finsler_norm(m, x, std::vector<double>{1, 1, 0, 0}) == 0.0);
    CHECK_THROWS_AS((void)lorentz_finsler_norm(m, x, std::vector<double>{0, 1, 0, 0}), DomainError);

    auto r = builtin_model("randers_perturbed", {{"n", 3}, {"epsilon", 0.2}});
    const double F = lorentz_finsler_norm(r, x, r.future_seed);
    const double L = r.L(x, r.future_seed);
    CHECK(std::abs(F * F + 2 * L) <= 1e-12);
}

TEST_CASE("homogeneity and Euler identity on builtin models") {
    std::mt19937_64 rng(0);
    std::normal_distribution<double> G;
    for (const auto& m : battery()) {
        for (int s = 0; s < 1000; ++s) {
            std::vector<double> x(m.dim), v(m.dim);
            for (auto& c : x) c = 0.5 * G(rng);
            // Random cone vector: future seed plus a small spatial perturbation.
            for (int i = 0; i < m.dim; ++i) v[i] = m.future_seed[i] * (1.0 + 0.2 * std::abs(G(rng))) + (i ? 0.4 * G(rng) : 0.0);
            if (m.L(x, v) >= 0) continue;
            const double L = m.L(x, v);
            for (double c : {0.5, 2.0, 7.0}) {
                std::vector<double> cv(v);
                for (auto& q : cv) q *= c;
                CHECK(std::abs(m.L(x, cv) - c * c * L) <= 1e-9 * std::abs(c * c * L));
                CHECK(std::abs(m.psi(x, cv) - m.psi(x, v)) <= 1e-10);
            }
            const Mat g = vertical_hessian(m, x, v);
            const Eigen::Map<const Vec> vv(v.data(), m.dim);
            CHECK(std::abs(vv.dot(g * vv) - 2 * L) <= 1e-9 * std::abs(2 * L));
            CHECK(negative_index(g) == 1);
        }
    }
}
