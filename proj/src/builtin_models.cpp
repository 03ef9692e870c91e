#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "wlf/expression.hpp"
#include "wlf/model.hpp"

namespace wlf {

namespace {

// Overloads shared by the generic model lambdas.
inline double sqrt_(double a) { return checked_sqrt(a); }
inline Jet sqrt_(const Jet& a) { return sqrt(a); }
inline double log_(double a) { return checked_log(a); }
inline Jet log_(const Jet& a) { return log(a); }
inline double exp_(double a) { return std::exp(a); }
inline Jet exp_(const Jet& a) { return exp(a); }
inline double sin_(double a) { return std::sin(a); }
inline Jet sin_(const Jet& a) { return sin(a); }
inline double cosh_(double a) { return std::cosh(a); }
inline Jet cosh_(const Jet& a) { return cosh(a); }
inline double cos_(double a) { return std::cos(a); }
inline Jet cos_(const Jet& a) { return cos(a); }
inline double atan2_(double y, double x) {
    if (x == 0.0 && y == 0.0) throw DomainError("atan2 at the origin");
    return std::atan2(y, x);
}
inline Jet atan2_(const Jet& y, const Jet& x) { return atan2(y, x); }

template <class S>
using elem_t = std::remove_cv_t<typename S::element_type>;

/// Strict reader for a parameter object: unknown keys are rejected on finish().
class Params {
public:
    Params(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_null() && !j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    double number(const std::string& key, double fallback) {
        used_.insert(key);
        if (j_.is_null() || !j_.contains(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(path_ + "." + key + ": expected a number");
        return v.get<double>();
    }

    int integer(const std::string& key, int fallback) {
        used_.insert(key);
        if (j_.is_null() || !j_.contains(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError(path_ + "." + key + ": expected an integer");
        return v.get<int>();
    }

    std::string text(const std::string& key, const std::string& fallback) {
        used_.insert(key);
        if (j_.is_null() || !j_.contains(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(path_ + "." + key + ": expected a string");
        return v.get<std::string>();
    }

    const json* object(const std::string& key) {
        used_.insert(key);
        if (j_.is_null() || !j_.contains(key)) return nullptr;
        return &j_.at(key);
    }

    void finish() const {
        if (j_.is_null()) return;
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(path_ + "." + it.key() + ": unknown key");
    }

    const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

std::vector<double> unit_seed(int dim) {
    std::vector<double> s(dim, 0.0);
    s[0] = 1.0;
    return s;
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ParameterError(msg);
}

// Signature (-,+,...,+) of g at the future seed over a few sampled base points.
void validate_signature(const SpacetimeModel& m) {
    std::mt19937_64 rng(0);
    for (int s = 0; s < 16; ++s) {
        std::vector<double> x(m.dim);
        for (int i = 0; i < m.dim; ++i) {
            const double lo = std::max(m.chart.lower[i], -1.0), hi = std::min(m.chart.upper[i], 1.0);
            x[i] = s == 0 ? std::clamp(0.0, lo, hi) : std::uniform_real_distribution<double>(lo, hi)(rng);
        }
        const Mat g = vertical_hessian(m, x, m.future_seed);
        if (negative_index(g) != 1)
            throw ModelIntegrityError(m.name + ": g_v is not of signature (-,+,...,+) at the future seed");
        if (!(m.L(x, m.future_seed) < 0))
            throw ModelIntegrityError(m.name + ": future seed is not timelike");
    }
}

SpacetimeModel minkowski(int n) {
    require(n >= 1 && n <= 6, "minkowski: n must lie in [1, 6]");
    SpacetimeModel m;
    m.name = "minkowski";
    m.dim = n + 1;
    m.lagrangian = make_field([](auto, auto v) {
        using T = elem_t<decltype(v)>;
        T s = -(v[0] * v[0]);
        for (std::size_t i = 1; i < v.size(); ++i) s = s + v[i] * v[i];
        return T(0.5) * s;
    });
    m.chart = ChartBox::unbounded(m.dim);
    m.future_seed = unit_seed(m.dim);
    m.quadratic = true;
    m.description = {{"builtin", "minkowski"}, {"params", {{"n", n}}}};
    return m;
}

SpacetimeModel warped_product(int n, const std::string& f, double rate) {
    require(n >= 1 && n <= 6, "warped_product: n must lie in [1, 6]");
    require(f == "exp" || f == "cosh", "warped_product: f must be exp or cosh");
    require(std::isfinite(rate) && rate != 0.0 && std::abs(rate) <= 10.0, "warped_product: rate must be nonzero with |rate| <= 10");
    SpacetimeModel m;
    m.name = "warped_product";
    m.dim = n + 1;
    const bool use_exp = f == "exp";
    m.lagrangian = make_field([use_exp, rate](auto x, auto v) {
        using T = elem_t<decltype(v)>;
        const T a = T(rate) * x[0];
        const T w = use_exp ? exp_(T(2.0) * a) : cosh_(a) * cosh_(a);
        T s = T(0.0);
        for (std::size_t i = 1; i < v.size(); ++i) s = s + v[i] * v[i];
        return T(0.5) * (w * s - v[0] * v[0]);
    });
    m.chart = ChartBox::unbounded(m.dim);
    m.chart.lower[0] = -10.0 / std::abs(rate);
    m.chart.upper[0] = 10.0 / std::abs(rate);
    m.future_seed = unit_seed(m.dim);
    m.quadratic = true;
    m.description = {{"builtin", "warped_product"}, {"params", {{"n", n}, {"f", f}, {"rate", rate}}}};
    return m;
}

// Anti-de Sitter space in global coordinates (t, y): R = K on unit timelike vectors.
SpacetimeModel constant_curvature(int n, double K) {
    require(n >= 1 && n <= 6, "constant_curvature: n must lie in [1, 6]");
    require(std::isfinite(K) && K > 0 && K <= 100, "constant_curvature: K must lie in (0, 100]");
    SpacetimeModel m;
    m.name = "constant_curvature";
    m.dim = n + 1;
    m.lagrangian = make_field([K](auto x, auto v) {
        using T = elem_t<decltype(v)>;
        T r2 = T(0.0), yw = T(0.0), w2 = T(0.0);
        for (std::size_t i = 1; i < v.size(); ++i) {
            r2 = r2 + x[i] * x[i];
            yw = yw + x[i] * v[i];
            w2 = w2 + v[i] * v[i];
        }
        const T lapse = T(1.0) + T(K) * r2;
        return T(0.5) * (w2 - lapse * v[0] * v[0] - T(K) * yw * yw / lapse);
    });
    m.chart = ChartBox::unbounded(m.dim, 1e3 / std::sqrt(K));
    m.future_seed = unit_seed(m.dim);
    m.quadratic = true;
    m.description = {{"builtin", "constant_curvature"}, {"params", {{"n", n}, {"K", K}}}};
    return m;
}

SpacetimeModel randers_perturbed(int n, double eps) {
    require(n >= 1 && n <= 6, "randers_perturbed: n must lie in [1, 6]");
    require(std::isfinite(eps) && std::abs(eps) <= 0.25, "randers_perturbed: |epsilon| must be at most 0.25");
    SpacetimeModel m;
    m.name = "randers_perturbed";
    m.dim = n + 1;
    m.lagrangian = make_field([eps](auto x, auto v) {
        using T = elem_t<decltype(v)>;
        T q2 = v[0] * v[0], s = T(0.0);
        for (std::size_t i = 1; i < v.size(); ++i) {
            q2 = q2 + v[i] * v[i];
            s = s + v[i] * v[i];
        }
        const T strength = T(eps) * (T(1.0) + T(0.5) * sin_(x[1]));
        return T(0.5) * (s - v[0] * v[0]) + strength * v[0] * sqrt_(q2);
    });
    m.chart = ChartBox::unbounded(m.dim);
    m.future_seed = unit_seed(m.dim);
    m.description = {{"builtin", "randers_perturbed"}, {"params", {{"n", n}, {"epsilon", eps}}}};
    return m;
}

// L = r^2 cos(k theta) on the plane of directions.
SpacetimeModel beem(int k) {
    require(k >= 1 && k <= 12, "beem: k must lie in [1, 12]");
    SpacetimeModel m;
    m.name = "beem";
    m.dim = 2;
    m.lagrangian = make_field([k](auto, auto v) {
        using T = elem_t<decltype(v)>;
        return (v[0] * v[0] + v[1] * v[1]) * cos_(T(static_cast<double>(k)) * atan2_(v[1], v[0]));
    });
    m.chart = ChartBox::unbounded(2);
    m.future_seed = {std::cos(std::numbers::pi / k), std::sin(std::numbers::pi / k)};
    // For k = 1 the Hessian is negative definite on the cone: cone structure only.
    m.lorentzian = k >= 2;
    m.description = {{"builtin", "beem"}, {"params", {{"k", k}}}};
    return m;
}

}  // namespace

std::vector<std::string> builtin_names() {
    return {"minkowski", "warped_product", "constant_curvature", "randers_perturbed", "beem", "weighted"};
}

void attach_weight(SpacetimeModel& m, const json& weight) {
    Params p(weight, "weight");
    const std::string expr = p.text("expression", "");
    if (!expr.empty()) {
        p.finish();
        auto e = std::make_shared<ModelExpression>(parse_expression(expr, m.dim));
        m.weight = ScalarField([e](std::span<const double> x, std::span<const double> v) { return e->evaluate(x, v); },
                               [e](std::span<const Jet> x, std::span<const Jet> v) { return e->evaluate(x, v); });
        m.description["weight"] = {{"expression", expr}};
        return;
    }
    const std::string type = p.text("type", "");
    if (type == "linear_t") {
        const double lambda = p.number("lambda", 0.0);
        p.finish();
        require(std::isfinite(lambda), "linear_t: lambda must be finite");
        m.weight = make_field([lambda](auto x, auto) {
            using T = elem_t<decltype(x)>;
            return T(-lambda) * x[0];
        });
        m.description["weight"] = {{"type", type}, {"lambda", lambda}};
    } else if (type == "direction_dependent") {
        const double kappa = p.number("kappa", 0.0);
        p.finish();
        require(std::isfinite(kappa) && std::abs(kappa) <= 10, "direction_dependent: |kappa| must be at most 10");
        m.weight = make_field([kappa](auto, auto v) {
            using T = elem_t<decltype(v)>;
            T s = T(0.0);
            for (std::size_t i = 1; i < v.size(); ++i) s = s + v[i] * v[i];
            const T t2 = v[0] * v[0];
            return T(0.5 * kappa) * log_((T(2.0) * t2 + s) / (t2 + s));
        });
        m.description["weight"] = {{"type", type}, {"kappa", kappa}};
    } else {
        throw ConfigError("weight.type: expected linear_t, direction_dependent or an expression");
    }
}

SpacetimeModel builtin_model(const std::string& name, const json& params) {
    Params p(params, "params");
    SpacetimeModel m;
    if (name == "minkowski") {
        m = minkowski(p.integer("n", 3));
    } else if (name == "warped_product") {
        const int n = p.integer("n", 3);
        const std::string f = p.text("f", "cosh");
        m = warped_product(n, f, p.number("rate", 1.0));
    } else if (name == "constant_curvature") {
        const int n = p.integer("n", 3);
        m = constant_curvature(n, p.number("K", 1.0));
    } else if (name == "randers_perturbed") {
        const int n = p.integer("n", 3);
        m = randers_perturbed(n, p.number("epsilon", 0.1));
    } else if (name == "beem") {
        m = beem(p.integer("k", 3));
    } else if (name == "weighted") {
        const json* base = p.object("base");
        const json* weight = p.object("weight");
        if (!base || !weight) throw ConfigError("params: weighted needs 'base' and 'weight'");
        m = model_from_config(*base, "params.base");
        attach_weight(m, *weight);
    } else {
        throw ConfigError("unknown builtin model '" + name + "'");
    }
    p.finish();
    if (m.lorentzian) validate_signature(m);
    return m;
}

SpacetimeModel model_from_config(const json& block, const std::string& path) {
    Params p(block, path);
    const std::string builtin = p.text("builtin", "");
    const std::string exprL = p.text("expression_L", "");
    SpacetimeModel m;
    try {
        if (!builtin.empty()) {
            if (!exprL.empty()) throw ConfigError(path + ": give either builtin or expression_L, not both");
            const json* params = p.object("params");
            m = builtin_model(builtin, params ? *params : json::object());
        } else if (!exprL.empty()) {
            const int dim = p.integer("dim", 0);
            if (dim < 2 || dim > 7) throw ConfigError(path + ".dim: expected an integer in [2, 7]");
            const json* seed = p.object("future_seed");
            if (!seed || !seed->is_array() || static_cast<int>(seed->size()) != dim)
                throw ConfigError(path + ".future_seed: expected an array of " + std::to_string(dim) + " numbers");
            auto e = std::make_shared<ModelExpression>(parse_expression(exprL, dim));
            m.name = "expression";
            m.dim = dim;
            m.lagrangian =
                ScalarField([e](std::span<const double> x, std::span<const double> v) { return e->evaluate(x, v); },
                            [e](std::span<const Jet> x, std::span<const Jet> v) { return e->evaluate(x, v); });
            for (const auto& c : *seed) {
                if (!c.is_number()) throw ConfigError(path + ".future_seed: expected numbers");
                m.future_seed.push_back(c.get<double>());
            }
            m.chart = ChartBox::unbounded(dim);
            if (const json* chart = p.object("chart")) {
                Params cp(*chart, path + ".chart");
                const json* lo = cp.object("lower");
                const json* hi = cp.object("upper");
                cp.finish();
                if (!lo || !hi || lo->size() != static_cast<std::size_t>(dim) || hi->size() != static_cast<std::size_t>(dim))
                    throw ConfigError(path + ".chart: lower and upper need " + std::to_string(dim) + " entries");
                m.chart.lower = lo->get<std::vector<double>>();
                m.chart.upper = hi->get<std::vector<double>>();
            }
            m.description = {{"expression_L", exprL}, {"dim", dim}, {"future_seed", m.future_seed}};
            const std::string exprPsi = p.text("expression_psi", "");
            if (!exprPsi.empty()) attach_weight(m, json{{"expression", exprPsi}});
            validate_signature(m);
        } else {
            throw ConfigError(path + ": expected 'builtin' or 'expression_L'");
        }
        if (const json* weight = p.object("weight")) {
            if (m.weighted()) throw ConfigError(path + ".weight: model already carries a weight");
            attach_weight(m, *weight);
        }
        p.finish();
    } catch (const ConfigError&) {
        throw;
    } catch (const ParseError& e) {
        throw ConfigError(path + ": " + e.what());
    } catch (const ParameterError& e) {
        throw ConfigError(path + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return m;
}

}  // namespace wlf
