#include "wlf/geometry.hpp"

#include <cmath>
#include <cstdio>

namespace wlf {

namespace {

MultiIndex index_of_vars(int dim, std::initializer_list<int> vars) {
    MultiIndex a(2 * dim, 0);
    for (int v : vars) ++a[v];
    return a;
}

// Gaussian elimination on jet-valued systems, pivoting on the constant terms.
std::vector<Jet> solve_jets(std::vector<std::vector<Jet>> A, std::vector<Jet> b) {
    const int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A[r][col].value()) > std::abs(A[piv][col].value())) piv = r;
        if (A[piv][col].value() == 0.0) throw DegeneracyError("singular metric in spray solve");
        std::swap(A[piv], A[col]);
        std::swap(b[piv], b[col]);
        const Jet inv = 1.0 / A[col][col];
        for (int r = col + 1; r < n; ++r) {
            if (A[r][col].is_constant_only() && A[r][col].value() == 0.0) continue;
            const Jet f = A[r][col] * inv;
            for (int c = col + 1; c < n; ++c) A[r][c] -= f * A[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<Jet> x(n);
    for (int r = n - 1; r >= 0; --r) {
        Jet s = b[r];
        for (int c = r + 1; c < n; ++c) s -= A[r][c] * x[c];
        x[r] = s / A[r][r];
    }
    return x;
}

// |det g| against the product of row scales, so diagonal metrics with a large dynamic range pass.
void check_degeneracy(const Mat& g) {
    double scale = 1.0;
    for (Eigen::Index a = 0; a < g.rows(); ++a) scale *= g.row(a).cwiseAbs().maxCoeff();
    const double det = g.determinant();
    if (!(scale > 0.0) || !std::isfinite(det) || std::abs(det) < 1e-12 * scale)
        throw DegeneracyError("metric g_v is degenerate");
}

}  // namespace

Vec PointGeometry::contract_gamma(const Vec& u, const Vec& w) const {
    Vec out(dim);
    for (int a = 0; a < dim; ++a) out[a] = u.dot(gamma[a] * w);
    return out;
}

PointGeometry evaluate_geometry(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v,
                                GeometryLevel level) {
    const int D = model.dim;
    if (static_cast<int>(x.size()) != D || static_cast<int>(v.size()) != D)
        throw ParameterError("point dimension does not match model");
    PointGeometry geo;
    geo.dim = D;
    geo.x = Eigen::Map<const Vec>(x.data(), D);
    geo.v = Eigen::Map<const Vec>(v.data(), D);

    const Truncation tl = level == GeometryLevel::metric       ? Truncation{0, 2, 2}
                          : level == GeometryLevel::connection ? Truncation{1, 3, 3}
                                                               : kCurvatureTruncation;
    JetSpace space(D, tl);
    auto [xs, vs] = space.lift_point(x, v);
    const Jet Lj = model.L(xs, vs);
    geo.L = Lj.value();
    auto P = [&](std::initializer_list<int> vars) { return Lj.partial(index_of_vars(D, vars)); };

    geo.g.resize(D, D);
    for (int a = 0; a < D; ++a)
        for (int b = a; b < D; ++b) geo.g(a, b) = geo.g(b, a) = P({D + a, D + b});
    for (int a = 0; a < D * D; ++a)
        if (!std::isfinite(geo.g.data()[a])) throw DegeneracyError("non-finite metric");
    check_degeneracy(geo.g);
    geo.g_inv = geo.g.inverse();

    if (model.weighted()) geo.psi = model.psi(x, v);
    if (level == GeometryLevel::metric) return geo;

    // Third vertical derivatives C_abc and x-derivatives of g.
    std::vector<double> C(D * D * D);
    std::vector<Mat> dg_dx(D, Mat(D, D));
    for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b)
            for (int c = 0; c < D; ++c) C[(a * D + b) * D + c] = P({D + a, D + b, D + c});
    for (int k = 0; k < D; ++k)
        for (int a = 0; a < D; ++a)
            for (int b = a; b < D; ++b) dg_dx[k](a, b) = dg_dx[k](b, a) = P({k, D + a, D + b});
    auto Cv = [&](int a, int b, int c) { return C[(a * D + b) * D + c]; };

    // Spray G = 1/2 g^{-1} (L_{x v} v - L_x), carried as a jet.
    const Truncation tg = level == GeometryLevel::connection ? Truncation{0, 1, 1} : Truncation{1, 2, 2};
    std::vector<Jet> vj(D), Lx(D), rhs(D);
    std::vector<std::vector<Jet>> gj(D, std::vector<Jet>(D));
    std::vector<Jet> Lv(D);
    for (int b = 0; b < D; ++b) {
        vj[b] = vs[b].restricted(tg);
        Lx[b] = Lj.derivative(b);
        Lv[b] = Lj.derivative(D + b);
    }
    for (int a = 0; a < D; ++a)
        for (int b = a; b < D; ++b) gj[a][b] = gj[b][a] = Lv[a].derivative(D + b).restricted(tg);
    for (int d = 0; d < D; ++d) {
        Jet s = -Lx[d].restricted(tg);
        for (int b = 0; b < D; ++b) s += Lx[b].derivative(D + d).restricted(tg) * vj[b];
        rhs[d] = s;
    }
    std::vector<Jet> G = solve_jets(gj, rhs);
    for (auto& q : G) q = 0.5 * q;

    geo.spray.resize(D);
    geo.nonlinear.resize(D, D);
    for (int a = 0; a < D; ++a) {
        geo.spray[a] = G[a].value();
        for (int b = 0; b < D; ++b) geo.nonlinear(a, b) = G[a].partial(index_of_vars(D, {D + b}));
    }
    const Mat& N = geo.nonlinear;

    geo.gamma_tilde.assign(D, Mat::Zero(D, D));
    geo.gamma.assign(D, Mat::Zero(D, D));
    for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b)
            for (int c = 0; c < D; ++c) {
                double gt = 0.0, corr = 0.0;
                for (int d = 0; d < D; ++d) {
                    gt += geo.g_inv(a, d) * (dg_dx[b](d, c) + dg_dx[c](b, d) - dg_dx[d](b, c));
                    double s = 0.0;
                    for (int mu = 0; mu < D; ++mu)
                        s += Cv(d, c, mu) * N(mu, b) + Cv(b, d, mu) * N(mu, c) - Cv(b, c, mu) * N(mu, d);
                    corr += geo.g_inv(a, d) * s;
                }
                geo.gamma_tilde[a](b, c) = 0.5 * gt;
                geo.gamma[a](b, c) = 0.5 * gt - 0.5 * corr;
            }
    if (level == GeometryLevel::connection) return geo;

    geo.spray_dx.resize(D, D);
    for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b) geo.spray_dx(a, b) = G[a].partial(index_of_vars(D, {b}));

    geo.R.resize(D, D);
    for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b) {
            double s = 2.0 * geo.spray_dx(a, b);
            for (int c = 0; c < D; ++c) {
                const double dNdx = G[a].partial(index_of_vars(D, {D + b, c}));
                const double dNdv = G[a].partial(index_of_vars(D, {D + b, D + c}));
                s -= dNdx * v[c] - 2.0 * dNdv * geo.spray[c];
                s -= N(a, c) * N(c, b);
            }
            geo.R(a, b) = s;
        }
    geo.ricci = geo.R.trace();

    if (model.weighted()) {
        JetSpace ps(D, kSecondOrderTruncation);
        auto [px, pv] = ps.lift_point(x, v);
        const Jet psi = model.psi(px, pv);
        Vec grad(2 * D);
        Mat H(2 * D, 2 * D);
        for (int i = 0; i < 2 * D; ++i) {
            MultiIndex a(2 * D, 0);
            a[i] = 1;
            grad[i] = psi.partial(a);
            for (int j = i; j < 2 * D; ++j) {
                MultiIndex b(2 * D, 0);
                ++b[i];
                ++b[j];
                H(i, j) = H(j, i) = psi.partial(b);
            }
        }
        // State a = (x, v) moves with a' = (v, -2G) and a'' = (-2G, -2 G_x v + 4 N G).
        Vec a1(2 * D), a2(2 * D);
        a1 << geo.v, -2.0 * geo.spray;
        a2 << -2.0 * geo.spray, -2.0 * geo.spray_dx * geo.v + 4.0 * N * geo.spray;
        geo.psi = psi.value();
        geo.psi_d1 = grad.dot(a1);
        geo.psi_d2 = a1.dot(H * a1) + grad.dot(a2);
    }
    return geo;
}

MetricAtVector metric_at(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v) {
    bool zero = true;
    for (double c : v) zero = zero && c == 0.0;
    if (zero) throw ParameterError("metric at the zero vector");
    if (!model.chart.contains(x)) throw ParameterError("point outside the chart");
    auto geo = evaluate_geometry(model, x, v, GeometryLevel::metric);
    if (negative_index(geo.g) != 1) throw ModelIntegrityError("g_v does not have signature (-,+,...,+)");
    return {geo.g, geo.g_inv, geo.x, geo.v};
}

ConnectionData connection_at(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v) {
    auto geo = evaluate_geometry(model, x, v, GeometryLevel::connection);
    return {geo.gamma_tilde, geo.spray, geo.nonlinear, geo.gamma};
}

CurvatureAtVector curvature_at(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v) {
    auto geo = evaluate_geometry(model, x, v, GeometryLevel::curvature);
    return {geo.R, geo.ricci, geo.x, geo.v};
}

Vec spray_from_christoffel(const PointGeometry& geo) {
    Vec G(geo.dim);
    for (int a = 0; a < geo.dim; ++a) G[a] = 0.5 * geo.v.dot(geo.gamma_tilde[a] * geo.v);
    return G;
}

double flag_curvature(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v,
                      std::span<const double> w) {
    auto geo = evaluate_geometry(model, x, v, GeometryLevel::curvature);
    if (!(geo.L < 0)) throw ParameterError("flagpole must be timelike");
    const Vec wv = Eigen::Map<const Vec>(w.data(), geo.dim);
    const double gvv = geo.v.dot(geo.g * geo.v), gww = wv.dot(geo.g * wv), gvw = geo.v.dot(geo.g * wv);
    const double den = gvv * gww - gvw * gvw;
    if (std::abs(den) < 1e-10 * (std::abs(gvv * gww) + gvw * gvw)) throw ParameterError("degenerate flag");
    return -wv.dot(geo.g * (geo.R * wv)) / den;
}

std::string ExtendedReal::to_string() const {
    if (infinite) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

double weighted_ricci(const PointGeometry& geo, ExtendedReal N) {
    const int n = geo.dim - 1;
    if (N.is_infinite()) return geo.ricci + geo.psi_d2;
    if (N.value == n) {
        if (std::abs(geo.psi_d1) > 1e-12 * std::max(1.0, geo.v.norm())) return -std::numeric_limits<double>::infinity();
        return geo.ricci + geo.psi_d2;
    }
    return geo.ricci + geo.psi_d2 - geo.psi_d1 * geo.psi_d1 / (N.value - n);
}

double weighted_ricci(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v, ExtendedReal N) {
    auto c = classify_vector(model, x, v);
    if (c.kind != CausalClass::Kind::timelike && c.kind != CausalClass::Kind::lightlike)
        throw ParameterError("weighted Ricci curvature needs a nonzero causal vector");
    return weighted_ricci(evaluate_geometry(model, x, v, GeometryLevel::curvature), N);
}

EpsilonRange epsilon_range_check(const WeightedRicciParams& p, int n) {
    const double inf = std::numeric_limits<double>::infinity();
    const bool timelike = p.side == Side::timelike;
    if (!timelike && n < 2) throw ParameterError("null congruences need n >= 2");
    const double special = timelike ? 0.0 : 1.0;  // N where only epsilon = 0 is allowed
    if (!std::isfinite(p.epsilon)) throw ParameterError("epsilon must be finite");
    double bound;
    if (p.N.is_infinite()) {
        bound = 1.0;
    } else {
        const double N = p.N.value;
        if (!std::isfinite(N) || (N > special && N < n))
            throw ParameterError("N = " + p.N.to_string() + " outside the legal range for this side");
        if (N == special) return {p.epsilon == 0.0, 0.0};
        if (N == n) return {true, inf};
        bound = std::sqrt((N - special) / (N - n));
    }
    return {std::abs(p.epsilon) < bound - kEpsilonBoundaryBand, bound};
}

double c_coefficient(const WeightedRicciParams& p, int n) {
    if (!epsilon_range_check(p, n).admissible)
        throw ParameterError("(N, epsilon) = (" + p.N.to_string() + ", " + std::to_string(p.epsilon) + ") is not admissible");
    const bool timelike = p.side == Side::timelike;
    const double m = timelike ? n : n - 1;
    const double e2 = p.epsilon * p.epsilon;
    if (p.N.is_infinite()) return (1.0 - e2) / m;
    const double N = p.N.value;
    const double special = timelike ? 0.0 : 1.0;
    if (N == special || N == n) return 1.0 / m;
    return (1.0 - e2 * (N - n) / (N - special)) / m;
}

}  // namespace wlf
