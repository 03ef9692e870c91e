#include "wlf/geodesic.hpp"

#include <cmath>
#include <cstdio>

namespace wlf {

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

Mat as_matrix(const Vec& flat, int rows, int cols) { return Eigen::Map<const Mat>(flat.data(), rows, cols); }

Vec as_vec(std::span<const double> s) { return Eigen::Map<const Vec>(s.data(), static_cast<Eigen::Index>(s.size())); }

std::span<const double> span_of(const Vec& v) { return {v.data(), static_cast<size_t>(v.size())}; }

// Gram-Schmidt in the inner product g on the candidates, keeping at most `want` vectors.
Mat orthonormalize(const Mat& g, const std::vector<Vec>& candidates, int want) {
    std::vector<Vec> out;
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    for (Vec w : candidates) {
        if (static_cast<int>(out.size()) == want) break;
        const double size = w.norm();
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& f : out) w -= f.dot(g * w) * f;
        const double nn = w.dot(g * w);
        if (w.norm() <= 1e-8 * size || nn < 1e-8 * scale * w.squaredNorm()) continue;
        out.push_back(w / std::sqrt(nn));
    }
    if (static_cast<int>(out.size()) < want) throw DegeneracyError("could not build an orthonormal frame");
    Mat E(g.rows(), want);
    for (int i = 0; i < want; ++i) E.col(i) = out[i];
    return E;
}

}  // namespace

Mat GeodesicSolution::frame(size_t i) const {
    if (!layout.has_frame) throw PreconditionError("geodesic was integrated without a frame");
    return as_matrix(state[i].segment(layout.frame(), dim * m), dim, m);
}

Mat GeodesicSolution::frame_at(double s) const {
    if (!layout.has_frame) throw PreconditionError("geodesic was integrated without a frame");
    return as_matrix(dense.value(s, layout.frame(), dim * m), dim, m);
}

Mat GeodesicSolution::J_at(double s) const {
    if (!layout.has_jacobi) throw PreconditionError("geodesic was integrated without a Jacobi tensor");
    return as_matrix(dense.value(s, layout.J(), m * m), m, m);
}

Mat GeodesicSolution::Jp_at(double s) const {
    if (!layout.has_jacobi) throw PreconditionError("geodesic was integrated without a Jacobi tensor");
    return as_matrix(dense.value(s, layout.Jp(), m * m), m, m);
}

Mat GeodesicSolution::Jpp_at(double s) const {
    if (!layout.has_jacobi) throw PreconditionError("geodesic was integrated without a Jacobi tensor");
    return as_matrix(dense.derivative(s, layout.Jp(), m * m), m, m);
}

std::optional<double> GeodesicSolution::tau_inverse(size_t e, double target) const {
    if (e >= epsilons.size()) throw ParameterError("no such epsilon quadrature");
    if (target < tau(e, 0) || target > tau(e, t.size() - 1)) return std::nullopt;
    size_t lo = 0, hi = t.size() - 1;
    while (hi - lo > 1) {
        const size_t mid = (lo + hi) / 2;
        (tau(e, mid) <= target ? lo : hi) = mid;
    }
    double a = t[lo], b = t[hi];
    for (int it = 0; it < 100 && b - a > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
        const double mid = 0.5 * (a + b);
        (tau_at(e, mid) <= target ? a : b) = mid;
    }
    return 0.5 * (a + b);
}

Mat frame_curvature_matrix(const PointGeometry& geo, const Mat& E) {
    const Mat gE = geo.g * E;
    const Mat h = E.transpose() * gE;
    Eigen::LDLT<Mat> ldlt(h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw DegeneracyError("frame gram is not positive definite");
    return ldlt.solve(gE.transpose() * (geo.R * E));
}

Mat default_frame(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v) {
    const int D = model.dim;
    const auto geo = evaluate_geometry(model, x, v, GeometryLevel::metric);
    const Vec vv = as_vec(v);
    const Vec gv = geo.g * vv;
    const double gvv = vv.dot(gv);
    std::vector<Vec> cand;
    const auto cls = classify_vector(model, x, v);
    if (cls.kind == CausalClass::Kind::timelike) {
        for (int i = 0; i < D; ++i) {
            Vec w = Vec::Unit(D, i);
            w -= (gv.dot(w) / gvv) * vv;
            cand.push_back(w);
        }
        return orthonormalize(geo.g, cand, D - 1);
    }
    if (cls.kind != CausalClass::Kind::lightlike) throw ParameterError("frame needs a causal vector");
    if (D < 3) throw ParameterError("null frames need n >= 2");
    // Transversal u with g(v, u) != 0; the complement of span{v, u} is spacelike.
    Vec u = Vec::Unit(D, 0);
    double best = 0.0;
    for (int i = 0; i < D; ++i) {
        const double s = std::abs(gv[i]);
        if (s > best) {
            best = s;
            u = Vec::Unit(D, i);
        }
    }
    Mat C(2, D);
    C.row(0) = gv.transpose();
    C.row(1) = (geo.g * u).transpose();
    Eigen::FullPivLU<Mat> lu(C);
    const Mat K = lu.kernel();
    for (int i = 0; i < K.cols(); ++i) cand.push_back(K.col(i));
    return orthonormalize(geo.g, cand, D - 2);
}

GeodesicSolution integrate_geodesic(const SpacetimeModel& model, std::span<const double> x0, std::span<const double> v0,
                                    const GeodesicOptions& options) {
    const int D = model.dim;
    const int n = D - 1;
    if (static_cast<int>(x0.size()) != D || static_cast<int>(v0.size()) != D)
        throw ParameterError("initial data dimension does not match model");
    if (!model.chart.contains(x0)) throw ParameterError("initial point outside the chart");
    if (!(options.t_end > options.t_start)) throw ParameterError("t_span must be increasing");

    const auto cls = classify_vector(model, x0, v0);
    GeodesicSolution sol;
    if (cls.kind == CausalClass::Kind::timelike)
        sol.side = Side::timelike;
    else if (cls.kind == CausalClass::Kind::lightlike)
        sol.side = Side::null;
    else
        throw ParameterError("initial velocity must be causal and nonzero");
    sol.dim = D;
    sol.m = congruence_dim(sol.side, n);
    sol.epsilons = options.epsilons;
    sol.options = options;
    const bool want_frame = options.frame.has_value() || options.jacobi;
    if (sol.m < 1 && (want_frame || !options.epsilons.empty()))
        throw ParameterError("null geodesics need n >= 2 for frames and epsilon-proper time");

    Vec x = as_vec(x0), v = as_vec(v0);
    if (options.unit_speed && sol.side == Side::timelike) v /= lorentz_finsler_norm(model, x0, v0);
    sol.unit_speed = options.unit_speed && sol.side == Side::timelike;
    sol.options.unit_speed = false;
    sol.L_value = model.L(span_of(x), span_of(v));

    StateLayout lay;
    lay.dim = D;
    lay.m = sol.m;
    lay.n_eps = static_cast<int>(options.epsilons.size());
    lay.has_frame = want_frame;
    lay.has_jacobi = options.jacobi;
    sol.layout = lay;
    const int m = sol.m;

    Mat E0;
    if (want_frame) {
        E0 = options.frame ? *options.frame : default_frame(model, span_of(x), span_of(v));
        if (E0.rows() != D || E0.cols() != m)
            throw ParameterError("initial frame must be " + std::to_string(D) + " x " + std::to_string(m));
        const auto geo = evaluate_geometry(model, span_of(x), span_of(v), GeometryLevel::metric);
        const Vec gv = geo.g * v;
        const double scale = std::max(1.0, geo.g.cwiseAbs().maxCoeff());
        for (int i = 0; i < m; ++i)
            if (std::abs(gv.dot(E0.col(i))) > 1e-8 * scale * v.norm() * E0.col(i).norm())
                throw PreconditionError("initial frame is not g_v-orthogonal to v");
        Mat aug(D, m + (sol.side == Side::null ? 1 : 0));
        aug.leftCols(m) = E0;
        if (sol.side == Side::null) aug.col(m) = v;
        Eigen::JacobiSVD<Mat> svd(aug);
        const auto sv = svd.singularValues();
        if (sv[sv.size() - 1] < 1e-10 * sv[0]) throw PreconditionError("initial frame is degenerate");
        sol.options.frame = E0;
    }
    Mat J0 = options.J0, J1 = options.J1;
    if (options.jacobi) {
        if (J0.size() == 0) J0 = Mat::Zero(m, m);
        if (J1.size() == 0) J1 = Mat::Identity(m, m);
        if (J0.rows() != m || J0.cols() != m || J1.rows() != m || J1.cols() != m)
            throw ParameterError("Jacobi initial data must be " + std::to_string(m) + " x " + std::to_string(m));
        sol.options.J0 = J0;
        sol.options.J1 = J1;
    }

    Vec y0(lay.size());
    y0.segment(lay.x(), D) = x;
    y0.segment(lay.v(), D) = v;
    if (want_frame) y0.segment(lay.frame(), D * m) = Eigen::Map<const Vec>(E0.data(), D * m);
    y0.segment(lay.tau(), lay.n_eps).setZero();
    if (options.jacobi) {
        y0.segment(lay.J(), m * m) = Eigen::Map<const Vec>(J0.data(), m * m);
        y0.segment(lay.Jp(), m * m) = Eigen::Map<const Vec>(J1.data(), m * m);
    }

    const GeometryLevel level = options.jacobi ? GeometryLevel::curvature : GeometryLevel::connection;
    std::vector<double> rates(options.epsilons.size());
    for (size_t e = 0; e < rates.size(); ++e) rates[e] = 2.0 * (options.epsilons[e] - 1.0) / m;
    const bool weighted = model.weighted();

    OdeRhs rhs = [&](double, const Vec& y, Vec& dy) {
        dy.resize(y.size());
        const Vec xs = y.segment(lay.x(), D), vs = y.segment(lay.v(), D);
        const auto geo = evaluate_geometry(model, span_of(xs), span_of(vs), level);
        dy.segment(lay.x(), D) = vs;
        dy.segment(lay.v(), D) = -2.0 * geo.spray;
        Mat E;
        if (want_frame) {
            E = as_matrix(y.segment(lay.frame(), D * m), D, m);
            const Mat dE = -geo.nonlinear * E;
            dy.segment(lay.frame(), D * m) = Eigen::Map<const Vec>(dE.data(), D * m);
        }
        const double psi = weighted ? geo.psi : 0.0;
        for (size_t e = 0; e < rates.size(); ++e) dy[lay.tau() + static_cast<int>(e)] = std::exp(rates[e] * psi);
        if (options.jacobi) {
            const Mat Rf = frame_curvature_matrix(geo, E);
            const Mat J = as_matrix(y.segment(lay.J(), m * m), m, m);
            const Mat dJp = -Rf * J;
            dy.segment(lay.J(), m * m) = y.segment(lay.Jp(), m * m);
            dy.segment(lay.Jp(), m * m) = Eigen::Map<const Vec>(dJp.data(), m * m);
        }
    };
    OdeInside inside = [&](double, const Vec& y) {
        const Vec xs = y.segment(lay.x(), D);
        return model.chart.contains(span_of(xs));
    };

    OdeOptions oo;
    oo.rtol = options.tol;
    oo.atol = options.tol;
    oo.fixed_step = options.fixed_step;
    oo.step = options.fixed_step_size;
    oo.max_step = options.max_step;
    OdeResult r = integrate_ode(rhs, options.t_start, y0, options.t_end, oo, inside);

    sol.t = std::move(r.t);
    sol.state = std::move(r.y);
    sol.dense = std::move(r.dense);
    sol.status = r.status;
    sol.message = r.message;
    sol.error_estimate = r.error_estimate;
    sol.psi.resize(sol.t.size(), 0.0);
    if (weighted)
        for (size_t i = 0; i < sol.t.size(); ++i) {
            const Vec xs = sol.x(i), vs = sol.v(i);
            sol.psi[i] = model.psi(span_of(xs), span_of(vs));
        }
    return sol;
}

ParallelFrame transport_frame(const SpacetimeModel& model, const GeodesicSolution& geodesic, const Mat& initial_basis) {
    GeodesicOptions o = geodesic.options;
    o.frame = initial_basis;
    const Vec x0 = geodesic.x(0), v0 = geodesic.v(0);
    ParallelFrame out;
    out.solution = integrate_geodesic(model, span_of(x0), span_of(v0), o);
    const auto& s = out.solution;
    out.t = s.t;
    for (size_t i = 0; i < s.t.size(); ++i) {
        const Mat E = s.frame(i);
        const Vec xs = s.x(i), vs = s.v(i);
        const auto geo = evaluate_geometry(model, span_of(xs), span_of(vs), GeometryLevel::metric);
        out.basis.push_back(E);
        out.gram.push_back(E.transpose() * geo.g * E);
    }
    return out;
}

Vec covariant_derivative(const SpacetimeModel& model, const Vec& x, const Vec& velocity, const Vec& X, const Vec& X_dot,
                         const Vec& reference) {
    if (reference.isZero(0.0)) throw ParameterError("reference vector must be nonzero");
    const auto geo = evaluate_geometry(model, span_of(x), span_of(reference), GeometryLevel::connection);
    return X_dot + geo.contract_gamma(velocity, X);
}

std::vector<Vec> covariant_derivative(const SpacetimeModel& model, const CurveFunction& curve, const CurveFunction& X,
                                      const CurveFunction& reference, const std::vector<double>& times, double h) {
    auto diff = [h](const CurveFunction& f, double t) -> Vec {
        return ((f(t - 2 * h) - f(t + 2 * h)) + 8.0 * (f(t + h) - f(t - h))) / (12.0 * h);
    };
    std::vector<Vec> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(covariant_derivative(model, curve(t), diff(curve, t), X(t), diff(X, t), reference(t)));
    return out;
}

Vec exponential_map(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v, double t,
                    double tol) {
    if (t == 0.0) return as_vec(x);
    if (t < 0.0) throw ParameterError("exponential map parameter must be nonnegative");
    GeodesicOptions o;
    o.t_end = t;
    o.tol = tol;
    const auto sol = integrate_geodesic(model, x, v, o);
    if (sol.status == OdeStatus::boundary) throw ChartExitError("geodesic leaves the chart at t = " + format_number(sol.t_end()));
    if (sol.status != OdeStatus::completed) throw DegeneracyError("geodesic integration failed: " + sol.message);
    return sol.x(sol.t.size() - 1);
}

double curve_length(const SpacetimeModel& model, const CurveFunction& position, const CurveFunction& velocity, double t0,
                    double t1, int intervals) {
    if (intervals < 2) throw ParameterError("need at least two intervals");
    if (intervals % 2) ++intervals;
    const double h = (t1 - t0) / intervals;
    auto F = [&](double t) {
        const Vec x = position(t), v = velocity(t);
        const double L = model.L(span_of(x), span_of(v));
        if (L > 1e-9 * std::max(1.0, v.squaredNorm())) throw ParameterError("spacelike tangent at t = " + format_number(t));
        return std::sqrt(std::max(0.0, -2.0 * L));
    };
    double s = F(t0) + F(t1);
    for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * F(t0 + i * h);
    return s * h / 3.0;
}

double curve_length(const SpacetimeModel& model, const GeodesicSolution& g, int intervals) {
    return curve_length(
        model, [&](double t) { return g.x_at(t); }, [&](double t) { return g.v_at(t); }, g.t_begin(), g.t_end(),
        intervals);
}

void write_geodesic_csv(std::ostream& out, const SpacetimeModel& model, const GeodesicSolution& g) {
    out << "t";
    for (int a = 0; a < g.dim; ++a) out << ",x" << a;
    for (int a = 0; a < g.dim; ++a) out << ",v" << a;
    out << ",L,psi";
    for (double e : g.epsilons) out << ",tau_" << format_number(e);
    out << "\n";
    for (size_t i = 0; i < g.t.size(); ++i) {
        const Vec x = g.x(i), v = g.v(i);
        out << format_number(g.t[i]);
        for (int a = 0; a < g.dim; ++a) out << "," << format_number(x[a]);
        for (int a = 0; a < g.dim; ++a) out << "," << format_number(v[a]);
        out << "," << format_number(model.L(span_of(x), span_of(v))) << "," << format_number(g.psi[i]);
        for (size_t e = 0; e < g.epsilons.size(); ++e) out << "," << format_number(g.tau(e, i));
        out << "\n";
    }
}

}  // namespace wlf
