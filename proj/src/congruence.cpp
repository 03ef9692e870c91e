#include "wlf/congruence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wlf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec as_vec(std::span<const double> s) { return Eigen::Map<const Vec>(s.data(), static_cast<Eigen::Index>(s.size())); }

std::span<const double> span_of(const Vec& v) { return {v.data(), static_cast<size_t>(v.size())}; }

double relative(double residual, double scale) { return scale > 0.0 ? std::abs(residual) / scale : 0.0; }

double min_singular(const Mat& A) {
    Eigen::JacobiSVD<Mat> svd(A);
    return svd.singularValues()[svd.singularValues().size() - 1];
}

double condition(const Mat& A) {
    Eigen::JacobiSVD<Mat> svd(A);
    const auto& s = svd.singularValues();
    const double lo = s[s.size() - 1];
    return lo > 0.0 ? s[0] / lo : kInf;
}

double lagrange_defect(const Mat& J, const Mat& Jp, const Mat& h) {
    const Mat W = Jp.transpose() * h * J;
    const double scale = Jp.norm() * J.norm() * h.norm();
    return scale > 0.0 ? (W - W.transpose()).norm() / scale : 0.0;
}

// N at which the extremal form of the Raychaudhuri equation applies: 0 timelike, 1 null.
double special_N(Side side) { return side == Side::timelike ? 0.0 : 1.0; }

}  // namespace

std::string to_string(TensorKind k) {
    switch (k) {
        case TensorKind::from_point: return "from_point";
        case TensorKind::from_surface: return "from_surface";
        case TensorKind::custom: return "custom";
    }
    return "?";
}

std::string to_string(RaychaudhuriForm f) {
    switch (f) {
        case RaychaudhuriForm::extremal: return "extremal";
        case RaychaudhuriForm::finite: return "finite";
        case RaychaudhuriForm::infinite: return "infinite";
    }
    return "?";
}

JacobiTensorPath jacobi_tensor_path(const SpacetimeModel& model, std::span<const double> x0, std::span<const double> v0,
                                    const Mat& J0, const Mat& J1, GeodesicOptions options, TensorKind kind) {
    options.jacobi = true;
    options.J0 = J0;
    options.J1 = J1;
    JacobiTensorPath path;
    path.kind = kind;
    path.geodesic = integrate_geodesic(model, x0, v0, options);
    const auto& sol = path.geodesic;
    const Vec x = sol.x(0), v = sol.v(0);
    const auto geo = evaluate_geometry(model, span_of(x), span_of(v), GeometryLevel::metric);
    const Mat E = sol.frame(0);
    const Mat h = E.transpose() * geo.g * E;
    path.lagrange = lagrange_defect(sol.J_at(sol.t_begin()), sol.Jp_at(sol.t_begin()), h) <= 1e-12;
    return path;
}

JacobiTensorPath point_congruence_tensor(const SpacetimeModel& model, std::span<const double> x0,
                                         std::span<const double> v0, GeodesicOptions options) {
    const auto cls = classify_vector(model, x0, v0);
    const int m = congruence_dim(cls.kind == CausalClass::Kind::lightlike ? Side::null : Side::timelike, model.n());
    return jacobi_tensor_path(model, x0, v0, Mat::Zero(m, m), Mat::Identity(m, m), std::move(options),
                              TensorKind::from_point);
}

CongruenceSample sample_congruence(const SpacetimeModel& model, const JacobiTensorPath& path, double t) {
    const auto& sol = path.geodesic;
    CongruenceSample s;
    s.t = t;
    s.x = sol.x_at(t);
    s.v = sol.v_at(t);
    s.E = sol.frame_at(t);
    s.geo = evaluate_geometry(model, span_of(s.x), span_of(s.v), GeometryLevel::curvature);
    s.h = s.E.transpose() * s.geo.g * s.E;
    s.R_frame = frame_curvature_matrix(s.geo, s.E);
    s.J = sol.J_at(t);
    s.Jp = sol.Jp_at(t);
    s.Jpp = sol.Jpp_at(t);
    return s;
}

Mat weighted_frame_curvature(const CongruenceSample& s, int m, const WeightedRicciParams& params) {
    const int n = s.geo.dim - 1;
    const double k = 2.0 * (1.0 - params.epsilon) / m;
    const double d1 = s.geo.psi_d1, d2 = s.geo.psi_d2;
    double shift;
    if (params.N.is_infinite()) {
        shift = d2;
    } else if (params.N.value == n) {
        if (std::abs(d1) > 1e-12 * std::max(1.0, s.v.norm())) throw ParameterError("R_(n, eps) is unbounded where psi' != 0");
        shift = d2;
    } else {
        shift = d2 - d1 * d1 / (params.N.value - n);
    }
    return std::exp(2.0 * k * s.geo.psi) * (s.R_frame + (shift / m) * Mat::Identity(m, m));
}

std::vector<Mat> frame_curvature(const SpacetimeModel& model, const JacobiTensorPath& path,
                                 const std::optional<WeightedRicciParams>& params) {
    std::vector<Mat> out;
    out.reserve(path.geodesic.t.size());
    for (double t : path.geodesic.t) {
        const auto s = sample_congruence(model, path, t);
        out.push_back(params ? weighted_frame_curvature(s, path.m(), *params) : s.R_frame);
    }
    return out;
}

size_t epsilon_index(const GeodesicSolution& geodesic, double eps) {
    for (size_t e = 0; e < geodesic.epsilons.size(); ++e)
        if (geodesic.epsilons[e] == eps) return e;
    throw PreconditionError("geodesic has no tau quadrature for epsilon = " + format_number(eps));
}

CongruenceReport evolve_weighted_congruence(const SpacetimeModel& model, const JacobiTensorPath& path,
                                            const WeightedRicciParams& params_in, const CongruenceOptions& options) {
    const auto& sol = path.geodesic;
    const int n = model.n();
    const int m = path.m();
    WeightedRicciParams params = params_in;
    params.side = sol.side;
    if (!epsilon_range_check(params, n).admissible)
        throw ParameterError("(N, epsilon) = (" + params.N.to_string() + ", " + format_number(params.epsilon) +
                             ") is not admissible");
    const size_t e_idx = epsilon_index(sol, params.epsilon);

    CongruenceReport rep;
    rep.side = sol.side;
    rep.m = m;
    rep.params = params;
    rep.c = c_coefficient(params, n);
    const double eps = params.epsilon;
    const double s_N = special_N(sol.side);
    const bool at_n = !params.N.is_infinite() && params.N.value == n;
    if (params.N.is_infinite())
        rep.form = RaychaudhuriForm::infinite;
    else if (params.N.value == s_N || at_n)
        rep.form = RaychaudhuriForm::extremal;
    else
        rep.form = RaychaudhuriForm::finite;

    std::vector<double> times;
    for (size_t i = 0; i < sol.t.size(); ++i) {
        times.push_back(sol.t[i]);
        if (options.midpoints && i + 1 < sol.t.size()) times.push_back(0.5 * (sol.t[i] + sol.t[i + 1]));
    }

    const Mat I = Mat::Identity(m, m);
    const WeightedRicciParams extremal{ExtendedReal::finite(s_N), eps, sol.side};
    const double k = 2.0 * (1.0 - eps) / m;
    const double c = rep.c;
    rep.min_nontriviality = kInf;
    rep.min_ricN = kInf;

    for (double t : times) {
        const auto s = sample_congruence(model, path, t);
        CongruenceRow row;
        row.t = t;
        row.tau = sol.tau_at(e_idx, t);
        row.cond = condition(s.J);

        Mat stacked(2 * m, m);
        stacked << s.J, s.Jp;
        Eigen::JacobiSVD<Mat> svd(stacked);
        row.nontriviality = svd.singularValues()[m - 1] / std::max(svd.singularValues()[0], 1e-300);
        row.lagrange_residual = path.lagrange ? lagrange_defect(s.J, s.Jp, s.h) : 0.0;
        rep.min_nontriviality = std::min(rep.min_nontriviality, row.nontriviality);
        rep.max_lagrange = std::max(rep.max_lagrange, row.lagrange_residual);

        const double psi = s.geo.psi, d1 = s.geo.psi_d1, d2 = s.geo.psi_d2;
        const double E1 = std::exp(k * psi);
        const double psi_s = E1 * d1;
        const Mat R0 = weighted_frame_curvature(s, m, extremal);

        // Weighted Jacobi equation for J_psi = e^{-psi/m} J.
        {
            const double P = E1 * std::exp(-psi / m);
            const Mat Q = s.Jp - (d1 / m) * s.J;
            const Mat Qp = s.Jpp - (d2 / m) * s.J - (d1 / m) * s.Jp;
            const Mat Jpsi = std::exp(-psi / m) * s.J;
            const Mat Jpsi_s = P * Q;
            const Mat a = E1 * (k - 1.0 / m) * d1 * P * Q, b = E1 * P * Qp;
            const Mat t2 = (2.0 * eps / m) * psi_s * Jpsi_s;
            const Mat t3 = R0 * Jpsi;
            // |J*|^2/|J| is the acceleration scale of the pair (J, J*); it keeps flat directions from
            // comparing round-off with round-off.
            const double accel = Jpsi.norm() > 0.0 ? Jpsi_s.squaredNorm() / Jpsi.norm() : 0.0;
            row.jacobi_residual =
                relative((a + b + t2 + t3).norm(), a.norm() + b.norm() + t2.norm() + t3.norm() + accel);
        }
        if (!(row.cond < options.window_cond)) continue;
        rep.max_jacobi = std::max(rep.max_jacobi, row.jacobi_residual);

        const Mat Jinv = s.J.inverse();
        const Mat B = s.Jp * Jinv;
        const Mat Bp = s.Jpp * Jinv - B * B;
        const double theta = B.trace(), theta_p = Bp.trace();
        row.theta = theta;
        row.B_eps = E1 * (B - (d1 / m) * I);
        row.theta_eps = row.B_eps.trace();
        row.theta_1 = theta - d1;
        row.theta_psi = std::exp(2.0 * psi / m) * (theta - d1);
        const double direct = E1 * (theta - d1);
        row.expansion_consistency = relative(row.theta_eps - direct, std::abs(E1 * theta) + std::abs(E1 * d1));
        const Mat sigma = row.B_eps - (row.theta_eps / m) * I;
        row.trace_free = relative(sigma.trace(), row.B_eps.cwiseAbs().diagonal().sum() + std::abs(row.theta_eps));
        row.sigma_eps_norm2 = (sigma * sigma).trace();

        const double ricN = E1 * E1 * weighted_ricci(s.geo, params.N);
        row.ricN_etastar = ricN;
        rep.min_ricN = std::min(rep.min_ricN, ricN);
        if (std::isfinite(ricN)) {
            const Mat RN = weighted_frame_curvature(s, m, params);
            row.ricci_trace = relative(RN.trace() - ricN, RN.cwiseAbs().diagonal().sum() + std::abs(ricN));
        }

        // Weighted Riccati equation.
        const Mat B_s = E1 * E1 * (k * d1 * (B - (d1 / m) * I) + Bp - (d2 / m) * I);
        {
            const Mat t2 = (2.0 * eps / m) * psi_s * row.B_eps;
            const Mat t3 = row.B_eps * row.B_eps;
            row.riccati_residual =
                relative((B_s + t2 + t3 + R0).norm(), B_s.norm() + t2.norm() + t3.norm() + R0.norm());
        }

        // Raychaudhuri equation.
        const double th = row.theta_eps;
        const double th_s = E1 * E1 * (k * d1 * (theta - d1) + theta_p - d2);
        row.theta_eps_dot = th_s;
        const double tr_s2 = row.sigma_eps_norm2;
        std::vector<double> terms{th_s, tr_s2};
        switch (rep.form) {
            case RaychaudhuriForm::extremal: {
                const double ric_s = E1 * E1 * weighted_ricci(s.geo, ExtendedReal::finite(s_N));
                terms.push_back((2.0 * eps / m) * psi_s * th);
                terms.push_back(th * th / m);
                terms.push_back(ric_s);
                break;
            }
            case RaychaudhuriForm::finite: {
                const double N = params.N.value;
                const double Ns = N - s_N;
                const double q = eps * th / Ns + psi_s / (N - n);
                terms.push_back((1.0 - eps * eps * (N - n) / Ns) * th * th / m);
                terms.push_back(Ns * (N - n) / m * q * q);
                terms.push_back(ricN);
                break;
            }
            case RaychaudhuriForm::infinite: {
                const double q = eps * th + psi_s;
                terms.push_back((1.0 - eps * eps) * th * th / m);
                terms.push_back(q * q / m);
                terms.push_back(ricN);
                break;
            }
        }
        double sum = 0.0, scale = 0.0;
        for (double x : terms) {
            sum += x;
            scale += std::abs(x);
        }
        row.raychaudhuri_residual = relative(sum, scale);

        // theta* + trace(sigma^2) + c theta^2 + Ric_N <= 0.
        row.inequality_lhs = th_s + tr_s2 + c * th * th + ricN;
        row.inequality_scale = std::abs(th_s) + tr_s2 + c * th * th + std::abs(ricN);

        // xi = |det J_psi|^c: xi**/xi + c Ric_N <= 0, with xi**/xi from t-derivatives of log xi.
        {
            const double l1 = c * (theta - d1);
            const double l2 = c * (theta_p - d2);
            const double xi_ss = E1 * E1 * (k * d1 * l1 + l2 + l1 * l1);
            row.bishop_lhs = xi_ss + c * ricN;
            row.bishop_scale =
                E1 * E1 * (std::abs(k * d1 * l1) + std::abs(l2) + l1 * l1) + std::abs(c * ricN);
        }

        rep.max_riccati = std::max(rep.max_riccati, row.riccati_residual);
        rep.max_raychaudhuri = std::max(rep.max_raychaudhuri, row.raychaudhuri_residual);
        rep.max_expansion_consistency = std::max(rep.max_expansion_consistency, row.expansion_consistency);
        rep.max_trace_free = std::max(rep.max_trace_free, row.trace_free);
        rep.max_ricci_trace = std::max(rep.max_ricci_trace, row.ricci_trace);
        if (std::isfinite(row.inequality_lhs)) {
            rep.max_inequality = std::max(rep.max_inequality, row.inequality_lhs / std::max(row.inequality_scale, 1e-300));
            rep.max_bishop = std::max(rep.max_bishop, row.bishop_lhs / std::max(row.bishop_scale, 1e-300));
        }
        rep.rows.push_back(std::move(row));
    }
    if (rep.rows.empty()) throw DegeneracyError("J is not invertible anywhere on the run");
    rep.conjugate_times = detect_conjugate_points(path);
    return rep;
}

std::vector<ConjugatePoint> detect_conjugate_points(const JacobiTensorPath& path) {
    const auto& sol = path.geodesic;
    constexpr int kSub = 4;
    std::vector<double> ts;
    for (size_t i = 0; i + 1 < sol.t.size(); ++i)
        for (int k = 0; k < kSub; ++k) ts.push_back(sol.t[i] + (sol.t[i + 1] - sol.t[i]) * k / kSub);
    ts.push_back(sol.t.back());

    auto det = [&](double t) { return sol.J_at(t).determinant(); };
    auto smin = [&](double t) { return min_singular(sol.J_at(t)); };
    std::vector<double> dets(ts.size()), svs(ts.size());
    for (size_t i = 0; i < ts.size(); ++i) {
        const Mat J = sol.J_at(ts[i]);
        dets[i] = J.determinant();
        svs[i] = min_singular(J);
    }
    std::vector<double> sorted = svs;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    const double threshold = 1e-8 * median;

    auto multiplicity = [&](double t) {
        Eigen::JacobiSVD<Mat> svd(sol.J_at(t));
        int count = 0;
        for (int i = 0; i < svd.singularValues().size(); ++i)
            if (svd.singularValues()[i] < 1e-6 * median) ++count;
        return std::max(count, 1);
    };

    std::vector<ConjugatePoint> out;
    std::vector<std::pair<double, double>> claimed;
    for (size_t i = 0; i + 1 < ts.size(); ++i) {
        if (!(dets[i] * dets[i + 1] < 0.0)) continue;
        double a = ts[i], b = ts[i + 1], fa = dets[i];
        while (b - a > 1e-9 || (smin(0.5 * (a + b)) >= threshold && b - a > 1e-14 * std::max(1.0, std::abs(a)))) {
            const double mid = 0.5 * (a + b);
            const double fm = det(mid);
            if (fm == 0.0) {
                a = b = mid;
                break;
            }
            if ((fm < 0.0) == (fa < 0.0)) {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        const double t = 0.5 * (a + b);
        claimed.emplace_back(ts[i], ts[i + 1]);
        if (smin(t) >= threshold) continue;
        out.push_back({t, 0.5 * (b - a), multiplicity(t), false});
    }

    // Touching zeros: interior local minima of the smallest singular value.
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (size_t i = 1; i + 1 < ts.size(); ++i) {
        if (!(svs[i] < svs[i - 1] && svs[i] <= svs[i + 1])) continue;
        double a = ts[i - 1], b = ts[i + 1];
        bool taken = false;
        for (const auto& [lo, hi] : claimed)
            if (lo < b && hi > a) taken = true;
        if (taken) continue;
        double x1 = b - g * (b - a), x2 = a + g * (b - a);
        double f1 = smin(x1), f2 = smin(x2);
        while (b - a > 1e-10) {
            if (f1 < f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = smin(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = smin(x2);
            }
        }
        const double t = 0.5 * (a + b);
        if (smin(t) >= threshold) continue;
        claimed.emplace_back(ts[i - 1], ts[i + 1]);
        out.push_back({t, 0.5 * (b - a), multiplicity(t), true});
    }
    std::sort(out.begin(), out.end(), [](const auto& p, const auto& q) { return p.t < q.t; });
    return out;
}

S0Prediction s0_prediction(double theta_eps_t0, double t0, double c, const GeodesicSolution& geodesic,
                           size_t eps_index) {
    if (theta_eps_t0 == 0.0) throw ParameterError("s0 needs theta_eps(t0) != 0");
    if (!(c > 0.0)) throw ParameterError("s0 needs c > 0");
    S0Prediction out;
    out.target_tau = geodesic.tau_at(eps_index, t0) - 1.0 / (c * theta_eps_t0);
    const auto t = geodesic.tau_inverse(eps_index, out.target_tau);
    if (t) {
        out.s0 = *t - t0;
        out.outcome = "bound";
    } else {
        out.outcome = "inconclusive: horizon";
    }
    return out;
}

GenericityResult genericity_probe(const SpacetimeModel& model, const JacobiTensorPath& path, bool weighted) {
    GenericityResult r;
    const WeightedRicciParams p{ExtendedReal::finite(special_N(path.geodesic.side)), 0.0, path.geodesic.side};
    for (double t : path.geodesic.t) {
        const auto s = sample_congruence(model, path, t);
        const Mat R = weighted ? weighted_frame_curvature(s, path.m(), p) : s.R_frame;
        const double norm = R.size() ? Eigen::JacobiSVD<Mat>(R).singularValues()[0] : 0.0;
        r.margin = std::max(r.margin, norm);
    }
    r.threshold = 1e-10 * (1.0 + r.margin);
    r.generic = r.margin > r.threshold;
    return r;
}

NormalPair lightlike_normals(const SpacetimeModel& model, std::span<const double> x, const Mat& tangent,
                             const Vec& outward) {
    const int D = model.dim;
    const int k = static_cast<int>(tangent.cols());
    if (tangent.rows() != D || k != D - 2) throw ParameterError("tangent basis must be dim x (n - 1)");
    const Vec seed = as_vec(model.future_seed);
    const Mat g0 = vertical_hessian(model, x, model.future_seed);
    {
        const Mat h0 = tangent.transpose() * g0 * tangent;
        Eigen::SelfAdjointEigenSolver<Mat> es(h0);
        if (k > 0 && !(es.eigenvalues()[0] > 1e-10 * std::max(1.0, h0.norm())))
            throw PreconditionError("surface tangent space is not spacelike");
    }
    // Null directions of the g0-orthogonal complement, as Newton seeds.
    Mat P;
    if (k > 0) {
        const Mat C = (g0 * tangent).transpose();
        P = Eigen::FullPivLU<Mat>(C).kernel();
    } else {
        P = Mat::Identity(D, D);
    }
    if (P.cols() != 2) throw DegeneracyError("surface tangent vectors are dependent");
    const Mat q = P.transpose() * g0 * P;
    const double A = q(0, 0), Bq = q(0, 1), C = q(1, 1);
    std::vector<Vec> guesses;
    const double disc = Bq * Bq - A * C;
    if (!(disc > 0.0)) throw PreconditionError("normal plane is not Lorentzian");
    if (std::abs(A) > std::abs(C)) {
        for (double sgn : {1.0, -1.0}) guesses.push_back(P.col(0) * ((-Bq + sgn * std::sqrt(disc)) / A) + P.col(1));
    } else {
        for (double sgn : {1.0, -1.0}) guesses.push_back(P.col(0) + P.col(1) * ((-Bq + sgn * std::sqrt(disc)) / C));
    }

    auto solve = [&](Vec V) {
        if (seed.dot(V) < 0.0) V = -V;
        V /= seed.dot(V);
        for (int it = 0; it < 60; ++it) {
            const Mat g = vertical_hessian(model, x, span_of(V));
            const Vec gV = g * V;
            Vec F(D);
            Mat Jac(D, D);
            F[0] = model.L(x, span_of(V));
            Jac.row(0) = gV.transpose();
            for (int i = 0; i < k; ++i) {
                F[1 + i] = gV.dot(tangent.col(i));
                Jac.row(1 + i) = (g * tangent.col(i)).transpose();
            }
            F[D - 1] = seed.dot(V) - 1.0;
            Jac.row(D - 1) = seed.transpose();
            const double scale = std::max(1.0, g.norm()) * V.squaredNorm();
            const Vec step = Jac.fullPivLu().solve(F);
            V -= step;
            if (!V.allFinite()) break;
            if (F.norm() <= 1e-15 * scale && step.norm() <= 1e-14 * V.norm()) return V;
            if (step.norm() <= 1e-15 * V.norm()) return V;
        }
        if (!V.allFinite()) throw DegeneracyError("Newton iteration for a lightlike normal diverged");
        const Mat g = vertical_hessian(model, x, span_of(V));
        double res = std::abs(model.L(x, span_of(V)));
        for (int i = 0; i < k; ++i) res = std::max(res, std::abs((g * V).dot(tangent.col(i))));
        if (res > 1e-10 * std::max(1.0, g.norm()) * V.squaredNorm())
            throw DegeneracyError("Newton iteration for a lightlike normal did not converge");
        return V;
    };
    Vec a = solve(guesses[0]), b = solve(guesses[1]);
    for (const Vec* V : {&a, &b}) {
        const auto cls = classify_vector(model, x, span_of(*V));
        if (cls.kind != CausalClass::Kind::lightlike || !cls.future_directed)
            throw DegeneracyError("lightlike normal is not future-directed lightlike");
    }
    if ((a - b).norm() <= 1e-6 * a.norm()) throw DegeneracyError("lightlike normals collapse to one ray");
    if (outward.dot(a) >= outward.dot(b)) return {a, b};
    return {b, a};
}

namespace {

Mat patch_tangent(const SurfacePatch& patch, const Vec& p) {
    const double h = patch.step;
    const Vec x0 = patch.map(p);
    Mat W(x0.size(), patch.param_dim);
    for (int i = 0; i < patch.param_dim; ++i) {
        Vec e = Vec::Zero(p.size());
        e[i] = h;
        W.col(i) = (patch.map(p + e) - patch.map(p - e)) / (2.0 * h);
    }
    return W;
}

NormalPair patch_normals(const SpacetimeModel& model, const SurfacePatch& patch, const Vec& p) {
    const Vec x = patch.map(p);
    return lightlike_normals(model, span_of(x), patch_tangent(patch, p), patch.outward(p));
}

}  // namespace

SurfaceSample surface_expansion(const SpacetimeModel& model, const SurfacePatch& patch, const Vec& params) {
    if (patch.param_dim != model.dim - 2) throw ParameterError("surface patch must have n - 1 parameters");
    if (params.size() != patch.param_dim) throw ParameterError("wrong number of surface parameters");
    SurfaceSample s;
    s.params = params;
    s.point = patch.map(params);
    s.tangent = patch_tangent(patch, params);
    const auto normals = lightlike_normals(model, span_of(s.point), s.tangent, patch.outward(params));
    s.V_plus = normals.plus;
    s.V_minus = normals.minus;
    const int k = patch.param_dim;
    const double h = patch.step;
    std::vector<NormalPair> fwd, bwd;
    for (int i = 0; i < k; ++i) {
        Vec e = Vec::Zero(k);
        e[i] = h;
        fwd.push_back(patch_normals(model, patch, params + e));
        bwd.push_back(patch_normals(model, patch, params - e));
    }
    for (bool plus : {true, false}) {
        const Vec& V = plus ? s.V_plus : s.V_minus;
        const auto geo = evaluate_geometry(model, span_of(s.point), span_of(V),
                                           model.weighted() ? GeometryLevel::curvature : GeometryLevel::connection);
        Mat DV(model.dim, k);
        for (int j = 0; j < k; ++j) {
            const Vec dV = ((plus ? fwd[j].plus : fwd[j].minus) - (plus ? bwd[j].plus : bwd[j].minus)) / (2.0 * h);
            DV.col(j) = dV + geo.contract_gamma(s.tangent.col(j), V);
        }
        const Mat gW = geo.g * s.tangent;
        const Mat hW = s.tangent.transpose() * gW;
        const Mat shape = hW.ldlt().solve(gW.transpose() * DV);
        const double theta = shape.trace();
        const double theta1 = theta - (model.weighted() ? geo.psi_d1 : 0.0);
        double res = std::abs(geo.L);
        for (int j = 0; j < k; ++j) res = std::max(res, std::abs((geo.g * V).dot(s.tangent.col(j))));
        s.normal_residual = std::max(s.normal_residual, res);
        if (plus) {
            s.shape_plus = shape;
            s.theta_plus = theta;
            s.theta1_plus = theta1;
        } else {
            s.shape_minus = shape;
            s.theta_minus = theta;
            s.theta1_minus = theta1;
        }
    }
    s.psi_trapped = s.theta1_plus < 0.0 && s.theta1_minus < 0.0;
    return s;
}

SurfaceData analyze_surface(const SpacetimeModel& model, const SurfacePatch& patch, const std::vector<Vec>& params) {
    SurfaceData d;
    d.psi_trapped = !params.empty();
    for (const auto& p : params) {
        d.samples.push_back(surface_expansion(model, patch, p));
        d.psi_trapped = d.psi_trapped && d.samples.back().psi_trapped;
    }
    return d;
}

JacobiTensorPath surface_congruence(const SpacetimeModel& model, const SurfaceSample& s, NormalSide side,
                                    GeodesicOptions options) {
    const bool plus = side == NormalSide::plus;
    const int k = static_cast<int>(s.tangent.cols());
    options.frame = s.tangent;
    return jacobi_tensor_path(model, span_of(s.point), span_of(plus ? s.V_plus : s.V_minus), Mat::Identity(k, k),
                              plus ? s.shape_plus : s.shape_minus, std::move(options), TensorKind::from_surface);
}

void write_congruence_csv(std::ostream& out, const CongruenceReport& report) {
    out << "t,tau_eps,theta,theta_eps,sigma_eps2,ricN,residual\n";
    for (const auto& r : report.rows)
        out << format_number(r.t) << ',' << format_number(r.tau) << ',' << format_number(r.theta) << ','
            << format_number(r.theta_eps) << ',' << format_number(r.sigma_eps_norm2) << ','
            << format_number(r.ricN_etastar) << ',' << format_number(r.raychaudhuri_residual) << '\n';
}

}  // namespace wlf
