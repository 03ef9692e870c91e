#pragma once

// Independent reference computations for quadratic (Lorentzian) models.
// Nothing here touches the jet machinery: the metric comes from polarizing L
// and its derivatives from fourth-order central differences.

#include <vector>

#include "wlf/model.hpp"

namespace wlf::oracle {

/// g_ab from L(e_a + e_b) - L(e_a) - L(e_b); valid only when L is quadratic in v.
inline Mat polarized_metric(const SpacetimeModel& m, const Vec& x) {
    const int D = m.dim;
    Mat g(D, D);
    std::vector<double> e(D, 0.0);
    auto Lat = [&](const std::vector<double>& v) { return m.L(std::span<const double>(x.data(), D), v); };
    std::vector<double> Le(D);
    for (int a = 0; a < D; ++a) {
        std::fill(e.begin(), e.end(), 0.0);
        e[a] = 1.0;
        Le[a] = Lat(e);
        g(a, a) = 2.0 * Le[a];
    }
    for (int a = 0; a < D; ++a)
        for (int b = a + 1; b < D; ++b) {
            std::fill(e.begin(), e.end(), 0.0);
            e[a] = e[b] = 1.0;
            g(a, b) = g(b, a) = Lat(e) - Le[a] - Le[b];
        }
    return g;
}

struct MetricDerivatives {
    Mat g;
    std::vector<Mat> dg;                // dg[k] = d_k g
    std::vector<std::vector<Mat>> ddg;  // ddg[k][l] = d_k d_l g
};

inline MetricDerivatives metric_derivatives(const SpacetimeModel& m, const Vec& x, double h1 = 1e-3, double h2 = 1e-2) {
    const int D = m.dim;
    static constexpr double w1[4] = {1.0, -8.0, 8.0, -1.0};  // offsets -2, -1, 1, 2
    static constexpr double o1[4] = {-2.0, -1.0, 1.0, 2.0};
    auto at = [&](int k, double dk, int l = -1, double dl = 0.0) {
        Vec y = x;
        y[k] += dk;
        if (l >= 0) y[l] += dl;
        return polarized_metric(m, y);
    };
    MetricDerivatives out;
    out.g = polarized_metric(m, x);
    out.dg.assign(D, Mat::Zero(D, D));
    out.ddg.assign(D, std::vector<Mat>(D, Mat::Zero(D, D)));
    for (int k = 0; k < D; ++k) {
        for (int i = 0; i < 4; ++i) out.dg[k] += w1[i] * at(k, o1[i] * h1);
        out.dg[k] /= 12.0 * h1;
        Mat s = -30.0 * out.g;
        for (double o : {-2.0, 2.0}) s -= at(k, o * h2);
        for (double o : {-1.0, 1.0}) s += 16.0 * at(k, o * h2);
        out.ddg[k][k] = s / (12.0 * h2 * h2);
        for (int l = k + 1; l < D; ++l) {
            Mat t = Mat::Zero(D, D);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) t += w1[i] * w1[j] * at(k, o1[i] * h2, l, o1[j] * h2);
            out.ddg[k][l] = out.ddg[l][k] = t / (144.0 * h2 * h2);
        }
    }
    return out;
}

struct LorentzianCurvature {
    Mat g;
    std::vector<Mat> christoffel;                      // [a](b, c)
    std::vector<std::vector<std::vector<Vec>>> riemann;  // riemann[b][c][d] = R^.(b c d)

    /// R^a_{bcd} v^b w^c v^d
    Vec jacobi_operator(const Vec& v, const Vec& w) const {
        const int D = static_cast<int>(v.size());
        Vec out = Vec::Zero(D);
        for (int b = 0; b < D; ++b)
            for (int c = 0; c < D; ++c)
                for (int d = 0; d < D; ++d) out += riemann[b][c][d] * (v[b] * w[c] * v[d]);
        return out;
    }
};

inline LorentzianCurvature lorentzian_curvature(const SpacetimeModel& m, const Vec& x) {
    const int D = m.dim;
    const auto md = metric_derivatives(m, x);
    const Mat gi = md.g.inverse();
    std::vector<Mat> dgi(D);
    for (int k = 0; k < D; ++k) dgi[k] = -gi * md.dg[k] * gi;

    // lowered[d](b, c) = d_b g_dc + d_c g_bd - d_d g_bc
    auto lowered = [&](int d, int b, int c) { return md.dg[b](d, c) + md.dg[c](b, d) - md.dg[d](b, c); };
    auto lowered_d = [&](int k, int d, int b, int c) { return md.ddg[k][b](d, c) + md.ddg[k][c](b, d) - md.ddg[k][d](b, c); };

    LorentzianCurvature out;
    out.g = md.g;
    out.christoffel.assign(D, Mat::Zero(D, D));
    std::vector<std::vector<Mat>> dchr(D, std::vector<Mat>(D, Mat::Zero(D, D)));  // dchr[k][a](b,c)
    for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b)
            for (int c = 0; c < D; ++c)
                for (int d = 0; d < D; ++d) {
                    out.christoffel[a](b, c) += 0.5 * gi(a, d) * lowered(d, b, c);
                    for (int k = 0; k < D; ++k)
                        dchr[k][a](b, c) += 0.5 * (dgi[k](a, d) * lowered(d, b, c) + gi(a, d) * lowered_d(k, d, b, c));
                }
    const auto& G = out.christoffel;
    out.riemann.assign(D, std::vector<std::vector<Vec>>(D, std::vector<Vec>(D, Vec::Zero(D))));
    for (int a = 0; a < D; ++a)
        for (int b = 0; b < D; ++b)
            for (int c = 0; c < D; ++c)
                for (int d = 0; d < D; ++d) {
                    double r = dchr[c][a](d, b) - dchr[d][a](c, b);
                    for (int e = 0; e < D; ++e) r += G[a](c, e) * G[e](d, b) - G[a](d, e) * G[e](c, b);
                    out.riemann[b][c][d][a] = r;
                }
    return out;
}

}  // namespace wlf::oracle
