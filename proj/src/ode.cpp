#include "wlf/ode.hpp"

#include <algorithm>
#include <cmath>

namespace wlf {

std::string to_string(OdeStatus s) {
    switch (s) {
        case OdeStatus::completed: return "completed";
        case OdeStatus::boundary: return "boundary";
        case OdeStatus::step_collapse: return "step_collapse";
        case OdeStatus::max_steps: return "max_steps";
    }
    return "unknown";
}

const DenseSegment& DenseOutput::locate(double t) const {
    if (segments_.empty()) throw ParameterError("dense output is empty");
    const double slack = 1e-12 * std::max(1.0, std::abs(t));
    if (t < t_begin() - slack || t > t_end() + slack) throw ParameterError("time outside the integrated range");
    auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                               [](double tt, const DenseSegment& s) { return tt < s.t0; });
    if (it == segments_.begin()) return segments_.front();
    return *(it - 1);
}

Vec DenseOutput::value(double t, int offset, int count) const {
    const DenseSegment& s = locate(t);
    if (count < 0) count = static_cast<int>(s.r1.size()) - offset;
    const double th = (t - s.t0) / s.h, th1 = 1.0 - th;
    return s.r1.segment(offset, count) +
           th * (s.r2.segment(offset, count) +
                 th1 * (s.r3.segment(offset, count) +
                        th * (s.r4.segment(offset, count) + th1 * s.r5.segment(offset, count))));
}

Vec DenseOutput::derivative(double t, int offset, int count) const {
    const DenseSegment& s = locate(t);
    if (count < 0) count = static_cast<int>(s.r1.size()) - offset;
    const double th = (t - s.t0) / s.h, th1 = 1.0 - th;
    // y = r1 + th r2 + th th1 r3 + th^2 th1 r4 + th^2 th1^2 r5
    const double c3 = 1.0 - 2.0 * th;
    const double c4 = 2.0 * th * th1 - th * th;
    const double c5 = 2.0 * th * th1 * th1 - 2.0 * th * th * th1;
    return (s.r2.segment(offset, count) + c3 * s.r3.segment(offset, count) + c4 * s.r4.segment(offset, count) +
            c5 * s.r5.segment(offset, count)) /
           s.h;
}

namespace {

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

bool recoverable(const std::exception& e) {
    return dynamic_cast<const DomainError*>(&e) || dynamic_cast<const DegeneracyError*>(&e);
}

double scaled_rms(const Vec& e, const Vec& y0, const Vec& y1, const OdeOptions& o) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        const double sc = o.atol + o.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        s += (e[i] / sc) * (e[i] / sc);
    }
    return std::sqrt(s / static_cast<double>(e.size()));
}

double initial_step(const OdeRhs& rhs, double t0, const Vec& y0, const Vec& f0, double span, const OdeOptions& o) {
    auto norm = [&](const Vec& z) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double sc = o.atol + o.rtol * std::abs(y0[i]);
            s += (z[i] / sc) * (z[i] / sc);
        }
        return std::sqrt(s / static_cast<double>(z.size()));
    };
    const double dn0 = norm(y0), dn1 = norm(f0);
    double h0 = (dn0 < 1e-5 || dn1 < 1e-5) ? 1e-6 : 0.01 * dn0 / dn1;
    h0 = std::min(h0, span);
    Vec f1(y0.size());
    try {
        rhs(t0 + h0, y0 + h0 * f0, f1);
    } catch (const std::exception& e) {
        if (!recoverable(e)) throw;
        return std::min(h0, 1e-6 * std::max(1.0, span));
    }
    const double dn2 = norm(f1 - f0) / h0;
    const double big = std::max(dn1, dn2);
    const double h1 = big <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / big, 0.2);
    return std::min({100.0 * h0, h1, span, o.max_step});
}

// Cubic Hermite segment in the same representation as the Dormand-Prince one.
DenseSegment hermite(double t0, double h, const Vec& y0, const Vec& y1, const Vec& f0, const Vec& f1) {
    DenseSegment s{t0, h, t0 + h, y0, y1 - y0, Vec(), Vec(), Vec::Zero(y0.size())};
    s.r3 = h * f0 - s.r2;
    s.r4 = s.r2 - h * f1 - s.r3;
    return s;
}

// Shrinks the last step to the first point where inside() fails, by bisection on the segment.
void truncate_at_boundary(OdeResult& res, DenseSegment seg, const OdeInside& inside) {
    double lo = seg.t0, hi = seg.t_end;
    DenseOutput one;
    one.append(seg);
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (inside(mid, one.value(mid)))
            lo = mid;
        else
            hi = mid;
    }
    seg.t_end = lo;
    res.dense.append(seg);
    if (lo > res.t.back()) {
        res.t.push_back(lo);
        res.y.push_back(one.value(lo));
    }
    res.status = OdeStatus::boundary;
    res.message = "left the chart";
}

}  // namespace

OdeResult integrate_ode(const OdeRhs& rhs, double t0, const Vec& y0, double t1, const OdeOptions& o,
                        const OdeInside& inside) {
    if (!(t1 > t0)) throw ParameterError("integration interval must be increasing");
    const Eigen::Index n = y0.size();
    OdeResult res;
    res.t.push_back(t0);
    res.y.push_back(y0);

    Vec y = y0, f0(n);
    rhs(t0, y, f0);
    double t = t0;
    const double span = t1 - t0;

    if (o.fixed_step) {
        if (!(o.step > 0)) throw ParameterError("fixed step must be positive");
        Vec k1 = f0, k2(n), k3(n), k4(n), f1(n);
        while (t < t1 && res.accepted < o.max_steps) {
            const double h = std::min(o.step, t1 - t);
            rhs(t + 0.5 * h, y + 0.5 * h * k1, k2);
            rhs(t + 0.5 * h, y + 0.5 * h * k2, k3);
            rhs(t + h, y + h * k3, k4);
            Vec y1 = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            const double tn = (t1 - (t + h) < 1e-12 * span) ? t1 : t + h;
            rhs(tn, y1, f1);
            DenseSegment seg = hermite(t, tn - t, y, y1, k1, f1);
            ++res.accepted;
            if (inside && !inside(tn, y1)) {
                truncate_at_boundary(res, seg, inside);
                return res;
            }
            res.dense.append(std::move(seg));
            t = tn;
            y = y1;
            k1 = f1;
            res.t.push_back(t);
            res.y.push_back(y);
        }
        if (t < t1) res.status = OdeStatus::max_steps;
        return res;
    }

    double h = o.initial_step > 0 ? o.initial_step : initial_step(rhs, t0, y, f0, span, o);
    h = std::min(h, o.max_step);
    Vec k1 = f0, k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), y1(n), ys(n);
    bool last_rejected = false;

    while (t < t1) {
        if (res.accepted + res.rejected >= o.max_steps) {
            res.status = OdeStatus::max_steps;
            res.message = "step budget exhausted";
            return res;
        }
        if (h < 1e-14 * std::max(1.0, std::abs(t))) {
            res.status = OdeStatus::step_collapse;
            res.message = "step size collapsed at t = " + std::to_string(t);
            return res;
        }
        bool final_step = false;
        if (t + h >= t1 || t1 - (t + h) < 1e-12 * span) {
            h = t1 - t;
            final_step = true;
        }
        bool ok = true;
        try {
            ys = y + h * a21 * k1;
            rhs(t + c2 * h, ys, k2);
            ys = y + h * (a31 * k1 + a32 * k2);
            rhs(t + c3 * h, ys, k3);
            ys = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
            rhs(t + c4 * h, ys, k4);
            ys = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            rhs(t + c5 * h, ys, k5);
            ys = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            rhs(t + h, ys, k6);
            y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            rhs(t + h, y1, k7);
            ok = y1.allFinite() && k7.allFinite();
        } catch (const std::exception& e) {
            if (!recoverable(e)) throw;
            ok = false;
        }
        if (!ok) {
            ++res.rejected;
            last_rejected = true;
            h *= 0.25;
            continue;
        }
        const Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double en = scaled_rms(err, y, y1, o);
        double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
        if (en > 1.0) {
            ++res.rejected;
            last_rejected = true;
            h *= std::min(fac, 0.9);
            continue;
        }
        if (last_rejected) fac = std::min(fac, 1.0);
        last_rejected = false;

        DenseSegment seg;
        seg.t0 = t;
        seg.h = h;
        seg.t_end = final_step ? t1 : t + h;
        seg.r1 = y;
        seg.r2 = y1 - y;
        seg.r3 = h * k1 - seg.r2;
        seg.r4 = seg.r2 - h * k7 - seg.r3;
        seg.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        ++res.accepted;
        res.error_estimate += err.cwiseAbs().maxCoeff();
        const double tn = seg.t_end;
        if (inside && !inside(tn, y1)) {
            truncate_at_boundary(res, std::move(seg), inside);
            return res;
        }
        res.dense.append(std::move(seg));
        t = tn;
        y = y1;
        k1 = k7;
        res.t.push_back(t);
        res.y.push_back(y);
        h = std::min(h * fac, o.max_step);
    }
    return res;
}

}  // namespace wlf
