#include "wlf/model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <numeric>

namespace wlf {

bool ChartBox::contains(std::span<const double> x) const {
    for (std::size_t i = 0; i < x.size() && i < lower.size(); ++i)
        if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
    return true;
}

ChartBox ChartBox::unbounded(int dim, double half_width) {
    return ChartBox{std::vector<double>(dim, -half_width), std::vector<double>(dim, half_width)};
}

Mat vertical_hessian(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v) {
    JetSpace space(model.dim, Truncation{0, 2, 2});
    auto [xs, vs] = space.lift_point(x, v);
    const Jet L = model.L(xs, vs);
    Mat g(model.dim, model.dim);
    MultiIndex a(2 * model.dim, 0);
    for (int i = 0; i < model.dim; ++i)
        for (int j = i; j < model.dim; ++j) {
            ++a[model.dim + i];
            ++a[model.dim + j];
            g(i, j) = g(j, i) = L.partial(a);
            --a[model.dim + i];
            --a[model.dim + j];
        }
    return g;
}

Vec vertical_gradient(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v) {
    JetSpace space(model.dim, Truncation{0, 1, 1});
    auto [xs, vs] = space.lift_point(x, v);
    const Jet L = model.L(xs, vs);
    Vec grad(model.dim);
    MultiIndex a(2 * model.dim, 0);
    for (int i = 0; i < model.dim; ++i) {
        a[model.dim + i] = 1;
        grad[i] = L.partial(a);
        a[model.dim + i] = 0;
    }
    return grad;
}

int negative_index(const Mat& g, double rel_tol) {
    Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double band = rel_tol * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    int neg = 0;
    for (int i = 0; i < ev.size(); ++i) {
        if (std::abs(ev[i]) <= band) return -1;
        if (ev[i] < 0) ++neg;
    }
    return neg;
}

const char* to_string(CausalClass::Kind kind) {
    switch (kind) {
        case CausalClass::Kind::timelike: return "timelike";
        case CausalClass::Kind::lightlike: return "lightlike";
        case CausalClass::Kind::spacelike: return "spacelike";
        case CausalClass::Kind::zero: return "zero";
    }
    return "?";
}

namespace {

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double c : v) s += c * c;
    return s;
}

// Whether the straight path of directions from the seed to v stays inside the closed cone.
bool joined_to_seed(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v, double tol) {
    const double nv = std::sqrt(norm2(v));
    const double ns = std::sqrt(norm2(model.future_seed));
    std::vector<double> p(v.size());
    constexpr int kSteps = 256;
    for (int k = 0; k <= kSteps; ++k) {
        const double s = static_cast<double>(k) / kSteps;
        for (std::size_t i = 0; i < v.size(); ++i) p[i] = (1 - s) * model.future_seed[i] / ns + s * v[i] / nv;
        const double np = norm2(p);
        if (np < 1e-12) return false;
        if (model.L(x, p) > tol * np) return false;
    }
    return true;
}

}  // namespace

CausalClass classify_vector(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v,
                            double tol) {
    if (static_cast<int>(v.size()) != model.dim || static_cast<int>(x.size()) != model.dim)
        throw ParameterError("vector dimension does not match model");
    CausalClass c;
    const double n2 = norm2(v);
    if (n2 == 0.0) return c;
    const double L = model.L(x, v);
    if (std::abs(L) <= tol * n2) c.kind = CausalClass::Kind::lightlike;
    else if (L < 0) c.kind = CausalClass::Kind::timelike;
    else c.kind = CausalClass::Kind::spacelike;
    if (c.kind == CausalClass::Kind::spacelike) return c;

    const Vec grad = vertical_gradient(model, x, v);
    double s = 0.0;
    for (int i = 0; i < model.dim; ++i) s += grad[i] * model.future_seed[i];
    const double scale = grad.norm() * std::sqrt(norm2(model.future_seed));
    if (std::abs(s) > 1e-6 * scale) c.future_directed = s < 0;
    else c.future_directed = joined_to_seed(model, x, v, tol);
    return c;
}

int count_cone_components(const SpacetimeModel& model, std::span<const double> x, int samples) {
    if (samples < 64) throw ParameterError("cone census needs at least 64 samples");
    if (model.dim == 2) {
        std::vector<char> neg(samples);
        for (int i = 0; i < samples; ++i) {
            const double th = 2.0 * std::numbers::pi * (i + 0.5) / samples;
            const double v[2] = {std::cos(th), std::sin(th)};
            neg[i] = model.L(x, v) < 0;
        }
        int count = 0, total = 0;
        for (int i = 0; i < samples; ++i) {
            total += neg[i];
            if (neg[i] && !neg[(i + samples - 1) % samples]) ++count;
        }
        if (total == 0) throw ModelIntegrityError("no timelike direction found");
        return count == 0 ? 1 : count;
    }
    if (model.dim == 3) {
        const int nphi = samples, nth = std::max(32, samples / 2);
        std::vector<int> parent(nphi * nth);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        auto unite = [&](int a, int b) { parent[find(a)] = find(b); };
        std::vector<char> neg(nphi * nth);
        for (int i = 0; i < nth; ++i) {
            const double th = std::numbers::pi * (i + 0.5) / nth;
            for (int j = 0; j < nphi; ++j) {
                const double ph = 2.0 * std::numbers::pi * (j + 0.5) / nphi;
                const double v[3] = {std::cos(th), std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph)};
                neg[i * nphi + j] = model.L(x, v) < 0;
            }
        }
        for (int i = 0; i < nth; ++i)
            for (int j = 0; j < nphi; ++j) {
                const int a = i * nphi + j;
                if (!neg[a]) continue;
                const int right = i * nphi + (j + 1) % nphi;
                if (neg[right]) unite(a, right);
                if (i + 1 < nth && neg[a + nphi]) unite(a, a + nphi);
            }
        // Cells around a pole touch each other through the pole direction.
        for (int pole = 0; pole < 2; ++pole) {
            const double v[3] = {pole == 0 ? 1.0 : -1.0, 0.0, 0.0};
            if (model.L(x, v) >= 0) continue;
            const int row = pole == 0 ? 0 : nth - 1;
            int first = -1;
            for (int j = 0; j < nphi; ++j) {
                const int a = row * nphi + j;
                if (!neg[a]) continue;
                if (first < 0) first = a;
                else unite(a, first);
            }
        }
        int count = 0;
        for (int a = 0; a < nphi * nth; ++a)
            if (neg[a] && find(a) == a) ++count;
        if (count == 0) throw ModelIntegrityError("no timelike direction found");
        return count;
    }
    throw ParameterError("cone census supports dimension 2 or 3 only");
}

double lorentz_finsler_norm(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v,
                            double tol) {
    const double L = model.L(x, v);
    if (L > tol * norm2(v)) throw DomainError("Lorentz-Finsler norm of a spacelike vector");
    return std::sqrt(std::max(0.0, -2.0 * L));
}

}  // namespace wlf
