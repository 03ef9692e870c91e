#include "wlf/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>

namespace wlf {

// ---------------------------------------------------------------------------
// JetLayout
// ---------------------------------------------------------------------------

namespace {

void enumerate(int var, int nvars, int dim, const Truncation& t, std::vector<int>& cur, int sum_x,
               int sum_v, std::vector<std::vector<std::uint8_t>>& out) {
    if (var == nvars) {
        out.emplace_back(cur.begin(), cur.end());
        return;
    }
    const bool is_x = var < dim;
    const int cap_own = is_x ? t.max_x - sum_x : t.max_v - sum_v;
    const int cap = std::min(cap_own, t.max_total - sum_x - sum_v);
    for (int e = 0; e <= cap; ++e) {
        cur[var] = e;
        enumerate(var + 1, nvars, dim, t, cur, sum_x + (is_x ? e : 0), sum_v + (is_x ? 0 : e), out);
    }
    cur[var] = 0;
}

}  // namespace

JetLayout::JetLayout(int dim, Truncation trunc) : dim_(dim), trunc_(trunc) {
    if (dim < 1 || dim > 8) throw JetError("jet dimension out of range: " + std::to_string(dim));
    if (trunc.max_x < 0 || trunc.max_v < 0 || trunc.max_total < 0)
        throw JetError("negative truncation order");
    const int nv = num_vars();
    std::vector<int> cur(nv, 0);
    enumerate(0, nv, dim, trunc, cur, 0, 0, exponents_);
    // Graded order so that slot 0 is the constant term and lower orders come first.
    std::stable_sort(exponents_.begin(), exponents_.end(), [](const auto& a, const auto& b) {
        int sa = 0, sb = 0;
        for (auto e : a) sa += e;
        for (auto e : b) sb += e;
        return sa < sb;
    });

    sorted_keys_.reserve(exponents_.size());
    std::vector<int> tmp(nv);
    for (std::size_t s = 0; s < exponents_.size(); ++s) {
        std::copy(exponents_[s].begin(), exponents_[s].end(), tmp.begin());
        sorted_keys_.emplace_back(key(tmp), s);
    }
    std::sort(sorted_keys_.begin(), sorted_keys_.end());

    up_.assign(exponents_.size() * nv, -1);
    for (std::size_t s = 0; s < exponents_.size(); ++s) {
        std::copy(exponents_[s].begin(), exponents_[s].end(), tmp.begin());
        for (int var = 0; var < nv; ++var) {
            ++tmp[var];
            up_[s * nv + var] = index_of(tmp);
            --tmp[var];
        }
    }

    row_start_.assign(exponents_.size() + 1, 0);
    for (std::size_t i = 0; i < exponents_.size(); ++i) {
        row_start_[i] = row_j_.size();
        for (std::size_t j = 0; j < exponents_.size(); ++j) {
            for (int var = 0; var < nv; ++var) tmp[var] = exponents_[i][var] + exponents_[j][var];
            const auto k = index_of(tmp);
            if (k >= 0) {
                row_j_.push_back(static_cast<std::uint32_t>(j));
                row_k_.push_back(static_cast<std::uint32_t>(k));
            }
        }
    }
    row_start_.back() = row_j_.size();
}

bool JetLayout::admits(std::span<const int> e) const {
    int sx = 0, sv = 0;
    for (int i = 0; i < dim_; ++i) {
        if (e[i] < 0) return false;
        sx += e[i];
    }
    for (int i = dim_; i < 2 * dim_; ++i) {
        if (e[i] < 0) return false;
        sv += e[i];
    }
    return sx <= trunc_.max_x && sv <= trunc_.max_v && sx + sv <= trunc_.max_total;
}

std::uint64_t JetLayout::key(std::span<const int> e) const {
    std::uint64_t k = 0;
    const std::uint64_t base = static_cast<std::uint64_t>(trunc_.max_total) + 1;
    for (int v : e) k = k * base + static_cast<std::uint64_t>(v);
    return k;
}

std::ptrdiff_t JetLayout::index_of(std::span<const int> alpha) const {
    if (static_cast<int>(alpha.size()) != num_vars() || !admits(alpha)) return -1;
    const auto k = key(alpha);
    auto it = std::lower_bound(sorted_keys_.begin(), sorted_keys_.end(), std::make_pair(k, std::size_t{0}));
    if (it == sorted_keys_.end() || it->first != k) return -1;
    return static_cast<std::ptrdiff_t>(it->second);
}

std::span<const std::uint8_t> JetLayout::exponent(std::size_t slot) const { return exponents_.at(slot); }

void JetLayout::multiply(std::span<const double> a, std::span<const double> b, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t n = exponents_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        for (std::size_t p = row_start_[i]; p < row_start_[i + 1]; ++p) out[row_k_[p]] += ai * b[row_j_[p]];
    }
}

std::shared_ptr<const JetLayout> JetLayout::get(int dim, Truncation trunc) {
    static std::mutex mu;
    static std::map<std::tuple<int, int, int, int>, std::shared_ptr<const JetLayout>> cache;
    std::lock_guard lock(mu);
    auto key = std::make_tuple(dim, trunc.max_x, trunc.max_v, trunc.max_total);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto layout = std::make_shared<const JetLayout>(dim, trunc);
    cache.emplace(key, layout);
    return layout;
}

// ---------------------------------------------------------------------------
// Jet arithmetic
// ---------------------------------------------------------------------------

void Jet::adopt(const std::shared_ptr<const JetLayout>& layout) {
    if (!layout || layout_ == layout) return;
    if (layout_) throw JetError("jets from different layouts combined");
    const double v = coeffs_[0];
    coeffs_.assign(layout->size(), 0.0);
    coeffs_[0] = v;
    layout_ = layout;
}

double Jet::coefficient(std::size_t slot) const {
    if (slot >= coeffs_.size()) return 0.0;
    return coeffs_[slot];
}

double Jet::partial(const MultiIndex& alpha) const {
    bool zero = true;
    for (int a : alpha) {
        if (a < 0) throw JetError("negative multi-index entry");
        zero = zero && a == 0;
    }
    if (zero) return value();
    if (!layout_) return 0.0;
    const auto slot = layout_->index_of(alpha);
    if (slot < 0) throw JetError("derivative order exceeds jet truncation");
    double fact = 1.0;
    for (int a : alpha)
        for (int k = 2; k <= a; ++k) fact *= k;
    return coeffs_[static_cast<std::size_t>(slot)] * fact;
}

Jet Jet::derivative(int var) const {
    if (!layout_) return Jet(0.0);
    if (var < 0 || var >= layout_->num_vars()) throw JetError("derivative variable out of range");
    std::vector<double> out(coeffs_.size(), 0.0);
    for (std::size_t s = 0; s < coeffs_.size(); ++s) {
        const auto up = layout_->raised(s, var);
        if (up >= 0) out[s] = coeffs_[static_cast<std::size_t>(up)] * (layout_->exponent(s)[var] + 1);
    }
    return Jet(layout_, std::move(out));
}

Jet Jet::restricted(const Truncation& trunc) const {
    if (!layout_) return *this;
    if (layout_->truncation() == trunc) return *this;
    auto target = JetLayout::get(layout_->dim(), trunc);
    std::vector<double> out(target->size(), 0.0);
    std::vector<int> e(layout_->num_vars());
    for (std::size_t s = 0; s < target->size(); ++s) {
        const auto ex = target->exponent(s);
        std::copy(ex.begin(), ex.end(), e.begin());
        const auto src = layout_->index_of(e);
        if (src < 0) throw JetError("restriction target exceeds the source truncation");
        out[s] = coeffs_[static_cast<std::size_t>(src)];
    }
    return Jet(target, std::move(out));
}

Jet& Jet::operator+=(const Jet& o) {
    adopt(o.layout_);
    if (o.layout_) {
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    } else {
        coeffs_[0] += o.coeffs_[0];
    }
    return *this;
}

Jet& Jet::operator-=(const Jet& o) {
    adopt(o.layout_);
    if (o.layout_) {
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
    } else {
        coeffs_[0] -= o.coeffs_[0];
    }
    return *this;
}

Jet operator-(Jet a) {
    for (auto& c : a.coeffs_) c = -c;
    return a;
}

Jet operator*(const Jet& a, const Jet& b) {
    if (!a.layout_ && !b.layout_) return Jet(a.coeffs_[0] * b.coeffs_[0]);
    if (!a.layout_ || !b.layout_) {
        const Jet& full = a.layout_ ? a : b;
        const double s = a.layout_ ? b.coeffs_[0] : a.coeffs_[0];
        Jet r = full;
        for (auto& c : r.coeffs_) c *= s;
        return r;
    }
    if (a.layout_ != b.layout_) throw JetError("jets from different layouts combined");
    std::vector<double> out(a.coeffs_.size());
    a.layout_->multiply(a.coeffs_, b.coeffs_, out);
    return Jet(a.layout_, std::move(out));
}

Jet& Jet::operator*=(const Jet& o) { return *this = *this * o; }

namespace {

Jet reciprocal(const Jet& b) {
    const double b0 = b.value();
    if (b0 == 0.0) throw DomainError("division by a jet with zero value");
    if (b.is_constant_only()) return Jet(1.0 / b0);
    const int order = b.layout()->total_order();
    std::vector<double> t(order + 1);
    double p = 1.0 / b0;
    for (int k = 0; k <= order; ++k) {
        t[k] = (k % 2 == 0 ? 1.0 : -1.0) * p;
        p /= b0;
    }
    return compose_series(b, t);
}

}  // namespace

Jet operator/(const Jet& a, const Jet& b) {
    if (b.is_constant_only()) {
        if (b.value() == 0.0) throw DomainError("division by a jet with zero value");
        return a * Jet(1.0 / b.value());
    }
    return a * reciprocal(b);
}

Jet& Jet::operator/=(const Jet& o) { return *this = *this / o; }

Jet compose_series(const Jet& a, std::span<const double> taylor) {
    if (a.is_constant_only()) return Jet(taylor[0]);
    const auto& layout = a.layout();
    Jet h = a;
    h.coeffs_[0] = 0.0;
    const int order = std::min<int>(layout->total_order(), static_cast<int>(taylor.size()) - 1);
    std::vector<double> acc(a.coeffs_.size(), 0.0);
    std::vector<double> tmp(a.coeffs_.size(), 0.0);
    acc[0] = taylor[order];
    for (int k = order - 1; k >= 0; --k) {
        layout->multiply(acc, h.coeffs_, tmp);
        tmp[0] += taylor[k];
        std::swap(acc, tmp);
    }
    return Jet(layout, std::move(acc));
}

// ---------------------------------------------------------------------------
// Elementary functions
// ---------------------------------------------------------------------------

namespace {

int order_of(const Jet& a) { return a.is_constant_only() ? 0 : a.layout()->total_order(); }

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

}  // namespace

double checked_sqrt(double a) {
    if (!(a > 0.0)) throw DomainError("sqrt of non-positive value");
    return std::sqrt(a);
}

double checked_log(double a) {
    if (!(a > 0.0)) throw DomainError("log of non-positive value");
    return std::log(a);
}

Jet exp(const Jet& a) {
    const int n = order_of(a);
    std::vector<double> t(n + 1);
    const double e = std::exp(a.value());
    for (int k = 0; k <= n; ++k) t[k] = e / factorial(k);
    return compose_series(a, t);
}

Jet log(const Jet& a) {
    const double a0 = a.value();
    if (!(a0 > 0.0)) throw DomainError("log of non-positive jet");
    const int n = order_of(a);
    std::vector<double> t(n + 1);
    t[0] = std::log(a0);
    double p = 1.0;
    for (int k = 1; k <= n; ++k) {
        p *= a0;
        t[k] = (k % 2 == 1 ? 1.0 : -1.0) / (k * p);
    }
    return compose_series(a, t);
}

Jet pow(const Jet& a, double r) {
    const double a0 = a.value();
    if (!(a0 > 0.0)) throw DomainError("real power of non-positive jet");
    const int n = order_of(a);
    std::vector<double> t(n + 1);
    double binom = 1.0;
    for (int k = 0; k <= n; ++k) {
        t[k] = binom * std::pow(a0, r - k);
        binom *= (r - k) / (k + 1);
    }
    return compose_series(a, t);
}

Jet sqrt(const Jet& a) {
    if (!(a.value() > 0.0)) throw DomainError("sqrt of non-positive jet");
    return pow(a, 0.5);
}

Jet sin(const Jet& a) {
    const int n = order_of(a);
    const double s = std::sin(a.value()), c = std::cos(a.value());
    const double cyc[4] = {s, c, -s, -c};
    std::vector<double> t(n + 1);
    for (int k = 0; k <= n; ++k) t[k] = cyc[k % 4] / factorial(k);
    return compose_series(a, t);
}

Jet cos(const Jet& a) {
    const int n = order_of(a);
    const double s = std::sin(a.value()), c = std::cos(a.value());
    const double cyc[4] = {c, -s, -c, s};
    std::vector<double> t(n + 1);
    for (int k = 0; k <= n; ++k) t[k] = cyc[k % 4] / factorial(k);
    return compose_series(a, t);
}

Jet sinh(const Jet& a) {
    const int n = order_of(a);
    const double s = std::sinh(a.value()), c = std::cosh(a.value());
    std::vector<double> t(n + 1);
    for (int k = 0; k <= n; ++k) t[k] = (k % 2 == 0 ? s : c) / factorial(k);
    return compose_series(a, t);
}

Jet cosh(const Jet& a) {
    const int n = order_of(a);
    const double s = std::sinh(a.value()), c = std::cosh(a.value());
    std::vector<double> t(n + 1);
    for (int k = 0; k <= n; ++k) t[k] = (k % 2 == 0 ? c : s) / factorial(k);
    return compose_series(a, t);
}

Jet atan(const Jet& a) {
    // Expand around a0 via atan(a) = atan(a0) + atan((a - a0) / (1 + a a0)).
    const double a0 = a.value();
    if (a.is_constant_only()) return Jet(std::atan(a0));
    Jet u = (a - Jet(a0)) / (Jet(1.0) + a * Jet(a0));
    const int n = order_of(a);
    std::vector<double> t(n + 1, 0.0);
    for (int k = 1; k <= n; k += 2) t[k] = ((k / 2) % 2 == 0 ? 1.0 : -1.0) / k;
    Jet r = compose_series(u, t);
    r += Jet(std::atan(a0));
    return r;
}

Jet atan2(const Jet& y, const Jet& x) {
    const double x0 = x.value(), y0 = y.value();
    if (x0 == 0.0 && y0 == 0.0) throw DomainError("atan2 at the origin");
    const double theta0 = std::atan2(y0, x0);
    if (x.is_constant_only() && y.is_constant_only()) return Jet(theta0);
    // tan(theta - theta0) = (y x0 - x y0) / (x x0 + y y0), which vanishes at the base point.
    Jet num = y * Jet(x0) - x * Jet(y0);
    Jet den = x * Jet(x0) + y * Jet(y0);
    Jet u = num / den;
    const int n = order_of(u);
    std::vector<double> t(n + 1, 0.0);
    for (int k = 1; k <= n; k += 2) t[k] = ((k / 2) % 2 == 0 ? 1.0 : -1.0) / k;
    Jet r = compose_series(u, t);
    r += Jet(theta0);
    return r;
}

Jet pow(const Jet& a, const Jet& exponent) {
    if (exponent.is_constant_only()) return pow(a, exponent.value());
    return exp(exponent * log(a));
}

Jet ipow(const Jet& a, int exponent) {
    if (exponent == 0) return Jet(1.0);
    const int m = exponent < 0 ? -exponent : exponent;
    Jet result(1.0);
    Jet base = a;
    int e = m;
    while (e > 0) {
        if (e & 1) result = result * base;
        e >>= 1;
        if (e) base = base * base;
    }
    return exponent < 0 ? Jet(1.0) / result : result;
}

// ---------------------------------------------------------------------------
// JetSpace
// ---------------------------------------------------------------------------

Jet JetSpace::constant(double value) const {
    std::vector<double> c(layout_->size(), 0.0);
    c[0] = value;
    return Jet(layout_, std::move(c));
}

Jet JetSpace::lift(double value, CoordinateRole role, int index) const {
    if (role == CoordinateRole::constant) return constant(value);
    if (index < 0 || index >= layout_->dim()) throw JetError("coordinate index out of range");
    std::vector<double> c(layout_->size(), 0.0);
    c[0] = value;
    const int var = role == CoordinateRole::base ? index : layout_->dim() + index;
    const auto slot = layout_->raised(0, var);
    if (slot >= 0) c[static_cast<std::size_t>(slot)] = 1.0;
    return Jet(layout_, std::move(c));
}

Jet JetSpace::base(int index, double value) const { return lift(value, CoordinateRole::base, index); }
Jet JetSpace::fiber(int index, double value) const { return lift(value, CoordinateRole::fiber, index); }

std::pair<std::vector<Jet>, std::vector<Jet>> JetSpace::lift_point(std::span<const double> x,
                                                                   std::span<const double> v) const {
    const int d = dim();
    if (static_cast<int>(x.size()) != d || static_cast<int>(v.size()) != d)
        throw JetError("point dimension does not match jet space");
    std::vector<Jet> xs, vs;
    xs.reserve(d);
    vs.reserve(d);
    for (int i = 0; i < d; ++i) xs.push_back(base(i, x[i]));
    for (int i = 0; i < d; ++i) vs.push_back(fiber(i, v[i]));
    return {std::move(xs), std::move(vs)};
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

namespace {

// Weights of the one-dimensional central stencil for derivative order k.
std::vector<std::pair<int, double>> stencil(int k) {
    switch (k) {
        case 0: return {{0, 1.0}};
        case 1: return {{-1, -0.5}, {1, 0.5}};
        case 2: return {{-1, 1.0}, {0, -2.0}, {1, 1.0}};
        case 3: return {{-2, -0.5}, {-1, 1.0}, {1, -1.0}, {2, 0.5}};
        default: throw JetError("finite-difference order above 3 not supported");
    }
}

}  // namespace

double central_difference(const PointField& f, std::span<const double> x, std::span<const double> v,
                          const MultiIndex& alpha, const DiffConfig& config) {
    if (!(config.fd_step > 0.0)) throw JetError("fd_step must be positive");
    const int d = static_cast<int>(x.size());
    if (static_cast<int>(alpha.size()) != 2 * d) throw JetError("multi-index size mismatch");
    int total = 0;
    for (int a : alpha) total += a;
    if (total > 3) throw JetError("finite-difference order above 3 not supported");
    if (total == 0) return f(x, v);
    // Larger steps for higher orders keep roundoff below truncation error.
    const double base_step = std::pow(config.fd_step, 2.0 / (total + 1));

    std::vector<double> point(x.begin(), x.end());
    point.insert(point.end(), v.begin(), v.end());
    std::vector<double> steps(2 * d);
    for (int i = 0; i < 2 * d; ++i) steps[i] = base_step * std::max(1.0, std::abs(point[i]));

    std::vector<int> vars;
    for (int i = 0; i < 2 * d; ++i)
        if (alpha[i] > 0) vars.push_back(i);

    std::vector<double> shifted = point;
    double sum = 0.0;
    std::function<void(std::size_t, double)> rec = [&](std::size_t idx, double weight) {
        if (idx == vars.size()) {
            std::span<const double> sx(shifted.data(), d), sv(shifted.data() + d, d);
            const double fv = f(sx, sv);
            if (!std::isfinite(fv)) throw JetError("non-finite value inside finite-difference stencil");
            sum += weight * fv;
            return;
        }
        const int var = vars[idx];
        for (auto [off, w] : stencil(alpha[var])) {
            shifted[var] = point[var] + off * steps[var];
            rec(idx + 1, weight * w);
        }
        shifted[var] = point[var];
    };
    rec(0, 1.0);
    double denom = 1.0;
    for (int var : vars) denom *= std::pow(steps[var], alpha[var]);
    return sum / denom;
}

double finite_difference_check(const PointField& f, const Jet& jet_value, std::span<const double> x,
                               std::span<const double> v, const MultiIndex& alpha, const DiffConfig& config) {
    const double exact = jet_value.partial(alpha);
    if (!config.fd_enabled) return 0.0;
    return std::abs(exact - central_difference(f, x, v, alpha, config));
}

}  // namespace wlf
