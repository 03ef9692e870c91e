#pragma once

// Truncated multivariate Taylor jets over the tangent-bundle coordinates
// (x^0..x^n, v^0..v^n). A single evaluation of a Lagrangian on jets yields
// every mixed partial the geometry layer consumes.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace wlf {

class JetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by sqrt/log/pow/atan2 on arguments outside their real domain.
class DomainError : public JetError {
public:
    using JetError::JetError;
};

/// Kept monomials satisfy |x-part| <= max_x, |v-part| <= max_v and
/// |x-part| + |v-part| <= max_total.
struct Truncation {
    int max_x = 2;
    int max_v = 4;
    int max_total = 4;

    friend bool operator==(const Truncation&, const Truncation&) = default;
};

/// Truncation needed for the curvature endomorphism: G carries g^{-1}, and the
/// curvature formula differentiates G twice in v, so L needs fourth v-derivatives.
inline constexpr Truncation kCurvatureTruncation{2, 4, 4};
/// Enough for g, Gamma-tilde, G and N (one x-derivative, three v-derivatives).
inline constexpr Truncation kConnectionTruncation{1, 3, 4};
/// Enough for the spray alone.
inline constexpr Truncation kSprayTruncation{1, 2, 3};
/// Second-order data in both x and v; used for weight functions.
inline constexpr Truncation kSecondOrderTruncation{2, 2, 2};

/// Exponents over the 2*dim jet variables; slots [0, dim) are x, [dim, 2 dim) are v.
using MultiIndex = std::vector<int>;

class JetLayout;

enum class CoordinateRole { base, fiber, constant };

/// Value plus truncated Taylor coefficients. A Jet without a layout is a plain
/// constant and adopts the layout of whatever it is combined with.
class Jet {
public:
    Jet() : coeffs_{0.0} {}
    Jet(double value) : coeffs_{value} {}  // NOLINT: implicit lift of constants

    double value() const { return coeffs_[0]; }
    bool is_constant_only() const { return layout_ == nullptr; }
    const std::shared_ptr<const JetLayout>& layout() const { return layout_; }

    /// Mixed partial derivative; throws JetError if the index lies outside the truncation.
    double partial(const MultiIndex& alpha) const;
    /// Raw Taylor coefficient (partial / alpha!).
    double coefficient(std::size_t slot) const;
    std::span<const double> coefficients() const { return coeffs_; }

    /// d/d(var) of the jet; coefficients that would need data beyond the
    /// truncation come back as zero and must not be read.
    Jet derivative(int var) const;

    /// Same jet re-expressed on a smaller truncation (coefficients outside it are dropped).
    Jet restricted(const Truncation& trunc) const;

    Jet& operator+=(const Jet& o);
    Jet& operator-=(const Jet& o);
    Jet& operator*=(const Jet& o);
    Jet& operator/=(const Jet& o);

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator*(const Jet& a, const Jet& b);
    friend Jet operator/(const Jet& a, const Jet& b);
    friend Jet operator-(Jet a);
    friend Jet operator+(const Jet& a) { return a; }

private:
    friend class JetLayout;
    friend class JetSpace;
    friend Jet compose_series(const Jet& a, std::span<const double> taylor);
    Jet(std::shared_ptr<const JetLayout> layout, std::vector<double> coeffs)
        : layout_(std::move(layout)), coeffs_(std::move(coeffs)) {}
    void adopt(const std::shared_ptr<const JetLayout>& layout);

    std::shared_ptr<const JetLayout> layout_;
    std::vector<double> coeffs_;
};

/// Immutable monomial table and product/shift indices for one (dim, truncation).
class JetLayout {
public:
    JetLayout(int dim, Truncation trunc);

    int dim() const { return dim_; }
    int num_vars() const { return 2 * dim_; }
    const Truncation& truncation() const { return trunc_; }
    std::size_t size() const { return exponents_.size(); }
    int total_order() const { return trunc_.max_total; }

    /// -1 when alpha is outside the truncation.
    std::ptrdiff_t index_of(std::span<const int> alpha) const;
    std::span<const std::uint8_t> exponent(std::size_t slot) const;
    /// Slot of monomial(slot) * var, or -1.
    std::ptrdiff_t raised(std::size_t slot, int var) const { return up_[slot * num_vars() + var]; }

    void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out) const;

    static std::shared_ptr<const JetLayout> get(int dim, Truncation trunc);

private:
    bool admits(std::span<const int> e) const;
    std::uint64_t key(std::span<const int> e) const;

    int dim_;
    Truncation trunc_;
    std::vector<std::vector<std::uint8_t>> exponents_;
    std::vector<std::pair<std::uint64_t, std::size_t>> sorted_keys_;
    std::vector<std::ptrdiff_t> up_;
    // Row-compressed product table: for slot i, pairs (j, k) with mono_i * mono_j = mono_k.
    std::vector<std::size_t> row_start_;
    std::vector<std::uint32_t> row_j_;
    std::vector<std::uint32_t> row_k_;
};

/// Factory for jets sharing one layout.
class JetSpace {
public:
    JetSpace(int dim, Truncation trunc) : layout_(JetLayout::get(dim, trunc)) {}

    int dim() const { return layout_->dim(); }
    const std::shared_ptr<const JetLayout>& layout() const { return layout_; }

    Jet constant(double value) const;
    Jet base(int index, double value) const;
    Jet fiber(int index, double value) const;
    /// Seeds a unit first derivative in the slot named by role/index.
    Jet lift(double value, CoordinateRole role, int index = 0) const;

    /// Lifted coordinate vectors (x, v) at a point.
    std::pair<std::vector<Jet>, std::vector<Jet>> lift_point(std::span<const double> x,
                                                             std::span<const double> v) const;

private:
    std::shared_ptr<const JetLayout> layout_;
};

/// f(a) from the Taylor coefficients f^(k)(a0)/k!, k = 0..order.
Jet compose_series(const Jet& a, std::span<const double> taylor);

Jet exp(const Jet& a);
Jet log(const Jet& a);
Jet sqrt(const Jet& a);
Jet sin(const Jet& a);
Jet cos(const Jet& a);
Jet sinh(const Jet& a);
Jet cosh(const Jet& a);
Jet atan(const Jet& a);
Jet atan2(const Jet& y, const Jet& x);
Jet pow(const Jet& a, double exponent);
Jet pow(const Jet& a, const Jet& exponent);
Jet ipow(const Jet& a, int exponent);

inline double ipow(double a, int exponent) {
    double r = 1.0;
    const bool neg = exponent < 0;
    for (int k = 0; k < (neg ? -exponent : exponent); ++k) r *= a;
    return neg ? 1.0 / r : r;
}

/// Real-valued sqrt/log with the same domain policy as the jet versions.
double checked_sqrt(double a);
double checked_log(double a);

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

struct DiffConfig {
    double fd_step = 1e-5;
    bool fd_enabled = true;
};

using PointField = std::function<double(std::span<const double> x, std::span<const double> v)>;

/// Central-difference estimate of a mixed partial of order <= 3 (steps scaled
/// by max(1, |coordinate|)).
double central_difference(const PointField& f, std::span<const double> x, std::span<const double> v,
                          const MultiIndex& alpha, const DiffConfig& config);

/// |jet partial - central difference| for the given multi-index.
double finite_difference_check(const PointField& f, const Jet& jet_value, std::span<const double> x,
                               std::span<const double> v, const MultiIndex& alpha,
                               const DiffConfig& config);

}  // namespace wlf
