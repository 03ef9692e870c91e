#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wlf/model.hpp"

namespace wlf {

/// How much of the pointwise geometry to compute.
enum class GeometryLevel { metric, connection, curvature };

/// Everything the flow and congruence layers need at one (x, v).
struct PointGeometry {
    int dim = 0;
    Vec x, v;
    double L = 0.0;
    Mat g, g_inv;

    // connection level and above
    Vec spray;                     // G^a
    Mat nonlinear;                 // N^a_b = dG^a/dv^b
    std::vector<Mat> gamma_tilde;  // gamma_tilde[a](b, c)
    std::vector<Mat> gamma;        // gamma[a](b, c), the modified coefficients

    // curvature level
    Mat spray_dx;  // dG^a/dx^b
    Mat R;         // R^a_b(v)
    double ricci = 0.0;

    // Weight along the geodesic through v: value, first and second t-derivatives.
    double psi = 0.0;
    double psi_d1 = 0.0;
    double psi_d2 = 0.0;

    /// sum_b Gamma^a_{bc}(v) u^b w^c
    Vec contract_gamma(const Vec& u, const Vec& w) const;
};

PointGeometry evaluate_geometry(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v,
                                GeometryLevel level);

struct MetricAtVector {
    Mat g, g_inv;
    Vec point, direction;
};

struct ConnectionData {
    std::vector<Mat> gamma_tilde;
    Vec spray;
    Mat nonlinear;
    std::vector<Mat> gamma;
};

struct CurvatureAtVector {
    Mat R;
    double ricci = 0.0;
    Vec point, direction;
};

/// Metric with signature and degeneracy validation.
MetricAtVector metric_at(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v);
ConnectionData connection_at(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v);
CurvatureAtVector curvature_at(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v);

/// 0.5 * Gamma-tilde(v)(v, v): the spray by the Christoffel route.
Vec spray_from_christoffel(const PointGeometry& geo);

double flag_curvature(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v,
                      std::span<const double> w);

/// Real number or +infinity.
struct ExtendedReal {
    double value = 0.0;
    bool infinite = false;

    static ExtendedReal inf() { return {0.0, true}; }
    static ExtendedReal finite(double v) { return {v, false}; }
    bool is_infinite() const { return infinite; }
    double as_double() const { return infinite ? std::numeric_limits<double>::infinity() : value; }
    std::string to_string() const;
    friend bool operator==(const ExtendedReal&, const ExtendedReal&) = default;
};

enum class Side { timelike, null };

struct WeightedRicciParams {
    ExtendedReal N;
    double epsilon = 0.0;
    Side side = Side::timelike;
};

/// Ric + psi'' - psi'^2/(N - n); -inf at N = n when psi' != 0.
double weighted_ricci(const PointGeometry& geo, ExtendedReal N);
double weighted_ricci(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v, ExtendedReal N);

struct EpsilonRange {
    bool admissible = false;
    /// Strict bound on |epsilon|; +inf when every epsilon is admissible, 0 when only epsilon = 0 is.
    double bound = 0.0;
};

/// Band below the bound in which epsilon is rejected.
inline constexpr double kEpsilonBoundaryBand = 1e-9;

EpsilonRange epsilon_range_check(const WeightedRicciParams& params, int n);
double c_coefficient(const WeightedRicciParams& params, int n);

/// Dimension of the congruence space: n for timelike, n - 1 for null.
inline int congruence_dim(Side side, int n) { return side == Side::timelike ? n : n - 1; }

}  // namespace wlf
