#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "wlf/geometry.hpp"
#include "wlf/ode.hpp"

namespace wlf {

/// Chart left before the requested parameter was reached.
class ChartExitError : public Error {
public:
    using Error::Error;
};

struct GeodesicOptions {
    double t_start = 0.0;
    double t_end = 1.0;
    double tol = 1e-10;
    std::vector<double> epsilons;  // one tau_epsilon quadrature per entry
    bool unit_speed = false;       // rescale a timelike v0 to F = 1
    bool fixed_step = false;
    double fixed_step_size = 1e-3;
    double max_step = std::numeric_limits<double>::infinity();
    /// Initial parallel frame, dim x m, g_{v0}-orthogonal to v0.
    std::optional<Mat> frame;
    /// Integrate J'' = -R_frame J with these m x m initial values (requires a frame; a default one is built if absent).
    bool jacobi = false;
    Mat J0, J1;
};

/// Offsets of the pieces of the augmented geodesic state.
struct StateLayout {
    int dim = 0, m = 0, n_eps = 0;
    bool has_frame = false, has_jacobi = false;

    int x() const { return 0; }
    int v() const { return dim; }
    int frame() const { return 2 * dim; }
    int tau() const { return 2 * dim + (has_frame ? dim * m : 0); }
    int J() const { return tau() + n_eps; }
    int Jp() const { return J() + m * m; }
    int size() const { return J() + (has_jacobi ? 2 * m * m : 0); }
};

class GeodesicSolution {
public:
    int dim = 0;
    int m = 0;  // n timelike, n - 1 null
    Side side = Side::timelike;
    double L_value = 0.0;
    bool unit_speed = false;
    std::vector<double> epsilons;
    GeodesicOptions options;
    StateLayout layout;

    std::vector<double> t;
    std::vector<Vec> state;
    std::vector<double> psi;  // weight at grid points
    DenseOutput dense;
    OdeStatus status = OdeStatus::completed;
    std::string message;
    double error_estimate = 0.0;

    double t_begin() const { return t.front(); }
    double t_end() const { return t.back(); }
    bool reached_end() const { return status == OdeStatus::completed; }

    Vec x(size_t i) const { return state[i].segment(layout.x(), dim); }
    Vec v(size_t i) const { return state[i].segment(layout.v(), dim); }
    Vec x_at(double s) const { return dense.value(s, layout.x(), dim); }
    Vec v_at(double s) const { return dense.value(s, layout.v(), dim); }
    Mat frame(size_t i) const;
    Mat frame_at(double s) const;
    double tau(size_t e, size_t i) const { return state[i][layout.tau() + static_cast<int>(e)]; }
    double tau_at(size_t e, double s) const { return dense.value(s, layout.tau() + static_cast<int>(e), 1)[0]; }
    Mat J_at(double s) const;
    Mat Jp_at(double s) const;
    /// J'' from differentiating the continuous output of J'.
    Mat Jpp_at(double s) const;

    /// t with tau_e(t) = target, or nullopt when target is outside the integrated range.
    std::optional<double> tau_inverse(size_t e, double target) const;
};

/// Integrates eta'' + 2G(eta') = 0 with optional tau_epsilon quadratures, parallel frame and Jacobi tensor.
GeodesicSolution integrate_geodesic(const SpacetimeModel& model, std::span<const double> x0, std::span<const double> v0,
                                    const GeodesicOptions& options);

/// R in frame coordinates: h^{-1} E^T g R E with h = E^T g E.
Mat frame_curvature_matrix(const PointGeometry& geo, const Mat& E);

/// g_v-orthonormal basis of the orthogonal complement of a timelike v (dim x n), or of a
/// complement of v inside v^perp for a lightlike v (dim x (n - 1)), h-orthonormal.
Mat default_frame(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v);

struct ParallelFrame {
    std::vector<double> t;
    std::vector<Mat> basis;
    std::vector<Mat> gram;  // h = E^T g E
    GeodesicSolution solution;
};

ParallelFrame transport_frame(const SpacetimeModel& model, const GeodesicSolution& geodesic, const Mat& initial_basis);

/// D^w_{x'} X = X' + Gamma(w)(x', X) at one point.
Vec covariant_derivative(const SpacetimeModel& model, const Vec& x, const Vec& velocity, const Vec& X, const Vec& X_dot,
                         const Vec& reference);

using CurveFunction = std::function<Vec(double)>;

/// Covariant derivative along a parametrized curve, with derivatives by fourth-order central differences.
std::vector<Vec> covariant_derivative(const SpacetimeModel& model, const CurveFunction& curve, const CurveFunction& X,
                                      const CurveFunction& reference, const std::vector<double>& times,
                                      double h = 1e-3);

/// eta(t) for the geodesic with eta(0) = x, eta'(0) = v.
Vec exponential_map(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v, double t = 1.0,
                    double tol = 1e-10);

/// Composite Simpson quadrature of F(curve'(t)) on [t0, t1]; `position` and `velocity` describe the curve.
double curve_length(const SpacetimeModel& model, const CurveFunction& position, const CurveFunction& velocity, double t0,
                    double t1, int intervals = 2000);
double curve_length(const SpacetimeModel& model, const GeodesicSolution& geodesic, int intervals = 2000);

/// Columns t, x0.., v0.., L, psi, tau_<eps>...
void write_geodesic_csv(std::ostream& out, const SpacetimeModel& model, const GeodesicSolution& geodesic);

/// %.17g
std::string format_number(double x);

}  // namespace wlf
