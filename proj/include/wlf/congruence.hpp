#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "wlf/geodesic.hpp"

namespace wlf {

enum class TensorKind { from_point, from_surface, custom };
std::string to_string(TensorKind k);

/// Jacobi tensor J (m x m, in a parallel frame) integrated jointly with its geodesic.
struct JacobiTensorPath {
    TensorKind kind = TensorKind::custom;
    bool lagrange = false;
    GeodesicSolution geodesic;

    int m() const { return geodesic.m; }
};

/// J(0) = J0, J'(0) = J1 along the geodesic from (x0, v0). The frame defaults to default_frame.
JacobiTensorPath jacobi_tensor_path(const SpacetimeModel& model, std::span<const double> x0, std::span<const double> v0,
                                    const Mat& J0, const Mat& J1, GeodesicOptions options,
                                    TensorKind kind = TensorKind::custom);

/// J(0) = 0, J'(0) = I.
JacobiTensorPath point_congruence_tensor(const SpacetimeModel& model, std::span<const double> x0,
                                         std::span<const double> v0, GeodesicOptions options);

/// Everything needed about the congruence at one parameter value.
struct CongruenceSample {
    double t = 0.0;
    Vec x, v;
    Mat E, h;           // frame and its gram E^T g E
    Mat J, Jp, Jpp;     // J'' from the continuous output
    Mat R_frame;        // curvature in frame coordinates
    PointGeometry geo;  // curvature level at (x, v)
};

CongruenceSample sample_congruence(const SpacetimeModel& model, const JacobiTensorPath& path, double t);

/// R_(N, eps) = e^{2k psi} {R + (psi'' - psi'^2/(N - n)) I / m} with k = 2(1 - eps)/m.
Mat weighted_frame_curvature(const CongruenceSample& s, int m, const WeightedRicciParams& params);

/// R_frame (or R_(N, eps) when params are given) at every grid time of the path.
std::vector<Mat> frame_curvature(const SpacetimeModel& model, const JacobiTensorPath& path,
                                 const std::optional<WeightedRicciParams>& params = std::nullopt);

enum class RaychaudhuriForm { extremal, finite, infinite };
std::string to_string(RaychaudhuriForm f);

struct CongruenceRow {
    double t = 0.0, tau = 0.0;
    double cond = 0.0;
    double theta = 0.0, theta_eps = 0.0, theta_1 = 0.0, theta_psi = 0.0;
    double sigma_eps_norm2 = 0.0;
    double ricN_etastar = 0.0;
    Mat B_eps;
    double theta_eps_dot = 0.0;  // derivative in tau_eps
    // Relative residuals |lhs| / sum of term sizes.
    double jacobi_residual = 0.0;
    double riccati_residual = 0.0;
    double raychaudhuri_residual = 0.0;
    double expansion_consistency = 0.0;  // |theta_eps - e^{k psi}(theta - psi')| relative
    double trace_free = 0.0;             // |trace B_eps - theta_eps| relative
    double ricci_trace = 0.0;            // |trace R_(N,eps) - Ric_N(eta*)| relative
    // (lhs, scale) of the inequalities; lhs <= tol * scale is required.
    double inequality_lhs = 0.0, inequality_scale = 0.0;
    double bishop_lhs = 0.0, bishop_scale = 0.0;
    double lagrange_residual = 0.0;
    double nontriviality = 0.0;
};

struct ConjugatePoint {
    double t = 0.0;
    double error = 0.0;    // half-width of the final bracket
    int multiplicity = 1;  // singular values of J below the threshold
    bool tangency = false; // det J touches zero without changing sign
};

struct CongruenceReport {
    Side side = Side::timelike;
    int m = 0;
    WeightedRicciParams params;
    double c = 0.0;
    RaychaudhuriForm form = RaychaudhuriForm::extremal;
    std::vector<CongruenceRow> rows;  // samples inside the invertibility window
    std::vector<ConjugatePoint> conjugate_times;

    double max_jacobi = 0.0, max_riccati = 0.0, max_raychaudhuri = 0.0;
    double max_inequality = 0.0;  // max over rows of lhs / scale
    double max_bishop = 0.0;
    double max_lagrange = 0.0;
    double max_expansion_consistency = 0.0, max_trace_free = 0.0, max_ricci_trace = 0.0;
    double min_nontriviality = 0.0;
    double min_ricN = 0.0;  // min over rows of Ric_N(eta*)
};

struct CongruenceOptions {
    /// B is formed only where cond(J) is below this.
    double window_cond = 1e10;
    /// Also sample step midpoints, where the continuous output is independent of the right-hand side.
    bool midpoints = true;
};

CongruenceReport evolve_weighted_congruence(const SpacetimeModel& model, const JacobiTensorPath& path,
                                            const WeightedRicciParams& params, const CongruenceOptions& options = {});

/// Zeros of det J on the integrated range.
std::vector<ConjugatePoint> detect_conjugate_points(const JacobiTensorPath& path);

struct S0Prediction {
    std::optional<double> s0;   // empty when the target tau lies outside the run
    double target_tau = 0.0;
    std::string outcome;        // "bound" or "inconclusive: horizon"
};

/// s0 = tau^{-1}(tau(t0) - 1/(c theta_eps(t0))) - t0, using tau quadrature `eps_index` of the geodesic.
S0Prediction s0_prediction(double theta_eps_t0, double t0, double c, const GeodesicSolution& geodesic,
                           size_t eps_index);

/// Index of eps among the geodesic's tau quadratures, or throws.
size_t epsilon_index(const GeodesicSolution& geodesic, double eps);

struct GenericityResult {
    double margin = 0.0;     // max over the grid of the operator norm
    double threshold = 0.0;
    bool generic = false;
};

/// Max of |R_frame| (or of |R_(0,0)| timelike, |R_(1,0)| null when weighted) along the path.
GenericityResult genericity_probe(const SpacetimeModel& model, const JacobiTensorPath& path, bool weighted);

// Surfaces of codimension two.

struct NormalPair {
    Vec plus, minus;
};

/// The two future lightlike normals of span(tangent) at x, normalized by seed . V = 1.
/// `outward` picks which one is "plus".
NormalPair lightlike_normals(const SpacetimeModel& model, std::span<const double> x, const Mat& tangent,
                             const Vec& outward);

struct SurfacePatch {
    int param_dim = 0;
    std::function<Vec(const Vec&)> map;      // parameters -> point
    std::function<Vec(const Vec&)> outward;  // parameters -> vector selecting the plus normal
    double step = 1e-3;                      // central-difference step in parameter space
};

struct SurfaceSample {
    Vec params, point;
    Mat tangent;  // dim x (n - 1)
    Vec V_plus, V_minus;
    double theta_plus = 0.0, theta_minus = 0.0;
    double theta1_plus = 0.0, theta1_minus = 0.0;
    Mat shape_plus, shape_minus;  // D_{w_j} V = sum_i shape(i, j) w_i modulo V
    bool psi_trapped = false;
    double normal_residual = 0.0;  // max of |L(V)| and |g_V(V, w)|
};

enum class NormalSide { plus, minus };

/// Lightlike normals, expansions and their weighted versions at one parameter point.
SurfaceSample surface_expansion(const SpacetimeModel& model, const SurfacePatch& patch, const Vec& params);

struct SurfaceData {
    std::vector<SurfaceSample> samples;
    bool psi_trapped = false;  // at every sample
};

SurfaceData analyze_surface(const SpacetimeModel& model, const SurfacePatch& patch, const std::vector<Vec>& params);

/// Jacobi tensor of the null congruence leaving the surface along V_plus or V_minus.
JacobiTensorPath surface_congruence(const SpacetimeModel& model, const SurfaceSample& s, NormalSide side,
                                    GeodesicOptions options);

/// Columns t, tau, theta, theta_eps, sigma2, ricN, residual.
void write_congruence_csv(std::ostream& out, const CongruenceReport& report);

}  // namespace wlf
