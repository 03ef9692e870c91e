#pragma once

#include <Eigen/Dense>
#include <functional>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "wlf/errors.hpp"
#include "wlf/jet.hpp"

namespace wlf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using json = nlohmann::json;

/// Function of (x, v) evaluatable on plain reals and on jets.
class ScalarField {
public:
    using RealFn = std::function<double(std::span<const double>, std::span<const double>)>;
    using JetFn = std::function<Jet(std::span<const Jet>, std::span<const Jet>)>;

    ScalarField() = default;  // identically zero
    ScalarField(RealFn real, JetFn jet) : real_(std::move(real)), jet_(std::move(jet)) {}

    bool is_zero() const { return !real_; }
    double operator()(std::span<const double> x, std::span<const double> v) const { return real_ ? real_(x, v) : 0.0; }
    Jet operator()(std::span<const Jet> x, std::span<const Jet> v) const { return jet_ ? jet_(x, v) : Jet(0.0); }

private:
    RealFn real_;
    JetFn jet_;
};

/// Wraps a generic callable f(span<const T> x, span<const T> v) -> T.
template <class F>
ScalarField make_field(F f) {
    return ScalarField([f](std::span<const double> x, std::span<const double> v) -> double { return f(x, v); },
                       [f](std::span<const Jet> x, std::span<const Jet> v) -> Jet { return f(x, v); });
}

struct ChartBox {
    std::vector<double> lower;
    std::vector<double> upper;

    bool contains(std::span<const double> x) const;
    static ChartBox unbounded(int dim, double half_width = 1e6);
};

class SpacetimeModel {
public:
    std::string name;
    int dim = 0;
    ScalarField lagrangian;
    ScalarField weight;
    ChartBox chart;
    std::vector<double> future_seed;
    /// L is a quadratic form in v (a Lorentzian metric).
    bool quadratic = false;
    /// False for models used only for cone structure (g_v not Lorentzian everywhere on the cone).
    bool lorentzian = true;
    json description;

    int n() const { return dim - 1; }
    double L(std::span<const double> x, std::span<const double> v) const { return lagrangian(x, v); }
    Jet L(std::span<const Jet> x, std::span<const Jet> v) const { return lagrangian(x, v); }
    double psi(std::span<const double> x, std::span<const double> v) const { return weight(x, v); }
    Jet psi(std::span<const Jet> x, std::span<const Jet> v) const { return weight(x, v); }
    bool weighted() const { return !weight.is_zero(); }
};

/// Vertical Hessian g_{ab} = d^2 L / dv^a dv^b.
Mat vertical_hessian(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v);
/// dL/dv; g_v(v, w) = dL/dv(v) . w by homogeneity.
Vec vertical_gradient(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v);
/// Count of eigenvalues below -tol*|g|; -1 when some eigenvalue is within the band.
int negative_index(const Mat& g, double rel_tol = 1e-10);

struct CausalClass {
    enum class Kind { timelike, lightlike, spacelike, zero };
    Kind kind = Kind::zero;
    bool future_directed = false;
};

const char* to_string(CausalClass::Kind kind);

CausalClass classify_vector(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v,
                            double tol = 1e-9);

int count_cone_components(const SpacetimeModel& model, std::span<const double> x, int samples);

/// sqrt(max(0, -2L)); DomainError on spacelike input.
double lorentz_finsler_norm(const SpacetimeModel& model, std::span<const double> x, std::span<const double> v,
                            double tol = 1e-9);

/// Builtin families: minkowski, warped_product, constant_curvature, randers_perturbed, beem, weighted.
SpacetimeModel builtin_model(const std::string& name, const json& params);

/// Attaches a weight described by {"type": linear_t|direction_dependent, ...} or {"expression": text}.
void attach_weight(SpacetimeModel& model, const json& weight);

/// Model block of a run config (builtin or expression form). Throws ConfigError with key path.
SpacetimeModel model_from_config(const json& block, const std::string& path = "model");

/// Names accepted by builtin_model.
std::vector<std::string> builtin_names();

}  // namespace wlf
