#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "wlf/model.hpp"

namespace wlf {

/// One step of continuous output: y(t0 + s h) for s in [0, 1], valid up to t_end.
struct DenseSegment {
    double t0 = 0.0, h = 0.0, t_end = 0.0;
    Vec r1, r2, r3, r4, r5;
};

class DenseOutput {
public:
    void append(DenseSegment s) { segments_.push_back(std::move(s)); }
    bool empty() const { return segments_.empty(); }
    double t_begin() const { return segments_.front().t0; }
    double t_end() const { return segments_.back().t_end; }
    const std::vector<DenseSegment>& segments() const { return segments_; }

    /// Components [offset, offset + count) of y(t). count < 0 means all.
    Vec value(double t, int offset = 0, int count = -1) const;
    /// Same for dy/dt, from the derivative of the interpolating polynomial.
    Vec derivative(double t, int offset = 0, int count = -1) const;

private:
    const DenseSegment& locate(double t) const;
    std::vector<DenseSegment> segments_;
};

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-10;
    double initial_step = 0.0;  // 0 picks one automatically
    double max_step = std::numeric_limits<double>::infinity();
    bool fixed_step = false;  // classical RK4 with step `step`
    double step = 1e-3;
    long max_steps = 2'000'000;
};

enum class OdeStatus { completed, boundary, step_collapse, max_steps };
std::string to_string(OdeStatus s);

struct OdeResult {
    std::vector<double> t;
    std::vector<Vec> y;
    DenseOutput dense;
    OdeStatus status = OdeStatus::completed;
    std::string message;
    /// Sum of the local error estimates of accepted steps (max norm).
    double error_estimate = 0.0;
    long accepted = 0, rejected = 0;
};

using OdeRhs = std::function<void(double t, const Vec& y, Vec& dy)>;
/// Returns false once the state has left the admissible region.
using OdeInside = std::function<bool(double t, const Vec& y)>;

/// Dormand-Prince 5(4) with Hairer's continuous extension, or RK4 when fixed_step is set.
/// DomainError or DegeneracyError thrown from rhs inside a step rejects the step.
OdeResult integrate_ode(const OdeRhs& rhs, double t0, const Vec& y0, double t1, const OdeOptions& options,
                        const OdeInside& inside = {});

}  // namespace wlf
