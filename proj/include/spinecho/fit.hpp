#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "spinecho/coherence.hpp"

namespace spinecho {

enum class FitMethod { Exponential, Power, LinearLogLog };

std::string to_string(FitMethod m);
FitMethod fit_method_from_string(const std::string& name);

/// Stretched-exponential parameters extracted from a decay curve,
/// L_fit(t) = exp[-(t/T2)^p].
struct FitResult {
    double t2_ms = 0.0;
    double p = 0.0;
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero(); // (T2, p)
    FitMethod method = FitMethod::Exponential;
    double lf = 0.0;       // truncation level used (0 when fit on raw points)
    int points_used = 0;
    double residual_norm = 0.0;
    bool converged = false;
    // Linear log-log fits only: relative T2 shift when the earliest point is
    // dropped; quantifies the short-time sensitivity. NaN otherwise.
    double early_point_sensitivity = std::numeric_limits<double>::quiet_NaN();
};

struct CurvePoints {
    std::vector<double> t;       // ms, > 0
    std::vector<double> L;
    std::vector<double> weights; // empty => unweighted

    int size() const { return static_cast<int>(t.size()); }
};

inline constexpr int kMinFitPoints = 5;
/// Log-based fits drop points this close to L = 1 (-ln L below the
/// threshold); the earliest points otherwise destabilize them.
inline constexpr double kLogFitFloor = 1e-3;

/// Keeps points with t > 0 and L_f < L < 1 (real part); log-based fits
/// additionally require -ln L >= kLogFitFloor. Throws when fewer than
/// kMinFitPoints survive.
CurvePoints truncate_curve(const CoherenceCurve& curve, double lf, bool for_log_fit = false,
                           bool use_abs = false);

/// Nonlinear least squares of exp[-(t/T2)^p] against L(t); damped
/// Gauss-Newton seeded by the linear log-log fit, relative parameter
/// tolerance 1e-10, at most 200 iterations.
FitResult fit_exponential(const CurvePoints& points);

/// Least squares of (t/T2)^p against -ln L(t); same solver contract.
FitResult fit_power(const CurvePoints& points);

/// Ordinary least squares on ln(-ln L) vs ln t; slope = p, intercept =
/// -p ln T2. Closed form, covariance propagated to (T2, p).
FitResult fit_linear_loglog(const CurvePoints& points);

/// Truncates with the method-appropriate rule, fits, and stamps `lf`.
FitResult fit_curve(const CoherenceCurve& curve, FitMethod method, double lf,
                    bool use_abs = false);

/// Centered finite differences of ln(-ln L) vs ln t on the curve grid;
/// NaN where undefined (boundary points, L outside (0,1), tiny decay).
std::vector<std::pair<double, double>> local_slope(const CoherenceCurve& curve);

} // namespace spinecho
