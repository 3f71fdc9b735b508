#include "spinecho/fit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spinecho {

std::string to_string(FitMethod m) {
    switch (m) {
        case FitMethod::Exponential: return "exponential";
        case FitMethod::Power: return "power";
        case FitMethod::LinearLogLog: return "linear";
    }
    return "unknown";
}

FitMethod fit_method_from_string(const std::string& name) {
    if (name == "exponential" || name == "exp") return FitMethod::Exponential;
    if (name == "power" || name == "pow") return FitMethod::Power;
    if (name == "linear" || name == "loglog") return FitMethod::LinearLogLog;
    throw std::invalid_argument("unknown fit method '" + name + "'");
}

CurvePoints truncate_curve(const CoherenceCurve& curve, double lf, bool for_log_fit,
                           bool use_abs) {
    if (!(lf > 0.0 && lf < 1.0))
        throw std::invalid_argument("truncate_curve: L_f must lie in (0, 1)");
    const double upper = for_log_fit ? std::exp(-kLogFitFloor) : 1.0;
    CurvePoints pts;
    for (int j = 0; j < curve.size(); ++j) {
        const double t = curve.t_ms[j];
        const double L =
            use_abs ? std::abs(curve.values[j]) : curve.values[j].real();
        if (t <= 0.0) continue;
        if (!(L > lf && L < 1.0)) continue;
        if (for_log_fit && L >= upper) continue;
        pts.t.push_back(t);
        pts.L.push_back(L);
    }
    if (pts.size() < kMinFitPoints)
        throw std::runtime_error("truncate_curve: only " + std::to_string(pts.size()) +
                                 " points survive truncation at L_f = " + std::to_string(lf) +
                                 "; need " + std::to_string(kMinFitPoints));
    return pts;
}

namespace {

double weight_of(const CurvePoints& pts, int i) {
    return pts.weights.empty() ? 1.0 : pts.weights[static_cast<std::size_t>(i)];
}

struct LogLogData {
    std::vector<double> x, y, w;
};

// y = ln(-ln L), x = ln t; points with L outside (0,1) or negligible decay
// are excluded.
LogLogData loglog_points(const CurvePoints& pts) {
    LogLogData d;
    for (int i = 0; i < pts.size(); ++i) {
        const double L = pts.L[static_cast<std::size_t>(i)];
        const double t = pts.t[static_cast<std::size_t>(i)];
        if (!(L > 0.0 && L < 1.0) || t <= 0.0) continue;
        const double g = -std::log(L);
        if (g < kLogFitFloor) continue;
        d.x.push_back(std::log(t));
        d.y.push_back(std::log(g));
        d.w.push_back(weight_of(pts, i));
    }
    return d;
}

struct LineFit {
    double slope, intercept;
    Eigen::Matrix2d cov; // (slope, intercept)
    double rss;
    int n;
};

LineFit weighted_line_fit(const LogLogData& d) {
    const int n = static_cast<int>(d.x.size());
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double w = d.w[static_cast<std::size_t>(i)];
        sw += w;
        sx += w * d.x[static_cast<std::size_t>(i)];
        sy += w * d.y[static_cast<std::size_t>(i)];
        sxx += w * d.x[static_cast<std::size_t>(i)] * d.x[static_cast<std::size_t>(i)];
        sxy += w * d.x[static_cast<std::size_t>(i)] * d.y[static_cast<std::size_t>(i)];
    }
    const double det = sw * sxx - sx * sx;
    if (det <= 0.0 || n < 2)
        throw std::runtime_error("line fit: degenerate abscissa (all times equal?)");
    LineFit f;
    f.n = n;
    f.slope = (sw * sxy - sx * sy) / det;
    f.intercept = (sxx * sy - sx * sxy) / det;
    f.rss = 0;
    for (int i = 0; i < n; ++i) {
        const double r = f.slope * d.x[static_cast<std::size_t>(i)] + f.intercept -
                         d.y[static_cast<std::size_t>(i)];
        f.rss += d.w[static_cast<std::size_t>(i)] * r * r;
    }
    const double sigma2 = n > 2 ? f.rss / (n - 2) : 0.0;
    f.cov(0, 0) = sigma2 * sw / det;
    f.cov(0, 1) = f.cov(1, 0) = -sigma2 * sx / det;
    f.cov(1, 1) = sigma2 * sxx / det;
    return f;
}

FitResult linear_result_from(const LineFit& f) {
    FitResult r;
    r.method = FitMethod::LinearLogLog;
    r.p = f.slope;
    r.t2_ms = std::exp(-f.intercept / f.slope);
    // (T2, p) from (slope a, intercept b): T2 = exp(-b/a), p = a.
    Eigen::Matrix2d jac;
    jac(0, 0) = r.t2_ms * f.intercept / (f.slope * f.slope);
    jac(0, 1) = -r.t2_ms / f.slope;
    jac(1, 0) = 1.0;
    jac(1, 1) = 0.0;
    r.covariance = jac * f.cov * jac.transpose();
    r.points_used = f.n;
    r.residual_norm = std::sqrt(f.rss);
    r.converged = r.p > 0.0 && std::isfinite(r.t2_ms) && r.t2_ms > 0.0;
    return r;
}

// Residuals and Jacobian for the two nonlinear fits. `power` fits
// u = (t/T2)^p against -ln L, the exponential fit exp(-u) against L.
struct NonlinearModel {
    bool power;
    const CurvePoints& pts;
    std::vector<double> target; // L or -ln L
    std::vector<double> w;
    std::vector<int> keep;

    explicit NonlinearModel(const CurvePoints& points, bool power_fit)
        : power(power_fit), pts(points) {
        for (int i = 0; i < points.size(); ++i) {
            const double L = points.L[static_cast<std::size_t>(i)];
            if (power) {
                if (!(L > 0.0 && L < 1.0)) continue;
                target.push_back(-std::log(L));
            } else {
                if (!(L > 0.0 && L <= 1.0)) continue;
                target.push_back(L);
            }
            keep.push_back(i);
            w.push_back(weight_of(points, i));
        }
    }

    int size() const { return static_cast<int>(target.size()); }

    // residual r_i = model_i - target_i and d(model)/d(T2, p)
    void eval(double t2, double p, Eigen::VectorXd& r, Eigen::MatrixXd& jac) const {
        const int n = size();
        r.resize(n);
        jac.resize(n, 2);
        for (int i = 0; i < n; ++i) {
            const double t = pts.t[static_cast<std::size_t>(keep[static_cast<std::size_t>(i)])];
            const double u = std::pow(t / t2, p);
            const double lw = std::log(t / t2);
            const double sq = std::sqrt(w[static_cast<std::size_t>(i)]);
            if (power) {
                r[i] = sq * (u - target[static_cast<std::size_t>(i)]);
                jac(i, 0) = sq * (-p * u / t2);
                jac(i, 1) = sq * (u * lw);
            } else {
                const double m = std::exp(-u);
                r[i] = sq * (m - target[static_cast<std::size_t>(i)]);
                jac(i, 0) = sq * (m * p * u / t2);
                jac(i, 1) = sq * (-m * u * lw);
            }
        }
    }
};

FitResult gauss_newton_fit(const CurvePoints& pts, bool power) {
    NonlinearModel model(pts, power);
    if (model.size() < kMinFitPoints)
        throw std::runtime_error("fit: fewer than " + std::to_string(kMinFitPoints) +
                                 " usable points");

    // Seed from the closed-form log-log line; degenerate data (no decay)
    // surfaces here as a failed seed.
    double t2, p;
    {
        const LogLogData d = loglog_points(pts);
        if (static_cast<int>(d.x.size()) < 2)
            throw std::runtime_error("fit: curve shows no usable decay (L ~ 1 everywhere)");
        const LineFit line = weighted_line_fit(d);
        p = line.slope;
        t2 = std::exp(-line.intercept / line.slope);
        if (!(p > 0.0) || !std::isfinite(t2) || !(t2 > 0.0)) {
            p = 1.0;
            t2 = pts.t[pts.t.size() / 2];
        }
    }

    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    model.eval(t2, p, r, jac);
    double ssr = r.squaredNorm();
    double lambda = 1e-6;
    bool converged = false;
    constexpr int kMaxIter = 200;
    constexpr double kTol = 1e-10;

    for (int iter = 0; iter < kMaxIter; ++iter) {
        const Eigen::Matrix2d jtj = jac.transpose() * jac;
        const Eigen::Vector2d jtr = jac.transpose() * r;
        bool stepped = false;
        for (int tries = 0; tries < 32; ++tries) {
            Eigen::Matrix2d damped = jtj;
            damped(0, 0) += lambda * std::max(jtj(0, 0), 1e-300);
            damped(1, 1) += lambda * std::max(jtj(1, 1), 1e-300);
            const Eigen::Vector2d delta = damped.ldlt().solve(-jtr);
            const double t2_new = t2 + delta[0];
            const double p_new = p + delta[1];
            if (t2_new > 0.0 && p_new > 0.0) {
                Eigen::VectorXd r_new;
                Eigen::MatrixXd jac_new;
                model.eval(t2_new, p_new, r_new, jac_new);
                const double ssr_new = r_new.squaredNorm();
                if (ssr_new <= ssr) {
                    const double rel = std::max(std::abs(delta[0]) / t2_new,
                                                std::abs(delta[1]) / p_new);
                    t2 = t2_new;
                    p = p_new;
                    r.swap(r_new);
                    jac.swap(jac_new);
                    ssr = ssr_new;
                    lambda = std::max(lambda * 0.1, 1e-14);
                    stepped = true;
                    if (rel < kTol) converged = true;
                    break;
                }
            }
            lambda *= 10.0;
            if (lambda > 1e14) break;
        }
        if (converged || !stepped) break;
    }

    FitResult out;
    out.method = power ? FitMethod::Power : FitMethod::Exponential;
    out.t2_ms = t2;
    out.p = p;
    out.points_used = model.size();
    out.residual_norm = std::sqrt(ssr);
    out.converged = converged;
    const int n = model.size();
    const double sigma2 = n > 2 ? ssr / (n - 2) : 0.0;
    const Eigen::Matrix2d jtj = jac.transpose() * jac;
    out.covariance = sigma2 * jtj.inverse();
    return out;
}

} // namespace

FitResult fit_linear_loglog(const CurvePoints& points) {
    const LogLogData d = loglog_points(points);
    if (static_cast<int>(d.x.size()) < kMinFitPoints)
        throw std::runtime_error("fit_linear_loglog: fewer than " +
                                 std::to_string(kMinFitPoints) + " usable points");
    FitResult r = linear_result_from(weighted_line_fit(d));

    // Dropping the earliest point quantifies the short-time sensitivity.
    LogLogData rest;
    std::size_t first = 0;
    for (std::size_t i = 1; i < d.x.size(); ++i)
        if (d.x[i] < d.x[first]) first = i;
    for (std::size_t i = 0; i < d.x.size(); ++i) {
        if (i == first) continue;
        rest.x.push_back(d.x[i]);
        rest.y.push_back(d.y[i]);
        rest.w.push_back(d.w[i]);
    }
    if (rest.x.size() >= 2) {
        try {
            const FitResult alt = linear_result_from(weighted_line_fit(rest));
            r.early_point_sensitivity = std::abs(alt.t2_ms - r.t2_ms) / r.t2_ms;
        } catch (const std::exception&) {
            // leave NaN
        }
    }
    return r;
}

FitResult fit_exponential(const CurvePoints& points) { return gauss_newton_fit(points, false); }

FitResult fit_power(const CurvePoints& points) { return gauss_newton_fit(points, true); }

FitResult fit_curve(const CoherenceCurve& curve, FitMethod method, double lf, bool use_abs) {
    const bool log_fit = method != FitMethod::Exponential;
    const CurvePoints pts = truncate_curve(curve, lf, log_fit, use_abs);
    FitResult r;
    switch (method) {
        case FitMethod::Exponential: r = fit_exponential(pts); break;
        case FitMethod::Power: r = fit_power(pts); break;
        case FitMethod::LinearLogLog: r = fit_linear_loglog(pts); break;
    }
    r.lf = lf;
    return r;
}

std::vector<std::pair<double, double>> local_slope(const CoherenceCurve& curve) {
    const int n = curve.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> x(static_cast<std::size_t>(n), nan);
    std::vector<double> y(static_cast<std::size_t>(n), nan);
    for (int j = 0; j < n; ++j) {
        const double t = curve.t_ms[j];
        const double L = curve.values[j].real();
        if (t <= 0.0 || !(L > 0.0 && L < 1.0)) continue;
        const double g = -std::log(L);
        if (g < kLogFitFloor) continue;
        x[static_cast<std::size_t>(j)] = std::log(t);
        y[static_cast<std::size_t>(j)] = std::log(g);
    }
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        double slope = nan;
        if (j > 0 && j + 1 < n) {
            const auto xm = x[static_cast<std::size_t>(j - 1)];
            const auto xp = x[static_cast<std::size_t>(j + 1)];
            const auto ym = y[static_cast<std::size_t>(j - 1)];
            const auto yp = y[static_cast<std::size_t>(j + 1)];
            if (std::isfinite(xm) && std::isfinite(xp) && xp != xm)
                slope = (yp - ym) / (xp - xm);
        }
        out.emplace_back(curve.t_ms[j], slope);
    }
    return out;
}

} // namespace spinecho
