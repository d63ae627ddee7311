#ifndef BUBBLESCOPE_MODELS_HPP
#define BUBBLESCOPE_MODELS_HPP

#include <cmath>
#include <cstddef>
#include <numbers>

#include "errors.hpp"
#include "timeseries.hpp"

namespace bubblescope {

/**
 * Power law with a finite-time singularity on the log price:
 *
 *   log p(t) = A + B * (tc - t)^m
 *
 * The bubble regime has B < 0 and 0 < m < 1 (price accelerates but stays
 * finite at tc). The evaluator itself accepts any m != 0 for t < tc,
 * including m < 0 (stronger, price-level singularities); only the bubble
 * classifier enforces the regime constraints.
 */
struct PowerLawFTSParams {
    double A = 0.0;   ///< log-price level at tc
    double B = 0.0;   ///< amplitude; < 0 in the bubble regime
    double tc = 0.0;  ///< critical time (days)
    double m = 0.0;   ///< singularity exponent

    bool bubble_shape() const { return B < 0.0 && m > 0.0 && m < 1.0; }
};

/**
 * Log-periodic extension: the power law decorated with oscillations
 * periodic in log(tc - t), written with linear oscillation amplitudes
 * so that (A, B, C1, C2) can all be profiled out of a least-squares fit:
 *
 *   log p(t) = A + (tc-t)^m * [B + C1*cos(w*log(tc-t)) + C2*sin(w*log(tc-t))]
 */
struct LPPLParams {
    double A = 0.0;
    double B = 0.0;
    double tc = 0.0;
    double m = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
    double omega = 0.0;  ///< angular log-frequency, > 0

    double amplitude() const { return std::hypot(C1, C2); }
    double phase() const { return std::atan2(C2, C1); }
    /// Preferred scaling ratio g = exp(2*pi/omega) of the discrete scale invariance.
    double scaling_ratio() const { return std::exp(2.0 * std::numbers::pi / omega); }
};

/// Log-linear (constant growth rate) baseline: log p(t) = a + b*t.
struct ExpFitParams {
    double a = 0.0;  ///< intercept of log price
    double b = 0.0;  ///< growth rate per day
};

/**
 * Positive-feedback growth at its simplest: the growth rate proportional
 * to the price itself, dp/dt = c * p^2, which blows up at tc = 1/(c*p0).
 */
struct FeedbackODEParams {
    double p0 = 1.0;  ///< initial price, > 0
    double c = 1.0;   ///< feedback coefficient, > 0

    double critical_time() const { return 1.0 / (c * p0); }
};

inline double eval_fts_log_price(const PowerLawFTSParams& params, double t) {
    if (params.m == 0.0)
        raise(errc::invalid_argument, "exponent m must be nonzero");
    if (!(t < params.tc))
        raise(errc::beyond_singularity, "model undefined at or beyond tc");
    return params.A + params.B * std::pow(params.tc - t, params.m);
}

inline double eval_lppl_log_price(const LPPLParams& params, double t) {
    if (params.m == 0.0)
        raise(errc::invalid_argument, "exponent m must be nonzero");
    if (!(t < params.tc))
        raise(errc::beyond_singularity, "model undefined at or beyond tc");
    double tau = params.tc - t;
    double log_tau = std::log(tau);
    double osc = params.B + params.C1 * std::cos(params.omega * log_tau) +
                 params.C2 * std::sin(params.omega * log_tau);
    return params.A + std::pow(tau, params.m) * osc;
}

/// Exact solution of dp/dt = c*p^2 (price level, not log price).
inline double eval_feedback_price(const FeedbackODEParams& params, double t) {
    if (!(t < params.critical_time()))
        raise(errc::beyond_singularity, "feedback solution undefined at or beyond tc");
    return params.p0 / (1.0 - params.c * params.p0 * t);
}

struct ExpFit {
    ExpFitParams params;
    double sse = 0.0;
    std::size_t n_obs = 0;
};

/// Ordinary least squares of log price on time (the exponential null).
inline ExpFit fit_exponential(const LogPriceSeries& series) {
    std::size_t n = series.size();
    if (n < 2) raise(errc::too_short, "need at least 2 observations");

    double t_mean = 0.0, y_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        t_mean += series.times[i];
        y_mean += series.logp[i];
    }
    t_mean /= static_cast<double>(n);
    y_mean /= static_cast<double>(n);

    double s_tt = 0.0, s_ty = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dt = series.times[i] - t_mean;
        s_tt += dt * dt;
        s_ty += dt * (series.logp[i] - y_mean);
    }
    if (s_tt <= 0.0)
        raise(errc::degenerate_design, "time axis is constant");

    ExpFit fit;
    fit.params.b = s_ty / s_tt;
    fit.params.a = y_mean - fit.params.b * t_mean;
    fit.n_obs = n;
    for (std::size_t i = 0; i < n; ++i) {
        double r = series.logp[i] - (fit.params.a + fit.params.b * series.times[i]);
        fit.sse += r * r;
    }
    return fit;
}

}  // namespace bubblescope

#endif  // BUBBLESCOPE_MODELS_HPP
