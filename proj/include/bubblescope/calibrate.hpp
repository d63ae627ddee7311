#ifndef BUBBLESCOPE_CALIBRATE_HPP
#define BUBBLESCOPE_CALIBRATE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "models.hpp"
#include "timeseries.hpp"

namespace bubblescope {

enum class ModelKind { fts, lppl };

inline const char* model_name(ModelKind k) { return k == ModelKind::fts ? "fts" : "lppl"; }

/**
 * Search configuration for the multi-start calibration. Empty grids are
 * resolved per window: tc candidates are 20 values spaced over
 * (t_end, t_end + tc_horizon_factor * window_span], m runs 0.1..0.9 in
 * steps of 0.1, omega runs 3..24 in steps of 1.5. Candidate critical
 * times must lie strictly after the last observation.
 */
struct FitConfig {
    std::vector<double> tc_grid;
    std::vector<double> m_grid;
    std::vector<double> omega_grid;
    int refine_max_iter = 500;
    double refine_tol = 1e-9;  ///< relative SSE-spread stopping rule for refinement
    std::uint64_t seed = 0;    ///< reserved for stochastic restart jitter; the fit is deterministic
    std::size_t min_length = 30;
    int refine_top_k = 5;
    double tc_horizon_factor = 0.5;
    double m_lo = 0.01;  ///< m clamp during search; boundary hits stay visible in the result
    double m_hi = 0.99;
};

/// Linear parameters recovered by profiling, plus the residual sum of squares.
struct ProfileFit {
    double A = 0.0;
    double B = 0.0;
    double C1 = 0.0;  // zero for the pure power law
    double C2 = 0.0;
    double sse = 0.0;
};

/// One multi-start candidate: where it started on the grid and where
/// local refinement took it. omega is NaN for the pure power law.
struct RefinedStart {
    double tc0 = 0.0, m0 = 0.0, omega0 = 0.0, sse0 = 0.0;
    double tc = 0.0, m = 0.0, omega = 0.0, sse = 0.0;
    bool converged = false;
};

struct FitResult {
    ModelKind model = ModelKind::fts;
    double A = 0.0, B = 0.0, tc = 0.0, m = 0.0;
    double C1 = 0.0, C2 = 0.0, omega = 0.0;  // LPPL only
    double sse = 0.0;
    std::size_t n_obs = 0;
    double null_sse = 0.0;
    double sse_ratio = 0.0;
    bool converged = false;
    std::size_t starts_explored = 0;

    // Window context used by the regime classifier (not serialized).
    double t_start = 0.0, t_end = 0.0;
    double tc_cap = 0.0;  ///< upper end of the tc search horizon
    std::vector<RefinedStart> refined;

    PowerLawFTSParams fts_params() const { return {A, B, tc, m}; }
    LPPLParams lppl_params() const { return {A, B, tc, m, C1, C2, omega}; }
};

struct ModelComparison {
    double sse_ratio = 0.0;
    double relative_improvement = 0.0;
    bool bubble_shape_ok = false;
};

namespace detail {

// ---------------------------------------------------------------------------
// Profiling engine: for fixed nonlinear parameters (tc, m[, omega]) the
// model is linear in (A, B[, C1, C2]), so the inner least-squares problem
// is solved exactly. log(tc - t) is cached per tc; the grid sweep reuses
// it across the m (and omega) loops.
// ---------------------------------------------------------------------------

class ProfileEngine {
public:
    explicit ProfileEngine(const LogPriceSeries& series)
        : t_(series.times), y_(series.logp), n_(series.times.size()) {
        log_tau_.resize(n_);
        w_.resize(n_);
        cosw_.resize(n_);
        sinw_.resize(n_);
        qr_.resize(n_ * 4);
        qy_.resize(n_);
    }

    std::size_t n() const { return n_; }
    double t_max() const { return t_.back(); }

    ProfileFit fts(double tc, double m) {
        require_valid(tc, m, 2);
        update_log_tau(tc);
        for (std::size_t i = 0; i < n_; ++i) w_[i] = std::exp(m * log_tau_[i]);

        // Centered two-parameter OLS: y ~ A + B*w.
        double w_mean = 0.0, y_mean = 0.0, w_abs_max = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            w_mean += w_[i];
            y_mean += y_[i];
            w_abs_max = std::max(w_abs_max, std::abs(w_[i]));
        }
        w_mean /= static_cast<double>(n_);
        y_mean /= static_cast<double>(n_);
        double s_ww = 0.0, s_wy = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            double dw = w_[i] - w_mean;
            s_ww += dw * dw;
            s_wy += dw * (y_[i] - y_mean);
        }
        double scale = 1e-13 * (1.0 + w_abs_max);
        if (s_ww <= static_cast<double>(n_) * scale * scale)
            raise(errc::degenerate_design, "power-law regressor is constant over the window");

        ProfileFit fit;
        fit.B = s_wy / s_ww;
        fit.A = y_mean - fit.B * w_mean;
        for (std::size_t i = 0; i < n_; ++i) {
            double r = y_[i] - (fit.A + fit.B * w_[i]);
            fit.sse += r * r;
        }
        return fit;
    }

    ProfileFit lppl(double tc, double m, double omega) {
        require_valid(tc, m, 4);
        update_log_tau(tc);
        for (std::size_t i = 0; i < n_; ++i) {
            w_[i] = std::exp(m * log_tau_[i]);
            double phase = omega * log_tau_[i];
            cosw_[i] = w_[i] * std::cos(phase);
            sinw_[i] = w_[i] * std::sin(phase);
        }

        // Householder QR on the n x 4 design [1, w, w*cos, w*sin].
        double* a = qr_.data();
        for (std::size_t i = 0; i < n_; ++i) {
            a[i] = 1.0;
            a[n_ + i] = w_[i];
            a[2 * n_ + i] = cosw_[i];
            a[3 * n_ + i] = sinw_[i];
        }
        std::copy(y_.begin(), y_.end(), qy_.begin());

        constexpr std::size_t k = 4;
        double col_norm0[k];
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n_; ++i) s += a[j * n_ + i] * a[j * n_ + i];
            col_norm0[j] = std::sqrt(s);
        }

        double beta[k];
        for (std::size_t j = 0; j < k; ++j) {
            double norm = 0.0;
            for (std::size_t i = j; i < n_; ++i) norm += a[j * n_ + i] * a[j * n_ + i];
            norm = std::sqrt(norm);
            if (norm <= 1e-10 * (col_norm0[j] + 1e-300))
                raise(errc::degenerate_design, "rank-deficient LPPL design");

            double* col = a + j * n_;
            double alpha = (col[j] >= 0.0) ? -norm : norm;
            double v0 = col[j] - alpha;
            double v_norm_sq = v0 * v0;
            for (std::size_t i = j + 1; i < n_; ++i) v_norm_sq += col[i] * col[i];
            if (v_norm_sq <= 0.0)
                raise(errc::degenerate_design, "rank-deficient LPPL design");
            col[j] = alpha;  // R diagonal

            for (std::size_t jj = j + 1; jj < k; ++jj) {
                double* c2 = a + jj * n_;
                double dot = v0 * c2[j];
                for (std::size_t i = j + 1; i < n_; ++i) dot += col[i] * c2[i];
                double f = 2.0 * dot / v_norm_sq;
                c2[j] -= f * v0;
                for (std::size_t i = j + 1; i < n_; ++i) c2[i] -= f * col[i];
            }
            {
                double dot = v0 * qy_[j];
                for (std::size_t i = j + 1; i < n_; ++i) dot += col[i] * qy_[i];
                double f = 2.0 * dot / v_norm_sq;
                qy_[j] -= f * v0;
                for (std::size_t i = j + 1; i < n_; ++i) qy_[i] -= f * col[i];
            }
            if (std::abs(col[j]) <= 1e-10 * (col_norm0[j] + 1e-300))
                raise(errc::degenerate_design, "rank-deficient LPPL design");
        }
        for (std::size_t jr = k; jr-- > 0;) {
            double s = qy_[jr];
            for (std::size_t jj = jr + 1; jj < k; ++jj) s -= a[jj * n_ + jr] * beta[jj];
            beta[jr] = s / a[jr * n_ + jr];
        }

        ProfileFit fit;
        fit.A = beta[0];
        fit.B = beta[1];
        fit.C1 = beta[2];
        fit.C2 = beta[3];
        for (std::size_t i = 0; i < n_; ++i) {
            double pred = fit.A + fit.B * w_[i] + fit.C1 * cosw_[i] + fit.C2 * sinw_[i];
            double r = y_[i] - pred;
            fit.sse += r * r;
        }
        return fit;
    }

private:
    void require_valid(double tc, double m, std::size_t k_lin) const {
        if (n_ < k_lin)
            raise(errc::too_short, "window shorter than the number of linear parameters");
        if (!(tc > t_.back()))
            raise(errc::invalid_argument, "tc must lie strictly after the last observation");
        if (m == 0.0)
            raise(errc::invalid_argument, "exponent m must be nonzero");
    }

    void update_log_tau(double tc) {
        if (tc == tc_cached_) return;
        for (std::size_t i = 0; i < n_; ++i) log_tau_[i] = std::log(tc - t_[i]);
        tc_cached_ = tc;
    }

    const std::vector<double>& t_;
    const std::vector<double>& y_;
    std::size_t n_;
    double tc_cached_ = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> log_tau_, w_, cosw_, sinw_, qr_, qy_;
};

// ---------------------------------------------------------------------------
// Derivative-free local refinement: Nelder-Mead simplex. Deterministic,
// never returns a point worse than the starting one (the start is a
// vertex and the incumbent best is never discarded).
// ---------------------------------------------------------------------------

struct SimplexResult {
    std::vector<double> x;
    double fx = std::numeric_limits<double>::infinity();
    bool converged = false;
};

template <class F>
SimplexResult nelder_mead(F&& f, const std::vector<double>& x0,
                          const std::vector<double>& steps, int max_iter, double tol) {
    const std::size_t d = x0.size();
    std::vector<std::vector<double>> xs(d + 1, x0);
    std::vector<double> fs(d + 1);
    for (std::size_t j = 0; j < d; ++j) xs[j + 1][j] += steps[j];
    for (std::size_t v = 0; v <= d; ++v) fs[v] = f(xs[v]);

    auto order = [&] {
        std::vector<std::size_t> idx(d + 1);
        for (std::size_t i = 0; i <= d; ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        std::vector<std::vector<double>> xs2(d + 1);
        std::vector<double> fs2(d + 1);
        for (std::size_t i = 0; i <= d; ++i) {
            xs2[i] = xs[idx[i]];
            fs2[i] = fs[idx[i]];
        }
        xs.swap(xs2);
        fs.swap(fs2);
    };

    bool converged = false;
    for (int iter = 0; iter < max_iter; ++iter) {
        order();
        if (std::isfinite(fs[d]) && fs[d] - fs[0] <= tol * (1.0 + std::abs(fs[0]))) {
            converged = true;
            break;
        }
        std::vector<double> centroid(d, 0.0);
        for (std::size_t v = 0; v < d; ++v)
            for (std::size_t j = 0; j < d; ++j) centroid[j] += xs[v][j];
        for (std::size_t j = 0; j < d; ++j) centroid[j] /= static_cast<double>(d);

        auto blend = [&](double coef) {
            std::vector<double> x(d);
            for (std::size_t j = 0; j < d; ++j)
                x[j] = centroid[j] + coef * (xs[d][j] - centroid[j]);
            return x;
        };

        std::vector<double> xr = blend(-1.0);
        double fr = f(xr);
        if (fr < fs[0]) {
            std::vector<double> xe = blend(-2.0);
            double fe = f(xe);
            if (fe < fr) {
                xs[d] = std::move(xe);
                fs[d] = fe;
            } else {
                xs[d] = std::move(xr);
                fs[d] = fr;
            }
        } else if (fr < fs[d - 1]) {
            xs[d] = std::move(xr);
            fs[d] = fr;
        } else {
            bool outside = fr < fs[d];
            std::vector<double> xc = blend(outside ? -0.5 : 0.5);
            double fc = f(xc);
            if (fc < (outside ? fr : fs[d])) {
                xs[d] = std::move(xc);
                fs[d] = fc;
            } else {
                for (std::size_t v = 1; v <= d; ++v) {
                    for (std::size_t j = 0; j < d; ++j)
                        xs[v][j] = xs[0][j] + 0.5 * (xs[v][j] - xs[0][j]);
                    fs[v] = f(xs[v]);
                }
            }
        }
    }
    order();
    return {xs[0], fs[0], converged};
}

}  // namespace detail

/**
 * Exact least-squares solution for the linear parameters at fixed
 * (tc, m) — or (tc, m, omega) when omega is given, which selects the
 * log-periodic design with four linear parameters.
 */
inline ProfileFit profile_linear(const LogPriceSeries& series, double tc, double m,
                                 std::optional<double> omega = {}) {
    detail::ProfileEngine engine(series);
    return omega ? engine.lppl(tc, m, *omega) : engine.fts(tc, m);
}

namespace detail {

struct GridPoint {
    double tc = 0.0, m = 0.0, omega = 0.0, sse = 0.0;
};

inline bool candidate_less(const GridPoint& a, const GridPoint& b) {
    // Deterministic winner regardless of evaluation order.
    if (a.sse != b.sse) return a.sse < b.sse;
    if (a.tc != b.tc) return a.tc < b.tc;
    if (a.m != b.m) return a.m < b.m;
    return a.omega < b.omega;
}

inline FitResult fit_model(const LogPriceSeries& series, const FitConfig& cfg, ModelKind kind) {
    const std::size_t n = series.size();
    const std::size_t k_lin = kind == ModelKind::fts ? 2 : 4;
    if (n < std::max(cfg.min_length, k_lin))
        raise(errc::too_short, "window shorter than the configured minimum of " +
                                   std::to_string(std::max(cfg.min_length, k_lin)));

    for (std::size_t i = 1; i < n; ++i)
        if (!(series.times[i] > series.times[i - 1]))
            raise(errc::non_monotonic_time, "window times must be strictly increasing");

    double y_min = series.logp[0], y_max = series.logp[0];
    for (double y : series.logp) {
        y_min = std::min(y_min, y);
        y_max = std::max(y_max, y);
    }
    if (y_min == y_max)
        raise(errc::degenerate_design, "log price is constant over the window");

    const double t_end = series.t_end();
    const double span = t_end - series.t_start();

    std::vector<double> tcs = cfg.tc_grid;
    if (tcs.empty()) {
        double horizon = cfg.tc_horizon_factor * span;
        for (int j = 1; j <= 20; ++j)
            tcs.push_back(t_end + horizon * static_cast<double>(j) / 20.0);
    }
    for (double tc : tcs)
        if (!(tc > t_end))
            raise(errc::invalid_argument, "tc grid values must exceed the last observation");
    std::vector<double> ms = cfg.m_grid;
    if (ms.empty())
        for (int j = 1; j <= 9; ++j) ms.push_back(0.1 * static_cast<double>(j));
    std::vector<double> omegas = cfg.omega_grid;
    if (kind == ModelKind::lppl && omegas.empty())
        for (int j = 0; j <= 14; ++j) omegas.push_back(3.0 + 1.5 * static_cast<double>(j));

    const double tc_cap = cfg.tc_grid.empty()
                              ? t_end + cfg.tc_horizon_factor * span
                              : *std::max_element(tcs.begin(), tcs.end());
    const double tc_gap = 1e-6 * std::max(1.0, span);
    const double omega_lo =
        kind == ModelKind::lppl
            ? std::max(0.1, 0.5 * *std::min_element(omegas.begin(), omegas.end()))
            : 0.0;
    const double omega_hi =
        kind == ModelKind::lppl ? 2.0 * *std::max_element(omegas.begin(), omegas.end()) : 0.0;

    ProfileEngine engine(series);

    std::vector<GridPoint> candidates;
    candidates.reserve(tcs.size() * ms.size() * std::max<std::size_t>(1, omegas.size()));
    for (double tc : tcs) {
        for (double m : ms) {
            if (kind == ModelKind::fts) {
                try {
                    candidates.push_back({tc, m, 0.0, engine.fts(tc, m).sse});
                } catch (const Error&) {
                }
            } else {
                for (double omega : omegas) {
                    try {
                        candidates.push_back({tc, m, omega, engine.lppl(tc, m, omega).sse});
                    } catch (const Error&) {
                    }
                }
            }
        }
    }
    if (candidates.empty()) raise(errc::no_fit, "all grid starts failed");

    std::sort(candidates.begin(), candidates.end(), candidate_less);
    const std::size_t n_starts =
        std::min<std::size_t>(std::max(cfg.refine_top_k, 1), candidates.size());

    auto clamp_point = [&](std::vector<double> x) {
        x[0] = std::clamp(x[0], t_end + tc_gap, tc_cap);
        x[1] = std::clamp(x[1], cfg.m_lo, cfg.m_hi);
        if (kind == ModelKind::lppl) x[2] = std::clamp(x[2], omega_lo, omega_hi);
        return x;
    };
    auto objective = [&](const std::vector<double>& raw) {
        std::vector<double> x = clamp_point(raw);
        try {
            return kind == ModelKind::fts ? engine.fts(x[0], x[1]).sse
                                          : engine.lppl(x[0], x[1], x[2]).sse;
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    const double tc_step = std::max(tc_gap, (tc_cap - t_end) / 40.0);
    std::vector<RefinedStart> refined;
    refined.reserve(n_starts);
    for (std::size_t s = 0; s < n_starts; ++s) {
        const GridPoint& g = candidates[s];
        std::vector<double> x0{g.tc, g.m};
        std::vector<double> steps{g.tc - t_end > 2.0 * tc_step ? -tc_step : tc_step,
                                  g.m > 0.5 ? -0.05 : 0.05};
        if (kind == ModelKind::lppl) {
            x0.push_back(g.omega);
            steps.push_back(g.omega > 0.5 * (omega_lo + omega_hi) ? -0.75 : 0.75);
        }
        auto nm = detail::nelder_mead(objective, x0, steps, cfg.refine_max_iter, cfg.refine_tol);
        std::vector<double> xb = clamp_point(nm.x);

        RefinedStart r;
        r.tc0 = g.tc;
        r.m0 = g.m;
        r.omega0 = kind == ModelKind::lppl ? g.omega : std::numeric_limits<double>::quiet_NaN();
        r.sse0 = g.sse;
        r.tc = xb[0];
        r.m = xb[1];
        r.omega = kind == ModelKind::lppl ? xb[2] : std::numeric_limits<double>::quiet_NaN();
        r.sse = nm.fx;
        r.converged = nm.converged;
        // The grid start is a simplex vertex, so refinement cannot lose to it;
        // keep the start if the clamped re-evaluation says otherwise.
        if (!(r.sse <= r.sse0)) {
            r.tc = g.tc;
            r.m = g.m;
            r.omega = r.omega0;
            r.sse = g.sse;
        }
        refined.push_back(r);
    }

    std::size_t best = 0;
    for (std::size_t s = 1; s < refined.size(); ++s) {
        const RefinedStart& a = refined[s];
        const RefinedStart& b = refined[best];
        GridPoint ga{a.tc, a.m, kind == ModelKind::lppl ? a.omega : 0.0, a.sse};
        GridPoint gb{b.tc, b.m, kind == ModelKind::lppl ? b.omega : 0.0, b.sse};
        if (candidate_less(ga, gb)) best = s;
    }
    const RefinedStart& win = refined[best];

    ProfileFit prof = kind == ModelKind::fts ? engine.fts(win.tc, win.m)
                                             : engine.lppl(win.tc, win.m, win.omega);
    ExpFit null_fit = fit_exponential(series);

    FitResult result;
    result.model = kind;
    result.A = prof.A;
    result.B = prof.B;
    result.tc = win.tc;
    result.m = win.m;
    if (kind == ModelKind::lppl) {
        result.C1 = prof.C1;
        result.C2 = prof.C2;
        result.omega = win.omega;
    }
    result.sse = prof.sse;
    result.n_obs = n;
    result.null_sse = null_fit.sse;
    result.sse_ratio = null_fit.sse > 0.0
                           ? prof.sse / null_fit.sse
                           : (prof.sse > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
    result.converged = win.converged;
    result.starts_explored = candidates.size();
    result.t_start = series.t_start();
    result.t_end = t_end;
    result.tc_cap = tc_cap;
    result.refined = std::move(refined);
    return result;
}

}  // namespace detail

/// Calibrate the power law with finite-time singularity on a log-price window.
inline FitResult fit_fts(const LogPriceSeries& series, const FitConfig& cfg = {}) {
    return detail::fit_model(series, cfg, ModelKind::fts);
}

/// Calibrate the log-periodic power law on a log-price window.
inline FitResult fit_lppl(const LogPriceSeries& series, const FitConfig& cfg = {}) {
    return detail::fit_model(series, cfg, ModelKind::lppl);
}

/**
 * Compare a fit against its exponential null. bubble_shape_ok captures
 * the regime constraints: B < 0, 0 < m < 1 and tc inside the configured
 * horizon (by default the fit's own search cap).
 */
inline ModelComparison compare_to_null(const FitResult& fit,
                                       std::optional<double> tc_horizon_max = {}) {
    ModelComparison cmp;
    cmp.sse_ratio = fit.sse_ratio;
    cmp.relative_improvement = 1.0 - fit.sse_ratio;
    double cap = tc_horizon_max.value_or(fit.tc_cap);
    cmp.bubble_shape_ok = fit.B < 0.0 && fit.m > 0.0 && fit.m < 1.0 && fit.tc > fit.t_end &&
                          fit.tc <= cap;
    return cmp;
}

inline nlohmann::ordered_json to_json(const FitResult& fit) {
    nlohmann::ordered_json j{{"model", model_name(fit.model)},
                             {"A", fit.A},
                             {"B", fit.B},
                             {"tc", fit.tc},
                             {"m", fit.m}};
    if (fit.model == ModelKind::lppl) {
        j["C1"] = fit.C1;
        j["C2"] = fit.C2;
        j["omega"] = fit.omega;
    }
    j["sse"] = fit.sse;
    j["null_sse"] = fit.null_sse;
    j["sse_ratio"] = fit.sse_ratio;
    j["converged"] = fit.converged;
    j["starts_explored"] = fit.starts_explored;
    return j;
}

}  // namespace bubblescope

#endif  // BUBBLESCOPE_CALIBRATE_HPP
