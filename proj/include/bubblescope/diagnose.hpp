#ifndef BUBBLESCOPE_DIAGNOSE_HPP
#define BUBBLESCOPE_DIAGNOSE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "calibrate.hpp"
#include "drawdowns.hpp"
#include "errors.hpp"
#include "models.hpp"
#include "timeseries.hpp"

namespace bubblescope {

enum class ModelChoice { fts, lppl, both };

inline const char* model_choice_name(ModelChoice m) {
    switch (m) {
        case ModelChoice::fts: return "fts";
        case ModelChoice::lppl: return "lppl";
        case ModelChoice::both: return "both";
    }
    return "fts";
}

/**
 * End-to-end scan configuration. A window is flagged as a bubble only if
 * the fitted shape is super-exponential (B < 0, 0 < m < 1), the SSE
 * improvement over the exponential null reaches improvement_min, and the
 * estimated critical time lies within horizon_frac of the window span
 * past the window end. A flag is a probabilistic warning that the regime
 * is unsustainable, not a crash prediction.
 */
struct ScanConfig {
    std::size_t window_length = 250;  ///< observations per window, >= 30
    std::size_t step = 21;            ///< offset between windows, >= 1
    ModelChoice model = ModelChoice::fts;
    double improvement_min = 0.25;  ///< required relative SSE improvement over the null
    double horizon_frac = 0.25;     ///< tc must lie in (t_end, t_end + horizon_frac * span]
    double crash_threshold = 0.15;
    double crash_window_days = 15.0;
    double precedence_lookback = 63.0;  ///< days before a crash peak to look for a flag
    FitConfig fit;

    void validate() const {
        if (window_length < 30 || step < 1)
            raise(errc::invalid_argument, "window_length must be >= 30 and step >= 1");
        if (!(improvement_min >= 0.0) || !(horizon_frac > 0.0))
            raise(errc::invalid_argument, "invalid thresholds");
    }
};

struct WindowDiagnosis {
    double t_start = 0.0;
    double t_end = 0.0;
    std::optional<FitResult> fts;
    std::optional<FitResult> lppl;
    ExpFitParams null_params;
    double null_sse = 0.0;
    bool bubble_flag = false;
    ModelKind best_model = ModelKind::fts;
    double improvement = 0.0;   ///< 1 - sse_ratio of the best model
    double tc_estimate = 0.0;   ///< best model's critical time
    double tc_spread = 0.0;     ///< tc range across refined starts within 5% of best SSE
};

struct PrecedenceEntry {
    double crash_peak_time = 0.0;
    bool preceded = false;
    double flagged_window_end = std::numeric_limits<double>::quiet_NaN();
};

struct BubbleReport {
    std::string label;
    ScanConfig config;
    std::vector<WindowDiagnosis> windows;
    std::vector<CrashEvent> crashes;
    std::vector<PrecedenceEntry> precedence;
};

namespace detail {

inline double tc_spread_of(const FitResult& fit) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const RefinedStart& r : fit.refined) {
        if (r.sse <= 1.05 * fit.sse) {
            lo = std::min(lo, r.tc);
            hi = std::max(hi, r.tc);
        }
    }
    return hi >= lo ? hi - lo : 0.0;
}

}  // namespace detail

/// Fit the configured model(s) on one log-price window and classify it.
inline WindowDiagnosis classify_window(const LogPriceSeries& win, const ScanConfig& config) {
    config.validate();
    WindowDiagnosis diag;
    diag.t_start = win.t_start();
    diag.t_end = win.t_end();

    ExpFit null_fit = fit_exponential(win);
    diag.null_params = null_fit.params;
    diag.null_sse = null_fit.sse;

    const double span = win.t_end() - win.t_start();
    const double horizon = win.t_end() + config.horizon_frac * span;

    if (config.model == ModelChoice::fts || config.model == ModelChoice::both)
        diag.fts = fit_fts(win, config.fit);
    if (config.model == ModelChoice::lppl || config.model == ModelChoice::both)
        diag.lppl = fit_lppl(win, config.fit);

    bool have_best = false;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (const std::optional<FitResult>* fp : {&diag.fts, &diag.lppl}) {
        if (!fp->has_value()) continue;
        const FitResult& fit = fp->value();
        ModelComparison cmp = compare_to_null(fit, horizon);
        bool qualifies = cmp.bubble_shape_ok && cmp.relative_improvement >= config.improvement_min;
        // Prefer a qualifying model; otherwise keep the best-fitting one.
        bool better = !have_best || (qualifies && !diag.bubble_flag) ||
                      (qualifies == diag.bubble_flag && fit.sse_ratio < best_ratio);
        if (better) {
            have_best = true;
            best_ratio = fit.sse_ratio;
            diag.best_model = fit.model;
            diag.improvement = cmp.relative_improvement;
            diag.tc_estimate = fit.tc;
            diag.tc_spread = detail::tc_spread_of(fit);
            diag.bubble_flag = qualifies;
        }
    }
    return diag;
}

/**
 * Slide fixed-length windows over the series, classify each, detect
 * crashes on the full series and join the two: a crash is "preceded"
 * when some flagged window ends within the lookback before its peak.
 */
inline BubbleReport scan(const PriceSeries& series, const ScanConfig& config) {
    config.validate();
    const std::size_t n = series.size();
    if (n < config.window_length)
        raise(errc::too_short, "series shorter than one window");

    BubbleReport report;
    report.label = series.label;
    report.config = config;

    for (std::size_t offset = 0; offset + config.window_length <= n; offset += config.step) {
        LogPriceSeries win;
        win.times.assign(series.times.begin() + offset,
                         series.times.begin() + offset + config.window_length);
        win.logp.reserve(config.window_length);
        for (std::size_t i = offset; i < offset + config.window_length; ++i)
            win.logp.push_back(std::log(series.prices[i]));
        report.windows.push_back(classify_window(win, config));
    }

    report.crashes = detect_crashes(series, config.crash_threshold, config.crash_window_days);

    for (const CrashEvent& crash : report.crashes) {
        PrecedenceEntry entry;
        entry.crash_peak_time = crash.peak_time;
        for (const WindowDiagnosis& w : report.windows) {
            if (!w.bubble_flag) continue;
            if (w.t_end <= crash.peak_time &&
                crash.peak_time - w.t_end <= config.precedence_lookback) {
                entry.preceded = true;
                entry.flagged_window_end = w.t_end;  // latest qualifying window wins
            }
        }
        report.precedence.push_back(entry);
    }
    return report;
}

/// Fraction of crashes preceded by a flagged window within the lookback.
inline double precedence_rate(const BubbleReport& report) {
    if (report.precedence.empty()) raise(errc::no_crashes, "report contains no crash events");
    std::size_t hits = 0;
    for (const PrecedenceEntry& e : report.precedence) hits += e.preceded ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(report.precedence.size());
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const ScanConfig& c) {
    return nlohmann::ordered_json{{"window_length", c.window_length},
                                  {"step", c.step},
                                  {"model", model_choice_name(c.model)},
                                  {"improvement_min", c.improvement_min},
                                  {"horizon_frac", c.horizon_frac},
                                  {"crash_threshold", c.crash_threshold},
                                  {"crash_window_days", c.crash_window_days},
                                  {"precedence_lookback", c.precedence_lookback},
                                  {"seed", c.fit.seed}};
}

inline nlohmann::ordered_json to_json(const WindowDiagnosis& w) {
    nlohmann::ordered_json j{{"t_start", w.t_start},
                             {"t_end", w.t_end},
                             {"bubble_flag", w.bubble_flag},
                             {"best_model", model_name(w.best_model)},
                             {"improvement", w.improvement},
                             {"tc_estimate", w.tc_estimate},
                             {"tc_spread", w.tc_spread}};
    if (w.fts) j["fts"] = to_json(*w.fts);
    if (w.lppl) j["lppl"] = to_json(*w.lppl);
    return j;
}

inline nlohmann::ordered_json to_json(const BubbleReport& r) {
    nlohmann::ordered_json windows = nlohmann::ordered_json::array();
    for (const WindowDiagnosis& w : r.windows) windows.push_back(to_json(w));
    nlohmann::ordered_json crashes = nlohmann::ordered_json::array();
    for (const CrashEvent& c : r.crashes) crashes.push_back(to_json(c));
    nlohmann::ordered_json precedence = nlohmann::ordered_json::array();
    for (const PrecedenceEntry& e : r.precedence) {
        nlohmann::ordered_json je{{"crash_peak_time", e.crash_peak_time},
                                  {"preceded", e.preceded}};
        if (e.preceded) je["flagged_window_end"] = e.flagged_window_end;
        precedence.push_back(je);
    }
    return nlohmann::ordered_json{{"label", r.label},
                                  {"config", to_json(r.config)},
                                  {"windows", windows},
                                  {"crashes", crashes},
                                  {"precedence", precedence}};
}

/**
 * Tab-separated plot data for one flagged window: time, observed log
 * price, the exponential-null line and the fitted model curve. One file
 * per flagged window, the log-plot inset a reader would want to see.
 */
inline std::string plot_data_tsv(const WindowDiagnosis& w, const LogPriceSeries& win) {
    std::string out = "time\tlogp\tnull_line\tmodel_curve\n";
    const FitResult* fit = nullptr;
    if (w.best_model == ModelKind::fts && w.fts) fit = &*w.fts;
    if (w.best_model == ModelKind::lppl && w.lppl) fit = &*w.lppl;
    for (std::size_t i = 0; i < win.size(); ++i) {
        double t = win.times[i];
        double null_line = w.null_params.a + w.null_params.b * t;
        double curve = std::numeric_limits<double>::quiet_NaN();
        if (fit) {
            curve = fit->model == ModelKind::fts
                        ? eval_fts_log_price(fit->fts_params(), t)
                        : eval_lppl_log_price(fit->lppl_params(), t);
        }
        out += detail::format_double(t);
        out += '\t';
        out += detail::format_double(win.logp[i]);
        out += '\t';
        out += detail::format_double(null_line);
        out += '\t';
        out += detail::format_double(curve);
        out += '\n';
    }
    return out;
}

}  // namespace bubblescope

#endif  // BUBBLESCOPE_DIAGNOSE_HPP
