#ifndef BUBBLESCOPE_DRAWDOWNS_HPP
#define BUBBLESCOPE_DRAWDOWNS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "timeseries.hpp"

namespace bubblescope {

/// One peak-to-trough loss run.
struct Drawdown {
    double peak_time = 0.0;
    double trough_time = 0.0;
    double peak_price = 0.0;
    double trough_price = 0.0;
    double magnitude = 0.0;  ///< (peak - trough) / peak, in (0, 1)
};

/// A drop of strictly more than `threshold` within `window_days` of a local maximum.
struct CrashEvent {
    double peak_time = 0.0;
    double trough_time = 0.0;
    double peak_price = 0.0;
    double trough_price = 0.0;
    double drop = 0.0;  ///< relative drop from the peak, strictly > threshold
    double duration_days = 0.0;
};

/// Stretched-exponential bulk model of drawdown magnitudes,
/// S(d) = exp(-(d/d0)^z).
struct StretchedExpFit {
    double d0 = 0.0;
    double z = 0.0;
    std::size_t n_bulk = 0;

    double survival(double d) const { return std::exp(-std::pow(d / d0, z)); }
};

/**
 * Decompose a series into drawdowns. With epsilon = 0 a drawdown is a
 * maximal run of strictly decreasing consecutive prices. With epsilon > 0,
 * interior rallies are absorbed while the rise above the running trough
 * stays within epsilon of the run's peak; the run ends at its running
 * trough once a rally exceeds that tolerance or regains the peak.
 * Output is ordered by peak time and intervals do not overlap.
 */
inline std::vector<Drawdown> extract_drawdowns(const PriceSeries& series, double epsilon = 0.0) {
    if (epsilon < 0.0) raise(errc::invalid_argument, "epsilon must be >= 0");
    const std::vector<double>& p = series.prices;
    const std::vector<double>& t = series.times;
    const std::size_t n = p.size();
    std::vector<Drawdown> out;

    auto emit = [&](std::size_t peak, std::size_t trough) {
        out.push_back({t[peak], t[trough], p[peak], p[trough], (p[peak] - p[trough]) / p[peak]});
    };

    if (epsilon == 0.0) {
        std::size_t i = 0;
        while (i + 1 < n) {
            if (!(p[i + 1] < p[i])) {
                ++i;
                continue;
            }
            std::size_t j = i + 1;
            while (j + 1 < n && p[j + 1] < p[j]) ++j;
            emit(i, j);
            i = j;
        }
        return out;
    }

    std::size_t i = 0;
    while (i + 1 < n) {
        if (!(p[i + 1] < p[i])) {
            ++i;
            continue;
        }
        const std::size_t peak = i;
        std::size_t trough = i + 1;
        std::size_t k = i + 1;
        while (k + 1 < n) {
            double q = p[k + 1];
            if (q < p[trough]) {
                trough = k + 1;
                ++k;
                continue;
            }
            if (q >= p[peak]) break;  // regained the peak
            if ((q - p[trough]) / p[peak] > epsilon) break;
            ++k;  // small interior rally, absorbed
        }
        emit(peak, trough);
        i = trough;
    }
    return out;
}

/**
 * Crash events per the local-maximum rule. For each local maximum the drop
 * is the largest relative decline reached within `window_days`; candidates
 * exceeding `threshold` (strictly) whose [peak, trough] spans overlap are
 * collapsed to the highest peak of the overlap.
 */
inline std::vector<CrashEvent> detect_crashes(const PriceSeries& series, double threshold = 0.15,
                                              double window_days = 15.0) {
    if (!(threshold > 0.0) || !(window_days > 0.0))
        raise(errc::invalid_argument, "threshold and window_days must be positive");
    const std::vector<double>& p = series.prices;
    const std::vector<double>& t = series.times;
    const std::size_t n = p.size();

    std::vector<CrashEvent> candidates;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        bool local_max = (i == 0 || p[i] >= p[i - 1]) && p[i] > p[i + 1];
        if (!local_max) continue;
        double worst = 0.0;
        std::size_t worst_idx = i;
        for (std::size_t j = i + 1; j < n && t[j] - t[i] <= window_days; ++j) {
            double drop = (p[i] - p[j]) / p[i];
            if (drop > worst) {
                worst = drop;
                worst_idx = j;
            }
        }
        if (worst > threshold)
            candidates.push_back(
                {t[i], t[worst_idx], p[i], p[worst_idx], worst, t[worst_idx] - t[i]});
    }

    // Collapse overlapping candidates: keep a maximum set of pairwise
    // non-overlapping spans, preferring higher peaks among equal-count
    // selections. Maximum cardinality is what keeps the event count
    // monotone in the threshold: removing candidates can only shrink a
    // maximum independent set, never grow it.
    const std::size_t nc = candidates.size();
    std::vector<std::size_t> order(nc);
    for (std::size_t i = 0; i < nc; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (candidates[a].trough_time != candidates[b].trough_time)
            return candidates[a].trough_time < candidates[b].trough_time;
        return candidates[a].peak_time < candidates[b].peak_time;
    });

    std::vector<std::size_t> count(nc);
    std::vector<double> peak_sum(nc);
    std::vector<std::ptrdiff_t> prev(nc, -1);
    for (std::size_t j = 0; j < nc; ++j) {
        const CrashEvent& cj = candidates[order[j]];
        count[j] = 1;
        peak_sum[j] = cj.peak_price;
        for (std::size_t i = 0; i < j; ++i) {
            const CrashEvent& ci = candidates[order[i]];
            if (!(ci.trough_time < cj.peak_time)) continue;  // spans overlap
            std::size_t cand_count = count[i] + 1;
            double cand_sum = peak_sum[i] + cj.peak_price;
            if (cand_count > count[j] || (cand_count == count[j] && cand_sum > peak_sum[j])) {
                count[j] = cand_count;
                peak_sum[j] = cand_sum;
                prev[j] = static_cast<std::ptrdiff_t>(i);
            }
        }
    }

    std::vector<CrashEvent> events;
    if (nc > 0) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < nc; ++j)
            if (count[j] > count[best] ||
                (count[j] == count[best] && peak_sum[j] > peak_sum[best]))
                best = j;
        std::vector<bool> chosen(nc, false);
        for (std::ptrdiff_t j = static_cast<std::ptrdiff_t>(best); j >= 0; j = prev[j])
            chosen[static_cast<std::size_t>(j)] = true;
        for (std::size_t j = 0; j < nc; ++j)
            if (chosen[j]) events.push_back(candidates[order[j]]);
    }
    return events;
}

/**
 * Maximum-likelihood stretched-exponential fit to the bulk of the
 * drawdown distribution: magnitudes at or below the `bulk_quantile`
 * empirical quantile. The tail above it is where kings live, and it is
 * deliberately excluded from the fit.
 */
inline StretchedExpFit fit_bulk(const std::vector<Drawdown>& drawdowns,
                                double bulk_quantile = 0.99) {
    if (!(bulk_quantile > 0.0) || bulk_quantile > 1.0)
        raise(errc::invalid_argument, "bulk_quantile must be in (0, 1]");
    std::vector<double> mags;
    mags.reserve(drawdowns.size());
    for (const Drawdown& d : drawdowns) mags.push_back(d.magnitude);
    std::sort(mags.begin(), mags.end());

    std::size_t n_total = mags.size();
    std::size_t n_bulk = n_total;
    if (n_total > 0 && bulk_quantile < 1.0) {
        // Nearest-rank quantile; everything at or below it is bulk.
        std::size_t rank = static_cast<std::size_t>(
            std::ceil(bulk_quantile * static_cast<double>(n_total)));
        rank = std::max<std::size_t>(1, std::min(rank, n_total));
        double cutoff = mags[rank - 1];
        n_bulk = static_cast<std::size_t>(
            std::upper_bound(mags.begin(), mags.end(), cutoff) - mags.begin());
    }
    if (n_bulk < 20)
        raise(errc::too_few_drawdowns, "need at least 20 bulk drawdowns, have " +
                                           std::to_string(n_bulk));
    if (mags[0] == mags[n_bulk - 1])
        raise(errc::degenerate_sample, "all bulk magnitudes are equal");

    // Weibull MLE in log space. The score in z is monotone, so bisection
    // on [z_lo, z_hi] is exact enough and fully deterministic.
    std::vector<double> logs(n_bulk);
    double log_mean = 0.0, log_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_bulk; ++i) {
        logs[i] = std::log(mags[i]);
        log_mean += logs[i];
        log_max = std::max(log_max, logs[i]);
    }
    log_mean /= static_cast<double>(n_bulk);

    auto score = [&](double z) {
        double s0 = 0.0, s1 = 0.0;
        for (std::size_t i = 0; i < n_bulk; ++i) {
            double u = std::exp(z * (logs[i] - log_max));
            s0 += u;
            s1 += u * logs[i];
        }
        return s1 / s0 - 1.0 / z - log_mean;
    };

    double z_lo = 1e-3, z_hi = 64.0;
    double f_lo = score(z_lo), f_hi = score(z_hi);
    if (!(f_lo < 0.0) || !(f_hi > 0.0))
        raise(errc::degenerate_sample, "stretched-exponential likelihood has no interior optimum");
    for (int iter = 0; iter < 200; ++iter) {
        double z_mid = 0.5 * (z_lo + z_hi);
        if (score(z_mid) < 0.0)
            z_lo = z_mid;
        else
            z_hi = z_mid;
    }
    double z = 0.5 * (z_lo + z_hi);

    double s0 = 0.0;
    for (std::size_t i = 0; i < n_bulk; ++i) s0 += std::exp(z * (logs[i] - log_max));
    double log_d0 = log_max + std::log(s0 / static_cast<double>(n_bulk)) / z;

    return {std::exp(log_d0), z, n_bulk};
}

/**
 * Flag drawdowns whose expected count of equal-or-larger events under the
 * bulk model, n_total * S(d), falls below `expected_count_max`. These are
 * the outlier "kings" that the bulk distribution cannot account for.
 */
inline std::vector<Drawdown> flag_kings(const std::vector<Drawdown>& drawdowns,
                                        const StretchedExpFit& fit,
                                        double expected_count_max = 0.1) {
    std::vector<Drawdown> kings;
    double n_total = static_cast<double>(drawdowns.size());
    for (const Drawdown& d : drawdowns)
        if (n_total * fit.survival(d.magnitude) < expected_count_max) kings.push_back(d);
    return kings;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline std::string to_csv(const std::vector<Drawdown>& drawdowns) {
    std::string out = "peak_time,trough_time,magnitude\n";
    for (const Drawdown& d : drawdowns) {
        out += detail::format_double(d.peak_time);
        out += ',';
        out += detail::format_double(d.trough_time);
        out += ',';
        out += detail::format_double(d.magnitude);
        out += '\n';
    }
    return out;
}

inline std::string to_csv(const std::vector<CrashEvent>& events) {
    std::string out = "peak_time,trough_time,magnitude\n";
    for (const CrashEvent& e : events) {
        out += detail::format_double(e.peak_time);
        out += ',';
        out += detail::format_double(e.trough_time);
        out += ',';
        out += detail::format_double(e.drop);
        out += '\n';
    }
    return out;
}

inline nlohmann::ordered_json to_json(const Drawdown& d) {
    return nlohmann::ordered_json{{"peak_time", d.peak_time},
                                  {"trough_time", d.trough_time},
                                  {"peak_price", d.peak_price},
                                  {"trough_price", d.trough_price},
                                  {"magnitude", d.magnitude}};
}

inline nlohmann::ordered_json to_json(const CrashEvent& e) {
    return nlohmann::ordered_json{{"peak_time", e.peak_time},
                                  {"trough_time", e.trough_time},
                                  {"peak_price", e.peak_price},
                                  {"trough_price", e.trough_price},
                                  {"drop", e.drop},
                                  {"duration_days", e.duration_days}};
}

inline nlohmann::ordered_json to_json(const StretchedExpFit& f) {
    return nlohmann::ordered_json{{"d0", f.d0}, {"z", f.z}, {"n_bulk", f.n_bulk}};
}

}  // namespace bubblescope

#endif  // BUBBLESCOPE_DRAWDOWNS_HPP
