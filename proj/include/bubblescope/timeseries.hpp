#ifndef BUBBLESCOPE_TIMESERIES_HPP
#define BUBBLESCOPE_TIMESERIES_HPP

#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace bubblescope {

/**
 * Ordered (time, price) observations. Times are trading-day indices
 * (unit = 1 day); calendar gaps simply advance the index. Immutable
 * after construction; all invariants checked up front.
 */
struct PriceSeries {
    std::vector<double> times;
    std::vector<double> prices;
    std::string label;

    PriceSeries() = default;

    PriceSeries(std::vector<double> t, std::vector<double> p, std::string lbl = "")
        : times(std::move(t)), prices(std::move(p)), label(std::move(lbl)) {
        validate();
    }

    std::size_t size() const { return times.size(); }
    double t_start() const { return times.front(); }
    double t_end() const { return times.back(); }

    void validate() const {
        if (times.size() != prices.size())
            raise(errc::malformed_input, "times/prices length mismatch");
        if (times.size() < 2)
            raise(errc::too_short, "price series needs at least 2 observations");
        for (std::size_t i = 0; i < prices.size(); ++i) {
            if (!(prices[i] > 0.0) || !std::isfinite(prices[i]))
                raise(errc::malformed_price,
                      "price must be positive and finite at row " + std::to_string(i));
            if (!std::isfinite(times[i]))
                raise(errc::malformed_input, "non-finite time at row " + std::to_string(i));
            if (i > 0 && !(times[i] > times[i - 1]))
                raise(errc::non_monotonic_time,
                      "times must be strictly increasing at row " + std::to_string(i));
        }
    }
};

/// Natural log of the prices; times carried over unchanged.
struct LogPriceSeries {
    std::vector<double> times;
    std::vector<double> logp;

    std::size_t size() const { return times.size(); }
    double t_start() const { return times.front(); }
    double t_end() const { return times.back(); }
};

inline LogPriceSeries log_prices(const PriceSeries& series) {
    LogPriceSeries out;
    out.times = series.times;
    out.logp.reserve(series.prices.size());
    for (double p : series.prices) out.logp.push_back(std::log(p));
    return out;
}

/// Inclusive time slice [t_start, t_end]; order preserved.
inline PriceSeries window(const PriceSeries& series, double t_start, double t_end) {
    if (!(t_start < t_end))
        raise(errc::invalid_argument, "window requires t_start < t_end");
    std::vector<double> t, p;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series.times[i] >= t_start && series.times[i] <= t_end) {
            t.push_back(series.times[i]);
            p.push_back(series.prices[i]);
        }
    }
    if (t.size() < 2)
        raise(errc::too_short, "window contains fewer than 2 observations");
    return PriceSeries(std::move(t), std::move(p), series.label);
}

// ---------------------------------------------------------------------------
// CSV parsing: header `date,close`; date is an ISO-8601 calendar date or a
// non-negative numeric index; close is a positive decimal.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view trim_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

inline bool parse_double(std::string_view text, double& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

// YYYY-MM-DD with a light month/day range check.
inline bool is_iso_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (s[i] < '0' || s[i] > '9') return false;
    int month = (s[5] - '0') * 10 + (s[6] - '0');
    int day = (s[8] - '0') * 10 + (s[9] - '0');
    return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

/// Shortest round-trip decimal form, deterministic across runs.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

inline PriceSeries parse_csv(std::string_view text, std::string label = "") {
    std::size_t pos = 0;
    auto next_line = [&](std::string_view& line) {
        if (pos >= text.size()) return false;
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            line = detail::trim_cr(text.substr(pos));
            pos = text.size();
        } else {
            line = detail::trim_cr(text.substr(pos, nl - pos));
            pos = nl + 1;
        }
        return true;
    };

    std::string_view line;
    if (!next_line(line) || line != "date,close")
        raise(errc::malformed_input, "expected header 'date,close'");

    std::vector<double> times, prices;
    std::string prev_iso;
    int mode = 0;  // 0 = undecided, 1 = iso, 2 = numeric index
    std::size_t row = 0;
    while (next_line(line)) {
        if (line.empty()) continue;  // tolerate a trailing blank line
        std::size_t comma = line.find(',');
        if (comma == std::string_view::npos)
            raise(errc::malformed_input, "row " + std::to_string(row) + ": missing comma");
        std::string_view date = line.substr(0, comma);
        std::string_view close = line.substr(comma + 1);

        double price = 0.0;
        if (!detail::parse_double(close, price))
            raise(errc::malformed_price, "row " + std::to_string(row) + ": unparsable close");
        if (!(price > 0.0))
            raise(errc::malformed_price, "row " + std::to_string(row) + ": close must be > 0");

        if (detail::is_iso_date(date)) {
            if (mode == 2)
                raise(errc::malformed_input, "row " + std::to_string(row) + ": mixed date formats");
            mode = 1;
            // ISO-8601 sorts lexicographically; duplicates and reversals are rejected.
            if (!prev_iso.empty() && !(std::string(date) > prev_iso))
                raise(errc::non_monotonic_time,
                      "row " + std::to_string(row) + ": dates must be strictly increasing");
            prev_iso = std::string(date);
            times.push_back(static_cast<double>(row));
        } else {
            double t = 0.0;
            if (!detail::parse_double(date, t) || t < 0.0)
                raise(errc::malformed_input, "row " + std::to_string(row) + ": unparsable date");
            if (mode == 1)
                raise(errc::malformed_input, "row " + std::to_string(row) + ": mixed date formats");
            mode = 2;
            if (!times.empty() && !(t > times.back()))
                raise(errc::non_monotonic_time,
                      "row " + std::to_string(row) + ": indices must be strictly increasing");
            times.push_back(t);
        }
        prices.push_back(price);
        ++row;
    }

    if (times.size() < 2)
        raise(errc::too_short, "need at least 2 data rows");
    return PriceSeries(std::move(times), std::move(prices), std::move(label));
}

inline std::string to_csv(const PriceSeries& series) {
    std::string out = "date,close\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        out += detail::format_double(series.times[i]);
        out += ',';
        out += detail::format_double(series.prices[i]);
        out += '\n';
    }
    return out;
}

// Canonical JSON form: {label, times:[...], prices:[...]}.
inline nlohmann::ordered_json to_json(const PriceSeries& series) {
    return nlohmann::ordered_json{
        {"label", series.label}, {"times", series.times}, {"prices", series.prices}};
}

inline PriceSeries series_from_json(const nlohmann::json& j) {
    return PriceSeries(j.at("times").get<std::vector<double>>(),
                       j.at("prices").get<std::vector<double>>(),
                       j.value("label", std::string{}));
}

}  // namespace bubblescope

#endif  // BUBBLESCOPE_TIMESERIES_HPP
