#ifndef BUBBLESCOPE_SYNTH_HPP
#define BUBBLESCOPE_SYNTH_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "models.hpp"
#include "timeseries.hpp"

namespace bubblescope {

/**
 * Deterministic random source. Built on the standardized mt19937_64
 * stream with explicit deviate transforms, so a given seed reproduces
 * the same draws bit-for-bit on every platform.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform on [-1, 1].
    double uniform_pm1() { return 2.0 * uniform01() - 1.0; }

    /// Standard normal via Box-Muller; pairs are cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform index in [0, n) via rejection sampling.
    std::size_t index(std::size_t n) {
        std::uint64_t bound = n;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return static_cast<std::size_t>(v % bound);
    }

    /// Fisher-Yates shuffle.
    template <class T>
    void shuffle(std::vector<T>& xs) {
        for (std::size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[index(i)]);
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Null model: geometric random walk
// ---------------------------------------------------------------------------

struct GBMParams {
    double p0 = 100.0;   ///< initial price, > 0
    double mu = 0.0;     ///< drift per day
    double sigma = 0.0;  ///< volatility per sqrt(day), >= 0
    std::size_t n = 2;   ///< number of observations, >= 2
};

inline PriceSeries gen_gbm(const GBMParams& params, std::uint64_t seed) {
    if (!(params.p0 > 0.0) || params.sigma < 0.0 || params.n < 2)
        raise(errc::invalid_argument, "invalid GBM parameters");
    Rng rng(seed);
    std::vector<double> t(params.n), p(params.n);
    double logp = std::log(params.p0);
    for (std::size_t i = 0; i < params.n; ++i) {
        t[i] = static_cast<double>(i);
        p[i] = std::exp(logp);
        logp += params.mu + (params.sigma > 0.0 ? params.sigma * rng.normal() : 0.0);
    }
    return PriceSeries(std::move(t), std::move(p), "gbm");
}

// ---------------------------------------------------------------------------
// Bubble generators: power-law / log-periodic log price plus noise
// ---------------------------------------------------------------------------

inline PriceSeries gen_fts(const PowerLawFTSParams& params, double noise_sigma,
                           std::uint64_t seed, const std::vector<double>& t_grid,
                           std::string label = "fts") {
    if (noise_sigma < 0.0) raise(errc::invalid_argument, "noise_sigma must be >= 0");
    Rng rng(seed);
    std::vector<double> p;
    p.reserve(t_grid.size());
    for (double t : t_grid) {
        double logp = eval_fts_log_price(params, t);  // throws beyond tc
        if (noise_sigma > 0.0) logp += noise_sigma * rng.normal();
        p.push_back(std::exp(logp));
    }
    return PriceSeries(std::vector<double>(t_grid), std::move(p), std::move(label));
}

inline PriceSeries gen_fts(const LPPLParams& params, double noise_sigma, std::uint64_t seed,
                           const std::vector<double>& t_grid, std::string label = "lppl") {
    if (noise_sigma < 0.0) raise(errc::invalid_argument, "noise_sigma must be >= 0");
    Rng rng(seed);
    std::vector<double> p;
    p.reserve(t_grid.size());
    for (double t : t_grid) {
        double logp = eval_lppl_log_price(params, t);
        if (noise_sigma > 0.0) logp += noise_sigma * rng.normal();
        p.push_back(std::exp(logp));
    }
    return PriceSeries(std::vector<double>(t_grid), std::move(p), std::move(label));
}

/// Multiplicative noise around the exact dp/dt = c p^2 solution.
inline PriceSeries gen_feedback(const FeedbackODEParams& params, double noise_sigma,
                                std::uint64_t seed, const std::vector<double>& t_grid) {
    if (!(params.p0 > 0.0) || !(params.c > 0.0))
        raise(errc::invalid_argument, "feedback parameters p0 and c must be positive");
    if (noise_sigma < 0.0) raise(errc::invalid_argument, "noise_sigma must be >= 0");
    Rng rng(seed);
    std::vector<double> p;
    p.reserve(t_grid.size());
    for (double t : t_grid) {
        double price = eval_feedback_price(params, t);
        if (noise_sigma > 0.0) price *= std::exp(noise_sigma * rng.normal());
        p.push_back(price);
    }
    return PriceSeries(std::vector<double>(t_grid), std::move(p), "feedback");
}

// ---------------------------------------------------------------------------
// Ising herding market: imitation (coupling K) versus idiosyncratic noise,
// mean-field coupling, asynchronous shuffled updates.
// ---------------------------------------------------------------------------

struct IsingMarketParams {
    std::size_t n_agents = 100;      ///< >= 2
    double K = 1.0;                  ///< imitation strength, >= 0
    double sigma_noise = 1.0;        ///< idiosyncratic noise scale, > 0
    double lambda_liquidity = 10.0;  ///< price-impact divisor, > 0
    std::size_t n_steps = 100;
    std::optional<std::pair<double, double>> K_schedule;  ///< linear ramp K_start -> K_end

    void validate() const {
        if (n_agents < 2 || K < 0.0 || !(sigma_noise > 0.0) || !(lambda_liquidity > 0.0) ||
            n_steps < 1)
            raise(errc::invalid_argument, "invalid Ising market parameters");
    }
};

struct IsingState {
    std::vector<int> spins;  ///< +1 / -1 per agent
    long long spin_sum = 0;  ///< kept exactly; magnetization = spin_sum / n
    double logp = 0.0;

    double magnetization() const {
        return static_cast<double>(spin_sum) / static_cast<double>(spins.size());
    }
};

inline IsingState make_ising_state(std::size_t n_agents, Rng& rng) {
    IsingState state;
    state.spins.resize(n_agents);
    for (std::size_t i = 0; i < n_agents; ++i) {
        state.spins[i] = rng.uniform01() < 0.5 ? -1 : 1;
        state.spin_sum += state.spins[i];
    }
    return state;
}

/**
 * One asynchronous sweep. Agents update in the given order; each sets its
 * spin to sign(K * current magnetization + sigma_noise * noise[agent]),
 * with an exact zero resolving to +1. The magnetization each agent sees
 * includes the flips made earlier in the same sweep.
 */
inline void ising_sweep(IsingState& state, const IsingMarketParams& params,
                        std::span<const std::size_t> order, std::span<const double> noise) {
    const double n = static_cast<double>(state.spins.size());
    if (order.size() != state.spins.size() || noise.size() != state.spins.size())
        raise(errc::invalid_argument, "order/noise must supply one entry per agent");
    for (std::size_t agent : order) {
        double field = params.K * (static_cast<double>(state.spin_sum) / n) +
                       params.sigma_noise * noise[agent];
        int s = field >= 0.0 ? 1 : -1;
        if (s != state.spins[agent]) {
            state.spin_sum += 2 * s;
            state.spins[agent] = s;
        }
    }
}

/// Convenience overload drawing the shuffled order and the per-agent
/// uniform [-1, 1] deviates from the given source.
inline void ising_sweep(IsingState& state, const IsingMarketParams& params, Rng& rng) {
    const std::size_t n = state.spins.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<double> noise(n);
    for (std::size_t i = 0; i < n; ++i) noise[i] = rng.uniform_pm1();
    ising_sweep(state, params, order, noise);
}

struct IsingMarketResult {
    PriceSeries series;
    std::vector<double> magnetization;  ///< one entry per time point, initial included
};

inline IsingMarketResult gen_ising_market(const IsingMarketParams& params, std::uint64_t seed) {
    params.validate();
    Rng rng(seed);
    IsingState state = make_ising_state(params.n_agents, rng);

    std::vector<double> t, p, mag;
    t.reserve(params.n_steps + 1);
    p.reserve(params.n_steps + 1);
    mag.reserve(params.n_steps + 1);
    t.push_back(0.0);
    p.push_back(std::exp(state.logp));
    mag.push_back(state.magnetization());

    std::vector<std::size_t> order(params.n_agents);
    std::vector<double> noise(params.n_agents);
    IsingMarketParams step_params = params;
    for (std::size_t step = 0; step < params.n_steps; ++step) {
        if (params.K_schedule) {
            auto [k0, k1] = *params.K_schedule;
            double frac = params.n_steps > 1
                              ? static_cast<double>(step) / static_cast<double>(params.n_steps - 1)
                              : 1.0;
            step_params.K = k0 + (k1 - k0) * frac;
        }
        for (std::size_t i = 0; i < params.n_agents; ++i) order[i] = i;
        rng.shuffle(order);
        for (std::size_t i = 0; i < params.n_agents; ++i) noise[i] = rng.uniform_pm1();
        ising_sweep(state, step_params, order, noise);

        state.logp += state.magnetization() / params.lambda_liquidity;
        t.push_back(static_cast<double>(step + 1));
        p.push_back(std::exp(state.logp));
        mag.push_back(state.magnetization());
    }

    return {PriceSeries(std::move(t), std::move(p), "ising"), std::move(mag)};
}

}  // namespace bubblescope

#endif  // BUBBLESCOPE_SYNTH_HPP
