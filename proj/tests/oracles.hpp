// Test-side oracles, independent of the library implementation paths they
// check: brute-force drawdown enumeration, RK4 integration of the feedback
// ODE, and inverse-CDF sampling of the stretched exponential.
#ifndef BUBBLESCOPE_TESTS_ORACLES_HPP
#define BUBBLESCOPE_TESTS_ORACLES_HPP

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

namespace oracles {

struct DeclineRun {
    std::size_t peak_index = 0;
    std::size_t trough_index = 0;
};

/// Every maximal strictly-decreasing run of length >= 2, found by checking
/// all index pairs directly. Quadratic on purpose: it shares no scanning
/// logic with the implementation under test.
inline std::vector<DeclineRun> brute_force_decline_runs(const std::vector<double>& p) {
    const std::size_t n = p.size();
    std::vector<DeclineRun> runs;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            bool decreasing = true;
            for (std::size_t k = i; k < j && decreasing; ++k) decreasing = p[k + 1] < p[k];
            if (!decreasing) break;
            bool maximal_left = (i == 0) || !(p[i] < p[i - 1]);
            bool maximal_right = (j + 1 == n) || !(p[j + 1] < p[j]);
            if (maximal_left && maximal_right) runs.push_back({i, j});
        }
    }
    return runs;
}

/// Classic fixed-step RK4 for dp/dt = c * p^2 from t=0 to t_target.
inline double integrate_feedback_ode(double p0, double c, double t_target, double step) {
    auto f = [c](double p) { return c * p * p; };
    double t = 0.0, p = p0;
    while (t < t_target) {
        double h = std::min(step, t_target - t);
        double k1 = f(p);
        double k2 = f(p + 0.5 * h * k1);
        double k3 = f(p + 0.5 * h * k2);
        double k4 = f(p + h * k3);
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    return p;
}

/// Inverse-CDF draws from S(d) = exp(-(d/d0)^z).
inline std::vector<double> sample_stretched_exponential(double d0, double z, std::size_t n,
                                                        std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;  // (0,1)
        out[i] = d0 * std::pow(-std::log(u), 1.0 / z);
    }
    return out;
}

}  // namespace oracles

#endif  // BUBBLESCOPE_TESTS_ORACLES_HPP
