#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <bubblescope/synth.hpp>
#include <bubblescope/timeseries.hpp>

using namespace bubblescope;

namespace {

bool same_series(const PriceSeries& a, const PriceSeries& b) {
    return a.label == b.label && a.times == b.times && a.prices == b.prices;
}

PriceSeries random_series(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::vector<double> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = static_cast<double>(i);
        p[i] = 50.0 * std::exp(0.4 * rng.uniform_pm1());
    }
    return PriceSeries(std::move(t), std::move(p), "rnd");
}

}  // namespace

TEST_CASE("parse_csv maps integer-index rows directly") {
    PriceSeries s = parse_csv("date,close\n0,100\n1,110");
    CHECK(s.times == std::vector<double>{0.0, 1.0});
    CHECK(s.prices == std::vector<double>{100.0, 110.0});
}

TEST_CASE("parse_csv rejects duplicate times") {
    try {
        parse_csv("date,close\n0,100\n0,101");
        FAIL("expected NonMonotonicTime");
    } catch (const Error& e) {
        CHECK(e.code() == errc::non_monotonic_time);
    }
}

TEST_CASE("parse_csv rejects non-positive prices") {
    try {
        parse_csv("date,close\n0,100\n1,-5");
        FAIL("expected MalformedPrice");
    } catch (const Error& e) {
        CHECK(e.code() == errc::malformed_price);
    }
    try {
        parse_csv("date,close\n0,100\n1,0");
        FAIL("expected MalformedPrice");
    } catch (const Error& e) {
        CHECK(e.code() == errc::malformed_price);
    }
}

TEST_CASE("parse_csv needs at least two rows") {
    try {
        parse_csv("date,close\n0,100");
        FAIL("expected TooShort");
    } catch (const Error& e) {
        CHECK(e.code() == errc::too_short);
    }
}

TEST_CASE("parse_csv maps ISO dates to row-order day indices") {
    PriceSeries s = parse_csv("date,close\n2000-01-03,10\n2000-01-04,11\n2000-01-07,12");
    CHECK(s.times == std::vector<double>{0.0, 1.0, 2.0});  // gaps just advance the index

    try {
        parse_csv("date,close\n2000-01-04,10\n2000-01-04,11");
        FAIL("expected NonMonotonicTime");
    } catch (const Error& e) {
        CHECK(e.code() == errc::non_monotonic_time);
    }
}

TEST_CASE("parse_csv rejects a bad header and mixed date formats") {
    try {
        parse_csv("time,price\n0,1\n1,2");
        FAIL("expected MalformedInput");
    } catch (const Error& e) {
        CHECK(e.code() == errc::malformed_input);
    }
    try {
        parse_csv("date,close\n0,1\n2000-01-01,2");
        FAIL("expected MalformedInput");
    } catch (const Error& e) {
        CHECK(e.code() == errc::malformed_input);
    }
}

TEST_CASE("parse_csv tolerates CRLF line endings") {
    PriceSeries s = parse_csv("date,close\r\n0,100\r\n1,110\r\n");
    CHECK(s.times == std::vector<double>{0.0, 1.0});
    CHECK(s.prices == std::vector<double>{100.0, 110.0});
}

TEST_CASE("series invariants are enforced at construction") {
    CHECK_THROWS_AS(PriceSeries({0.0, 1.0}, {1.0, -1.0}), Error);
    CHECK_THROWS_AS(PriceSeries({1.0, 0.0}, {1.0, 1.0}), Error);
    CHECK_THROWS_AS(PriceSeries({0.0}, {1.0}), Error);
}

TEST_CASE("log_prices on powers of e") {
    double e = std::exp(1.0);
    PriceSeries s({0.0, 1.0, 2.0}, {1.0, e, e * e});
    LogPriceSeries ls = log_prices(s);
    CHECK(ls.logp[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(ls.logp[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ls.logp[2] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(ls.times == s.times);
}

TEST_CASE("log_prices on a constant and a geometric series") {
    PriceSeries c({0.0, 1.0}, {100.0, 100.0});
    LogPriceSeries lc = log_prices(c);
    CHECK(lc.logp[0] == doctest::Approx(std::log(100.0)));
    CHECK(lc.logp[1] == lc.logp[0]);

    PriceSeries g({0.0, 1.0, 2.0}, {2.0, 4.0, 8.0});
    LogPriceSeries lg = log_prices(g);
    double ln2 = std::log(2.0);
    CHECK(lg.logp[0] == doctest::Approx(ln2).epsilon(1e-15));
    CHECK(lg.logp[1] == doctest::Approx(2 * ln2).epsilon(1e-15));
    CHECK(lg.logp[2] == doctest::Approx(3 * ln2).epsilon(1e-15));
}

TEST_CASE("log then exp recovers prices to 1e-12 relative") {
    PriceSeries s = random_series(11, 300);
    LogPriceSeries ls = log_prices(s);
    for (std::size_t i = 0; i < s.size(); ++i)
        CHECK(std::exp(ls.logp[i]) == doctest::Approx(s.prices[i]).epsilon(1e-12));
}

TEST_CASE("window slices inclusively") {
    std::vector<double> t, p;
    for (int i = 0; i < 10; ++i) {
        t.push_back(i);
        p.push_back(100.0 + i);
    }
    PriceSeries s(t, p, "x");

    PriceSeries w = window(s, 2.0, 5.0);
    CHECK(w.times == std::vector<double>{2.0, 3.0, 4.0, 5.0});
    CHECK(w.label == "x");

    PriceSeries full = window(s, 0.0, 9.0);
    CHECK(same_series(full, s));

    try {
        window(s, 100.0, 200.0);
        FAIL("expected TooShort");
    } catch (const Error& e) {
        CHECK(e.code() == errc::too_short);
    }
    CHECK_THROWS_AS(window(s, 5.0, 2.0), Error);
}

TEST_CASE("window is idempotent") {
    PriceSeries s = random_series(7, 50);
    PriceSeries once = window(s, 10.0, 30.0);
    PriceSeries twice = window(once, 10.0, 30.0);
    CHECK(same_series(once, twice));
}

TEST_CASE("CSV round-trip is exact") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        PriceSeries s = random_series(seed, 40);
        PriceSeries back = parse_csv(to_csv(s), "rnd");
        CHECK(same_series(s, back));
    }
    // and a literal fixture
    std::string text = "date,close\n0,100\n1,110\n";
    CHECK(to_csv(parse_csv(text)) == text);
}

TEST_CASE("JSON round-trip is exact") {
    PriceSeries s = random_series(5, 25);
    nlohmann::json j = nlohmann::json::parse(to_json(s).dump());
    PriceSeries back = series_from_json(j);
    CHECK(same_series(s, back));
}
