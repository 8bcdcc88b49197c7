#include <doctest.h>

#include <cmath>
#include <vector>

#include "lexdyn/dissemination.hpp"
#include "lexdyn/rng.hpp"

using namespace lexdyn;
using namespace lexdyn::dissemination;

namespace {

// Hand-built single-month tables for the social null-model examples.
counts::CountTables two_user_tables(std::uint64_t word_count, std::uint64_t distinct_users) {
    counts::CountTables t;
    t.months = 1;
    t.words = {"w"};
    t.freq = {word_count};
    t.month_totals = {20};  // two users, ten tokens each
    t.contexts = {1};
    t.month_distinct_trigrams = {1};
    t.user.distinct_units = {distinct_users};
    t.user.active_units = {2};
    t.user.token_histogram = {{{10, 2}}};
    t.subreddit = t.user;
    t.thread = t.user;
    return t;
}

}  // namespace

TEST_CASE("expected unit count evaluates the null model directly") {
    // One unit with 10 tokens, p = 0.1.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> one = {{10, 1}};
    CHECK(expected_unit_count(0.1, one) ==
          doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));

    // Two units of 10 tokens each.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> two = {{10, 2}};
    CHECK(expected_unit_count(0.1, two) ==
          doctest::Approx(2.0 * (1.0 - std::exp(-1.0))).epsilon(1e-12));

    // Saturation: large p*m for every unit drives the expectation to the
    // number of units.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> heavy = {{100000, 3}, {200000, 2}};
    CHECK(expected_unit_count(0.5, heavy) == doctest::Approx(5.0).epsilon(1e-9));

    CHECK_THROWS_AS(expected_unit_count(0.0, one), std::invalid_argument);
}

TEST_CASE("social dissemination worked examples match the closed forms") {
    const double expected = 2.0 * (1.0 - std::exp(-1.0));  // 1.2642411...

    // Word used twice by exactly one of two users: concentrated use.
    const auto concentrated = two_user_tables(2, 1);
    const auto d1 = social_dissemination_series(concentrated, concentrated.user, 0);
    REQUIRE(d1[0].has_value());
    CHECK(*d1[0] == doctest::Approx(std::log(1.0 / expected)).epsilon(1e-10));
    CHECK(*d1[0] < 0.0);

    // Word used once by each of two users: spread use.
    const auto spread = two_user_tables(2, 2);
    const auto d2 = social_dissemination_series(spread, spread.user, 0);
    REQUIRE(d2[0].has_value());
    CHECK(*d2[0] == doctest::Approx(std::log(2.0 / expected)).epsilon(1e-10));
    CHECK(*d2[0] > 0.0);
}

TEST_CASE("observed equal to expected gives dissemination zero") {
    // One unit, word count 1 of N=10: expected = 1 - e^{-0.1*10} = 1 - e^{-1},
    // which is not 1, so build the exact-match case differently: pick U so
    // that ln U = ln expected by construction is impossible with integers;
    // instead check the sign flip around the null expectation.
    auto t = two_user_tables(2, 1);
    const double expected = 2.0 * (1.0 - std::exp(-1.0));
    const auto d = social_dissemination_series(t, t.user, 0);
    CHECK(*d[0] == doctest::Approx(std::log(1.0) - std::log(expected)).epsilon(1e-12));
}

TEST_CASE("dissemination is monotone in the observed unit count") {
    double previous = -1e9;
    for (std::uint64_t users = 1; users <= 2; ++users) {
        const auto t = two_user_tables(2, users);
        const auto d = social_dissemination_series(t, t.user, 0);
        REQUIRE(d[0].has_value());
        CHECK(*d[0] > previous);
        previous = *d[0];
    }
}

TEST_CASE("zero-count months have undefined dissemination") {
    counts::CountTables t;
    t.months = 2;
    t.words = {"w"};
    t.freq = {1, 0};
    t.month_totals = {10, 10};
    t.contexts = {1, 0};
    t.month_distinct_trigrams = {1, 1};
    t.user.distinct_units = {1, 0};
    t.user.active_units = {1, 1};
    t.user.token_histogram = {{{10, 1}}, {{10, 1}}};
    t.subreddit = t.user;
    t.thread = t.user;
    const auto d = social_dissemination_series(t, t.user, 0);
    CHECK(d[0].has_value());
    CHECK(!d[1].has_value());
}

TEST_CASE("heaps fit recovers the 3-point normal-equations oracle") {
    // Points (log f, log C): (-3, 1), (-2, 2), (-1, 3).
    std::vector<std::pair<double, double>> points = {{-3, 1}, {-2, 2}, {-1, 3}};
    const auto fit = fit_heaps(points);
    CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));

    // Normal-equations oracle computed from scratch.
    const double n = 3, sx = -6, sy = 6, sxx = 14, sxy = -10;
    const double slope_oracle = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept_oracle = (sy - slope_oracle * sx) / n;
    CHECK(fit.slope == doctest::Approx(slope_oracle).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(intercept_oracle).epsilon(1e-12));

    // A fourth word at (-2, 2.5) sits half a log unit above the line.
    const double residual = 2.5 - (fit.intercept + fit.slope * -2.0);
    CHECK(residual == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("a perfect power-law corpus has all residuals at zero") {
    counts::CountTables t;
    t.months = 1;
    t.words = {"w1", "w2", "w3"};
    t.freq = {1000, 10000, 100000};
    t.month_totals = {1000000};
    // log10 C = 4 + log10 f exactly: f = 1e-3 -> C = 10, etc.
    t.contexts = {10, 100, 1000};
    t.month_distinct_trigrams = {100000};
    t.user.distinct_units = {1, 1, 1};
    t.user.active_units = {1};
    t.user.token_histogram = {{{1000000, 1}}};
    t.subreddit = t.user;
    t.thread = t.user;

    auto [fit, residuals] = linguistic_dissemination_month(t, 1);
    CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-9));
    double mean = 0.0;
    for (const auto& r : residuals) {
        REQUIRE(r.has_value());
        CHECK(std::fabs(*r) < 1e-9);
        mean += *r;
    }
    CHECK(std::fabs(mean / 3.0) < 1e-9);
}

TEST_CASE("per-month residual mean over the fitted vocabulary is zero") {
    Rng rng(555);
    counts::CountTables t;
    t.months = 1;
    const int n_words = 60;
    t.month_totals = {2000000};
    t.month_distinct_trigrams = {1000000};
    for (int i = 0; i < n_words; ++i) {
        t.words.push_back("w" + std::to_string(i));
        const auto count = 10 + rng.next_below(50000);
        t.freq.push_back(count);
        const auto ctx = 1 + rng.next_below(3 * count);
        t.contexts.push_back(std::min<std::uint64_t>(ctx, 3 * count));
        t.user.distinct_units.push_back(1);
    }
    t.user.active_units = {1};
    t.user.token_histogram = {{{2000000, 1}}};
    t.subreddit = t.user;
    t.thread = t.user;

    auto [fit, residuals] = linguistic_dissemination_month(t, 1);
    double mean = 0.0;
    int n = 0;
    for (const auto& r : residuals)
        if (r) {
            mean += *r;
            ++n;
        }
    CHECK(n == n_words);
    CHECK(std::fabs(mean / n) < 1e-9);
}

TEST_CASE("degenerate design: identical frequencies flag the fit") {
    counts::CountTables t;
    t.months = 1;
    t.words = {"a", "b", "c"};
    t.freq = {100, 100, 100};
    t.month_totals = {10000};
    t.contexts = {10, 20, 40};
    t.month_distinct_trigrams = {1000};
    t.user.distinct_units = {1, 1, 1};
    t.user.active_units = {1};
    t.user.token_histogram = {{{10000, 1}}};
    t.subreddit = t.user;
    t.thread = t.user;

    auto [fit, residuals] = linguistic_dissemination_month(t, 1);
    CHECK(fit.degenerate);
    CHECK(fit.slope == 0.0);
    double mean = 0.0;
    for (const auto& r : residuals) mean += r.value();
    CHECK(std::fabs(mean / 3.0) < 1e-9);  // residuals against the mean still center
}

TEST_CASE("below-threshold words still receive a residual") {
    counts::CountTables t;
    t.months = 1;
    t.words = {"w1", "w2", "w3", "rare"};
    t.freq = {1000, 10000, 100000, 2};
    t.month_totals = {1000000};
    t.contexts = {10, 100, 1000, 6};
    t.month_distinct_trigrams = {100000};
    t.user.distinct_units = {1, 1, 1, 1};
    t.user.active_units = {1};
    t.user.token_histogram = {{{1000000, 1}}};
    t.subreddit = t.user;
    t.thread = t.user;

    auto [fit, residuals] = linguistic_dissemination_month(t, 1, /*min_fit_count=*/10);
    // The rare word is out of the fit; the three fitted points still lie on
    // the exact line, and the rare word's residual comes from that line.
    CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-9));
    REQUIRE(residuals[3].has_value());
    const double x = std::log10(2.0 / 1000000.0);
    CHECK(*residuals[3] ==
          doctest::Approx(std::log10(6.0) - (fit.intercept + fit.slope * x)).epsilon(1e-9));
}

TEST_CASE("fewer than three fitted words is a precondition violation") {
    counts::CountTables t;
    t.months = 1;
    t.words = {"a", "b"};
    t.freq = {10, 20};
    t.month_totals = {100};
    t.contexts = {5, 8};
    t.month_distinct_trigrams = {50};
    t.user.distinct_units = {1, 1};
    t.user.active_units = {1};
    t.user.token_histogram = {{{100, 1}}};
    t.subreddit = t.user;
    t.thread = t.user;
    CHECK_THROWS_AS(linguistic_dissemination_month(t, 1), std::invalid_argument);
}

TEST_CASE("metric matrix csv round trip with NA holes") {
    std::vector<std::string> words = {"a", "b"};
    std::vector<std::optional<double>> values = {0.5, std::nullopt, -0.25, 1.75};
    const std::string path = "/tmp/lexdyn_test_metric.csv";
    write_metric_matrix(path, 2, words, values);
    const auto m = read_metric_matrix(path);
    CHECK(m.months == 2);
    CHECK(m.words == words);
    CHECK(m.at(0, 1) == values[0]);
    CHECK(!m.at(0, 2).has_value());
    CHECK(m.at(1, 1) == values[2]);
    CHECK(m.at(1, 2) == values[3]);
}
