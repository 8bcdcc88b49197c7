#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "lexdyn/survival.hpp"
#include "lexdyn/rng.hpp"

using namespace lexdyn;
using namespace lexdyn::survival;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

analyses::SeriesBundle bundle_with(const std::vector<std::string>& words, int months,
                                   const std::vector<std::array<double, 5>>& values) {
    analyses::SeriesBundle b;
    b.months = months;
    b.words = words;
    for (std::size_t w = 0; w < words.size(); ++w) b.row_of.emplace(words[w], w);
    const std::size_t cells = words.size() * static_cast<std::size_t>(months);
    b.f.assign(cells, std::nullopt);
    b.dl.assign(cells, std::nullopt);
    b.du.assign(cells, std::nullopt);
    b.ds.assign(cells, std::nullopt);
    b.dt.assign(cells, std::nullopt);
    for (std::size_t w = 0; w < words.size(); ++w)
        for (int t = 1; t <= std::min(months, 3); ++t) {
            b.f[b.cell(w, t)] = values[w][0];
            b.dl[b.cell(w, t)] = values[w][1];
            b.du[b.cell(w, t)] = values[w][2];
            b.ds[b.cell(w, t)] = values[w][3];
            b.dt[b.cell(w, t)] = values[w][4];
        }
    return b;
}

}  // namespace

TEST_CASE("records: decline words die at their split, growth words censor at T") {
    std::vector<std::string> words = {"dies", "grows"};
    std::vector<std::array<double, 5>> values = {{-4, 0.1, 0, 0, 0}, {-3, 0.4, 0, 0, 0}};
    const auto bundle = bundle_with(words, 36, values);

    std::vector<wordsets::WordLabel> labels(2);
    labels[0].word = "dies";
    labels[0].label = wordsets::Label::decline;
    labels[0].split = 14;
    labels[1].word = "grows";
    labels[1].label = wordsets::Label::growth;

    const auto data = assemble_survival_records(bundle, labels, 3);
    REQUIRE(data.words.size() == 2);
    CHECK(data.durations[0] == 14);
    CHECK(data.events[0] == 1);
    CHECK(data.durations[1] == 36);
    CHECK(data.events[1] == 0);

    // Standardized covariates have mean zero.
    for (int j = 0; j < data.covariates.cols(); ++j)
        CHECK(std::fabs(data.covariates.col(j).mean()) < 1e-12);
}

TEST_CASE("records at a production-scale label shape: 1120 + 530 gives 1650") {
    const int n_growth = 1120, n_decline = 530;
    std::vector<std::string> words;
    std::vector<std::array<double, 5>> values;
    std::vector<wordsets::WordLabel> labels;
    Rng rng(1);
    for (int i = 0; i < n_growth + n_decline; ++i) {
        words.push_back("w" + std::to_string(i));
        values.push_back({rng.next_normal(), rng.next_normal(), rng.next_normal(),
                          rng.next_normal(), rng.next_normal()});
        wordsets::WordLabel l;
        l.word = words.back();
        if (i < n_growth) {
            l.label = wordsets::Label::growth;
        } else {
            l.label = wordsets::Label::decline;
            l.split = 1 + static_cast<int>(rng.next_below(36));
        }
        labels.push_back(std::move(l));
    }
    const auto bundle = bundle_with(words, 36, values);
    const auto data = assemble_survival_records(bundle, labels, 3);
    CHECK(data.words.size() == 1650);
    CHECK(data.dropped == 0);
}

TEST_CASE("cox: a constant covariate gets coefficient zero") {
    MatrixXd X = MatrixXd::Constant(6, 1, 3.5);
    std::vector<int> durations = {1, 2, 3, 4, 5, 6};
    std::vector<int> events = {1, 1, 1, 1, 0, 0};
    const auto model = cox_fit(X, durations, events);
    CHECK(model.beta[0] == 0.0);
    CHECK(model.converged);
}

TEST_CASE("cox matches the hand-enumerated 3-record partial likelihood") {
    // x = (0, 1, 0), death times (1, 2, 3), no censoring. Risk sets by hand:
    //   t=1: {1,2,3} -> ln(e^b + 2); t=2: {2,3} -> ln(e^b + 1); t=3: {3}.
    // L(b) = b - ln(e^b + 2) - ln(e^b + 1), maximized at e^b = sqrt(2).
    MatrixXd X(3, 1);
    X << 0, 1, 0;
    std::vector<int> durations = {1, 2, 3};
    std::vector<int> events = {1, 1, 1};
    const auto model = cox_fit(X, durations, events);

    auto score = [](double b) {
        const double e = std::exp(b);
        return 1.0 - e / (e + 2.0) - e / (e + 1.0);
    };
    double lo = -5.0, hi = 5.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (score(mid) > 0.0 ? lo : hi) = mid;
    }
    const double oracle = 0.5 * (lo + hi);
    CHECK(std::fabs(oracle - std::log(std::sqrt(2.0))) < 1e-9);  // closed form check
    CHECK(std::fabs(model.beta[0] - oracle) < 1e-6);

    const double ll_expected = oracle - std::log(std::exp(oracle) + 2.0) -
                               std::log(std::exp(oracle) + 1.0);
    CHECK(model.log_likelihood == doctest::Approx(ll_expected).epsilon(1e-10));
    CHECK(!model.ridged);
}

TEST_CASE("cox: a covariate that perfectly orders deaths is a flagged separation") {
    // The record with x=1 dies first: the partial likelihood is monotone in
    // beta and has no finite maximizer; the ridge fallback engages.
    MatrixXd X(3, 1);
    X << 1, 0, 0;
    std::vector<int> durations = {1, 2, 3};
    std::vector<int> events = {1, 1, 1};
    const auto model = cox_fit(X, durations, events);
    CHECK(model.ridged);
    CHECK(std::isfinite(model.beta[0]));
    CHECK(model.beta[0] > 1.0);
}

TEST_CASE("cox recovers the generative coefficient on simulated hazards") {
    std::vector<double> errors;
    for (int rep = 0; rep < 5; ++rep) {
        Rng rng(100 + rep);
        const int n = 1000;
        MatrixXd X(n, 1);
        std::vector<int> durations(n), events(n);
        for (int i = 0; i < n; ++i) {
            X(i, 0) = rng.next_normal();
            // Exponential survival with hazard exp(-x); discretized months.
            const double u = std::max(rng.next_double(), 1e-12);
            const double t = -std::log(u) / std::exp(-X(i, 0));
            durations[i] = 1 + static_cast<int>(std::min(t * 10.0, 400.0));
            events[i] = t * 10.0 < 400.0 ? 1 : 0;
        }
        const auto model = cox_fit(X, durations, events);
        errors.push_back(std::fabs(model.beta[0] - (-1.0)));
    }
    std::sort(errors.begin(), errors.end());
    CHECK(errors[2] < 0.15);  // median over the replications
}

TEST_CASE("partial likelihood is a rank statistic: squaring durations changes nothing") {
    Rng rng(12);
    const int n = 80;
    MatrixXd X(n, 2);
    std::vector<int> durations(n), squared(n), events(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = rng.next_normal();
        X(i, 1) = rng.next_normal();
        durations[i] = 1 + static_cast<int>(rng.next_below(24));
        squared[i] = durations[i] * durations[i];
        events[i] = rng.next_below(4) != 0 ? 1 : 0;
    }
    events[0] = 1;
    const auto a = cox_fit(X, durations, events);
    const auto b = cox_fit(X, squared, events);
    CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::fabs(a.log_likelihood - b.log_likelihood) < 1e-8);
}

TEST_CASE("cox gradient vanishes at the fitted coefficients") {
    Rng rng(13);
    const int n = 60;
    MatrixXd X(n, 3);
    std::vector<int> durations(n), events(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 3; ++j) X(i, j) = rng.next_normal();
        durations[i] = 1 + static_cast<int>(rng.next_below(30));
        events[i] = rng.next_below(3) != 0 ? 1 : 0;
    }
    events[0] = 1;
    const auto model = cox_fit(X, durations, events);
    CHECK(model.converged);

    // Central finite differences on the exposed partial log-likelihood.
    for (int j = 0; j < 3; ++j) {
        VectorXd up = model.beta, down = model.beta;
        up[j] += 1e-6;
        down[j] -= 1e-6;
        const double g = (cox_partial_log_likelihood(X, durations, events, up) -
                          cox_partial_log_likelihood(X, durations, events, down)) /
                         2e-6;
        CHECK(std::fabs(g) < 1e-6);
    }
}

TEST_CASE("concordance is 1.0 when risk exactly reverses duration order") {
    std::vector<double> risk = {4, 3, 2, 1};
    std::vector<int> durations = {1, 2, 3, 4};
    std::vector<int> events = {1, 1, 1, 1};
    CHECK(*concordance_index(risk, durations, events) == 1.0);
}

TEST_CASE("concordance of random scores hovers at chance") {
    Rng rng(14);
    double total = 0.0;
    const int reps = 50;
    for (int rep = 0; rep < reps; ++rep) {
        const int n = 100;
        std::vector<double> risk(n);
        std::vector<int> durations(n), events(n, 1);
        for (int i = 0; i < n; ++i) {
            risk[i] = rng.next_normal();
            durations[i] = 1 + static_cast<int>(rng.next_below(50));
        }
        const auto c = concordance_index(risk, durations, events);
        REQUIRE(c.has_value());
        CHECK(*c > 0.3);
        CHECK(*c < 0.7);
        total += *c;
    }
    CHECK(total / reps > 0.45);
    CHECK(total / reps < 0.55);
}

TEST_CASE("concordance matches brute-force pair enumeration on 4 records") {
    const std::vector<double> risk = {0.5, 0.1, 0.9, 0.5};
    const std::vector<int> durations = {2, 5, 3, 5};
    const std::vector<int> events = {1, 0, 1, 1};

    double concordant = 0.0;
    int comparable = 0;
    for (int i = 0; i < 4; ++i) {
        if (!events[i]) continue;
        for (int j = 0; j < 4; ++j) {
            if (j == i || durations[j] <= durations[i]) continue;
            ++comparable;
            if (risk[i] > risk[j]) concordant += 1.0;
            if (risk[i] == risk[j]) concordant += 0.5;
        }
    }
    REQUIRE(comparable > 0);
    CHECK(*concordance_index(risk, durations, events) ==
          doctest::Approx(concordant / comparable));

    // No comparable pairs: all censored.
    std::vector<int> censored(4, 0);
    CHECK(!concordance_index(risk, durations, censored).has_value());
}

TEST_CASE("deviance: identical models give statistic zero and p one") {
    Rng rng(15);
    MatrixXd X(30, 1);
    std::vector<int> durations(30), events(30, 1);
    for (int i = 0; i < 30; ++i) {
        X(i, 0) = rng.next_normal();
        durations[i] = i + 1;
    }
    const auto m = cox_fit(X, durations, events);
    const auto d = deviance_test(m, m, 1);
    CHECK(d.chi2 == doctest::Approx(0.0));
    CHECK(d.p == doctest::Approx(1.0));
}

TEST_CASE("deviance p-values are calibrated under a pure-noise covariate") {
    std::vector<double> pvalues;
    for (int rep = 0; rep < 200; ++rep) {
        Rng rng(3000 + rep);
        const int n = 120;
        MatrixXd X1(n, 1), X2(n, 2);
        std::vector<int> durations(n), events(n);
        for (int i = 0; i < n; ++i) {
            const double x = rng.next_normal();
            X1(i, 0) = x;
            X2(i, 0) = x;
            X2(i, 1) = rng.next_normal();  // pure noise column
            const double u = std::max(rng.next_double(), 1e-12);
            const double t = -std::log(u) / std::exp(0.5 * x);
            durations[i] = 1 + static_cast<int>(std::min(t * 8.0, 200.0));
            events[i] = t * 8.0 < 200.0 ? 1 : 0;
        }
        const auto nested = cox_fit(X1, durations, events);
        const auto full = cox_fit(X2, durations, events);
        pvalues.push_back(deviance_test(nested, full, 1).p);
    }
    std::sort(pvalues.begin(), pvalues.end());
    double kolmogorov = 0.0;
    for (std::size_t i = 0; i < pvalues.size(); ++i) {
        const double ecdf_hi = static_cast<double>(i + 1) / pvalues.size();
        const double ecdf_lo = static_cast<double>(i) / pvalues.size();
        kolmogorov = std::max(kolmogorov, std::fabs(ecdf_hi - pvalues[i]));
        kolmogorov = std::max(kolmogorov, std::fabs(pvalues[i] - ecdf_lo));
    }
    CHECK(kolmogorov < 0.1);
}

TEST_CASE("deviance rejects a full model that fits worse than its nested model") {
    Rng rng(16);
    const int n = 50;
    MatrixXd strong(n, 1), weak(n, 1);
    std::vector<int> durations(n), events(n, 1);
    for (int i = 0; i < n; ++i) {
        strong(i, 0) = rng.next_normal();
        weak(i, 0) = rng.next_normal();
        const double u = std::max(rng.next_double(), 1e-12);
        durations[i] = 1 + static_cast<int>(std::min(-std::log(u) * 20.0 /
                                                          std::exp(strong(i, 0)), 300.0));
    }
    const auto good = cox_fit(strong, durations, events);
    const auto bad = cox_fit(weak, durations, events);
    // Treating the better model as "nested" must be detected as a fit failure.
    CHECK_THROWS_AS(deviance_test(good, bad, 1), numerical_error);
}

TEST_CASE("survival cv: informationally equal feature sets score identically") {
    Rng rng(17);
    const int n = 80;
    SurvivalData data;
    data.covariates = MatrixXd::Zero(n, 5);
    for (int i = 0; i < n; ++i) {
        data.words.push_back("w" + std::to_string(i));
        data.covariates(i, 0) = rng.next_normal();  // D columns stay all-zero
        const double u = std::max(rng.next_double(), 1e-12);
        const double t = -std::log(u) / std::exp(-data.covariates(i, 0));
        data.durations.push_back(1 + static_cast<int>(std::min(t * 5.0, 80.0)));
        data.events.push_back(t * 5.0 < 80.0 ? 1 : 0);
    }
    const auto cv = survival_cv(data, 5, 21);
    for (std::size_t s = 1; s < cv.scores.size(); ++s) CHECK(cv.scores[s] == cv.scores[0]);
}

TEST_CASE("survival cv requires at least as many events as folds") {
    SurvivalData data;
    data.covariates = MatrixXd::Zero(6, 5);
    data.durations = {1, 2, 3, 4, 5, 6};
    data.events = {1, 1, 0, 0, 0, 0};
    for (int i = 0; i < 6; ++i) data.words.push_back("w" + std::to_string(i));
    CHECK_THROWS_AS(survival_cv(data, 5, 1), std::invalid_argument);
}

TEST_CASE("survival cv: context-diversity-driven hazards reward f+L over f") {
    Rng rng(18);
    const int n = 120;
    SurvivalData data;
    data.covariates = MatrixXd::Zero(n, 5);
    for (int i = 0; i < n; ++i) {
        data.words.push_back("w" + std::to_string(i));
        for (int j = 0; j < 5; ++j) data.covariates(i, j) = rng.next_normal();
        const double dl = data.covariates(i, 1);
        const double u = std::max(rng.next_double(), 1e-12);
        const double t = -std::log(u) / std::exp(-1.5 * dl);  // high D_L survives longer
        data.durations.push_back(1 + static_cast<int>(std::min(t * 5.0, 120.0)));
        data.events.push_back(t * 5.0 < 120.0 ? 1 : 0);
    }
    const auto cv = survival_cv(data, 10, 22);
    const auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (const double x : v) s += x;
        return s / v.size();
    };
    CHECK(mean(cv.scores[1]) > mean(cv.scores[0]));  // f+L over f
    REQUIRE(!cv.comparisons.empty());
    CHECK(cv.comparisons[0].p < 0.05);
}
