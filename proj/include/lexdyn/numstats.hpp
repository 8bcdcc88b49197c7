#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "lexdyn/common.hpp"
#include "lexdyn/rng.hpp"

namespace lexdyn::stats {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Linear and logistic models. Design matrices exclude the intercept column;
// fitted coefficient vectors carry the intercept at index 0.
// ---------------------------------------------------------------------------

struct LinearModel {
    VectorXd beta;        // [intercept, slopes...]
    double sigma2 = 0.0;  // SSE / n (maximum-likelihood convention)
    double sse = 0.0;
    double r2 = 0.0;      // 0 when the response has no variance
    int n = 0;

    double predict(const VectorXd& x) const;
};

LinearModel ols_fit(const MatrixXd& X, const VectorXd& y);

struct LogisticModel {
    VectorXd beta;  // [intercept, slopes...]
    bool converged = false;
    double log_likelihood = 0.0;  // unpenalized, at the fitted coefficients
    int iterations = 0;

    double predict_probability(const VectorXd& x) const;
};

LogisticModel logistic_regression_fit(const MatrixXd& X, const VectorXd& y,
                                      double ridge = 1e-6);

// ---------------------------------------------------------------------------
// Rank correlation and variance decomposition.
// ---------------------------------------------------------------------------

// Pearson correlation of mid-ranks; nullopt when either input is constant.
std::optional<double> spearman_rho(std::span<const double> a, std::span<const double> b);

struct ImportanceDecomposition {
    std::vector<double> shares;  // per predictor, sums to full-model r2
    double full_r2 = 0.0;
};

// Averaged incremental R-squared over all orderings (exact enumeration via
// subset weights); requires p <= 8 predictors.
ImportanceDecomposition lmg_importance(const MatrixXd& X, const VectorXd& y);

// ---------------------------------------------------------------------------
// Resampling.
// ---------------------------------------------------------------------------

struct BootstrapInterval {
    double point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

// Statistic over a resampled index set; redraws (bounded) when it returns
// nullopt. Fully determined by (data, seed).
BootstrapInterval percentile_bootstrap(
    const std::function<std::optional<double>(std::span<const int>)>& statistic,
    int n_rows, int iters, std::uint64_t seed, double level = 0.95);

// Stratified fold assignment for binary labels; per-fold class counts differ
// from an even split by at most one instance. Errors when a class has fewer
// members than folds.
std::vector<int> kfold_balanced(std::span<const int> labels, int k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Tests and distribution tails.
// ---------------------------------------------------------------------------

struct TTestResult {
    double t = 0.0;
    double p = 0.0;  // upper tail: evidence that mean(a) > mean(b)
    double df = 0.0;
};

// Welch's t with Satterthwaite degrees of freedom; nullopt when both samples
// have zero variance.
std::optional<TTestResult> welch_one_tailed_t(std::span<const double> a,
                                              std::span<const double> b);

// One-sample upper-tail t-test on paired differences a[i] - b[i].
std::optional<TTestResult> paired_one_tailed_t(std::span<const double> a,
                                               std::span<const double> b);

double regularized_incomplete_beta(double a, double b, double x);
double regularized_upper_incomplete_gamma(double a, double x);

double chi_square_sf(double x, int df);
double student_t_sf(double t, double df);  // P(T > t)
double normal_sf(double z);

// ---------------------------------------------------------------------------
// Small shared helpers.
// ---------------------------------------------------------------------------

double mean_of(std::span<const double> v);
double sample_variance(std::span<const double> v);  // (n-1) denominator

// Mid-ranks (average rank for ties), 1-based.
std::vector<double> mid_ranks(std::span<const double> v);

}  // namespace lexdyn::stats
