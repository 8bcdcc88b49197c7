#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lexdyn/analyses.hpp"
#include "lexdyn/wordsets.hpp"

namespace lexdyn::survival {

struct SurvivalData {
    std::vector<std::string> words;
    std::vector<int> durations;  // months until decline onset or censoring
    std::vector<int> events;     // 1 = decline observed at t-hat, 0 = censored at T
    Eigen::MatrixXd covariates;  // rows x 5, standardized over the record set
    std::uint64_t dropped = 0;
};

// Decline words die at their split point; growth words are administratively
// censored at T. Covariates are means over months 1..k, standardized so the
// coefficients are comparable across predictors.
SurvivalData assemble_survival_records(const analyses::SeriesBundle& bundle,
                                       std::span<const wordsets::WordLabel> labels, int k = 3);

struct CoxModel {
    Eigen::VectorXd beta;
    double log_likelihood = 0.0;  // partial log-likelihood at beta
    Eigen::VectorXd se, z, p;     // Wald statistics from the observed information
    bool converged = false;
    bool ridged = false;  // monotone-likelihood fallback engaged
    int iterations = 0;
};

// Efron-tie partial likelihood maximized by damped Newton iterations. A
// monotone likelihood (separation) falls back to a small ridge, flagged.
CoxModel cox_fit(const Eigen::MatrixXd& X, std::span<const int> durations,
                 std::span<const int> events, double ridge = 0.0);

// Partial log-likelihood at an arbitrary coefficient vector (test oracle hook
// and deviance building block).
double cox_partial_log_likelihood(const Eigen::MatrixXd& X, std::span<const int> durations,
                                  std::span<const int> events, const Eigen::VectorXd& beta);

// Harrell's C over comparable pairs; risk-score ties count one half. nullopt
// when no pair is comparable.
std::optional<double> concordance_index(std::span<const double> risk,
                                        std::span<const int> durations,
                                        std::span<const int> events);

struct DevianceTest {
    double chi2 = 0.0;
    int df = 0;
    double p = 1.0;
};

DevianceTest deviance_test(const CoxModel& nested, const CoxModel& full, int extra_df);

struct SurvivalCvResult {
    // fold-major: scores[set][fold]
    std::vector<std::vector<double>> scores;
    std::vector<analyses::FeatureSet> sets;
    struct PairedComparison {
        analyses::FeatureSet enriched, baseline;
        double t = 0.0, p = 1.0;
    };
    std::vector<PairedComparison> comparisons;  // f+L vs f, f+L+S vs f+S
};

SurvivalCvResult survival_cv(const SurvivalData& data, int folds, std::uint64_t seed);

}  // namespace lexdyn::survival
