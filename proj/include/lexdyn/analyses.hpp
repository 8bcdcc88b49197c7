#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lexdyn/counts.hpp"
#include "lexdyn/dissemination.hpp"
#include "lexdyn/wordsets.hpp"

namespace lexdyn::analyses {

// Five per-word series (log frequency and the four dissemination metrics)
// keyed by word, the shared input of every downstream analysis.
struct SeriesBundle {
    int months = 0;
    std::vector<std::string> words;
    std::unordered_map<std::string, std::size_t> row_of;
    // Flat word x month matrices; nullopt where undefined.
    std::vector<std::optional<double>> f, dl, du, ds, dt;

    std::size_t cell(std::size_t w, int month) const {
        return w * static_cast<std::size_t>(months) + static_cast<std::size_t>(month - 1);
    }
    std::optional<std::size_t> find(const std::string& word) const {
        const auto it = row_of.find(word);
        if (it == row_of.end()) return std::nullopt;
        return it->second;
    }
};

SeriesBundle build_bundle(const counts::CountTables& tables,
                          const dissemination::DisseminationSeries& series);
SeriesBundle build_bundle(const counts::CountTables& tables,
                          const dissemination::MetricMatrix& dl,
                          const dissemination::MetricMatrix& du,
                          const dissemination::MetricMatrix& ds,
                          const dissemination::MetricMatrix& dt);

// --- Correlational analysis ---------------------------------------------------

inline constexpr int kNumPredictors = 5;
extern const char* const kPredictorNames[kNumPredictors];  // f, D_L, D_U, D_S, D_T

struct LagDataset {
    int k = 0;
    Eigen::MatrixXd predictors;  // rows x 5, values at t-k
    Eigen::VectorXd delta_f;     // f_t - f_{t-k}
    std::uint64_t dropped = 0;   // word-months with any undefined value
};

// Pooled word-month rows over the growth set; a row exists for each t in
// (k, T] where all six series values are defined.
LagDataset assemble_lag_dataset(const SeriesBundle& bundle,
                                std::span<const std::string> growth_words, int k);

struct ImportanceReport {
    int k = 0;
    double full_r2 = 0.0;
    std::array<double, kNumPredictors> share{}, lower{}, upper{};
};

ImportanceReport relative_importance_analysis(const LagDataset& data, int bootstrap_iters,
                                              std::uint64_t seed);

// --- Feature summaries ----------------------------------------------------------

struct FeatureSummary {
    std::vector<std::string> words;
    std::vector<int> labels;     // 1 growth, 0 decline
    Eigen::MatrixXd features;    // rows x 5 means over months 1..k (defined months only)
    std::uint64_t dropped = 0;   // labeled words lacking any defined month
};

FeatureSummary summarize_features(const SeriesBundle& bundle,
                                  std::span<const wordsets::WordLabel> labels, int k);

// --- Causal analysis (average dose response) ------------------------------------

struct DoseResponseCurve {
    int treatment_column = 0;  // index into kPredictorNames, 1..4
    std::vector<double> mean, lower, upper;  // one entry per treatment quantile
};

// Four-step GPS procedure per bootstrap draw: balanced resample, OLS of the
// treatment on the covariates, Gaussian GPS, logistic outcome model on
// (Z, GPS), then mean predicted outcome per treatment quantile bin.
DoseResponseCurve adrf_estimate(const FeatureSummary& fs, int treatment_column, int quantiles,
                                int bootstrap_iters, std::uint64_t seed);

// Bin index per sorted rank; contiguous bins whose sizes differ by at most one.
std::vector<int> quantile_bins(int n, int bins);

// --- Predictive analysis ----------------------------------------------------------

enum class FeatureSet { f, f_l, f_s, f_l_s };
const char* feature_set_name(FeatureSet set);
std::vector<int> feature_set_columns(FeatureSet set);

struct AccuracyRow {
    int k = 0;
    FeatureSet set = FeatureSet::f;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
};

// Balanced (downsampled) stratified 10-fold CV accuracy for each k and
// feature set; features standardized per training fold.
std::vector<AccuracyRow> binary_growth_prediction(const SeriesBundle& bundle,
                                                  std::span<const wordsets::WordLabel> labels,
                                                  int k_max, int folds, std::uint64_t seed);

double cv_accuracy(const Eigen::MatrixXd& X, std::span<const int> y, int folds,
                   std::uint64_t seed, double* std_out = nullptr);

// --- POS robustness checks ----------------------------------------------------------

using PosTags = std::unordered_map<std::string, std::string>;
PosTags load_pos_tags(const std::string& path);

struct PosComparisonRow {
    std::string tag;
    int n_pairs = 0;
    double delta_dl = 0.0;  // mean growth D_L minus mean decline D_L
    std::optional<double> t, p;
};

struct PosComparison {
    std::vector<PosComparisonRow> rows;
    std::uint64_t unmatched_decline = 0;
    // Word-level values behind the comparison, for plotting.
    struct WordValue {
        std::string word, tag;
        int label = 0;
        double mean_dl = 0.0;
    };
    std::vector<WordValue> values;
};

// Frequency-matched growth/decline pairing (greedy, without replacement),
// then a one-tailed Welch test of growth > decline D_L within each tag.
PosComparison pos_matched_comparison(const SeriesBundle& bundle,
                                     std::span<const wordsets::WordLabel> labels,
                                     const PosTags& tags, int k = 12);

struct PosPredictionResult {
    double f_pos_accuracy = 0.0;  // frequency + one-hot POS features
    double f_accuracy = 0.0;
    double f_l_accuracy = 0.0;
};

PosPredictionResult pos_feature_prediction(const SeriesBundle& bundle,
                                           std::span<const wordsets::WordLabel> labels,
                                           const PosTags& tags, int k, int folds,
                                           std::uint64_t seed);

// Balanced class subsample (equal counts, without replacement), seeded.
std::vector<int> balanced_subsample(std::span<const int> labels, std::uint64_t seed);

}  // namespace lexdyn::analyses
