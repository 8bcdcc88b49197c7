#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "lexdyn/counts.hpp"

namespace lexdyn::wordsets {

// --- Spearman growth screen -------------------------------------------------

enum class ScreenExclusion { none, too_few_defined, too_sparse, constant_series };

struct ScreenResult {
    std::vector<std::optional<double>> rho;        // per word; nullopt when excluded
    std::vector<ScreenExclusion> exclusion;        // per word reason code
    std::vector<std::size_t> candidates;           // indices with rho above the gate
    double threshold = 0.0;                        // the pct-th percentile of eligible rho
    std::size_t eligible = 0;
};

// Correlates month index with each word's log-frequency series over defined
// months. Words with fewer than 3 defined months, or more than
// max_undefined_fraction undefined months, are excluded.
ScreenResult spearman_screen(std::span<const std::vector<std::optional<double>>> series,
                             double pct = 85.0, double max_undefined_fraction = 0.25);

// --- Decline trajectory fits -------------------------------------------------

struct PiecewiseFit {
    int split = 0;        // t-hat, 1-based month
    double intercept = 0.0;
    double slope1 = 0.0;  // growth phase
    double slope2 = 0.0;  // decline phase
    double r2 = 0.0;
    double sse = 0.0;
};

// Exhaustive search over split in [2, T-2]; the second phase is anchored at
// the first phase's value at the split (continuous at t-hat). Ties broken by
// the smallest split. Requires a fully defined series of length >= 5.
PiecewiseFit piecewise_fit(std::span<const double> series);

struct LogisticTrajectoryFit {
    double center = 0.0;     // mu-hat, in month units
    double scale = 1.0;      // s > 0
    double amplitude = 0.0;  // A > 0
    double r2 = 0.0;
    double sse = 0.0;
    bool converged = false;
};

// Nonlinear least squares of a scaled logistic density against the raw
// relative-frequency series: coarse (mu, s) grid with closed-form A, then
// iterative local grid refinement.
LogisticTrajectoryFit logistic_trajectory_fit(std::span<const double> series);

// --- Candidate selection and annotation --------------------------------------

enum class DeclineSource { piecewise, logistic, both };

struct DeclineCandidate {
    std::size_t word = 0;   // index into the fit population's word list
    DeclineSource source = DeclineSource::piecewise;
    int split = 0;          // piecewise t-hat, or round(mu-hat) clamped to [1, T]
    double piecewise_r2 = 0.0;
    double logistic_r2 = 0.0;
};

struct DeclineSelection {
    std::vector<DeclineCandidate> candidates;
    double piecewise_threshold = 0.0;
    double logistic_threshold = 0.0;
};

DeclineSelection select_decline_candidates(std::span<const PiecewiseFit> pfits,
                                           std::span<const LogisticTrajectoryFit> lfits,
                                           int months, double piecewise_pct = 85.0,
                                           double logistic_pct = 99.0);

// --- Labels -------------------------------------------------------------------

enum class Label { growth, decline, excluded };

struct WordLabel {
    std::string word;
    Label label = Label::growth;
    std::optional<DeclineSource> source;  // decline only
    std::optional<int> split;             // decline only
    std::optional<double> rho;
    std::optional<double> r2;
};

struct GrowthCandidate {
    std::string word;
    double rho = 0.0;
};

struct DeclineCandidateNamed {
    std::string word;
    DeclineSource source = DeclineSource::piecewise;
    int split = 0;
    double r2 = 0.0;
    std::optional<double> rho;
};

struct AnnotationOutcome {
    std::vector<WordLabel> labels;              // growth / decline / excluded
    std::vector<std::string> todo_growth;       // unlisted candidates for review
    std::vector<DeclineCandidateNamed> todo_decline;
};

// Candidates intersected with the annotation lists. A word on both lists is a
// contradiction and errors out. A word in both candidate sets is labeled
// decline (a rise-then-fall trajectory beats the monotone screen).
AnnotationOutcome apply_annotations(std::span<const GrowthCandidate> growth,
                                    std::span<const DeclineCandidateNamed> decline,
                                    const std::unordered_set<std::string>& allowlist,
                                    const std::unordered_set<std::string>& denylist);

std::unordered_set<std::string> load_word_list(const std::string& path);

void write_labels_tsv(std::span<const WordLabel> labels, const std::string& path);
std::vector<WordLabel> read_labels_tsv(const std::string& path);

// --- Full detection pass -------------------------------------------------------

struct DetectionOptions {
    double spearman_pct = 85.0;
    double piecewise_pct = 85.0;
    double logistic_pct = 99.0;
    double max_undefined_fraction = 0.25;
    std::optional<std::string> allowlist_path;
    std::optional<std::string> denylist_path;
};

struct DetectionResult {
    ScreenResult screen;
    std::vector<std::size_t> fit_population;  // fully defined word indices
    std::vector<PiecewiseFit> pfits;          // aligned with fit_population
    std::vector<LogisticTrajectoryFit> lfits;
    DeclineSelection selection;
    AnnotationOutcome outcome;
};

DetectionResult run_detection(const counts::CountTables& tables, const DetectionOptions& options);

}  // namespace lexdyn::wordsets
