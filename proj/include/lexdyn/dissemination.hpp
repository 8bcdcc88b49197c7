#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lexdyn/counts.hpp"

namespace lexdyn::dissemination {

// Expected distinct-unit count under the null model in which every token a
// unit contributes has identical probability p of being the word:
// sum over units of (1 - exp(-p * m_u)), evaluated from the (mass, units)
// histogram. p is the raw relative frequency, never the log.
double expected_unit_count(double p,
                           std::span<const std::pair<std::uint64_t, std::uint64_t>> histogram);

// Per-month D = ln(observed distinct units) - ln(expected); undefined for
// zero-count months.
std::vector<std::optional<double>> social_dissemination_series(
    const counts::CountTables& tables, const counts::CountTables::SocialKind& kind,
    std::size_t word_index);

struct HeapsFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    bool degenerate = false;  // constant-frequency design
};

// OLS of y on x for (log10 frequency, log10 distinct contexts) pairs.
HeapsFit fit_heaps(std::span<const std::pair<double, double>> points);

// Vocabulary-wide Heaps regression for one month plus per-word residuals.
// Words with count >= min_fit_count enter the fit; any countable word gets a
// residual. Requires >= 3 fitted words.
std::pair<HeapsFit, std::vector<std::optional<double>>> linguistic_dissemination_month(
    const counts::CountTables& tables, int month, std::uint64_t min_fit_count = 1);

struct DisseminationSeries {
    int months = 0;
    std::vector<std::string> words;
    // Flat words x months matrices; nullopt where the word has zero count.
    std::vector<std::optional<double>> d_user, d_subreddit, d_thread, d_linguistic;
    std::vector<std::optional<HeapsFit>> heaps;  // per month; nullopt when unfittable

    std::size_t cell(std::size_t w, int month) const {
        return w * static_cast<std::size_t>(months) + static_cast<std::size_t>(month - 1);
    }
};

DisseminationSeries compute_all(const counts::CountTables& tables,
                                std::uint64_t min_fit_count = 1);

// Generic metric matrix (word x month with NA holes), the on-disk form shared
// by all four dissemination metrics.
struct MetricMatrix {
    int months = 0;
    std::vector<std::string> words;
    std::unordered_map<std::string, std::size_t> row_of;
    std::vector<std::optional<double>> values;

    std::optional<double> at(std::size_t w, int month) const {
        return values[w * static_cast<std::size_t>(months) + static_cast<std::size_t>(month - 1)];
    }
};

void write_metric_matrix(const std::string& path, int months,
                         const std::vector<std::string>& words,
                         const std::vector<std::optional<double>>& values);
MetricMatrix read_metric_matrix(const std::string& path);

void write_series(const DisseminationSeries& s, const std::string& workdir);

extern const char* const kUserMetricFile;
extern const char* const kSubredditMetricFile;
extern const char* const kThreadMetricFile;
extern const char* const kLinguisticMetricFile;
extern const char* const kHeapsFitFile;

}  // namespace lexdyn::dissemination
