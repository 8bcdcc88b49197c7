#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lexdyn::pipeline {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMissingArtifact = 3;
inline constexpr int kExitNumerical = 4;

struct CommandOptions {
    std::string workdir;
    std::optional<std::string> input;   // ingest: corpus; synth: config file
    std::optional<std::string> output;  // synth: corpus path (default workdir/corpus.ndjson)

    std::optional<std::string> bots_path, excluded_subreddits_path;
    std::optional<std::string> allowlist_path, denylist_path, pos_path;

    std::string window_start = "2013-06";
    int months = 36;
    std::size_t vocab_size = 100000;
    int shards = 1;

    double spearman_pct = 85.0, piecewise_pct = 85.0, logistic_pct = 99.0;
    std::uint64_t heaps_min_count = 1;

    std::vector<int> lags = {12, 24};
    int importance_bootstrap = 1000;
    int adrf_bootstrap = 100;
    int adrf_quantiles = 10;
    int causal_k = 3;
    int predict_k_max = 12;
    int survival_k = 3;
    int folds = 10;

    std::optional<std::uint64_t> seed;
    bool force = false;  // ignore up-to-date manifests
};

// Artifact names within a workdir.
inline constexpr const char* kTokensFile = "tokens.tsv";
inline constexpr const char* kVocabFile = "vocab.tsv";
inline constexpr const char* kIngestStatsFile = "ingest_stats.json";
inline constexpr const char* kLabelsFile = "word_labels.tsv";
inline constexpr const char* kTodoFile = "candidates_todo.tsv";
inline constexpr const char* kAccuracyFile = "accuracy.csv";
inline constexpr const char* kPosCompareFile = "pos_compare.csv";
inline constexpr const char* kPosAccuracyFile = "pos_accuracy.csv";
inline constexpr const char* kPosValuesFile = "pos_dl_values.csv";
inline constexpr const char* kCoxCoefficientsFile = "cox_coefficients.csv";
inline constexpr const char* kConcordanceFile = "concordance.csv";
inline constexpr const char* kDevianceFile = "deviance.csv";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kOracleLabelsFile = "oracle_labels.tsv";
inline constexpr const char* kSynthWordsFile = "synth_words.txt";

extern const std::vector<std::string> kCommands;

// Executes one pipeline command; throws config_error / missing_artifact_error /
// numerical_error on failure. Returns the artifacts written (empty on an
// up-to-date no-op).
std::vector<std::string> run(const std::string& command, const CommandOptions& options);

// CLI wrapper: catches, reports to stderr, and maps errors to exit codes.
int run_cli(const std::string& command, const CommandOptions& options);

}  // namespace lexdyn::pipeline
