#include "lexdyn/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>

#include <json.hpp>

#include "lexdyn/analyses.hpp"
#include "lexdyn/counts.hpp"
#include "lexdyn/csvio.hpp"
#include "lexdyn/dissemination.hpp"
#include "lexdyn/ingest.hpp"
#include "lexdyn/rng.hpp"
#include "lexdyn/survival.hpp"
#include "lexdyn/synthgen.hpp"
#include "lexdyn/wordsets.hpp"

namespace fs = std::filesystem;

namespace lexdyn::pipeline {

const std::vector<std::string> kCommands = {
    "ingest",        "count",          "disseminate",     "detect",          "analyze-correlation",
    "analyze-causal", "analyze-predict", "analyze-survival", "synth",          "report"};

namespace {

// One command per workdir at a time.
class WorkdirLock {
public:
    explicit WorkdirLock(const std::string& workdir) : path_(workdir + "/.lock") {
        if (fs::exists(path_))
            throw config_error("workdir is locked by another run (remove " + path_ +
                               " if stale)");
        std::ofstream out(path_);
        if (!out) throw config_error("cannot create lock file: " + path_);
        out << "locked\n";
    }
    ~WorkdirLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }

private:
    std::string path_;
};

std::string join_path(const std::string& dir, const std::string& name) {
    return dir + "/" + name;
}

void require_artifact(const std::string& path) {
    if (!fs::exists(path)) throw missing_artifact_error("missing dependency artifact: " + path);
}

std::map<std::string, std::string> digest_inputs(const std::vector<std::string>& paths) {
    std::map<std::string, std::string> digests;
    for (const auto& p : paths) {
        require_artifact(p);
        digests.emplace(p, csv::file_digest(p));
    }
    return digests;
}

// Stage manifests: one sibling per artifact recording the producing command,
// its configuration hash, seed, input digests, and wall time.
void write_manifests(const std::vector<std::string>& outputs, const std::string& command,
                     const std::string& config_hash, const std::optional<std::uint64_t>& seed,
                     const std::map<std::string, std::string>& inputs, std::int64_t duration_ms) {
    nlohmann::json manifest;
    manifest["command"] = command;
    manifest["config_hash"] = config_hash;
    if (seed)
        manifest["seed"] = *seed;
    else
        manifest["seed"] = nullptr;
    manifest["inputs"] = inputs;
    manifest["duration_ms"] = duration_ms;
    for (const auto& out : outputs) {
        std::ofstream file(out + ".manifest.json");
        file << manifest.dump(2) << "\n";
    }
}

bool outputs_up_to_date(const std::vector<std::string>& outputs, const std::string& command,
                        const std::string& config_hash,
                        const std::map<std::string, std::string>& inputs) {
    for (const auto& out : outputs) {
        if (!fs::exists(out)) return false;
        const std::string manifest_path = out + ".manifest.json";
        if (!fs::exists(manifest_path)) return false;
        nlohmann::json manifest =
            nlohmann::json::parse(csv::read_file(manifest_path), nullptr, false);
        if (manifest.is_discarded()) return false;
        if (manifest.value("command", "") != command) return false;
        if (manifest.value("config_hash", "") != config_hash) return false;
        if (!manifest.contains("inputs") || !manifest["inputs"].is_object()) return false;
        if (manifest["inputs"].size() != inputs.size()) return false;
        for (const auto& [path, digest] : inputs) {
            if (!manifest["inputs"].contains(path)) return false;
            if (manifest["inputs"][path].get<std::string>() != digest) return false;
        }
    }
    return true;
}

std::uint64_t require_seed(const CommandOptions& options, const std::string& command) {
    if (!options.seed)
        throw config_error("config violation: field 'seed' is mandatory for " + command);
    return *options.seed;
}

// A stage runs inside this harness: dependency digests, no-op detection,
// execution, manifest writing.
std::vector<std::string> run_stage(const std::string& command, const CommandOptions& options,
                                   const std::vector<std::string>& input_paths,
                                   const std::vector<std::string>& output_paths,
                                   const std::string& config_hash,
                                   const std::function<void()>& body) {
    const auto inputs = digest_inputs(input_paths);
    if (!options.force && outputs_up_to_date(output_paths, command, config_hash, inputs)) {
        std::cerr << command << ": outputs up to date, nothing to do\n";
        return {};
    }
    const auto begin = std::chrono::steady_clock::now();
    body();
    const auto duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::steady_clock::now() - begin)
                                 .count();
    write_manifests(output_paths, command, config_hash, options.seed, inputs, duration_ms);
    return output_paths;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct NormalizedComment {
    int month = 0;
    std::string author, subreddit, thread;
    std::vector<std::vector<std::string>> sentences;
};

std::optional<NormalizedComment> normalize_line(const std::string& line,
                                                const MonthWindow& window,
                                                const ingest::ExclusionLists& lists,
                                                const ingest::NormalizationRules& rules,
                                                ingest::IngestStats& stats) {
    ++stats.lines_read;
    auto parsed = ingest::parse_comment_line(line, window);
    if (!parsed.comment) {
        switch (parsed.skip) {
            case ingest::SkipReason::malformed: ++stats.malformed; break;
            case ingest::SkipReason::missing_field: ++stats.missing_field; break;
            case ingest::SkipReason::outside_window: ++stats.outside_window; break;
            case ingest::SkipReason::empty_body: ++stats.empty_body; break;
            default: break;
        }
        return std::nullopt;
    }
    const auto& c = *parsed.comment;
    if (!ingest::filter_comment(c, lists)) {
        std::string author_lower;
        for (const char ch : c.author)
            author_lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        if (lists.bot_authors.count(author_lower))
            ++stats.dropped_bot;
        else
            ++stats.dropped_subreddit;
        return std::nullopt;
    }

    NormalizedComment out;
    out.month = c.month;
    out.author = c.author;
    out.subreddit = c.subreddit;
    out.thread = c.thread;
    out.sentences = ingest::normalize_tokens(c.body, rules);
    ++stats.comments_kept;
    for (const auto& s : out.sentences) {
        ++stats.sentences;
        stats.tokens += s.size();
    }
    return out;
}

std::string sanitize_unit(std::string id) {
    for (char& c : id)
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    return id;
}

void command_ingest(const CommandOptions& options, std::vector<std::string>& artifacts) {
    if (!options.input) throw config_error("config violation: field 'input' is required for ingest");
    const auto [year, month] = parse_year_month(options.window_start);
    if (options.months < 1) throw config_error("config violation: field 'months' must be >= 1");
    if (options.vocab_size < 1)
        throw config_error("config violation: field 'vocab-size' must be >= 1");
    const MonthWindow window{year, month, options.months};

    std::vector<std::string> input_paths = {*options.input};
    if (options.bots_path) input_paths.push_back(*options.bots_path);
    if (options.excluded_subreddits_path) input_paths.push_back(*options.excluded_subreddits_path);

    const std::string tokens_path = join_path(options.workdir, kTokensFile);
    const std::string vocab_path = join_path(options.workdir, kVocabFile);
    const std::string stats_path = join_path(options.workdir, kIngestStatsFile);

    const std::string config_hash = csv::string_digest(
        "ingest;window=" + options.window_start + ";months=" + std::to_string(options.months) +
        ";vocab=" + std::to_string(options.vocab_size));

    artifacts = run_stage("ingest", options, input_paths, {vocab_path, tokens_path, stats_path},
                          config_hash, [&] {
        const auto lists =
            ingest::load_exclusion_lists(options.bots_path, options.excluded_subreddits_path);
        const ingest::NormalizationRules rules;
        const auto lines = csv::read_lines(*options.input);

        // Pass 1: raw word counts, shard-parallel with a commutative merge.
        const int shards = std::max(1, options.shards);
        std::vector<std::future<std::pair<std::unordered_map<std::string, std::uint64_t>,
                                          ingest::IngestStats>>>
            futures;
        const std::size_t block = (lines.size() + shards - 1) / std::max<std::size_t>(1, shards);
        for (int s = 0; s < shards; ++s) {
            const std::size_t begin = std::min(lines.size(), s * block);
            const std::size_t end = std::min(lines.size(), begin + block);
            futures.push_back(std::async(std::launch::async, [&, begin, end] {
                std::unordered_map<std::string, std::uint64_t> counts;
                ingest::IngestStats stats;
                for (std::size_t i = begin; i < end; ++i) {
                    const auto c = normalize_line(lines[i], window, lists, rules, stats);
                    if (!c) continue;
                    for (const auto& sentence : c->sentences)
                        for (const auto& token : sentence)
                            if (!ingest::is_reserved_token(token, rules)) ++counts[token];
                }
                return std::make_pair(std::move(counts), stats);
            }));
        }
        std::unordered_map<std::string, std::uint64_t> counts;
        ingest::IngestStats stats;
        for (auto& f : futures) {
            auto [shard_counts, shard_stats] = f.get();
            for (const auto& [word, n] : shard_counts) counts[word] += n;
            stats.lines_read += shard_stats.lines_read;
            stats.malformed += shard_stats.malformed;
            stats.missing_field += shard_stats.missing_field;
            stats.outside_window += shard_stats.outside_window;
            stats.empty_body += shard_stats.empty_body;
            stats.dropped_bot += shard_stats.dropped_bot;
            stats.dropped_subreddit += shard_stats.dropped_subreddit;
            stats.comments_kept += shard_stats.comments_kept;
            stats.sentences += shard_stats.sentences;
            stats.tokens += shard_stats.tokens;
        }
        if (counts.empty())
            throw numerical_error("ingest: no countable tokens inside the window");

        const auto vocab = ingest::build_vocabulary(counts, options.vocab_size);
        ingest::write_vocabulary_tsv(vocab, vocab_path);

        // Pass 2: sequential write of the UNK-mapped sentence stream.
        csv::Writer out(tokens_path);
        ingest::IngestStats pass2_stats;
        for (const auto& line : lines) {
            auto c = normalize_line(line, window, lists, rules, pass2_stats);
            if (!c) continue;
            const std::string prefix = std::to_string(c->month) + "\t" +
                                       sanitize_unit(c->author) + "\t" +
                                       sanitize_unit(c->subreddit) + "\t" +
                                       sanitize_unit(c->thread) + "\t";
            for (auto& sentence : c->sentences) {
                if (sentence.empty()) continue;
                ingest::apply_vocabulary(sentence, vocab);
                std::string row = prefix;
                for (std::size_t i = 0; i < sentence.size(); ++i) {
                    if (i) row += ' ';
                    row += sentence[i];
                }
                out.raw_line(row);
            }
        }

        nlohmann::json j;
        j["lines_read"] = stats.lines_read;
        j["malformed"] = stats.malformed;
        j["missing_field"] = stats.missing_field;
        j["outside_window"] = stats.outside_window;
        j["empty_body"] = stats.empty_body;
        j["dropped_bot"] = stats.dropped_bot;
        j["dropped_subreddit"] = stats.dropped_subreddit;
        j["comments_kept"] = stats.comments_kept;
        j["sentences"] = stats.sentences;
        j["tokens"] = stats.tokens;
        j["vocabulary_size"] = vocab.size();
        std::ofstream stats_out(stats_path);
        stats_out << j.dump(2) << "\n";
    });
}

// ---------------------------------------------------------------------------
// count
// ---------------------------------------------------------------------------

void command_count(const CommandOptions& options, std::vector<std::string>& artifacts) {
    const std::string tokens_path = join_path(options.workdir, kTokensFile);
    const std::string vocab_path = join_path(options.workdir, kVocabFile);
    if (options.months < 1) throw config_error("config violation: field 'months' must be >= 1");

    std::vector<std::string> outputs;
    outputs.push_back(join_path(options.workdir, counts::kFrequencyFile));
    outputs.push_back(join_path(options.workdir, counts::kContextsFile));
    for (int k = 0; k < 3; ++k) {
        outputs.push_back(join_path(options.workdir, counts::kSocialFiles[k]));
        outputs.push_back(join_path(options.workdir, counts::kUnitTokenFiles[k]));
    }

    const std::string config_hash =
        csv::string_digest("count;months=" + std::to_string(options.months));

    artifacts = run_stage("count", options, {tokens_path, vocab_path}, outputs, config_hash, [&] {
        const auto vocab = ingest::read_vocabulary_tsv(vocab_path);
        const counts::TokenMapper mapper{&vocab, {}};
        const auto lines = csv::read_lines(tokens_path);

        const int shards = std::max(1, options.shards);
        const std::size_t block = (lines.size() + shards - 1) / std::max<std::size_t>(1, shards);
        std::vector<std::future<counts::CountAccumulator>> futures;
        for (int s = 0; s < shards; ++s) {
            const std::size_t begin = std::min(lines.size(), s * block);
            const std::size_t end = std::min(lines.size(), begin + block);
            futures.push_back(std::async(std::launch::async, [&, begin, end] {
                counts::CountAccumulator acc(vocab.size(), options.months);
                std::vector<std::uint32_t> ids;
                for (std::size_t i = begin; i < end; ++i) {
                    if (lines[i].empty()) continue;
                    const auto fields = csv::split(lines[i], '\t');
                    if (fields.size() != 5)
                        throw config_error("bad tokens.tsv row: " + lines[i]);
                    const int month = static_cast<int>(csv::parse_int(fields[0]));
                    ids.clear();
                    for (const auto tok : csv::split(fields[4], ' '))
                        if (!tok.empty()) ids.push_back(mapper.map(tok));
                    acc.add_sentence(month, fields[1], fields[2], fields[3], ids);
                }
                return acc;
            }));
        }
        std::optional<counts::CountAccumulator> merged;
        for (auto& f : futures) {
            auto acc = f.get();
            if (!merged)
                merged.emplace(std::move(acc));
            else
                merged->merge(std::move(acc));
        }
        const auto tables = merged->finalize(vocab);
        counts::write_tables(tables, options.workdir);
    });
}

// ---------------------------------------------------------------------------
// disseminate, detect
// ---------------------------------------------------------------------------

std::vector<std::string> table_paths(const std::string& workdir) {
    std::vector<std::string> paths;
    paths.push_back(join_path(workdir, counts::kFrequencyFile));
    paths.push_back(join_path(workdir, counts::kContextsFile));
    for (int k = 0; k < 3; ++k) {
        paths.push_back(join_path(workdir, counts::kSocialFiles[k]));
        paths.push_back(join_path(workdir, counts::kUnitTokenFiles[k]));
    }
    return paths;
}

void command_disseminate(const CommandOptions& options, std::vector<std::string>& artifacts) {
    const auto inputs = table_paths(options.workdir);
    const std::vector<std::string> outputs = {
        join_path(options.workdir, dissemination::kUserMetricFile),
        join_path(options.workdir, dissemination::kSubredditMetricFile),
        join_path(options.workdir, dissemination::kThreadMetricFile),
        join_path(options.workdir, dissemination::kLinguisticMetricFile),
        join_path(options.workdir, dissemination::kHeapsFitFile)};
    const std::string config_hash = csv::string_digest(
        "disseminate;heaps_min_count=" + std::to_string(options.heaps_min_count));

    artifacts = run_stage("disseminate", options, inputs, outputs, config_hash, [&] {
        const auto tables = counts::read_tables(options.workdir);
        const auto series = dissemination::compute_all(tables, options.heaps_min_count);
        dissemination::write_series(series, options.workdir);
    });
}

void command_detect(const CommandOptions& options, std::vector<std::string>& artifacts) {
    auto inputs = table_paths(options.workdir);
    if (options.allowlist_path) inputs.push_back(*options.allowlist_path);
    if (options.denylist_path) inputs.push_back(*options.denylist_path);
    const std::vector<std::string> outputs = {join_path(options.workdir, kLabelsFile),
                                              join_path(options.workdir, kTodoFile)};
    const std::string config_hash = csv::string_digest(
        "detect;spearman=" + csv::format_double(options.spearman_pct) +
        ";piecewise=" + csv::format_double(options.piecewise_pct) +
        ";logistic=" + csv::format_double(options.logistic_pct));

    artifacts = run_stage("detect", options, inputs, outputs, config_hash, [&] {
        const auto tables = counts::read_tables(options.workdir);
        wordsets::DetectionOptions detect;
        detect.spearman_pct = options.spearman_pct;
        detect.piecewise_pct = options.piecewise_pct;
        detect.logistic_pct = options.logistic_pct;
        detect.allowlist_path = options.allowlist_path;
        detect.denylist_path = options.denylist_path;
        const auto result = wordsets::run_detection(tables, detect);

        wordsets::write_labels_tsv(result.outcome.labels, join_path(options.workdir, kLabelsFile));

        csv::Writer todo(join_path(options.workdir, kTodoFile));
        todo.raw_line("word\tkind\trho\tr2\tsplit_month");
        std::vector<std::string> todo_rows;
        for (const auto& word : result.outcome.todo_growth) {
            std::string rho = "-";
            for (std::size_t w = 0; w < tables.words.size(); ++w)
                if (tables.words[w] == word && result.screen.rho[w])
                    rho = csv::format_double(*result.screen.rho[w]);
            todo_rows.push_back(word + "\tgrowth\t" + rho + "\t-\t-");
        }
        for (const auto& c : result.outcome.todo_decline)
            todo_rows.push_back(c.word + "\tdecline\t" +
                                (c.rho ? csv::format_double(*c.rho) : std::string("-")) + "\t" +
                                csv::format_double(c.r2) + "\t" + std::to_string(c.split));
        std::sort(todo_rows.begin(), todo_rows.end());
        for (const auto& row : todo_rows) todo.raw_line(row);

        std::cerr << "detect: " << result.screen.candidates.size() << " growth candidates, "
                  << result.selection.candidates.size() << " decline candidates, "
                  << result.outcome.labels.size() << " labeled words\n";
    });
}

// ---------------------------------------------------------------------------
// analyses
// ---------------------------------------------------------------------------

struct LoadedAnalysisInputs {
    counts::CountTables tables;
    analyses::SeriesBundle bundle;
    std::vector<wordsets::WordLabel> labels;
};

std::vector<std::string> analysis_input_paths(const std::string& workdir) {
    auto paths = table_paths(workdir);
    paths.push_back(join_path(workdir, dissemination::kUserMetricFile));
    paths.push_back(join_path(workdir, dissemination::kSubredditMetricFile));
    paths.push_back(join_path(workdir, dissemination::kThreadMetricFile));
    paths.push_back(join_path(workdir, dissemination::kLinguisticMetricFile));
    paths.push_back(join_path(workdir, kLabelsFile));
    return paths;
}

LoadedAnalysisInputs load_analysis_inputs(const std::string& workdir) {
    LoadedAnalysisInputs in;
    in.tables = counts::read_tables(workdir);
    const auto dl =
        dissemination::read_metric_matrix(join_path(workdir, dissemination::kLinguisticMetricFile));
    const auto du =
        dissemination::read_metric_matrix(join_path(workdir, dissemination::kUserMetricFile));
    const auto ds =
        dissemination::read_metric_matrix(join_path(workdir, dissemination::kSubredditMetricFile));
    const auto dt =
        dissemination::read_metric_matrix(join_path(workdir, dissemination::kThreadMetricFile));
    in.bundle = analyses::build_bundle(in.tables, dl, du, ds, dt);
    in.labels = wordsets::read_labels_tsv(join_path(workdir, kLabelsFile));
    return in;
}

void command_analyze_correlation(const CommandOptions& options,
                                 std::vector<std::string>& artifacts) {
    const auto seed = require_seed(options, "analyze-correlation");
    std::string lag_key;
    std::vector<std::string> outputs;
    for (const int k : options.lags) {
        lag_key += std::to_string(k) + ",";
        outputs.push_back(join_path(options.workdir, "importance_k" + std::to_string(k) + ".csv"));
    }
    const std::string config_hash = csv::string_digest(
        "analyze-correlation;lags=" + lag_key + ";boot=" +
        std::to_string(options.importance_bootstrap) + ";seed=" + std::to_string(seed));

    artifacts = run_stage("analyze-correlation", options, analysis_input_paths(options.workdir),
                          outputs, config_hash, [&] {
        const auto in = load_analysis_inputs(options.workdir);
        std::vector<std::string> growth;
        for (const auto& l : in.labels)
            if (l.label == wordsets::Label::growth) growth.push_back(l.word);

        for (std::size_t i = 0; i < options.lags.size(); ++i) {
            const int k = options.lags[i];
            const auto data = analyses::assemble_lag_dataset(in.bundle, growth, k);
            const auto report = analyses::relative_importance_analysis(
                data, options.importance_bootstrap, lexdyn::Rng::derive(seed, k).next_u64());
            csv::Writer out(outputs[i]);
            out.raw_line("predictor,share,lo,hi");
            for (int j = 0; j < analyses::kNumPredictors; ++j)
                out.raw_line(std::string(analyses::kPredictorNames[j]) + "," +
                             csv::format_double(report.share[j]) + "," +
                             csv::format_double(report.lower[j]) + "," +
                             csv::format_double(report.upper[j]));
            std::cerr << "analyze-correlation: k=" << k << " rows=" << data.predictors.rows()
                      << " dropped=" << data.dropped << " R2=" << report.full_r2 << "\n";
        }
    });
}

const char* adrf_file_for(int treatment_column) {
    switch (treatment_column) {
        case 1: return "adrf_DL.csv";
        case 2: return "adrf_DU.csv";
        case 3: return "adrf_DS.csv";
        case 4: return "adrf_DT.csv";
    }
    throw std::logic_error("bad treatment column");
}

void command_analyze_causal(const CommandOptions& options, std::vector<std::string>& artifacts) {
    const auto seed = require_seed(options, "analyze-causal");
    std::vector<std::string> outputs;
    for (int col = 1; col <= 4; ++col)
        outputs.push_back(join_path(options.workdir, adrf_file_for(col)));
    const std::string config_hash = csv::string_digest(
        "analyze-causal;quantiles=" + std::to_string(options.adrf_quantiles) + ";boot=" +
        std::to_string(options.adrf_bootstrap) + ";k=" + std::to_string(options.causal_k) +
        ";seed=" + std::to_string(seed));

    artifacts = run_stage("analyze-causal", options, analysis_input_paths(options.workdir),
                          outputs, config_hash, [&] {
        const auto in = load_analysis_inputs(options.workdir);
        const auto fs = analyses::summarize_features(in.bundle, in.labels, options.causal_k);
        for (int col = 1; col <= 4; ++col) {
            const auto curve = analyses::adrf_estimate(fs, col, options.adrf_quantiles,
                                                       options.adrf_bootstrap,
                                                       lexdyn::Rng::derive(seed, col).next_u64());
            csv::Writer out(outputs[col - 1]);
            out.raw_line("quantile,mu,lo,hi");
            for (std::size_t q = 0; q < curve.mean.size(); ++q)
                out.raw_line(std::to_string(q + 1) + "," + csv::format_double(curve.mean[q]) +
                             "," + csv::format_double(curve.lower[q]) + "," +
                             csv::format_double(curve.upper[q]));
        }
    });
}

void command_analyze_predict(const CommandOptions& options, std::vector<std::string>& artifacts) {
    const auto seed = require_seed(options, "analyze-predict");
    auto inputs = analysis_input_paths(options.workdir);
    if (options.pos_path) inputs.push_back(*options.pos_path);

    std::vector<std::string> outputs = {join_path(options.workdir, kAccuracyFile)};
    if (options.pos_path) {
        outputs.push_back(join_path(options.workdir, kPosCompareFile));
        outputs.push_back(join_path(options.workdir, kPosAccuracyFile));
        outputs.push_back(join_path(options.workdir, kPosValuesFile));
    }
    const std::string config_hash = csv::string_digest(
        "analyze-predict;kmax=" + std::to_string(options.predict_k_max) + ";folds=" +
        std::to_string(options.folds) + ";pos=" + options.pos_path.value_or("-") +
        ";seed=" + std::to_string(seed));

    artifacts = run_stage("analyze-predict", options, inputs, outputs, config_hash, [&] {
        const auto in = load_analysis_inputs(options.workdir);
        const auto rows = analyses::binary_growth_prediction(in.bundle, in.labels,
                                                             options.predict_k_max,
                                                             options.folds, seed);
        csv::Writer out(join_path(options.workdir, kAccuracyFile));
        out.raw_line("k,feature_set,mean_acc,std");
        for (const auto& row : rows)
            out.raw_line(std::to_string(row.k) + "," + analyses::feature_set_name(row.set) + "," +
                         csv::format_double(row.mean_accuracy) + "," +
                         csv::format_double(row.std_accuracy));

        if (!options.pos_path) return;
        const auto tags = analyses::load_pos_tags(*options.pos_path);
        const int match_k = std::min(12, in.bundle.months);
        const auto comparison =
            analyses::pos_matched_comparison(in.bundle, in.labels, tags, match_k);
        csv::Writer pos_out(join_path(options.workdir, kPosCompareFile));
        pos_out.raw_line("tag,n_pairs,delta,t,p");
        for (const auto& row : comparison.rows)
            pos_out.raw_line(row.tag + "," + std::to_string(row.n_pairs) + "," +
                             csv::format_double(row.delta_dl) + "," +
                             (row.t ? csv::format_double(*row.t) : std::string("NA")) + "," +
                             (row.p ? csv::format_double(*row.p) : std::string("NA")));

        csv::Writer values_out(join_path(options.workdir, kPosValuesFile));
        values_out.raw_line("word,tag,label,mean_dl");
        for (const auto& v : comparison.values)
            values_out.raw_line(v.word + "," + v.tag + "," +
                                (v.label ? "growth" : "decline") + "," +
                                csv::format_double(v.mean_dl));

        const auto pos_pred = analyses::pos_feature_prediction(in.bundle, in.labels, tags, 1,
                                                               options.folds, seed);
        csv::Writer acc_out(join_path(options.workdir, kPosAccuracyFile));
        acc_out.raw_line("feature_set,k,accuracy");
        acc_out.raw_line("f+POS,1," + csv::format_double(pos_pred.f_pos_accuracy));
        acc_out.raw_line("f,1," + csv::format_double(pos_pred.f_accuracy));
        acc_out.raw_line("f+L,1," + csv::format_double(pos_pred.f_l_accuracy));
    });
}

void command_analyze_survival(const CommandOptions& options, std::vector<std::string>& artifacts) {
    const auto seed = require_seed(options, "analyze-survival");
    const std::vector<std::string> outputs = {
        join_path(options.workdir, kCoxCoefficientsFile),
        join_path(options.workdir, kConcordanceFile),
        join_path(options.workdir, kDevianceFile)};
    const std::string config_hash = csv::string_digest(
        "analyze-survival;k=" + std::to_string(options.survival_k) + ";folds=" +
        std::to_string(options.folds) + ";seed=" + std::to_string(seed));

    artifacts = run_stage("analyze-survival", options, analysis_input_paths(options.workdir),
                          outputs, config_hash, [&] {
        const auto in = load_analysis_inputs(options.workdir);
        const auto data =
            survival::assemble_survival_records(in.bundle, in.labels, options.survival_k);

        const auto full =
            survival::cox_fit(data.covariates, data.durations, data.events);
        csv::Writer coef_out(join_path(options.workdir, kCoxCoefficientsFile));
        coef_out.raw_line("predictor,beta,se,z,p");
        for (int j = 0; j < analyses::kNumPredictors; ++j)
            coef_out.raw_line(std::string(analyses::kPredictorNames[j]) + "," +
                              csv::format_double(full.beta[j]) + "," +
                              csv::format_double(full.se[j]) + "," +
                              csv::format_double(full.z[j]) + "," +
                              csv::format_double(full.p[j]));

        const auto cv = survival::survival_cv(data, options.folds, seed);
        csv::Writer conc_out(join_path(options.workdir, kConcordanceFile));
        conc_out.raw_line("fold,feature_set,c");
        for (std::size_t s = 0; s < cv.sets.size(); ++s)
            for (std::size_t f = 0; f < cv.scores[s].size(); ++f)
                conc_out.raw_line(std::to_string(f + 1) + "," +
                                  analyses::feature_set_name(cv.sets[s]) + "," +
                                  csv::format_double(cv.scores[s][f]));

        // Nested-model deviance: f+L against the null, f+L+S against f+L.
        auto fit_subset = [&](const std::vector<int>& cols) {
            Eigen::MatrixXd X(data.covariates.rows(), static_cast<Eigen::Index>(cols.size()));
            for (std::size_t c = 0; c < cols.size(); ++c)
                X.col(c) = data.covariates.col(cols[c]);
            return survival::cox_fit(X, data.durations, data.events);
        };
        const auto null_model = fit_subset({});
        const auto f_l = fit_subset({0, 1});
        const auto f_l_s = fit_subset({0, 1, 2, 3, 4});
        const auto d1 = survival::deviance_test(null_model, f_l, 2);
        const auto d2 = survival::deviance_test(f_l, f_l_s, 3);

        csv::Writer dev_out(join_path(options.workdir, kDevianceFile));
        dev_out.raw_line("comparison,chi2,df,p");
        dev_out.raw_line("f+L_vs_null," + csv::format_double(d1.chi2) + "," +
                         std::to_string(d1.df) + "," + csv::format_double(d1.p));
        dev_out.raw_line("f+L+S_vs_f+L," + csv::format_double(d2.chi2) + "," +
                         std::to_string(d2.df) + "," + csv::format_double(d2.p));

        // Paired CV comparisons logged for the record.
        for (const auto& cmp : cv.comparisons)
            std::cerr << "analyze-survival: " << analyses::feature_set_name(cmp.enriched)
                      << " vs " << analyses::feature_set_name(cmp.baseline) << ": t=" << cmp.t
                      << " p=" << cmp.p << "\n";
    });
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

void command_synth(const CommandOptions& options, std::vector<std::string>& artifacts) {
    if (!options.input)
        throw config_error("config violation: field 'input' (synth config) is required");
    const std::string corpus_path =
        options.output.value_or(join_path(options.workdir, "corpus.ndjson"));
    const std::vector<std::string> outputs = {corpus_path,
                                              join_path(options.workdir, kOracleLabelsFile),
                                              join_path(options.workdir, kSynthWordsFile)};
    const std::string config_hash = csv::string_digest("synth");

    artifacts = run_stage("synth", options, {*options.input}, outputs, config_hash, [&] {
        const auto cfg = synthgen::read_synth_config(*options.input);
        synthgen::generate_corpus(cfg, corpus_path);
        const auto labels = synthgen::oracle_labels(cfg);
        wordsets::write_labels_tsv(labels, join_path(options.workdir, kOracleLabelsFile));
        synthgen::write_word_list(cfg, join_path(options.workdir, kSynthWordsFile));
    });
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

nlohmann::json csv_to_json_rows(const std::string& path) {
    const auto lines = csv::read_lines(path);
    nlohmann::json rows = nlohmann::json::array();
    if (lines.empty()) return rows;
    const auto header = csv::split(lines[0], ',');
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto cells = csv::split(lines[i], ',');
        nlohmann::json row;
        for (std::size_t c = 0; c < header.size() && c < cells.size(); ++c) {
            const std::string key(header[c]);
            const std::string value(cells[c]);
            try {
                const auto parsed = csv::parse_cell(value);
                if (parsed)
                    row[key] = *parsed;
                else
                    row[key] = nullptr;
            } catch (const config_error&) {
                row[key] = value;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void copy_with_header(const std::string& from, const std::string& to,
                      const std::string& new_header) {
    const auto lines = csv::read_lines(from);
    csv::Writer out(to);
    out.raw_line(new_header);
    for (std::size_t i = 1; i < lines.size(); ++i)
        if (!lines[i].empty()) out.raw_line(lines[i]);
}

void command_report(const CommandOptions& options, std::vector<std::string>& artifacts) {
    const std::string workdir = options.workdir;
    auto present = [&](const std::string& name) { return fs::exists(join_path(workdir, name)); };

    std::vector<std::string> analysis_files;
    for (const int k : options.lags) {
        const std::string f = "importance_k" + std::to_string(k) + ".csv";
        if (present(f)) analysis_files.push_back(f);
    }
    for (int col = 1; col <= 4; ++col)
        if (present(adrf_file_for(col))) analysis_files.push_back(adrf_file_for(col));
    for (const char* f : {kAccuracyFile, kPosCompareFile, kPosAccuracyFile, kPosValuesFile,
                          kCoxCoefficientsFile, kConcordanceFile, kDevianceFile})
        if (present(f)) analysis_files.push_back(f);
    if (analysis_files.empty())
        throw missing_artifact_error("missing dependency artifact: no analysis outputs in " +
                                     workdir);

    std::vector<std::string> inputs;
    for (const auto& f : analysis_files) inputs.push_back(join_path(workdir, f));
    if (present(kLabelsFile)) inputs.push_back(join_path(workdir, kLabelsFile));
    if (present(kTodoFile)) inputs.push_back(join_path(workdir, kTodoFile));

    const std::string report_path = join_path(workdir, kReportFile);
    const std::string config_hash = csv::string_digest("report");

    // Outputs depend on which figures are emittable; compute up front.
    std::vector<std::string> outputs = {report_path};
    fs::create_directories(join_path(workdir, "plots"));
    std::vector<std::pair<std::string, std::string>> figures;  // source -> plot file
    std::vector<std::string> skipped;
    for (int col = 1; col <= 4; ++col) {
        const std::string src = adrf_file_for(col);
        const std::string dst = std::string("plots/") + src;
        if (present(src))
            figures.push_back({src, dst});
        else
            skipped.push_back(dst);
    }
    if (present(kAccuracyFile))
        figures.push_back({kAccuracyFile, "plots/accuracy_vs_k.csv"});
    else
        skipped.push_back("plots/accuracy_vs_k.csv");
    if (present(kConcordanceFile))
        figures.push_back({kConcordanceFile, "plots/concordance.csv"});
    else
        skipped.push_back("plots/concordance.csv");
    if (present(kPosValuesFile))
        figures.push_back({kPosValuesFile, "plots/pos_dl.csv"});
    else
        skipped.push_back("plots/pos_dl.csv");
    for (const auto& [src, dst] : figures) outputs.push_back(join_path(workdir, dst));

    artifacts = run_stage("report", options, inputs, outputs, config_hash, [&] {
        nlohmann::json report;

        // Word sets.
        if (present(kLabelsFile)) {
            const auto labels = wordsets::read_labels_tsv(join_path(workdir, kLabelsFile));
            int growth = 0, decline = 0, excluded = 0, dp = 0, dl = 0, dboth = 0;
            for (const auto& l : labels) {
                if (l.label == wordsets::Label::growth) ++growth;
                if (l.label == wordsets::Label::excluded) ++excluded;
                if (l.label == wordsets::Label::decline) {
                    ++decline;
                    if (l.source == wordsets::DeclineSource::piecewise) ++dp;
                    if (l.source == wordsets::DeclineSource::logistic) ++dl;
                    if (l.source == wordsets::DeclineSource::both) ++dboth;
                }
            }
            nlohmann::json ws;
            ws["growth"] = growth;
            ws["decline"] = decline;
            ws["decline_piecewise"] = dp;
            ws["decline_logistic"] = dl;
            ws["decline_both"] = dboth;
            ws["excluded"] = excluded;
            std::int64_t todo = 0;
            if (present(kTodoFile)) {
                const auto todo_lines = csv::read_lines(join_path(workdir, kTodoFile));
                todo = static_cast<std::int64_t>(todo_lines.size()) - 1;
            }
            ws["todo"] = todo;
            report["word_sets"] = ws;
        } else {
            report["word_sets"] = nullptr;
        }

        // Importance.
        nlohmann::json importance;
        bool any_importance = false;
        for (const int k : options.lags) {
            const std::string f = "importance_k" + std::to_string(k) + ".csv";
            if (!present(f)) continue;
            any_importance = true;
            importance["k" + std::to_string(k)] = csv_to_json_rows(join_path(workdir, f));
        }
        report["importance"] = any_importance ? importance : nlohmann::json(nullptr);

        // ADRF endpoints.
        nlohmann::json adrf;
        bool any_adrf = false;
        const char* adrf_names[4] = {"D_L", "D_U", "D_S", "D_T"};
        for (int col = 1; col <= 4; ++col) {
            if (!present(adrf_file_for(col))) continue;
            any_adrf = true;
            const auto rows = csv_to_json_rows(join_path(workdir, adrf_file_for(col)));
            nlohmann::json t;
            t["curve"] = rows;
            if (!rows.empty()) {
                t["bottom_quantile_mu"] = rows.front()["mu"];
                t["top_quantile_mu"] = rows.back()["mu"];
            }
            adrf[adrf_names[col - 1]] = t;
        }
        report["adrf"] = any_adrf ? adrf : nlohmann::json(nullptr);

        // Prediction.
        if (present(kAccuracyFile)) {
            const auto rows = csv_to_json_rows(join_path(workdir, kAccuracyFile));
            nlohmann::json pred;
            pred["accuracy"] = rows;
            nlohmann::json best = nullptr;
            for (const auto& row : rows)
                if (best.is_null() || row["mean_acc"].get<double>() > best["mean_acc"].get<double>())
                    best = row;
            pred["best"] = best;
            if (present(kPosAccuracyFile))
                pred["pos"] = csv_to_json_rows(join_path(workdir, kPosAccuracyFile));
            else
                pred["pos"] = nullptr;
            report["prediction"] = pred;
        } else {
            report["prediction"] = nullptr;
        }

        // Survival.
        if (present(kCoxCoefficientsFile)) {
            nlohmann::json surv;
            surv["coefficients"] = csv_to_json_rows(join_path(workdir, kCoxCoefficientsFile));
            if (present(kConcordanceFile)) {
                const auto rows = csv_to_json_rows(join_path(workdir, kConcordanceFile));
                std::map<std::string, std::pair<double, int>> mean_c;
                for (const auto& row : rows) {
                    auto& [sum, n] = mean_c[row["feature_set"].get<std::string>()];
                    sum += row["c"].get<double>();
                    ++n;
                }
                nlohmann::json means;
                for (const auto& [set, acc] : mean_c) means[set] = acc.first / acc.second;
                surv["mean_concordance"] = means;
            } else {
                surv["mean_concordance"] = nullptr;
            }
            if (present(kDevianceFile))
                surv["deviance"] = csv_to_json_rows(join_path(workdir, kDevianceFile));
            else
                surv["deviance"] = nullptr;
            report["survival"] = surv;
        } else {
            report["survival"] = nullptr;
        }

        report["skipped_figures"] = skipped;

        std::ofstream out(report_path);
        out << report.dump(2) << "\n";

        // Plot-ready CSVs.
        for (const auto& [src, dst] : figures) {
            if (src == kAccuracyFile)
                copy_with_header(join_path(workdir, src), join_path(workdir, dst),
                                 "k,feature_set,mean,std");
            else if (src.rfind("adrf_", 0) == 0)
                copy_with_header(join_path(workdir, src), join_path(workdir, dst),
                                 "quantile,mean,lo,hi");
            else
                copy_with_header(join_path(workdir, src), join_path(workdir, dst),
                                 csv::read_lines(join_path(workdir, src)).at(0));
        }
    });
}

}  // namespace

std::vector<std::string> run(const std::string& command, const CommandOptions& options) {
    if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end())
        throw config_error("unknown command: " + command);
    if (options.workdir.empty())
        throw config_error("config violation: field 'workdir' is required");
    fs::create_directories(options.workdir);
    WorkdirLock lock(options.workdir);

    std::vector<std::string> artifacts;
    if (command == "ingest") command_ingest(options, artifacts);
    else if (command == "count") command_count(options, artifacts);
    else if (command == "disseminate") command_disseminate(options, artifacts);
    else if (command == "detect") command_detect(options, artifacts);
    else if (command == "analyze-correlation") command_analyze_correlation(options, artifacts);
    else if (command == "analyze-causal") command_analyze_causal(options, artifacts);
    else if (command == "analyze-predict") command_analyze_predict(options, artifacts);
    else if (command == "analyze-survival") command_analyze_survival(options, artifacts);
    else if (command == "synth") command_synth(options, artifacts);
    else if (command == "report") command_report(options, artifacts);
    return artifacts;
}

int run_cli(const std::string& command, const CommandOptions& options) {
    try {
        const auto artifacts = run(command, options);
        for (const auto& a : artifacts) std::cerr << command << ": wrote " << a << "\n";
        return kExitOk;
    } catch (const config_error& e) {
        std::cerr << "error (config): " << e.what() << "\n";
        return kExitConfig;
    } catch (const missing_artifact_error& e) {
        std::cerr << "error (missing artifact): " << e.what() << "\n";
        return kExitMissingArtifact;
    } catch (const numerical_error& e) {
        std::cerr << "error (numerical): " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error (config): " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace lexdyn::pipeline
