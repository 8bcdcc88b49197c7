#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lexdyn/ingest.hpp"

namespace lexdyn::counts {

// Token-id space: a handful of reserved ids, then vocabulary words in rank
// order offset by kReservedTokens. Sentinels exist only inside trigrams.
inline constexpr std::uint32_t kUnkId = 0;
inline constexpr std::uint32_t kSubId = 1;
inline constexpr std::uint32_t kUserId = 2;
inline constexpr std::uint32_t kUrlId = 3;
inline constexpr std::uint32_t kStartId = 4;
inline constexpr std::uint32_t kEndId = 5;
inline constexpr std::uint32_t kReservedTokens = 6;

struct TokenMapper {
    const ingest::Vocabulary* vocab = nullptr;
    ingest::NormalizationRules rules;

    std::uint32_t map(std::string_view token) const;
};

struct Trigram {
    std::uint32_t a = 0, b = 0, c = 0;

    friend bool operator==(const Trigram&, const Trigram&) = default;
    friend auto operator<=>(const Trigram&, const Trigram&) = default;
};

// Finalized, immutable per-month tables.
struct CountTables {
    int months = 0;
    std::vector<std::string> words;  // vocabulary rank order

    std::vector<std::uint64_t> freq;          // words x months
    std::vector<std::uint64_t> month_totals;  // all tokens, UNK and placeholders included

    std::vector<std::uint64_t> contexts;  // distinct trigrams containing the word
    std::vector<std::uint64_t> month_distinct_trigrams;

    struct SocialKind {
        std::vector<std::uint64_t> distinct_units;  // words x months
        std::vector<std::uint64_t> active_units;    // per month
        // Per month: (token mass m, number of units with that mass), sorted by m.
        std::vector<std::vector<std::pair<std::uint64_t, std::uint64_t>>> token_histogram;
    };
    SocialKind user, subreddit, thread;

    std::size_t cell(std::size_t w, int month) const {
        return w * static_cast<std::size_t>(months) + static_cast<std::size_t>(month - 1);
    }
    std::uint64_t freq_at(std::size_t w, int month) const { return freq[cell(w, month)]; }
    std::uint64_t contexts_at(std::size_t w, int month) const { return contexts[cell(w, month)]; }
};

// Shard-local accumulation state. Merging is a set/sum union and commutes;
// distinct-count cardinalities are only read at finalization, so the exact
// sets could be swapped for a mergeable sketch without touching callers.
class CountAccumulator {
public:
    CountAccumulator(std::size_t vocab_size, int months);

    void add_sentence(int month, std::string_view user, std::string_view subreddit,
                      std::string_view thread, std::span<const std::uint32_t> token_ids);

    void merge(CountAccumulator&& other);

    CountTables finalize(const ingest::Vocabulary& vocab) const;

    std::size_t vocab_size() const { return vocab_size_; }
    int months() const { return months_; }

private:
    struct WordUnit {
        std::uint32_t word = 0;
        std::uint64_t unit = 0;

        friend bool operator==(const WordUnit&, const WordUnit&) = default;
        friend auto operator<=>(const WordUnit&, const WordUnit&) = default;
    };

    struct SocialAccumulator {
        std::vector<std::vector<WordUnit>> pairs;           // per month, deduped lazily
        std::vector<std::size_t> deduped_size;
        std::vector<std::unordered_map<std::uint64_t, std::uint64_t>> unit_tokens;  // per month

        void add(int month, std::uint64_t unit, std::span<const std::uint32_t> ids,
                 std::uint64_t token_count);
        void compact(int month);
    };

    void compact_trigrams(int month);

    std::size_t vocab_size_ = 0;
    int months_ = 0;
    std::vector<std::uint64_t> freq_;
    std::vector<std::uint64_t> month_totals_;
    std::vector<std::vector<Trigram>> trigrams_;  // per month, deduped lazily
    std::vector<std::size_t> trigrams_deduped_;
    SocialAccumulator user_, subreddit_, thread_;
};

struct FrequencySeries {
    std::vector<std::optional<double>> p;        // relative frequency, (0,1]
    std::vector<std::optional<double>> log10_f;  // log10(p); undefined for zero-count months
};

FrequencySeries relative_frequency_series(const CountTables& tables, std::size_t word_index);

// CSV persistence: one matrix file per table kind with the month totals as a
// reserved "__total__" record, plus token-mass histograms per social kind.
void write_tables(const CountTables& tables, const std::string& workdir);
CountTables read_tables(const std::string& workdir);

extern const char* const kFrequencyFile;
extern const char* const kContextsFile;
extern const char* const kSocialFiles[3];      // user, subreddit, thread
extern const char* const kUnitTokenFiles[3];

}  // namespace lexdyn::counts
