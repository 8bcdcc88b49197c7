#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lexdyn/common.hpp"

namespace lexdyn::ingest {

struct RawComment {
    std::string author;
    std::string subreddit;
    std::string thread;  // link_id in the dump format
    std::int64_t created_utc = 0;
    std::string body;
    int month = 0;  // 1-based index within the configured window
};

enum class SkipReason { none, malformed, missing_field, outside_window, empty_body };

struct ParseResult {
    std::optional<RawComment> comment;
    SkipReason skip = SkipReason::none;
};

// One newline-delimited record with fields author, subreddit, link_id,
// created_utc, body. Malformed records are skippable, never fatal.
ParseResult parse_comment_line(std::string_view line, const MonthWindow& window);

struct ExclusionLists {
    std::unordered_set<std::string> bot_authors;       // lowercased ids
    std::unordered_set<std::string> excluded_subreddits;
};

ExclusionLists load_exclusion_lists(const std::optional<std::string>& bots_path,
                                    const std::optional<std::string>& subreddits_path);

// True = keep. Drops comments from listed bot authors or listed subreddits.
bool filter_comment(const RawComment& c, const ExclusionLists& lists);

struct NormalizationRules {
    int repeat_cap = 3;
    std::string subreddit_placeholder = "r/SUB";
    std::string user_placeholder = "u/USER";
    std::string url_placeholder = "URL";
    std::string sentence_start = "<S>";
    std::string sentence_end = "</S>";
};

// Lowercased, punctuation-stripped tokens grouped by sentence. Placeholders
// keep their uppercase spelling, which no user token can produce.
std::vector<std::vector<std::string>> normalize_tokens(std::string_view body,
                                                       const NormalizationRules& rules);

struct Vocabulary {
    std::vector<std::string> words;            // rank order (descending count, ties lexicographic)
    std::vector<std::uint64_t> counts;         // total corpus count per ranked word
    std::unordered_map<std::string, std::uint32_t> index;  // word -> rank-0 index
    std::string unk_token = "UNK";

    bool contains(std::string_view w) const { return index.count(std::string(w)) > 0; }
    std::size_t size() const { return words.size(); }
};

Vocabulary build_vocabulary(const std::unordered_map<std::string, std::uint64_t>& counts,
                            std::size_t k);

// OOV tokens replaced by UNK in place; sequence length never changes.
void apply_vocabulary(std::vector<std::string>& tokens, const Vocabulary& v);

void write_vocabulary_tsv(const Vocabulary& v, const std::string& path);
Vocabulary read_vocabulary_tsv(const std::string& path);

// True for reserved non-word tokens (placeholders and UNK).
bool is_reserved_token(std::string_view token, const NormalizationRules& rules);

struct IngestStats {
    std::uint64_t lines_read = 0;
    std::uint64_t malformed = 0;
    std::uint64_t missing_field = 0;
    std::uint64_t outside_window = 0;
    std::uint64_t empty_body = 0;
    std::uint64_t dropped_bot = 0;
    std::uint64_t dropped_subreddit = 0;
    std::uint64_t comments_kept = 0;
    std::uint64_t sentences = 0;
    std::uint64_t tokens = 0;
};

}  // namespace lexdyn::ingest
