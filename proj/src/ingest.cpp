#include "lexdyn/ingest.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

#include "lexdyn/csvio.hpp"

namespace lexdyn::ingest {

namespace {

bool ascii_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::ispunct(u) != 0;
}

char ascii_lower(char c) {
    const auto u = static_cast<unsigned char>(c);
    return static_cast<char>(std::tolower(u));
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (ascii_lower(s[i]) != prefix[i]) return false;
    return true;
}

bool looks_like_url(std::string_view tok) {
    return starts_with_ci(tok, "http://") || starts_with_ci(tok, "https://") ||
           starts_with_ci(tok, "www.");
}

bool looks_like_subreddit_ref(std::string_view tok) {
    return tok.size() > 2 && (tok[0] == 'r' || tok[0] == 'R') && tok[1] == '/';
}

bool looks_like_user_ref(std::string_view tok) {
    return tok.size() > 2 && (tok[0] == 'u' || tok[0] == 'U') && tok[1] == '/';
}

// Lowercase, trim edge punctuation, cap repeated characters. Interior
// apostrophes and hyphens survive, so "that's" stays one token.
std::string clean_word(std::string_view raw, int repeat_cap) {
    std::size_t begin = 0, end = raw.size();
    while (begin < end && ascii_punct(raw[begin])) ++begin;
    while (end > begin && ascii_punct(raw[end - 1])) --end;
    std::string out;
    out.reserve(end - begin);
    char prev = '\0';
    int run = 0;
    for (std::size_t i = begin; i < end; ++i) {
        const char c = ascii_lower(raw[i]);
        if (c == prev) {
            ++run;
        } else {
            prev = c;
            run = 1;
        }
        if (run <= repeat_cap) out.push_back(c);
    }
    return out;
}

bool sentence_terminator(char c) { return c == '.' || c == '!' || c == '?' || c == '\n'; }

}  // namespace

ParseResult parse_comment_line(std::string_view line, const MonthWindow& window) {
    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) return {std::nullopt, SkipReason::malformed};

    for (const char* field : {"author", "subreddit", "link_id", "created_utc", "body"})
        if (!record.contains(field)) return {std::nullopt, SkipReason::missing_field};

    RawComment c;
    try {
        c.author = record["author"].get<std::string>();
        c.subreddit = record["subreddit"].get<std::string>();
        c.thread = record["link_id"].get<std::string>();
        const auto& ts = record["created_utc"];
        if (ts.is_number_integer()) {
            c.created_utc = ts.get<std::int64_t>();
        } else if (ts.is_string()) {
            c.created_utc = csv::parse_int(ts.get<std::string>());
        } else {
            return {std::nullopt, SkipReason::malformed};
        }
        c.body = record["body"].get<std::string>();
    } catch (const std::exception&) {
        return {std::nullopt, SkipReason::malformed};
    }

    const auto month = window.index_of(c.created_utc);
    if (!month) return {std::nullopt, SkipReason::outside_window};
    c.month = *month;
    if (c.body.empty()) return {std::nullopt, SkipReason::empty_body};
    return {std::move(c), SkipReason::none};
}

ExclusionLists load_exclusion_lists(const std::optional<std::string>& bots_path,
                                    const std::optional<std::string>& subreddits_path) {
    ExclusionLists lists;
    auto load = [](const std::string& path, std::unordered_set<std::string>& into) {
        for (const auto& line : csv::read_lines(path)) {
            std::string id;
            id.reserve(line.size());
            for (const char c : line) id.push_back(ascii_lower(c));
            while (!id.empty() && (id.back() == ' ' || id.back() == '\t')) id.pop_back();
            if (!id.empty()) into.insert(id);
        }
    };
    if (bots_path) load(*bots_path, lists.bot_authors);
    if (subreddits_path) load(*subreddits_path, lists.excluded_subreddits);
    return lists;
}

bool filter_comment(const RawComment& c, const ExclusionLists& lists) {
    std::string author, subreddit;
    for (const char ch : c.author) author.push_back(ascii_lower(ch));
    for (const char ch : c.subreddit) subreddit.push_back(ascii_lower(ch));
    if (lists.bot_authors.count(author)) return false;
    if (lists.excluded_subreddits.count(subreddit)) return false;
    return true;
}

std::vector<std::vector<std::string>> normalize_tokens(std::string_view body,
                                                       const NormalizationRules& rules) {
    std::vector<std::vector<std::string>> sentences;
    std::vector<std::string> current;

    auto flush_sentence = [&] {
        if (!current.empty()) {
            sentences.push_back(std::move(current));
            current.clear();
        }
    };

    std::size_t i = 0;
    const std::size_t n = body.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(body[i])) &&
               !sentence_terminator(body[i]))
            ++i;
        if (i < n && sentence_terminator(body[i])) {
            flush_sentence();
            ++i;
            continue;
        }
        if (i >= n) break;

        std::size_t begin = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(body[i]))) ++i;
        std::string_view raw = body.substr(begin, i - begin);

        // Terminal punctuation attached to the word ends the sentence. Edge
        // punctuation comes off before the placeholder checks so that the
        // output tokens are fixed points of normalization.
        bool ends_sentence = false;
        while (!raw.empty() && ascii_punct(raw.back())) {
            if (raw.back() == '.' || raw.back() == '!' || raw.back() == '?') ends_sentence = true;
            raw.remove_suffix(1);
        }
        while (!raw.empty() && ascii_punct(raw.front())) raw.remove_prefix(1);

        if (!raw.empty()) {
            if (raw == rules.url_placeholder || raw == rules.subreddit_placeholder ||
                raw == rules.user_placeholder) {
                current.emplace_back(raw);  // already-normalized placeholders are fixed points
            } else {
                // Classify the cleaned form so every emitted token is itself a
                // fixed point of normalization.
                std::string word = clean_word(raw, rules.repeat_cap);
                if (looks_like_url(word)) {
                    current.push_back(rules.url_placeholder);
                } else if (looks_like_subreddit_ref(word)) {
                    current.push_back(rules.subreddit_placeholder);
                } else if (looks_like_user_ref(word)) {
                    current.push_back(rules.user_placeholder);
                } else if (!word.empty()) {
                    current.push_back(std::move(word));
                }
            }
        }
        if (ends_sentence) flush_sentence();
    }
    flush_sentence();
    return sentences;
}

Vocabulary build_vocabulary(const std::unordered_map<std::string, std::uint64_t>& counts,
                            std::size_t k) {
    if (counts.empty()) throw std::invalid_argument("build_vocabulary: empty counts");
    if (k < 1) throw std::invalid_argument("build_vocabulary: k < 1");

    std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > k) ranked.resize(k);

    Vocabulary v;
    v.words.reserve(ranked.size());
    v.counts.reserve(ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        v.index.emplace(ranked[i].first, static_cast<std::uint32_t>(i));
        v.words.push_back(std::move(ranked[i].first));
        v.counts.push_back(ranked[i].second);
    }
    return v;
}

void apply_vocabulary(std::vector<std::string>& tokens, const Vocabulary& v) {
    for (auto& tok : tokens)
        if (!v.index.count(tok)) tok = v.unk_token;
}

void write_vocabulary_tsv(const Vocabulary& v, const std::string& path) {
    csv::Writer out(path);
    for (std::size_t i = 0; i < v.words.size(); ++i)
        out.raw_line(std::to_string(i + 1) + "\t" + v.words[i] + "\t" +
                     std::to_string(v.counts[i]));
}

Vocabulary read_vocabulary_tsv(const std::string& path) {
    Vocabulary v;
    for (const auto& line : csv::read_lines(path)) {
        if (line.empty()) continue;
        const auto cells = csv::split(line, '\t');
        if (cells.size() != 3) throw config_error("bad vocabulary line: " + line);
        v.index.emplace(std::string(cells[1]), static_cast<std::uint32_t>(v.words.size()));
        v.words.emplace_back(cells[1]);
        v.counts.push_back(static_cast<std::uint64_t>(csv::parse_int(cells[2])));
    }
    return v;
}

bool is_reserved_token(std::string_view token, const NormalizationRules& rules) {
    return token == rules.subreddit_placeholder || token == rules.user_placeholder ||
           token == rules.url_placeholder || token == "UNK";
}

}  // namespace lexdyn::ingest
