#include "lexdyn/counts.hpp"

#include <algorithm>
#include <cmath>

#include "lexdyn/csvio.hpp"
#include "lexdyn/rng.hpp"

namespace lexdyn::counts {

const char* const kFrequencyFile = "frequency.csv";
const char* const kContextsFile = "contexts.csv";
const char* const kSocialFiles[3] = {"social_user.csv", "social_subreddit.csv",
                                     "social_thread.csv"};
const char* const kUnitTokenFiles[3] = {"unit_tokens_user.csv", "unit_tokens_subreddit.csv",
                                        "unit_tokens_thread.csv"};

std::uint32_t TokenMapper::map(std::string_view token) const {
    if (token == rules.subreddit_placeholder) return kSubId;
    if (token == rules.user_placeholder) return kUserId;
    if (token == rules.url_placeholder) return kUrlId;
    if (token == vocab->unk_token) return kUnkId;
    const auto it = vocab->index.find(std::string(token));
    if (it == vocab->index.end()) return kUnkId;
    return it->second + kReservedTokens;
}

CountAccumulator::CountAccumulator(std::size_t vocab_size, int months)
    : vocab_size_(vocab_size), months_(months) {
    if (months < 1) throw std::invalid_argument("CountAccumulator: months < 1");
    freq_.assign(vocab_size * static_cast<std::size_t>(months), 0);
    month_totals_.assign(months, 0);
    trigrams_.resize(months);
    trigrams_deduped_.assign(months, 0);
    for (auto* social : {&user_, &subreddit_, &thread_}) {
        social->pairs.resize(months);
        social->deduped_size.assign(months, 0);
        social->unit_tokens.resize(months);
    }
}

namespace {

template <typename T>
void sort_unique(std::vector<T>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

void CountAccumulator::SocialAccumulator::add(int month, std::uint64_t unit,
                                              std::span<const std::uint32_t> ids,
                                              std::uint64_t token_count) {
    auto& vec = pairs[month - 1];
    for (const std::uint32_t id : ids)
        if (id >= kReservedTokens) vec.push_back({id, unit});
    unit_tokens[month - 1][unit] += token_count;
    if (vec.size() > 2 * deduped_size[month - 1] + 65536) compact(month);
}

void CountAccumulator::SocialAccumulator::compact(int month) {
    sort_unique(pairs[month - 1]);
    deduped_size[month - 1] = pairs[month - 1].size();
}

void CountAccumulator::compact_trigrams(int month) {
    sort_unique(trigrams_[month - 1]);
    trigrams_deduped_[month - 1] = trigrams_[month - 1].size();
}

void CountAccumulator::add_sentence(int month, std::string_view user, std::string_view subreddit,
                                    std::string_view thread,
                                    std::span<const std::uint32_t> token_ids) {
    if (month < 1 || month > months_) throw std::invalid_argument("add_sentence: month out of window");
    if (token_ids.empty()) return;

    month_totals_[month - 1] += token_ids.size();
    for (const std::uint32_t id : token_ids)
        if (id >= kReservedTokens)
            ++freq_[(id - kReservedTokens) * static_cast<std::size_t>(months_) + (month - 1)];

    // Trigrams over the padded sequence <S> s1 ... sn </S>, one sentinel each side.
    auto& tri = trigrams_[month - 1];
    const std::size_t n = token_ids.size();
    auto at = [&](std::size_t i) -> std::uint32_t {
        if (i == 0) return kStartId;
        if (i == n + 1) return kEndId;
        return token_ids[i - 1];
    };
    for (std::size_t i = 0; i + 2 <= n + 1; ++i) tri.push_back({at(i), at(i + 1), at(i + 2)});
    if (tri.size() > 2 * trigrams_deduped_[month - 1] + 65536) compact_trigrams(month);

    user_.add(month, stable_hash64(user), token_ids, token_ids.size());
    subreddit_.add(month, stable_hash64(subreddit), token_ids, token_ids.size());
    thread_.add(month, stable_hash64(thread), token_ids, token_ids.size());
}

void CountAccumulator::merge(CountAccumulator&& other) {
    if (other.vocab_size_ != vocab_size_ || other.months_ != months_)
        throw std::invalid_argument("merge: accumulator shape mismatch");

    for (std::size_t i = 0; i < freq_.size(); ++i) freq_[i] += other.freq_[i];
    for (int t = 0; t < months_; ++t) month_totals_[t] += other.month_totals_[t];

    for (int t = 0; t < months_; ++t) {
        auto& mine = trigrams_[t];
        auto& theirs = other.trigrams_[t];
        mine.insert(mine.end(), theirs.begin(), theirs.end());
        theirs.clear();
        theirs.shrink_to_fit();
    }

    auto merge_social = [this](SocialAccumulator& mine, SocialAccumulator& theirs) {
        for (int t = 0; t < months_; ++t) {
            auto& mv = mine.pairs[t];
            auto& tv = theirs.pairs[t];
            mv.insert(mv.end(), tv.begin(), tv.end());
            tv.clear();
            tv.shrink_to_fit();
            for (const auto& [unit, tokens] : theirs.unit_tokens[t])
                mine.unit_tokens[t][unit] += tokens;
            theirs.unit_tokens[t].clear();
        }
    };
    merge_social(user_, other.user_);
    merge_social(subreddit_, other.subreddit_);
    merge_social(thread_, other.thread_);
}

CountTables CountAccumulator::finalize(const ingest::Vocabulary& vocab) const {
    if (vocab.size() != vocab_size_) throw std::invalid_argument("finalize: vocabulary mismatch");

    CountTables tables;
    tables.months = months_;
    tables.words = vocab.words;
    tables.freq = freq_;
    tables.month_totals = month_totals_;
    tables.contexts.assign(freq_.size(), 0);
    tables.month_distinct_trigrams.assign(months_, 0);

    for (int t = 0; t < months_; ++t) {
        std::vector<Trigram> tri = trigrams_[t];
        sort_unique(tri);
        tables.month_distinct_trigrams[t] = tri.size();
        // A word's context count is the number of distinct trigrams in which
        // it occupies any position; a doubled word inside one trigram still
        // counts that trigram once.
        for (const Trigram& g : tri) {
            std::uint32_t seen[3];
            int n_seen = 0;
            for (const std::uint32_t id : {g.a, g.b, g.c}) {
                if (id < kReservedTokens) continue;
                bool dup = false;
                for (int s = 0; s < n_seen; ++s) dup = dup || seen[s] == id;
                if (dup) continue;
                seen[n_seen++] = id;
                ++tables.contexts[(id - kReservedTokens) * static_cast<std::size_t>(months_) + t];
            }
        }
    }

    auto finalize_social = [&](const SocialAccumulator& acc, CountTables::SocialKind& out) {
        out.distinct_units.assign(freq_.size(), 0);
        out.active_units.assign(months_, 0);
        out.token_histogram.resize(months_);
        for (int t = 0; t < months_; ++t) {
            std::vector<WordUnit> pairs = acc.pairs[t];
            sort_unique(pairs);
            for (const WordUnit& wu : pairs)
                ++out.distinct_units[(wu.word - kReservedTokens) * static_cast<std::size_t>(months_) + t];

            out.active_units[t] = acc.unit_tokens[t].size();
            std::unordered_map<std::uint64_t, std::uint64_t> histogram;
            for (const auto& [unit, tokens] : acc.unit_tokens[t]) ++histogram[tokens];
            auto& h = out.token_histogram[t];
            h.assign(histogram.begin(), histogram.end());
            std::sort(h.begin(), h.end());
        }
    };
    finalize_social(user_, tables.user);
    finalize_social(subreddit_, tables.subreddit);
    finalize_social(thread_, tables.thread);
    return tables;
}

FrequencySeries relative_frequency_series(const CountTables& tables, std::size_t word_index) {
    if (word_index >= tables.words.size())
        throw std::invalid_argument("relative_frequency_series: word index out of range");
    FrequencySeries s;
    s.p.assign(tables.months, std::nullopt);
    s.log10_f.assign(tables.months, std::nullopt);
    for (int t = 1; t <= tables.months; ++t) {
        const std::uint64_t c = tables.freq_at(word_index, t);
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(tables.month_totals[t - 1]);
        s.p[t - 1] = p;
        s.log10_f[t - 1] = std::log10(p);
    }
    return s;
}

namespace {

void write_matrix(const std::string& path, const CountTables& tables,
                  const std::vector<std::uint64_t>& cells,
                  const std::vector<std::uint64_t>& totals) {
    csv::Writer out(path);
    std::string header = "word";
    for (int t = 1; t <= tables.months; ++t) header += ",month_" + std::to_string(t);
    out.raw_line(header);

    std::string total_row = "__total__";
    for (int t = 0; t < tables.months; ++t) total_row += "," + std::to_string(totals[t]);
    out.raw_line(total_row);

    for (std::size_t w = 0; w < tables.words.size(); ++w) {
        std::string row = tables.words[w];
        for (int t = 1; t <= tables.months; ++t)
            row += "," + std::to_string(cells[tables.cell(w, t)]);
        out.raw_line(row);
    }
}

void read_matrix(const std::string& path, CountTables& tables, std::vector<std::uint64_t>& cells,
                 std::vector<std::uint64_t>& totals, bool establish_words) {
    const auto lines = csv::read_lines(path);
    if (lines.size() < 2) throw config_error("truncated table: " + path);
    const auto header = csv::split(lines[0], ',');
    const int months = static_cast<int>(header.size()) - 1;
    if (months < 1) throw config_error("bad table header: " + path);
    if (establish_words)
        tables.months = months;
    else if (months != tables.months)
        throw config_error("table month mismatch: " + path);

    const auto total_cells = csv::split(lines[1], ',');
    if (total_cells.size() != header.size() || total_cells[0] != "__total__")
        throw config_error("missing __total__ record: " + path);
    totals.assign(months, 0);
    for (int t = 0; t < months; ++t)
        totals[t] = static_cast<std::uint64_t>(csv::parse_int(total_cells[t + 1]));

    const std::size_t n_words = lines.size() - 2;
    if (establish_words) tables.words.reserve(n_words);
    cells.assign(n_words * static_cast<std::size_t>(months), 0);
    for (std::size_t i = 0; i < n_words; ++i) {
        const auto row = csv::split(lines[i + 2], ',');
        if (row.size() != header.size()) throw config_error("ragged table row in: " + path);
        if (establish_words)
            tables.words.emplace_back(row[0]);
        else if (tables.words[i] != row[0])
            throw config_error("table word order mismatch: " + path);
        for (int t = 0; t < months; ++t)
            cells[i * static_cast<std::size_t>(months) + t] =
                static_cast<std::uint64_t>(csv::parse_int(row[t + 1]));
    }
}

void write_histogram(const std::string& path,
                     const std::vector<std::vector<std::pair<std::uint64_t, std::uint64_t>>>& h) {
    csv::Writer out(path);
    out.raw_line("month,tokens,units");
    for (std::size_t t = 0; t < h.size(); ++t)
        for (const auto& [tokens, units] : h[t])
            out.raw_line(std::to_string(t + 1) + "," + std::to_string(tokens) + "," +
                         std::to_string(units));
}

void read_histogram(const std::string& path, int months,
                    std::vector<std::vector<std::pair<std::uint64_t, std::uint64_t>>>& h,
                    std::vector<std::uint64_t>& active) {
    h.assign(months, {});
    active.assign(months, 0);
    const auto lines = csv::read_lines(path);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto row = csv::split(lines[i], ',');
        if (row.size() != 3) throw config_error("bad histogram row in: " + path);
        const int month = static_cast<int>(csv::parse_int(row[0]));
        if (month < 1 || month > months) throw config_error("histogram month out of range: " + path);
        const auto tokens = static_cast<std::uint64_t>(csv::parse_int(row[1]));
        const auto units = static_cast<std::uint64_t>(csv::parse_int(row[2]));
        h[month - 1].emplace_back(tokens, units);
        active[month - 1] += units;
    }
}

}  // namespace

void write_tables(const CountTables& tables, const std::string& workdir) {
    write_matrix(workdir + "/" + kFrequencyFile, tables, tables.freq, tables.month_totals);
    write_matrix(workdir + "/" + kContextsFile, tables, tables.contexts,
                 tables.month_distinct_trigrams);
    const CountTables::SocialKind* kinds[3] = {&tables.user, &tables.subreddit, &tables.thread};
    for (int k = 0; k < 3; ++k) {
        write_matrix(workdir + "/" + kSocialFiles[k], tables, kinds[k]->distinct_units,
                     kinds[k]->active_units);
        write_histogram(workdir + "/" + kUnitTokenFiles[k], kinds[k]->token_histogram);
    }
}

CountTables read_tables(const std::string& workdir) {
    CountTables tables;
    read_matrix(workdir + "/" + kFrequencyFile, tables, tables.freq, tables.month_totals, true);
    read_matrix(workdir + "/" + kContextsFile, tables, tables.contexts,
                tables.month_distinct_trigrams, false);
    CountTables::SocialKind* kinds[3] = {&tables.user, &tables.subreddit, &tables.thread};
    for (int k = 0; k < 3; ++k) {
        std::vector<std::uint64_t> active;
        read_matrix(workdir + "/" + kSocialFiles[k], tables, kinds[k]->distinct_units, active,
                    false);
        std::vector<std::uint64_t> active_from_hist;
        read_histogram(workdir + "/" + kUnitTokenFiles[k], tables.months,
                       kinds[k]->token_histogram, active_from_hist);
        kinds[k]->active_units = std::move(active);
    }
    return tables;
}

}  // namespace lexdyn::counts
