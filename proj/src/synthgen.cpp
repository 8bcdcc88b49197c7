#include "lexdyn/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "lexdyn/csvio.hpp"
#include "lexdyn/ingest.hpp"
#include "lexdyn/rng.hpp"

namespace lexdyn::synthgen {

void validate(const SynthConfig& cfg) {
    auto require = [](bool ok, const std::string& field) {
        if (!ok) throw config_error("synth config violation: " + field);
    };
    require(cfg.months >= 1, "months >= 1");
    require(cfg.users >= 1, "users >= 1");
    require(cfg.subreddits >= 1, "subreddits >= 1");
    require(cfg.threads_per_subreddit_month >= 1, "threads_per_subreddit_month >= 1");
    require(cfg.tokens_per_month >= 1, "tokens_per_month >= 1");
    require(cfg.background_vocab >= 1 && cfg.background_vocab <= 100000,
            "background_vocab in [1, 100000]");
    require(cfg.zipf_exponent > 0.0, "zipf_exponent > 0");
    require(cfg.comment_mean_tokens >= 1.0, "comment_mean_tokens >= 1");
    require(cfg.sentence_mean_tokens >= 1.0, "sentence_mean_tokens >= 1");
    parse_year_month(cfg.window_start);

    const ingest::NormalizationRules rules;
    double worst_total = 0.0;
    for (int t = 1; t <= cfg.months; ++t) {
        double total = 0.0;
        for (const auto& spec : cfg.injected) total += target_frequency(spec, t);
        worst_total = std::max(worst_total, total);
    }
    if (worst_total > 0.2)
        throw config_error("synth config violation: injected target frequencies exceed capacity");

    for (const auto& spec : cfg.injected) {
        require(!spec.word.empty(), "inject word nonempty");
        require(spec.scale > 0.0, "inject." + spec.word + ".scale > 0");
        require(spec.amplitude > 0.0, "inject." + spec.word + ".amplitude > 0");
        require(spec.floor >= 0.0, "inject." + spec.word + ".floor >= 0");
        require(spec.floor + spec.amplitude <= 1e-3,
                "inject." + spec.word + ": peak frequency must be <= 1e-3");
        require(spec.template_frames >= 1, "inject." + spec.word + ".frames >= 1");
        for (const double f :
             {spec.user_fraction, spec.subreddit_fraction, spec.thread_fraction})
            require(f > 0.0 && f <= 1.0, "inject." + spec.word + " fractions in (0,1]");
        const auto sentences = ingest::normalize_tokens(spec.word, rules);
        require(sentences.size() == 1 && sentences[0].size() == 1 &&
                    sentences[0][0] == spec.word,
                "inject." + spec.word + ": word must survive normalization unchanged");
    }
}

double target_frequency(const InjectedWordSpec& spec, int month) {
    const double z = (static_cast<double>(month) - spec.center) / spec.scale;
    if (spec.trajectory == InjectedWordSpec::Trajectory::growth)
        return spec.floor + spec.amplitude / (1.0 + std::exp(-z));
    const double e = std::exp(-std::fabs(z));
    const double density = e / ((1.0 + e) * (1.0 + e));  // peak 1/4 at z = 0
    return spec.floor + spec.amplitude * 4.0 * density;
}

std::string background_word(int rank) {
    // Decimal digits mapped to position-shifted letters; adjacent repeats are
    // impossible, so the repeat-cap normalizer never rewrites these words.
    std::string digits = std::to_string(rank);
    std::string out = "w";
    for (std::size_t i = 0; i < digits.size(); ++i)
        out.push_back(static_cast<char>('a' + ((digits[i] - '0') + 7 * (i + 1)) % 26));
    return out;
}

namespace {

struct Comment {
    int user = 0, subreddit = 0, thread_index = 0;
    // Tokens: >= 0 background Zipf rank, -(i+1) injected spec i.
    std::vector<std::vector<int>> sentences;
    std::size_t tokens = 0;
};

struct ZipfSampler {
    std::vector<double> cumulative;

    explicit ZipfSampler(int vocab, double exponent) {
        cumulative.resize(vocab);
        double total = 0.0;
        for (int r = 0; r < vocab; ++r) {
            total += std::pow(static_cast<double>(r + 1), -exponent);
            cumulative[r] = total;
        }
    }

    int sample(Rng& rng) const {
        const double u = rng.next_double() * cumulative.back();
        return static_cast<int>(std::lower_bound(cumulative.begin(), cumulative.end(), u) -
                                cumulative.begin());
    }
};

// Fixed per-spec unit subsets, independent of the month.
std::vector<bool> allowed_mask(std::uint64_t seed, std::uint64_t stream, int n, double fraction) {
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng = Rng::derive(seed, stream);
    rng.shuffle(ids);
    const int allowed = std::max(1, static_cast<int>(std::ceil(fraction * n)));
    std::vector<bool> mask(n, false);
    for (int i = 0; i < allowed && i < n; ++i) mask[ids[i]] = true;
    return mask;
}

}  // namespace

void generate_corpus(const SynthConfig& cfg, const std::string& corpus_path) {
    validate(cfg);
    const auto [start_year, start_month] = parse_year_month(cfg.window_start);
    const MonthWindow window{start_year, start_month, cfg.months};
    const ZipfSampler zipf(cfg.background_vocab, cfg.zipf_exponent);

    const std::size_t n_injected = cfg.injected.size();
    std::vector<std::vector<bool>> allow_user(n_injected), allow_sub(n_injected),
        allow_thread(n_injected);
    std::vector<std::vector<std::pair<int, int>>> frames(n_injected);
    for (std::size_t i = 0; i < n_injected; ++i) {
        const auto& spec = cfg.injected[i];
        allow_user[i] = allowed_mask(cfg.seed, 0x1000 + i, cfg.users, spec.user_fraction);
        allow_sub[i] = allowed_mask(cfg.seed, 0x2000 + i, cfg.subreddits, spec.subreddit_fraction);
        allow_thread[i] = allowed_mask(cfg.seed, 0x3000 + i, cfg.threads_per_subreddit_month,
                                       spec.thread_fraction);
        if (spec.context == InjectedWordSpec::ContextRegime::template_bound) {
            Rng rng = Rng::derive(cfg.seed, 0x4000 + i);
            const int top = std::min(cfg.background_vocab, 200);
            for (int j = 0; j < spec.template_frames; ++j) {
                const int left = static_cast<int>(rng.next_below(top));
                const int right = static_cast<int>(rng.next_below(top));
                frames[i].push_back({left, right});
            }
        }
    }

    csv::Writer out(corpus_path);

    for (int month = 1; month <= cfg.months; ++month) {
        Rng rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(month));

        // Background comments up to the monthly token budget.
        std::vector<Comment> comments;
        std::size_t month_tokens = 0;
        const double p_comment = 1.0 / cfg.comment_mean_tokens;
        const double p_sentence = 1.0 / cfg.sentence_mean_tokens;
        while (month_tokens < static_cast<std::size_t>(cfg.tokens_per_month)) {
            Comment c;
            c.user = static_cast<int>(rng.next_below(cfg.users));
            c.subreddit = static_cast<int>(rng.next_below(cfg.subreddits));
            c.thread_index = static_cast<int>(rng.next_below(cfg.threads_per_subreddit_month));
            std::size_t remaining = 1 + rng.next_geometric(p_comment);
            c.tokens = remaining;
            while (remaining > 0) {
                std::size_t len = std::min<std::size_t>(remaining, 1 + rng.next_geometric(p_sentence));
                std::vector<int> sentence(len);
                for (auto& tok : sentence) tok = zipf.sample(rng);
                c.sentences.push_back(std::move(sentence));
                remaining -= len;
            }
            month_tokens += c.tokens;
            comments.push_back(std::move(c));
        }

        // Injected occurrences: counts multinomial around the targets via
        // sequential conditional binomials over the realized token total.
        double remaining_mass = 1.0;
        std::uint64_t remaining_tokens = month_tokens;
        for (std::size_t i = 0; i < n_injected; ++i) {
            const auto& spec = cfg.injected[i];
            const double target = target_frequency(spec, month);
            const double conditional = std::min(1.0, target / remaining_mass);
            const std::uint64_t count = rng.next_binomial(remaining_tokens, conditional);
            remaining_mass = std::max(remaining_mass - target, 1e-12);
            remaining_tokens -= count;

            if (count == 0) continue;
            std::vector<int> compliant;
            for (std::size_t c = 0; c < comments.size(); ++c)
                if (allow_user[i][comments[c].user] && allow_sub[i][comments[c].subreddit] &&
                    allow_thread[i][comments[c].thread_index])
                    compliant.push_back(static_cast<int>(c));
            if (compliant.empty())
                throw config_error("synth capacity: no compliant comments for " + spec.word +
                                   " in month " + std::to_string(month));

            for (std::uint64_t occurrence = 0; occurrence < count; ++occurrence) {
                if (spec.context == InjectedWordSpec::ContextRegime::template_bound) {
                    Comment& c = comments[compliant[rng.next_below(compliant.size())]];
                    const auto& [left, right] = frames[i][rng.next_below(frames[i].size())];
                    c.sentences.push_back({left, -static_cast<int>(i) - 1, right});
                } else {
                    bool placed = false;
                    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                        Comment& c = comments[compliant[rng.next_below(compliant.size())]];
                        auto& sentence = c.sentences[rng.next_below(c.sentences.size())];
                        auto& slot = sentence[rng.next_below(sentence.size())];
                        if (slot >= 0) {
                            slot = -static_cast<int>(i) - 1;
                            placed = true;
                        }
                    }
                    if (!placed)
                        throw config_error("synth capacity: no open slot for " + spec.word +
                                           " in month " + std::to_string(month));
                }
            }
        }

        // Serialize in comment order with evenly spaced timestamps.
        const std::int64_t month_begin = window.month_start_utc(month);
        const std::int64_t month_seconds = window.month_start_utc(month + 1) - month_begin;
        for (std::size_t c = 0; c < comments.size(); ++c) {
            const Comment& comment = comments[c];
            std::string body;
            for (const auto& sentence : comment.sentences) {
                for (std::size_t k = 0; k < sentence.size(); ++k) {
                    if (!body.empty() && body.back() != ' ') body += ' ';
                    body += sentence[k] >= 0 ? background_word(sentence[k])
                                             : cfg.injected[-sentence[k] - 1].word;
                }
                body += '.';
                body += ' ';
            }
            if (!body.empty()) body.pop_back();

            nlohmann::json record;
            record["author"] = "user" + std::to_string(comment.user);
            record["subreddit"] = "sub" + std::to_string(comment.subreddit);
            record["link_id"] = "t3_" + std::to_string(comment.subreddit) + "_" +
                                std::to_string(month) + "_" +
                                std::to_string(comment.thread_index);
            record["created_utc"] =
                month_begin + static_cast<std::int64_t>(
                                  (static_cast<double>(c) + 1.0) /
                                  (static_cast<double>(comments.size()) + 1.0) * month_seconds);
            record["body"] = body;
            out.raw_line(record.dump());
        }
    }
}

std::vector<wordsets::WordLabel> oracle_labels(const SynthConfig& cfg) {
    std::vector<wordsets::WordLabel> labels;
    for (const auto& spec : cfg.injected) {
        wordsets::WordLabel l;
        l.word = spec.word;
        if (spec.trajectory == InjectedWordSpec::Trajectory::growth) {
            l.label = wordsets::Label::growth;
        } else {
            l.label = wordsets::Label::decline;
            l.split = std::clamp(static_cast<int>(std::lround(spec.center)), 1, cfg.months);
        }
        labels.push_back(std::move(l));
    }
    std::sort(labels.begin(), labels.end(),
              [](const wordsets::WordLabel& a, const wordsets::WordLabel& b) {
                  return a.word < b.word;
              });
    return labels;
}

void write_word_list(const SynthConfig& cfg, const std::string& path) {
    csv::Writer out(path);
    for (const auto& spec : cfg.injected) out.raw_line(spec.word);
}

namespace {

const char* trajectory_name(InjectedWordSpec::Trajectory t) {
    return t == InjectedWordSpec::Trajectory::growth ? "growth" : "decline";
}

const char* context_name(InjectedWordSpec::ContextRegime c) {
    return c == InjectedWordSpec::ContextRegime::open ? "open" : "template";
}

}  // namespace

SynthConfig read_synth_config(const std::string& path) {
    SynthConfig cfg;
    std::map<std::string, std::size_t> spec_index;

    for (const auto& line : csv::read_lines(path)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error("synth config: expected key=value: " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);

        if (key == "seed") cfg.seed = static_cast<std::uint64_t>(csv::parse_int(value));
        else if (key == "months") cfg.months = static_cast<int>(csv::parse_int(value));
        else if (key == "users") cfg.users = static_cast<int>(csv::parse_int(value));
        else if (key == "subreddits") cfg.subreddits = static_cast<int>(csv::parse_int(value));
        else if (key == "threads_per_subreddit_month")
            cfg.threads_per_subreddit_month = static_cast<int>(csv::parse_int(value));
        else if (key == "tokens_per_month")
            cfg.tokens_per_month = static_cast<int>(csv::parse_int(value));
        else if (key == "background_vocab")
            cfg.background_vocab = static_cast<int>(csv::parse_int(value));
        else if (key == "zipf_exponent") cfg.zipf_exponent = csv::parse_double(value);
        else if (key == "comment_mean_tokens") cfg.comment_mean_tokens = csv::parse_double(value);
        else if (key == "sentence_mean_tokens")
            cfg.sentence_mean_tokens = csv::parse_double(value);
        else if (key == "window_start") cfg.window_start = value;
        else if (key.rfind("inject.", 0) == 0) {
            const auto rest = key.substr(7);
            const auto dot = rest.rfind('.');
            if (dot == std::string::npos)
                throw config_error("synth config: bad inject key: " + key);
            const std::string word = rest.substr(0, dot);
            const std::string field = rest.substr(dot + 1);
            if (!spec_index.count(word)) {
                spec_index.emplace(word, cfg.injected.size());
                InjectedWordSpec spec;
                spec.word = word;
                cfg.injected.push_back(spec);
            }
            InjectedWordSpec& spec = cfg.injected[spec_index[word]];
            if (field == "trajectory") {
                if (value == "growth") spec.trajectory = InjectedWordSpec::Trajectory::growth;
                else if (value == "decline") spec.trajectory = InjectedWordSpec::Trajectory::decline;
                else throw config_error("synth config: bad trajectory: " + value);
            } else if (field == "center") spec.center = csv::parse_double(value);
            else if (field == "scale") spec.scale = csv::parse_double(value);
            else if (field == "amplitude") spec.amplitude = csv::parse_double(value);
            else if (field == "floor") spec.floor = csv::parse_double(value);
            else if (field == "context") {
                if (value == "open") spec.context = InjectedWordSpec::ContextRegime::open;
                else if (value == "template")
                    spec.context = InjectedWordSpec::ContextRegime::template_bound;
                else throw config_error("synth config: bad context: " + value);
            } else if (field == "frames") spec.template_frames = static_cast<int>(csv::parse_int(value));
            else if (field == "user_fraction") spec.user_fraction = csv::parse_double(value);
            else if (field == "subreddit_fraction")
                spec.subreddit_fraction = csv::parse_double(value);
            else if (field == "thread_fraction") spec.thread_fraction = csv::parse_double(value);
            else throw config_error("synth config: unknown inject field: " + field);
        } else {
            throw config_error("synth config: unknown key: " + key);
        }
    }
    validate(cfg);
    return cfg;
}

void write_synth_config(const SynthConfig& cfg, const std::string& path) {
    csv::Writer out(path);
    out.raw_line("seed=" + std::to_string(cfg.seed));
    out.raw_line("months=" + std::to_string(cfg.months));
    out.raw_line("users=" + std::to_string(cfg.users));
    out.raw_line("subreddits=" + std::to_string(cfg.subreddits));
    out.raw_line("threads_per_subreddit_month=" + std::to_string(cfg.threads_per_subreddit_month));
    out.raw_line("tokens_per_month=" + std::to_string(cfg.tokens_per_month));
    out.raw_line("background_vocab=" + std::to_string(cfg.background_vocab));
    out.raw_line("zipf_exponent=" + csv::format_double(cfg.zipf_exponent));
    out.raw_line("comment_mean_tokens=" + csv::format_double(cfg.comment_mean_tokens));
    out.raw_line("sentence_mean_tokens=" + csv::format_double(cfg.sentence_mean_tokens));
    out.raw_line("window_start=" + cfg.window_start);
    for (const auto& spec : cfg.injected) {
        const std::string prefix = "inject." + spec.word + ".";
        out.raw_line(prefix + "trajectory=" + trajectory_name(spec.trajectory));
        out.raw_line(prefix + "center=" + csv::format_double(spec.center));
        out.raw_line(prefix + "scale=" + csv::format_double(spec.scale));
        out.raw_line(prefix + "amplitude=" + csv::format_double(spec.amplitude));
        out.raw_line(prefix + "floor=" + csv::format_double(spec.floor));
        out.raw_line(prefix + "context=" + context_name(spec.context));
        out.raw_line(prefix + "frames=" + std::to_string(spec.template_frames));
        out.raw_line(prefix + "user_fraction=" + csv::format_double(spec.user_fraction));
        out.raw_line(prefix + "subreddit_fraction=" + csv::format_double(spec.subreddit_fraction));
        out.raw_line(prefix + "thread_fraction=" + csv::format_double(spec.thread_fraction));
    }
}

}  // namespace lexdyn::synthgen
