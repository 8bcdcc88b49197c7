#include "lexdyn/wordsets.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "lexdyn/csvio.hpp"
#include "lexdyn/numstats.hpp"

namespace lexdyn::wordsets {

ScreenResult spearman_screen(std::span<const std::vector<std::optional<double>>> series,
                             double pct, double max_undefined_fraction) {
    ScreenResult result;
    const std::size_t n_words = series.size();
    result.rho.assign(n_words, std::nullopt);
    result.exclusion.assign(n_words, ScreenExclusion::none);

    std::vector<double> eligible_rho;
    for (std::size_t w = 0; w < n_words; ++w) {
        const auto& s = series[w];
        std::vector<double> months, values;
        for (std::size_t t = 0; t < s.size(); ++t) {
            if (!s[t]) continue;
            months.push_back(static_cast<double>(t + 1));
            values.push_back(*s[t]);
        }
        const double undefined =
            static_cast<double>(s.size() - values.size()) / static_cast<double>(s.size());
        if (values.size() < 3) {
            result.exclusion[w] = ScreenExclusion::too_few_defined;
            continue;
        }
        if (undefined > max_undefined_fraction) {
            result.exclusion[w] = ScreenExclusion::too_sparse;
            continue;
        }
        const auto rho = stats::spearman_rho(months, values);
        if (!rho) {
            result.exclusion[w] = ScreenExclusion::constant_series;
            continue;
        }
        result.rho[w] = *rho;
        eligible_rho.push_back(*rho);
    }

    result.eligible = eligible_rho.size();
    if (eligible_rho.empty()) return result;
    result.threshold = quantile_of(eligible_rho, pct / 100.0);
    for (std::size_t w = 0; w < n_words; ++w)
        if (result.rho[w] && *result.rho[w] > result.threshold) result.candidates.push_back(w);
    return result;
}

PiecewiseFit piecewise_fit(std::span<const double> series) {
    const int n = static_cast<int>(series.size());
    if (n < 5) throw std::invalid_argument("piecewise_fit: series shorter than 5 months");

    PiecewiseFit best;
    best.sse = std::numeric_limits<double>::infinity();

    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd y(n);
    for (int t = 0; t < n; ++t) y[t] = series[t];
    const double ybar = y.mean();
    const double sst = (y.array() - ybar).matrix().squaredNorm();

    for (int split = 2; split <= n - 2; ++split) {
        for (int t = 1; t <= n; ++t) {
            design(t - 1, 0) = 1.0;
            design(t - 1, 1) = static_cast<double>(std::min(t, split));
            design(t - 1, 2) = static_cast<double>(std::max(0, t - split));
        }
        const Eigen::VectorXd beta =
            (design.transpose() * design).ldlt().solve(design.transpose() * y);
        const double sse = (y - design * beta).squaredNorm();
        if (sse < best.sse - 1e-12 || best.sse == std::numeric_limits<double>::infinity()) {
            best.split = split;
            best.intercept = beta[0];
            best.slope1 = beta[1];
            best.slope2 = beta[2];
            best.sse = sse;
        }
    }
    best.r2 = sst > 0.0 ? 1.0 - best.sse / sst : 0.0;
    return best;
}

namespace {

// Scaled logistic density A * e^{-z} / (s (1+e^{-z})^2), z = (t - mu)/s.
double logistic_shape(double t, double mu, double s) {
    const double z = (t - mu) / s;
    const double e = std::exp(-std::fabs(z));
    const double denom = (1.0 + e) * (1.0 + e);
    return e / (s * denom);  // symmetric in z, so |z| is safe and stable
}

struct GridPoint {
    double mu = 0.0, s = 1.0, amplitude = 0.0, sse = 0.0;
};

GridPoint evaluate_shape(std::span<const double> series, double mu, double s) {
    GridPoint g{mu, s, 0.0, 0.0};
    double gg = 0.0, gy = 0.0;
    const int n = static_cast<int>(series.size());
    std::vector<double> shape(n);
    for (int t = 1; t <= n; ++t) {
        shape[t - 1] = logistic_shape(static_cast<double>(t), mu, s);
        gg += shape[t - 1] * shape[t - 1];
        gy += shape[t - 1] * series[t - 1];
    }
    g.amplitude = gg > 0.0 ? std::max(gy / gg, 1e-300) : 1e-300;
    for (int t = 0; t < n; ++t) {
        const double r = series[t] - g.amplitude * shape[t];
        g.sse += r * r;
    }
    return g;
}

}  // namespace

LogisticTrajectoryFit logistic_trajectory_fit(std::span<const double> series) {
    const int n = static_cast<int>(series.size());
    if (n < 4) throw std::invalid_argument("logistic_trajectory_fit: series shorter than 4");
    double total = 0.0;
    for (const double v : series) total += v;
    if (!(total > 0.0)) throw std::invalid_argument("logistic_trajectory_fit: non-positive mass");

    GridPoint best;
    best.sse = std::numeric_limits<double>::infinity();
    const double t_max = static_cast<double>(n);

    // Coarse grid: mu across the window with margin, s geometric.
    for (double mu = 0.0; mu <= t_max + 1.0; mu += 0.5) {
        for (double s = 0.4; s <= t_max / 2.0; s *= 1.35) {
            const GridPoint g = evaluate_shape(series, mu, s);
            if (g.sse < best.sse) best = g;
        }
    }

    // Local refinement: shrink a centered grid until steps are negligible.
    double mu_step = 0.25, s_factor = 1.2;
    bool converged = false;
    for (int round = 0; round < 60; ++round) {
        GridPoint round_best = best;
        for (int dm = -2; dm <= 2; ++dm) {
            for (int ds = -2; ds <= 2; ++ds) {
                const double mu = best.mu + mu_step * dm;
                const double s = best.s * std::pow(s_factor, ds);
                if (s <= 1e-3) continue;
                const GridPoint g = evaluate_shape(series, mu, s);
                if (g.sse < round_best.sse) round_best = g;
            }
        }
        best = round_best;
        mu_step *= 0.5;
        s_factor = std::sqrt(s_factor);
        if (mu_step < 1e-4 && s_factor - 1.0 < 1e-4) {
            converged = true;
            break;
        }
    }

    LogisticTrajectoryFit fit;
    fit.center = best.mu;
    fit.scale = best.s;
    fit.amplitude = best.amplitude;
    fit.sse = best.sse;
    fit.converged = converged;
    const double mean = total / static_cast<double>(n);
    double sst = 0.0, sumsq = 0.0;
    for (const double v : series) {
        sst += (v - mean) * (v - mean);
        sumsq += v * v;
    }
    // A numerically constant series has no variance to explain.
    fit.r2 = sst > 1e-20 * std::max(sumsq, 1e-300) ? 1.0 - best.sse / sst : 0.0;
    return fit;
}

DeclineSelection select_decline_candidates(std::span<const PiecewiseFit> pfits,
                                           std::span<const LogisticTrajectoryFit> lfits,
                                           int months, double piecewise_pct,
                                           double logistic_pct) {
    if (pfits.size() != lfits.size())
        throw std::invalid_argument("select_decline_candidates: fit list mismatch");
    DeclineSelection out;
    if (pfits.empty()) return out;

    std::vector<double> p_r2(pfits.size()), l_r2(lfits.size());
    for (std::size_t i = 0; i < pfits.size(); ++i) p_r2[i] = pfits[i].r2;
    for (std::size_t i = 0; i < lfits.size(); ++i) l_r2[i] = lfits[i].r2;
    out.piecewise_threshold = quantile_of(p_r2, piecewise_pct / 100.0);
    out.logistic_threshold = quantile_of(l_r2, logistic_pct / 100.0);

    for (std::size_t i = 0; i < pfits.size(); ++i) {
        const bool in_piecewise = pfits[i].slope1 > 0.0 && pfits[i].slope2 < 0.0 &&
                                  pfits[i].r2 > out.piecewise_threshold;
        // The logistic route needs its peak inside the window: a fitted center
        // at the edge is a monotone rise whose decline phase was never seen
        // (mirrors the piecewise split bounds).
        const int rounded_center = static_cast<int>(std::lround(lfits[i].center));
        const bool in_logistic = lfits[i].r2 > out.logistic_threshold &&
                                 rounded_center >= 2 && rounded_center <= months - 2;
        if (!in_piecewise && !in_logistic) continue;

        DeclineCandidate c;
        c.word = i;
        c.piecewise_r2 = pfits[i].r2;
        c.logistic_r2 = lfits[i].r2;
        if (in_piecewise && in_logistic) {
            c.source = DeclineSource::both;
            c.split = pfits[i].split;  // piecewise split takes precedence
        } else if (in_piecewise) {
            c.source = DeclineSource::piecewise;
            c.split = pfits[i].split;
        } else {
            c.source = DeclineSource::logistic;
            c.split = std::clamp(static_cast<int>(std::lround(lfits[i].center)), 1, months);
        }
        out.candidates.push_back(c);
    }
    return out;
}

namespace {

const char* source_name(DeclineSource s) {
    switch (s) {
        case DeclineSource::piecewise: return "piecewise";
        case DeclineSource::logistic: return "logistic";
        case DeclineSource::both: return "both";
    }
    return "?";
}

std::optional<DeclineSource> parse_source(std::string_view s) {
    if (s == "piecewise") return DeclineSource::piecewise;
    if (s == "logistic") return DeclineSource::logistic;
    if (s == "both") return DeclineSource::both;
    return std::nullopt;
}

}  // namespace

AnnotationOutcome apply_annotations(std::span<const GrowthCandidate> growth,
                                    std::span<const DeclineCandidateNamed> decline,
                                    const std::unordered_set<std::string>& allowlist,
                                    const std::unordered_set<std::string>& denylist) {
    for (const auto& w : allowlist)
        if (denylist.count(w))
            throw config_error("word annotated in both allowlist and denylist: " + w);

    AnnotationOutcome out;
    std::unordered_set<std::string> decline_words;
    for (const auto& c : decline) decline_words.insert(c.word);

    for (const auto& c : decline) {
        if (denylist.count(c.word)) {
            out.labels.push_back({c.word, Label::excluded, std::nullopt, std::nullopt, c.rho,
                                  c.r2});
        } else if (allowlist.count(c.word)) {
            out.labels.push_back({c.word, Label::decline, c.source, c.split, c.rho, c.r2});
        } else {
            out.todo_decline.push_back(c);
        }
    }
    for (const auto& g : growth) {
        if (decline_words.count(g.word)) continue;  // decline candidacy wins
        if (denylist.count(g.word)) {
            out.labels.push_back(
                {g.word, Label::excluded, std::nullopt, std::nullopt, g.rho, std::nullopt});
        } else if (allowlist.count(g.word)) {
            out.labels.push_back(
                {g.word, Label::growth, std::nullopt, std::nullopt, g.rho, std::nullopt});
        } else {
            out.todo_growth.push_back(g.word);
        }
    }
    std::sort(out.labels.begin(), out.labels.end(),
              [](const WordLabel& a, const WordLabel& b) { return a.word < b.word; });
    return out;
}

std::unordered_set<std::string> load_word_list(const std::string& path) {
    std::unordered_set<std::string> out;
    for (auto line : csv::read_lines(path)) {
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
        if (!line.empty()) out.insert(line);
    }
    return out;
}

void write_labels_tsv(std::span<const WordLabel> labels, const std::string& path) {
    csv::Writer out(path);
    out.raw_line("word\tlabel\tsource\tsplit_month\trho\tr2");
    for (const auto& l : labels) {
        std::string row = l.word;
        row += '\t';
        row += l.label == Label::growth ? "growth" : l.label == Label::decline ? "decline"
                                                                               : "excluded";
        row += '\t';
        row += l.source ? source_name(*l.source) : "-";
        row += '\t';
        row += l.split ? std::to_string(*l.split) : std::string("-");
        row += '\t';
        row += l.rho ? csv::format_double(*l.rho) : std::string("-");
        row += '\t';
        row += l.r2 ? csv::format_double(*l.r2) : std::string("-");
        out.raw_line(row);
    }
}

std::vector<WordLabel> read_labels_tsv(const std::string& path) {
    std::vector<WordLabel> labels;
    const auto lines = csv::read_lines(path);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = csv::split(lines[i], '\t');
        if (f.size() != 6) throw config_error("bad label row: " + lines[i]);
        WordLabel l;
        l.word = std::string(f[0]);
        if (f[1] == "growth")
            l.label = Label::growth;
        else if (f[1] == "decline")
            l.label = Label::decline;
        else if (f[1] == "excluded")
            l.label = Label::excluded;
        else
            throw config_error("bad label value: " + std::string(f[1]));
        l.source = parse_source(f[2]);
        if (f[3] != "-") l.split = static_cast<int>(csv::parse_int(f[3]));
        if (f[4] != "-") l.rho = csv::parse_double(f[4]);
        if (f[5] != "-") l.r2 = csv::parse_double(f[5]);
        labels.push_back(std::move(l));
    }
    return labels;
}

DetectionResult run_detection(const counts::CountTables& tables,
                              const DetectionOptions& options) {
    DetectionResult result;
    const std::size_t n_words = tables.words.size();

    std::vector<std::vector<std::optional<double>>> log_series(n_words);
    std::vector<std::vector<double>> raw_series(n_words);
    for (std::size_t w = 0; w < n_words; ++w) {
        const auto fs = counts::relative_frequency_series(tables, w);
        log_series[w] = fs.log10_f;
        raw_series[w].reserve(tables.months);
        for (const auto& v : fs.p) raw_series[w].push_back(v.value_or(0.0));
    }

    result.screen =
        spearman_screen(log_series, options.spearman_pct, options.max_undefined_fraction);

    // Decline fits run over every fully defined series.
    for (std::size_t w = 0; w < n_words; ++w) {
        bool defined = true;
        for (const auto& v : log_series[w]) defined = defined && v.has_value();
        if (!defined || tables.months < 5) continue;
        result.fit_population.push_back(w);
        std::vector<double> logf(tables.months);
        for (int t = 0; t < tables.months; ++t) logf[t] = *log_series[w][t];
        result.pfits.push_back(piecewise_fit(logf));
        result.lfits.push_back(logistic_trajectory_fit(raw_series[w]));
    }

    result.selection = select_decline_candidates(result.pfits, result.lfits, tables.months,
                                                 options.piecewise_pct, options.logistic_pct);

    std::vector<GrowthCandidate> growth;
    for (const std::size_t w : result.screen.candidates)
        growth.push_back({tables.words[w], *result.screen.rho[w]});

    std::vector<DeclineCandidateNamed> decline;
    for (const auto& c : result.selection.candidates) {
        const std::size_t w = result.fit_population[c.word];
        DeclineCandidateNamed named;
        named.word = tables.words[w];
        named.source = c.source;
        named.split = c.split;
        named.r2 = c.source == DeclineSource::logistic ? c.logistic_r2 : c.piecewise_r2;
        named.rho = result.screen.rho[w];
        decline.push_back(std::move(named));
    }

    std::unordered_set<std::string> allow, deny;
    if (options.allowlist_path) allow = load_word_list(*options.allowlist_path);
    if (options.denylist_path) deny = load_word_list(*options.denylist_path);
    result.outcome = apply_annotations(growth, decline, allow, deny);
    return result;
}

}  // namespace lexdyn::wordsets
