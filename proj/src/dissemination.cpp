#include "lexdyn/dissemination.hpp"

#include <cmath>

#include "lexdyn/csvio.hpp"

namespace lexdyn::dissemination {

const char* const kUserMetricFile = "d_user.csv";
const char* const kSubredditMetricFile = "d_subreddit.csv";
const char* const kThreadMetricFile = "d_thread.csv";
const char* const kLinguisticMetricFile = "d_linguistic.csv";
const char* const kHeapsFitFile = "heaps_fit.csv";

double expected_unit_count(double p,
                           std::span<const std::pair<std::uint64_t, std::uint64_t>> histogram) {
    if (!(p > 0.0) || p > 1.0)
        throw std::invalid_argument("expected_unit_count: p must be in (0,1]");
    if (histogram.empty()) throw std::invalid_argument("expected_unit_count: no active units");
    double expected = 0.0;
    for (const auto& [mass, units] : histogram)
        expected += static_cast<double>(units) * -std::expm1(-p * static_cast<double>(mass));
    return expected;
}

std::vector<std::optional<double>> social_dissemination_series(
    const counts::CountTables& tables, const counts::CountTables::SocialKind& kind,
    std::size_t word_index) {
    std::vector<std::optional<double>> out(tables.months, std::nullopt);
    for (int t = 1; t <= tables.months; ++t) {
        const std::uint64_t count = tables.freq_at(word_index, t);
        if (count == 0) continue;
        const double p =
            static_cast<double>(count) / static_cast<double>(tables.month_totals[t - 1]);
        const double expected = expected_unit_count(p, kind.token_histogram[t - 1]);
        const std::uint64_t observed =
            kind.distinct_units[tables.cell(word_index, t)];
        out[t - 1] = std::log(static_cast<double>(observed)) - std::log(expected);
    }
    return out;
}

HeapsFit fit_heaps(std::span<const std::pair<double, double>> points) {
    if (points.size() < 3) throw std::invalid_argument("fit_heaps: need >= 3 points");
    double sx = 0.0, sy = 0.0;
    for (const auto& [x, y] : points) {
        sx += x;
        sy += y;
    }
    const double n = static_cast<double>(points.size());
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [x, y] : points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }

    HeapsFit fit;
    if (sxx <= 0.0) {
        fit.slope = 0.0;
        fit.intercept = my;
        fit.r2 = 0.0;
        fit.degenerate = true;
        return fit;
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (syy > 0.0) {
        double sse = 0.0;
        for (const auto& [x, y] : points) {
            const double r = y - (fit.intercept + fit.slope * x);
            sse += r * r;
        }
        fit.r2 = 1.0 - sse / syy;
    }
    return fit;
}

std::pair<HeapsFit, std::vector<std::optional<double>>> linguistic_dissemination_month(
    const counts::CountTables& tables, int month, std::uint64_t min_fit_count) {
    if (month < 1 || month > tables.months)
        throw std::invalid_argument("linguistic dissemination: month out of range");

    const std::size_t n_words = tables.words.size();
    std::vector<std::pair<double, double>> fit_points;
    std::vector<std::pair<std::size_t, std::pair<double, double>>> countable;
    for (std::size_t w = 0; w < n_words; ++w) {
        const std::uint64_t count = tables.freq_at(w, month);
        if (count == 0) continue;
        const std::uint64_t ctx = tables.contexts_at(w, month);
        if (ctx == 0)
            throw numerical_error("context table violates contexts >= 1 for counted word " +
                                  tables.words[w]);
        const double x = std::log10(static_cast<double>(count) /
                                    static_cast<double>(tables.month_totals[month - 1]));
        const double y = std::log10(static_cast<double>(ctx));
        countable.push_back({w, {x, y}});
        if (count >= min_fit_count) fit_points.push_back({x, y});
    }
    if (fit_points.size() < 3)
        throw std::invalid_argument("linguistic dissemination: fewer than 3 fitted words in month " +
                                    std::to_string(month));

    const HeapsFit fit = fit_heaps(fit_points);
    std::vector<std::optional<double>> residuals(n_words, std::nullopt);
    for (const auto& [w, xy] : countable)
        residuals[w] = xy.second - (fit.intercept + fit.slope * xy.first);
    return {fit, std::move(residuals)};
}

DisseminationSeries compute_all(const counts::CountTables& tables, std::uint64_t min_fit_count) {
    DisseminationSeries s;
    s.months = tables.months;
    s.words = tables.words;
    const std::size_t cells = s.words.size() * static_cast<std::size_t>(s.months);
    s.d_user.assign(cells, std::nullopt);
    s.d_subreddit.assign(cells, std::nullopt);
    s.d_thread.assign(cells, std::nullopt);
    s.d_linguistic.assign(cells, std::nullopt);
    s.heaps.assign(s.months, std::nullopt);

    for (std::size_t w = 0; w < s.words.size(); ++w) {
        const auto du = social_dissemination_series(tables, tables.user, w);
        const auto ds = social_dissemination_series(tables, tables.subreddit, w);
        const auto dt = social_dissemination_series(tables, tables.thread, w);
        for (int t = 1; t <= s.months; ++t) {
            s.d_user[s.cell(w, t)] = du[t - 1];
            s.d_subreddit[s.cell(w, t)] = ds[t - 1];
            s.d_thread[s.cell(w, t)] = dt[t - 1];
        }
    }

    for (int t = 1; t <= s.months; ++t) {
        try {
            auto [fit, residuals] = linguistic_dissemination_month(tables, t, min_fit_count);
            s.heaps[t - 1] = fit;
            for (std::size_t w = 0; w < s.words.size(); ++w)
                s.d_linguistic[s.cell(w, t)] = residuals[w];
        } catch (const std::invalid_argument&) {
            // Month too sparse to fit; the column stays undefined.
        }
    }
    return s;
}

void write_metric_matrix(const std::string& path, int months,
                         const std::vector<std::string>& words,
                         const std::vector<std::optional<double>>& values) {
    csv::Writer out(path);
    std::string header = "word";
    for (int t = 1; t <= months; ++t) header += ",month_" + std::to_string(t);
    out.raw_line(header);
    for (std::size_t w = 0; w < words.size(); ++w) {
        std::string row = words[w];
        for (int t = 0; t < months; ++t)
            row += "," + csv::format_cell(values[w * static_cast<std::size_t>(months) + t]);
        out.raw_line(row);
    }
}

MetricMatrix read_metric_matrix(const std::string& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) throw config_error("empty metric matrix: " + path);
    MetricMatrix m;
    m.months = static_cast<int>(csv::split(lines[0], ',').size()) - 1;
    if (m.months < 1) throw config_error("bad metric header: " + path);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto row = csv::split(lines[i], ',');
        if (static_cast<int>(row.size()) != m.months + 1)
            throw config_error("ragged metric row in: " + path);
        m.row_of.emplace(std::string(row[0]), m.words.size());
        m.words.emplace_back(row[0]);
        for (int t = 1; t <= m.months; ++t) m.values.push_back(csv::parse_cell(row[t]));
    }
    return m;
}

void write_series(const DisseminationSeries& s, const std::string& workdir) {
    write_metric_matrix(workdir + "/" + kUserMetricFile, s.months, s.words, s.d_user);
    write_metric_matrix(workdir + "/" + kSubredditMetricFile, s.months, s.words, s.d_subreddit);
    write_metric_matrix(workdir + "/" + kThreadMetricFile, s.months, s.words, s.d_thread);
    write_metric_matrix(workdir + "/" + kLinguisticMetricFile, s.months, s.words, s.d_linguistic);

    csv::Writer out(workdir + "/" + kHeapsFitFile);
    out.raw_line("month,slope,intercept,r2");
    for (int t = 0; t < s.months; ++t) {
        if (s.heaps[t]) {
            const HeapsFit& f = *s.heaps[t];
            out.raw_line(std::to_string(t + 1) + "," + csv::format_double(f.slope) + "," +
                         csv::format_double(f.intercept) + "," + csv::format_double(f.r2));
        } else {
            out.raw_line(std::to_string(t + 1) + ",NA,NA,NA");
        }
    }
}

}  // namespace lexdyn::dissemination
