#include "lexdyn/analyses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "lexdyn/csvio.hpp"
#include "lexdyn/numstats.hpp"
#include "lexdyn/rng.hpp"

namespace lexdyn::analyses {

const char* const kPredictorNames[kNumPredictors] = {"f", "D_L", "D_U", "D_S", "D_T"};

namespace {

SeriesBundle bundle_shell(const counts::CountTables& tables) {
    SeriesBundle b;
    b.months = tables.months;
    b.words = tables.words;
    for (std::size_t w = 0; w < b.words.size(); ++w) b.row_of.emplace(b.words[w], w);
    const std::size_t cells = b.words.size() * static_cast<std::size_t>(b.months);
    b.f.assign(cells, std::nullopt);
    b.dl.assign(cells, std::nullopt);
    b.du.assign(cells, std::nullopt);
    b.ds.assign(cells, std::nullopt);
    b.dt.assign(cells, std::nullopt);
    for (std::size_t w = 0; w < b.words.size(); ++w) {
        const auto fs = counts::relative_frequency_series(tables, w);
        for (int t = 1; t <= b.months; ++t) b.f[b.cell(w, t)] = fs.log10_f[t - 1];
    }
    return b;
}

}  // namespace

SeriesBundle build_bundle(const counts::CountTables& tables,
                          const dissemination::DisseminationSeries& series) {
    SeriesBundle b = bundle_shell(tables);
    if (series.words != tables.words)
        throw config_error("dissemination series does not match the count tables");
    b.dl = series.d_linguistic;
    b.du = series.d_user;
    b.ds = series.d_subreddit;
    b.dt = series.d_thread;
    return b;
}

SeriesBundle build_bundle(const counts::CountTables& tables,
                          const dissemination::MetricMatrix& dl,
                          const dissemination::MetricMatrix& du,
                          const dissemination::MetricMatrix& ds,
                          const dissemination::MetricMatrix& dt) {
    SeriesBundle b = bundle_shell(tables);
    auto fill = [&](const dissemination::MetricMatrix& m,
                    std::vector<std::optional<double>>& into, const char* name) {
        if (m.months != b.months)
            throw config_error(std::string("metric matrix month mismatch: ") + name);
        for (std::size_t w = 0; w < b.words.size(); ++w) {
            const auto it = m.row_of.find(b.words[w]);
            if (it == m.row_of.end())
                throw config_error(std::string("metric matrix missing word ") + b.words[w] +
                                   " in " + name);
            for (int t = 1; t <= b.months; ++t) into[b.cell(w, t)] = m.at(it->second, t);
        }
    };
    fill(dl, b.dl, "D_L");
    fill(du, b.du, "D_U");
    fill(ds, b.ds, "D_S");
    fill(dt, b.dt, "D_T");
    return b;
}

LagDataset assemble_lag_dataset(const SeriesBundle& bundle,
                                std::span<const std::string> growth_words, int k) {
    if (k < 1 || k >= bundle.months)
        throw std::invalid_argument("assemble_lag_dataset: need 1 <= k < T");

    std::vector<std::array<double, kNumPredictors>> rows;
    std::vector<double> deltas;
    std::uint64_t dropped = 0;
    for (const auto& word : growth_words) {
        const auto w = bundle.find(word);
        if (!w) {
            dropped += static_cast<std::uint64_t>(bundle.months - k);
            continue;
        }
        for (int t = k + 1; t <= bundle.months; ++t) {
            const auto f_now = bundle.f[bundle.cell(*w, t)];
            const auto f_then = bundle.f[bundle.cell(*w, t - k)];
            const auto dl = bundle.dl[bundle.cell(*w, t - k)];
            const auto du = bundle.du[bundle.cell(*w, t - k)];
            const auto ds = bundle.ds[bundle.cell(*w, t - k)];
            const auto dt = bundle.dt[bundle.cell(*w, t - k)];
            if (!f_now || !f_then || !dl || !du || !ds || !dt) {
                ++dropped;
                continue;
            }
            rows.push_back({*f_then, *dl, *du, *ds, *dt});
            deltas.push_back(*f_now - *f_then);
        }
    }

    LagDataset data;
    data.k = k;
    data.dropped = dropped;
    data.predictors.resize(static_cast<Eigen::Index>(rows.size()), kNumPredictors);
    data.delta_f.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < kNumPredictors; ++j) data.predictors(i, j) = rows[i][j];
        data.delta_f[i] = deltas[i];
    }
    return data;
}

ImportanceReport relative_importance_analysis(const LagDataset& data, int bootstrap_iters,
                                              std::uint64_t seed) {
    const auto n = data.predictors.rows();
    if (n < 30) throw std::invalid_argument("relative_importance_analysis: fewer than 30 rows");

    ImportanceReport report;
    report.k = data.k;
    const auto point = stats::lmg_importance(data.predictors, data.delta_f);
    report.full_r2 = point.full_r2;
    for (int j = 0; j < kNumPredictors; ++j) report.share[j] = point.shares[j];

    std::vector<std::vector<double>> draws(kNumPredictors);
    Eigen::MatrixXd Xb(n, kNumPredictors);
    Eigen::VectorXd yb(n);
    for (int it = 0; it < bootstrap_iters; ++it) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(it));
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto r = static_cast<Eigen::Index>(rng.next_below(static_cast<std::uint64_t>(n)));
            Xb.row(i) = data.predictors.row(r);
            yb[i] = data.delta_f[r];
        }
        const auto shares = stats::lmg_importance(Xb, yb);
        for (int j = 0; j < kNumPredictors; ++j) draws[j].push_back(shares.shares[j]);
    }
    for (int j = 0; j < kNumPredictors; ++j) {
        std::sort(draws[j].begin(), draws[j].end());
        report.lower[j] = quantile_sorted(draws[j], 0.025);
        report.upper[j] = quantile_sorted(draws[j], 0.975);
    }
    return report;
}

FeatureSummary summarize_features(const SeriesBundle& bundle,
                                  std::span<const wordsets::WordLabel> labels, int k) {
    if (k < 1 || k > bundle.months)
        throw std::invalid_argument("summarize_features: need 1 <= k <= T");

    std::vector<std::string> words;
    std::vector<int> ys;
    std::vector<std::array<double, kNumPredictors>> rows;
    std::uint64_t dropped = 0;

    for (const auto& label : labels) {
        if (label.label == wordsets::Label::excluded) continue;
        const auto w = bundle.find(label.word);
        if (!w) {
            ++dropped;
            continue;
        }
        const std::vector<std::optional<double>>* metrics[kNumPredictors] = {
            &bundle.f, &bundle.dl, &bundle.du, &bundle.ds, &bundle.dt};
        std::array<double, kNumPredictors> means{};
        bool ok = true;
        for (int j = 0; j < kNumPredictors && ok; ++j) {
            double sum = 0.0;
            int defined = 0;
            for (int t = 1; t <= k; ++t) {
                const auto v = (*metrics[j])[bundle.cell(*w, t)];
                if (!v) continue;
                sum += *v;
                ++defined;
            }
            if (defined == 0)
                ok = false;  // no defined month for this metric: drop the word
            else
                means[j] = sum / defined;
        }
        if (!ok) {
            ++dropped;
            continue;
        }
        words.push_back(label.word);
        ys.push_back(label.label == wordsets::Label::growth ? 1 : 0);
        rows.push_back(means);
    }

    FeatureSummary fs;
    fs.words = std::move(words);
    fs.labels = std::move(ys);
    fs.dropped = dropped;
    fs.features.resize(static_cast<Eigen::Index>(rows.size()), kNumPredictors);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < kNumPredictors; ++j) fs.features(i, j) = rows[i][j];
    return fs;
}

namespace {

double gaussian_density(double x, double mean, double variance) {
    const double twopi = 6.283185307179586476925286766559;
    return std::exp(-(x - mean) * (x - mean) / (2.0 * variance)) / std::sqrt(twopi * variance);
}

}  // namespace

std::vector<int> quantile_bins(int n, int bins) {
    std::vector<int> bin_of(n);
    const int base = n / bins, extra = n % bins;
    int idx = 0;
    for (int b = 0; b < bins; ++b) {
        const int size = base + (b < extra ? 1 : 0);
        for (int i = 0; i < size; ++i) bin_of[idx++] = b;
    }
    return bin_of;
}

DoseResponseCurve adrf_estimate(const FeatureSummary& fs, int treatment_column, int quantiles,
                                int bootstrap_iters, std::uint64_t seed) {
    if (treatment_column < 1 || treatment_column >= kNumPredictors)
        throw std::invalid_argument("adrf_estimate: treatment must be a dissemination column");
    if (quantiles < 2) throw std::invalid_argument("adrf_estimate: need >= 2 quantiles");

    std::vector<int> growth_rows, decline_rows;
    for (std::size_t i = 0; i < fs.labels.size(); ++i)
        (fs.labels[i] ? growth_rows : decline_rows).push_back(static_cast<int>(i));
    if (growth_rows.empty() || decline_rows.empty())
        throw std::invalid_argument("adrf_estimate: both outcome classes required");

    const int per_class = static_cast<int>(std::min(growth_rows.size(), decline_rows.size()));
    const int n = 2 * per_class;

    {
        double lo = fs.features(0, treatment_column), hi = lo;
        for (Eigen::Index i = 0; i < fs.features.rows(); ++i) {
            lo = std::min(lo, fs.features(i, treatment_column));
            hi = std::max(hi, fs.features(i, treatment_column));
        }
        if (hi - lo <= 0.0)
            throw numerical_error("adrf_estimate: treatment has no variance");
    }

    std::vector<std::vector<double>> bin_draws(quantiles);
    const std::vector<int> bin_of = quantile_bins(n, quantiles);

    for (int draw = 0; draw < bootstrap_iters; ++draw) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(draw));
        std::vector<int> rows;
        rows.reserve(n);
        for (int i = 0; i < per_class; ++i)
            rows.push_back(growth_rows[rng.next_below(growth_rows.size())]);
        for (int i = 0; i < per_class; ++i)
            rows.push_back(decline_rows[rng.next_below(decline_rows.size())]);

        // Step 1: linear model of the treatment on the covariates.
        Eigen::MatrixXd covariates(n, kNumPredictors - 1);
        Eigen::VectorXd z(n), y(n);
        for (int i = 0; i < n; ++i) {
            int c = 0;
            for (int j = 0; j < kNumPredictors; ++j) {
                if (j == treatment_column) continue;
                covariates(i, c++) = fs.features(rows[i], j);
            }
            z[i] = fs.features(rows[i], treatment_column);
            y[i] = fs.labels[rows[i]];
        }
        const auto treatment_model = stats::ols_fit(covariates, z);
        if (treatment_model.sigma2 <= 0.0)
            throw numerical_error("adrf_estimate: degenerate treatment variance in draw");

        // Step 2: generalized propensity score.
        Eigen::MatrixXd zr(n, 2);
        for (int i = 0; i < n; ++i) {
            const double fitted = treatment_model.predict(covariates.row(i).transpose());
            zr(i, 0) = z[i];
            zr(i, 1) = gaussian_density(z[i], fitted, treatment_model.sigma2);
        }

        // Step 3: logistic outcome model on treatment and GPS.
        const auto outcome_model = stats::logistic_regression_fit(zr, y);

        // Step 4: mean predicted outcome per treatment quantile.
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (z[a] != z[b]) return z[a] < z[b];
            return a < b;
        });
        std::vector<double> mu(quantiles, 0.0);
        std::vector<int> count(quantiles, 0);
        for (int r = 0; r < n; ++r) {
            const int i = order[r];
            const double yhat = outcome_model.predict_probability(zr.row(i).transpose());
            mu[bin_of[r]] += yhat;
            ++count[bin_of[r]];
        }
        for (int b = 0; b < quantiles; ++b) bin_draws[b].push_back(mu[b] / count[b]);
    }

    DoseResponseCurve curve;
    curve.treatment_column = treatment_column;
    curve.mean.resize(quantiles);
    curve.lower.resize(quantiles);
    curve.upper.resize(quantiles);
    for (int b = 0; b < quantiles; ++b) {
        double sum = 0.0;
        for (const double v : bin_draws[b]) sum += v;
        curve.mean[b] = sum / bin_draws[b].size();
        std::sort(bin_draws[b].begin(), bin_draws[b].end());
        curve.lower[b] = quantile_sorted(bin_draws[b], 0.025);
        curve.upper[b] = quantile_sorted(bin_draws[b], 0.975);
    }
    return curve;
}

const char* feature_set_name(FeatureSet set) {
    switch (set) {
        case FeatureSet::f: return "f";
        case FeatureSet::f_l: return "f+L";
        case FeatureSet::f_s: return "f+S";
        case FeatureSet::f_l_s: return "f+L+S";
    }
    return "?";
}

std::vector<int> feature_set_columns(FeatureSet set) {
    switch (set) {
        case FeatureSet::f: return {0};
        case FeatureSet::f_l: return {0, 1};
        case FeatureSet::f_s: return {0, 2, 3, 4};
        case FeatureSet::f_l_s: return {0, 1, 2, 3, 4};
    }
    return {};
}

std::vector<int> balanced_subsample(std::span<const int> labels, std::uint64_t seed) {
    std::vector<int> class0, class1;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] ? class1 : class0).push_back(static_cast<int>(i));
    const std::size_t m = std::min(class0.size(), class1.size());
    Rng r0 = Rng::derive(seed, 0), r1 = Rng::derive(seed, 1);
    r0.shuffle(class0);
    r1.shuffle(class1);
    std::vector<int> out;
    out.insert(out.end(), class0.begin(), class0.begin() + m);
    out.insert(out.end(), class1.begin(), class1.begin() + m);
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

// Standardize with training statistics; zero-variance columns are dropped.
void standardize_train_test(Eigen::MatrixXd& train, Eigen::MatrixXd& test) {
    std::vector<int> keep;
    for (Eigen::Index j = 0; j < train.cols(); ++j) {
        const double mean = train.col(j).mean();
        const double var = (train.col(j).array() - mean).square().sum() / train.rows();
        if (var > 1e-24) keep.push_back(static_cast<int>(j));
    }
    Eigen::MatrixXd tr(train.rows(), static_cast<Eigen::Index>(keep.size()));
    Eigen::MatrixXd te(test.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        const int j = keep[c];
        const double mean = train.col(j).mean();
        const double sd =
            std::sqrt((train.col(j).array() - mean).square().sum() / train.rows());
        tr.col(c) = (train.col(j).array() - mean) / sd;
        te.col(c) = (test.col(j).array() - mean) / sd;
    }
    train = std::move(tr);
    test = std::move(te);
}

}  // namespace

double cv_accuracy(const Eigen::MatrixXd& X, std::span<const int> y, int folds,
                   std::uint64_t seed, double* std_out) {
    const auto fold_of = stats::kfold_balanced(y, folds, seed);
    std::vector<double> accuracies;
    for (int f = 0; f < folds; ++f) {
        std::vector<int> train_rows, test_rows;
        for (std::size_t i = 0; i < y.size(); ++i)
            (fold_of[i] == f ? test_rows : train_rows).push_back(static_cast<int>(i));

        Eigen::MatrixXd Xtr(train_rows.size(), X.cols()), Xte(test_rows.size(), X.cols());
        Eigen::VectorXd ytr(train_rows.size());
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            Xtr.row(i) = X.row(train_rows[i]);
            ytr[i] = y[train_rows[i]];
        }
        for (std::size_t i = 0; i < test_rows.size(); ++i) Xte.row(i) = X.row(test_rows[i]);
        standardize_train_test(Xtr, Xte);

        const auto model = stats::logistic_regression_fit(Xtr, ytr);
        int correct = 0;
        for (std::size_t i = 0; i < test_rows.size(); ++i) {
            const double p = model.predict_probability(Xte.row(i).transpose());
            const int predicted = p >= 0.5 ? 1 : 0;
            correct += predicted == y[test_rows[i]] ? 1 : 0;
        }
        accuracies.push_back(static_cast<double>(correct) / test_rows.size());
    }
    const double mean = stats::mean_of(accuracies);
    if (std_out) *std_out = std::sqrt(stats::sample_variance(accuracies));
    return mean;
}

std::vector<AccuracyRow> binary_growth_prediction(const SeriesBundle& bundle,
                                                  std::span<const wordsets::WordLabel> labels,
                                                  int k_max, int folds, std::uint64_t seed) {
    std::vector<AccuracyRow> rows;
    for (int k = 1; k <= k_max; ++k) {
        const auto fs = summarize_features(bundle, labels, k);
        int n1 = 0, n0 = 0;
        for (const int y : fs.labels) (y ? n1 : n0)++;
        if (n1 < folds || n0 < folds)
            throw std::invalid_argument("binary_growth_prediction: a class has fewer than " +
                                        std::to_string(folds) + " words at k=" +
                                        std::to_string(k));
        const auto keep = balanced_subsample(fs.labels, Rng::derive(seed, 500 + k).next_u64());
        std::vector<int> y;
        for (const int i : keep) y.push_back(fs.labels[i]);

        const std::uint64_t fold_seed = Rng::derive(seed, 1000 + k).next_u64();
        for (const FeatureSet set :
             {FeatureSet::f, FeatureSet::f_l, FeatureSet::f_s, FeatureSet::f_l_s}) {
            const auto cols = feature_set_columns(set);
            Eigen::MatrixXd X(keep.size(), cols.size());
            for (std::size_t i = 0; i < keep.size(); ++i)
                for (std::size_t c = 0; c < cols.size(); ++c)
                    X(i, c) = fs.features(keep[i], cols[c]);
            AccuracyRow row;
            row.k = k;
            row.set = set;
            row.mean_accuracy = cv_accuracy(X, y, folds, fold_seed, &row.std_accuracy);
            rows.push_back(row);
        }
    }
    return rows;
}

PosTags load_pos_tags(const std::string& path) {
    PosTags tags;
    for (const auto& line : csv::read_lines(path)) {
        if (line.empty()) continue;
        const auto f = csv::split(line, '\t');
        if (f.size() != 2) throw config_error("bad POS line (want word<TAB>tag): " + line);
        tags.emplace(std::string(f[0]), std::string(f[1]));
    }
    return tags;
}

PosComparison pos_matched_comparison(const SeriesBundle& bundle,
                                     std::span<const wordsets::WordLabel> labels,
                                     const PosTags& tags, int k) {
    const auto fs = summarize_features(bundle, labels, k);

    std::size_t tagged = 0;
    for (const auto& w : fs.words) tagged += tags.count(w) ? 1 : 0;
    if (fs.words.empty() || static_cast<double>(tagged) < 0.8 * fs.words.size())
        throw config_error("POS file covers fewer than 80% of labeled words");

    struct Entry {
        std::string word, tag;
        double f = 0.0, dl = 0.0;
    };
    std::vector<Entry> growth, decline;
    for (std::size_t i = 0; i < fs.words.size(); ++i) {
        const auto it = tags.find(fs.words[i]);
        if (it == tags.end()) continue;
        Entry e{fs.words[i], it->second, fs.features(i, 0), fs.features(i, 1)};
        (fs.labels[i] ? growth : decline).push_back(std::move(e));
    }
    auto by_word = [](const Entry& a, const Entry& b) { return a.word < b.word; };
    std::sort(growth.begin(), growth.end(), by_word);
    std::sort(decline.begin(), decline.end(), by_word);

    PosComparison out;
    std::vector<bool> used(growth.size(), false);
    std::vector<std::pair<Entry, Entry>> pairs;  // (decline, growth)
    for (const auto& d : decline) {
        int best = -1;
        for (std::size_t g = 0; g < growth.size(); ++g) {
            if (used[g]) continue;
            if (best < 0 ||
                std::fabs(growth[g].f - d.f) < std::fabs(growth[best].f - d.f))
                best = static_cast<int>(g);
        }
        if (best < 0) {
            ++out.unmatched_decline;
            continue;
        }
        used[best] = true;
        pairs.push_back({d, growth[best]});
    }

    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_tag;
    for (const auto& [d, g] : pairs) {
        by_tag[g.tag].first.push_back(g.dl);
        by_tag[d.tag].second.push_back(d.dl);
        out.values.push_back({g.word, g.tag, 1, g.dl});
        out.values.push_back({d.word, d.tag, 0, d.dl});
    }
    for (const auto& [tag, samples] : by_tag) {
        const auto& [g_vals, d_vals] = samples;
        PosComparisonRow row;
        row.tag = tag;
        row.n_pairs = static_cast<int>(std::min(g_vals.size(), d_vals.size()));
        if (!g_vals.empty() && !d_vals.empty())
            row.delta_dl = stats::mean_of(g_vals) - stats::mean_of(d_vals);
        if (g_vals.size() >= 2 && d_vals.size() >= 2) {
            const auto test = stats::welch_one_tailed_t(g_vals, d_vals);
            if (test) {
                row.t = test->t;
                row.p = test->p;
            }
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

PosPredictionResult pos_feature_prediction(const SeriesBundle& bundle,
                                           std::span<const wordsets::WordLabel> labels,
                                           const PosTags& tags, int k, int folds,
                                           std::uint64_t seed) {
    const auto fs = summarize_features(bundle, labels, k);

    std::vector<int> rows;   // words with a tag
    std::vector<std::string> row_tags;
    for (std::size_t i = 0; i < fs.words.size(); ++i) {
        const auto it = tags.find(fs.words[i]);
        if (it == tags.end()) continue;
        rows.push_back(static_cast<int>(i));
        row_tags.push_back(it->second);
    }
    if (rows.empty() || static_cast<double>(rows.size()) < 0.8 * fs.words.size())
        throw config_error("POS file covers fewer than 80% of labeled words");

    std::vector<std::string> tag_vocab = row_tags;
    std::sort(tag_vocab.begin(), tag_vocab.end());
    tag_vocab.erase(std::unique(tag_vocab.begin(), tag_vocab.end()), tag_vocab.end());

    std::vector<int> y;
    for (const int i : rows) y.push_back(fs.labels[i]);
    const auto keep = balanced_subsample(y, Rng::derive(seed, 77).next_u64());

    std::vector<int> yb;
    for (const int i : keep) yb.push_back(y[i]);
    const std::uint64_t fold_seed = Rng::derive(seed, 78).next_u64();

    // f + one-hot POS
    Eigen::MatrixXd Xpos(keep.size(), 1 + tag_vocab.size());
    Xpos.setZero();
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const int row = rows[keep[i]];
        Xpos(i, 0) = fs.features(row, 0);
        const auto tag_idx = std::lower_bound(tag_vocab.begin(), tag_vocab.end(),
                                              row_tags[keep[i]]) -
                             tag_vocab.begin();
        Xpos(i, 1 + tag_idx) = 1.0;
    }
    // f and f+L on the same words for comparability
    Eigen::MatrixXd Xf(keep.size(), 1), Xfl(keep.size(), 2);
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const int row = rows[keep[i]];
        Xf(i, 0) = fs.features(row, 0);
        Xfl(i, 0) = fs.features(row, 0);
        Xfl(i, 1) = fs.features(row, 1);
    }

    PosPredictionResult result;
    result.f_pos_accuracy = cv_accuracy(Xpos, yb, folds, fold_seed);
    result.f_accuracy = cv_accuracy(Xf, yb, folds, fold_seed);
    result.f_l_accuracy = cv_accuracy(Xfl, yb, folds, fold_seed);
    return result;
}

}  // namespace lexdyn::analyses
