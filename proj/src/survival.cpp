#include "lexdyn/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lexdyn/common.hpp"
#include "lexdyn/numstats.hpp"

namespace lexdyn::survival {

SurvivalData assemble_survival_records(const analyses::SeriesBundle& bundle,
                                       std::span<const wordsets::WordLabel> labels, int k) {
    const auto fs = analyses::summarize_features(bundle, labels, k);

    SurvivalData data;
    data.dropped = fs.dropped;

    // Map words back to their labels to pick up split points.
    std::unordered_map<std::string, const wordsets::WordLabel*> by_word;
    for (const auto& l : labels) by_word.emplace(l.word, &l);

    data.covariates.resize(static_cast<Eigen::Index>(fs.words.size()), analyses::kNumPredictors);
    for (std::size_t i = 0; i < fs.words.size(); ++i) {
        const auto* label = by_word.at(fs.words[i]);
        data.words.push_back(fs.words[i]);
        if (label->label == wordsets::Label::decline) {
            if (!label->split)
                throw config_error("decline word without split point: " + label->word);
            data.durations.push_back(*label->split);
            data.events.push_back(1);
        } else {
            data.durations.push_back(bundle.months);
            data.events.push_back(0);
        }
        data.covariates.row(i) = fs.features.row(i);
    }

    // Global standardization; a constant covariate stays at zero.
    for (Eigen::Index j = 0; j < data.covariates.cols(); ++j) {
        const double mean = data.covariates.col(j).mean();
        const double sd = std::sqrt((data.covariates.col(j).array() - mean).square().sum() /
                                    data.covariates.rows());
        if (sd > 0.0)
            data.covariates.col(j) = (data.covariates.col(j).array() - mean) / sd;
        else
            data.covariates.col(j).setZero();
    }
    return data;
}

namespace {

struct RiskOrder {
    std::vector<int> by_desc_duration;           // record indices, duration descending
    std::vector<std::pair<int, int>> tie_groups;  // [begin, end) ranges of event tie groups
};

RiskOrder order_records(std::span<const int> durations, std::span<const int> events) {
    RiskOrder ord;
    ord.by_desc_duration.resize(durations.size());
    std::iota(ord.by_desc_duration.begin(), ord.by_desc_duration.end(), 0);
    std::sort(ord.by_desc_duration.begin(), ord.by_desc_duration.end(), [&](int a, int b) {
        if (durations[a] != durations[b]) return durations[a] > durations[b];
        if (events[a] != events[b]) return events[a] < events[b];  // censored first
        return a < b;
    });
    return ord;
}

struct CoxDerivatives {
    double ll = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd info;  // negative Hessian
};

// Efron-tie partial likelihood. Records are scanned in decreasing duration so
// running risk-set sums can be maintained; each distinct event time with d
// tied events contributes d adjusted denominators.
CoxDerivatives cox_derivatives(const Eigen::MatrixXd& X, std::span<const int> durations,
                               std::span<const int> events, const Eigen::VectorXd& beta,
                               bool need_derivatives) {
    const int n = static_cast<int>(durations.size());
    const int p = static_cast<int>(X.cols());

    Eigen::VectorXd eta = X * beta;
    const double shift = n > 0 ? eta.maxCoeff() : 0.0;
    eta.array() -= shift;  // the partial likelihood is invariant to this shift
    Eigen::VectorXd weight(n);
    for (int i = 0; i < n; ++i) weight[i] = std::exp(eta[i]);

    const auto ord = order_records(durations, events);

    CoxDerivatives d;
    d.grad = Eigen::VectorXd::Zero(p);
    d.info = Eigen::MatrixXd::Zero(p, p);

    double risk_sum = 0.0;
    Eigen::VectorXd risk_x = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd risk_xx = Eigen::MatrixXd::Zero(p, p);

    int pos = 0;
    while (pos < n) {
        const int t = durations[ord.by_desc_duration[pos]];
        int end = pos;
        while (end < n && durations[ord.by_desc_duration[end]] == t) ++end;

        // Everyone with this duration enters the risk set for events at t.
        double tie_sum = 0.0;
        Eigen::VectorXd tie_x = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd tie_xx = Eigen::MatrixXd::Zero(p, p);
        int n_events = 0;
        double event_eta = 0.0;
        Eigen::VectorXd event_x = Eigen::VectorXd::Zero(p);

        for (int q = pos; q < end; ++q) {
            const int i = ord.by_desc_duration[q];
            risk_sum += weight[i];
            if (need_derivatives || events[i]) {
                const Eigen::VectorXd xi = X.row(i).transpose();
                if (need_derivatives) {
                    risk_x += weight[i] * xi;
                    risk_xx += weight[i] * (xi * xi.transpose());
                }
                if (events[i]) {
                    ++n_events;
                    event_eta += eta[i];
                    tie_sum += weight[i];
                    if (need_derivatives) {
                        event_x += xi;
                        tie_x += weight[i] * xi;
                        tie_xx += weight[i] * (xi * xi.transpose());
                    }
                }
            }
        }

        if (n_events > 0) {
            d.ll += event_eta;
            if (need_derivatives) d.grad += event_x;
            for (int l = 0; l < n_events; ++l) {
                const double frac = static_cast<double>(l) / n_events;
                const double denom = risk_sum - frac * tie_sum;
                d.ll -= std::log(denom);
                if (need_derivatives) {
                    const Eigen::VectorXd num = risk_x - frac * tie_x;
                    const Eigen::VectorXd g = num / denom;
                    d.grad -= g;
                    d.info += (risk_xx - frac * tie_xx) / denom - g * g.transpose();
                }
            }
        }
        pos = end;
    }
    return d;
}

}  // namespace

double cox_partial_log_likelihood(const Eigen::MatrixXd& X, std::span<const int> durations,
                                  std::span<const int> events, const Eigen::VectorXd& beta) {
    return cox_derivatives(X, durations, events, beta, false).ll;
}

namespace {

CoxModel cox_newton(const Eigen::MatrixXd& X, std::span<const int> durations,
                    std::span<const int> events, double ridge,
                    const std::vector<int>& active_cols) {
    const int p = static_cast<int>(X.cols());
    const int q = static_cast<int>(active_cols.size());

    Eigen::MatrixXd Xa(X.rows(), q);
    for (int c = 0; c < q; ++c) Xa.col(c) = X.col(active_cols[c]);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
    auto penalized = [&](const Eigen::VectorXd& b) {
        return cox_partial_log_likelihood(Xa, durations, events, b) -
               0.5 * ridge * b.squaredNorm();
    };

    CoxModel model;
    double ll = penalized(beta);
    bool diverged = false;
    model.converged = q == 0;  // nothing to optimize
    for (int iter = 0; q > 0 && iter < 100; ++iter) {
        auto d = cox_derivatives(Xa, durations, events, beta, true);
        Eigen::VectorXd grad = d.grad - ridge * beta;
        Eigen::MatrixXd info = d.info;
        info.diagonal().array() += ridge;

        if (grad.cwiseAbs().maxCoeff() < 1e-9) {
            model.converged = true;
            break;
        }

        Eigen::VectorXd step = info.ldlt().solve(grad);
        double damping = 1e-10;
        while (!step.allFinite() || (info * step - grad).norm() > 1e-6 * (1.0 + grad.norm())) {
            Eigen::MatrixXd damped = info;
            damped.diagonal().array() += damping;
            step = damped.ldlt().solve(grad);
            damping *= 10.0;
            if (damping > 1e12) throw numerical_error("cox_fit: information matrix unusable");
        }

        // Step halving: the (penalized) partial likelihood never decreases.
        double scale = 1.0;
        Eigen::VectorXd candidate = beta + step;
        double cand_ll = penalized(candidate);
        int halvings = 0;
        while (!(cand_ll >= ll - 1e-12) && halvings < 40) {
            scale *= 0.5;
            candidate = beta + scale * step;
            cand_ll = penalized(candidate);
            ++halvings;
        }
        if (!(cand_ll >= ll - 1e-9))
            throw numerical_error("cox_fit: likelihood decreased despite step halving");

        beta = candidate;
        ll = cand_ll;
        model.iterations = iter + 1;
        if (ridge == 0.0 && beta.cwiseAbs().maxCoeff() > 50.0) {
            diverged = true;  // monotone likelihood pushes coefficients unbounded
            break;
        }
    }
    // A monotone likelihood also "converges": its gradient vanishes as the
    // coefficient runs away, so an implausible magnitude is the tell.
    if (diverged || (ridge == 0.0 && q > 0 && beta.cwiseAbs().maxCoeff() > 15.0))
        throw numerical_error("cox_fit: monotone likelihood");

    // Expand to the full coefficient layout, dropped columns pinned at zero.
    model.beta = Eigen::VectorXd::Zero(p);
    model.se = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    model.z = Eigen::VectorXd::Zero(p);
    model.p = Eigen::VectorXd::Ones(p);
    for (int c = 0; c < q; ++c) model.beta[active_cols[c]] = beta[c];
    model.log_likelihood = cox_partial_log_likelihood(Xa, durations, events, beta);

    if (q > 0) {
        auto d = cox_derivatives(Xa, durations, events, beta, true);
        Eigen::MatrixXd info = d.info;
        info.diagonal().array() += ridge;
        const Eigen::MatrixXd cov = info.inverse();
        for (int c = 0; c < q; ++c) {
            const double var = cov(c, c);
            if (var > 0.0 && std::isfinite(var)) {
                const int j = active_cols[c];
                model.se[j] = std::sqrt(var);
                model.z[j] = model.beta[j] / model.se[j];
                model.p[j] = 2.0 * stats::normal_sf(std::fabs(model.z[j]));
            }
        }
    }
    return model;
}

}  // namespace

CoxModel cox_fit(const Eigen::MatrixXd& X, std::span<const int> durations,
                 std::span<const int> events, double ridge) {
    const int n = static_cast<int>(durations.size());
    if (X.rows() != n || static_cast<std::size_t>(n) != events.size())
        throw std::invalid_argument("cox_fit: shape mismatch");
    int n_events = 0;
    for (const int e : events) n_events += e;
    if (n_events < 1) throw std::invalid_argument("cox_fit: no events");

    // Constant covariates cannot move the partial likelihood; pin them at 0.
    std::vector<int> active;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double mean = X.col(j).mean();
        if ((X.col(j).array() - mean).abs().maxCoeff() > 1e-12)
            active.push_back(static_cast<int>(j));
    }

    try {
        return cox_newton(X, durations, events, ridge, active);
    } catch (const numerical_error& e) {
        if (ridge > 0.0) throw;
        const std::string what = e.what();
        if (what.find("monotone") == std::string::npos &&
            what.find("unusable") == std::string::npos)
            throw;
        CoxModel model = cox_newton(X, durations, events, 1e-6, active);
        model.ridged = true;
        return model;
    }
}

std::optional<double> concordance_index(std::span<const double> risk,
                                        std::span<const int> durations,
                                        std::span<const int> events) {
    const std::size_t n = risk.size();
    if (durations.size() != n || events.size() != n)
        throw std::invalid_argument("concordance_index: shape mismatch");

    double concordant = 0.0;
    std::uint64_t comparable = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!events[i]) continue;
        for (std::size_t j = 0; j < n; ++j) {
            // Comparable: i saw the event and j survived strictly longer.
            if (j == i || durations[j] <= durations[i]) continue;
            ++comparable;
            if (risk[i] > risk[j])
                concordant += 1.0;
            else if (risk[i] == risk[j])
                concordant += 0.5;
        }
    }
    if (comparable == 0) return std::nullopt;
    return concordant / static_cast<double>(comparable);
}

DevianceTest deviance_test(const CoxModel& nested, const CoxModel& full, int extra_df) {
    if (extra_df < 1) throw std::invalid_argument("deviance_test: extra_df < 1");
    double stat = 2.0 * (full.log_likelihood - nested.log_likelihood);
    if (stat < -1e-9)
        throw numerical_error("deviance_test: full model has lower likelihood than nested");
    stat = std::max(stat, 0.0);
    return {stat, extra_df, stats::chi_square_sf(stat, extra_df)};
}

SurvivalCvResult survival_cv(const SurvivalData& data, int folds, std::uint64_t seed) {
    const int n = static_cast<int>(data.durations.size());
    int n_events = 0;
    for (const int e : data.events) n_events += e;
    if (n_events < folds) throw std::invalid_argument("survival_cv: fewer events than folds");

    // Event-stratified folds; unlike the classifier folds there is no minimum
    // on the censored class (an all-event cohort is legitimate).
    std::vector<int> fold_of(n, -1);
    {
        std::vector<int> event_rows, censored_rows;
        for (int i = 0; i < n; ++i) (data.events[i] ? event_rows : censored_rows).push_back(i);
        Rng rng(seed);
        rng.shuffle(event_rows);
        rng.shuffle(censored_rows);
        for (std::size_t i = 0; i < event_rows.size(); ++i)
            fold_of[event_rows[i]] = static_cast<int>(i % folds);
        for (std::size_t i = 0; i < censored_rows.size(); ++i)
            fold_of[censored_rows[i]] = static_cast<int>(i % folds);
    }

    SurvivalCvResult result;
    result.sets = {analyses::FeatureSet::f, analyses::FeatureSet::f_l, analyses::FeatureSet::f_s,
                   analyses::FeatureSet::f_l_s};
    result.scores.assign(result.sets.size(), {});

    for (int f = 0; f < folds; ++f) {
        std::vector<int> train_rows, test_rows;
        for (int i = 0; i < n; ++i) (fold_of[i] == f ? test_rows : train_rows).push_back(i);

        for (std::size_t s = 0; s < result.sets.size(); ++s) {
            const auto cols = analyses::feature_set_columns(result.sets[s]);
            Eigen::MatrixXd Xtr(train_rows.size(), cols.size());
            std::vector<int> dtr, etr;
            for (std::size_t i = 0; i < train_rows.size(); ++i) {
                for (std::size_t c = 0; c < cols.size(); ++c)
                    Xtr(i, c) = data.covariates(train_rows[i], cols[c]);
                dtr.push_back(data.durations[train_rows[i]]);
                etr.push_back(data.events[train_rows[i]]);
            }
            const CoxModel model = cox_fit(Xtr, dtr, etr);

            std::vector<double> risk;
            std::vector<int> dte, ete;
            for (const int i : test_rows) {
                double r = 0.0;
                for (std::size_t c = 0; c < cols.size(); ++c)
                    r += model.beta[c] * data.covariates(i, cols[c]);
                risk.push_back(r);
                dte.push_back(data.durations[i]);
                ete.push_back(data.events[i]);
            }
            const auto c_index = concordance_index(risk, dte, ete);
            result.scores[s].push_back(c_index.value_or(0.5));
        }
    }

    auto compare = [&](analyses::FeatureSet enriched, analyses::FeatureSet baseline) {
        const auto idx_of = [&](analyses::FeatureSet set) {
            for (std::size_t s = 0; s < result.sets.size(); ++s)
                if (result.sets[s] == set) return s;
            throw std::logic_error("feature set missing");
        };
        const auto test =
            stats::paired_one_tailed_t(result.scores[idx_of(enriched)],
                                       result.scores[idx_of(baseline)]);
        SurvivalCvResult::PairedComparison cmp;
        cmp.enriched = enriched;
        cmp.baseline = baseline;
        if (test) {
            cmp.t = test->t;
            cmp.p = test->p;
        } else {
            cmp.t = std::numeric_limits<double>::quiet_NaN();
            cmp.p = 1.0;
        }
        result.comparisons.push_back(cmp);
    };
    compare(analyses::FeatureSet::f_l, analyses::FeatureSet::f);
    compare(analyses::FeatureSet::f_l_s, analyses::FeatureSet::f_s);
    return result;
}

}  // namespace lexdyn::survival
