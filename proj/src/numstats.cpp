#include "lexdyn/numstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "lexdyn/common.hpp"

namespace lexdyn::stats {

namespace {

MatrixXd with_intercept(const MatrixXd& X) {
    MatrixXd D(X.rows(), X.cols() + 1);
    D.col(0).setOnes();
    if (X.cols() > 0) D.rightCols(X.cols()) = X;
    return D;
}

// Column-pivoted QR rank check; reports the first column that adds no rank.
void require_full_rank(const MatrixXd& D, const char* what) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(D);
    qr.setThreshold(1e-10);
    if (qr.rank() < D.cols()) {
        const auto& perm = qr.colsPermutation().indices();
        const int offending = perm[qr.rank()];  // first column beyond the independent set
        throw numerical_error(std::string(what) + ": design is rank-deficient at column " +
                              std::to_string(offending) +
                              " (0 = intercept, k = predictor k-1)");
    }
}

double sigmoid(double eta) {
    if (eta > 35.0) eta = 35.0;
    if (eta < -35.0) eta = -35.0;
    return 1.0 / (1.0 + std::exp(-eta));
}

}  // namespace

double LinearModel::predict(const VectorXd& x) const {
    double eta = beta[0];
    for (int j = 0; j < x.size(); ++j) eta += beta[j + 1] * x[j];
    return eta;
}

LinearModel ols_fit(const MatrixXd& X, const VectorXd& y) {
    if (X.rows() != y.size()) throw std::invalid_argument("ols_fit: row mismatch");
    const MatrixXd D = with_intercept(X);
    if (D.rows() < D.cols()) throw std::invalid_argument("ols_fit: fewer rows than columns");
    require_full_rank(D, "ols_fit");

    LinearModel m;
    m.n = static_cast<int>(D.rows());
    m.beta = D.colPivHouseholderQr().solve(y);
    const VectorXd resid = y - D * m.beta;
    m.sse = resid.squaredNorm();
    m.sigma2 = m.sse / static_cast<double>(m.n);
    const double ybar = y.mean();
    const double sst = (y.array() - ybar).matrix().squaredNorm();
    m.r2 = sst > 0.0 ? 1.0 - m.sse / sst : 0.0;
    return m;
}

double LogisticModel::predict_probability(const VectorXd& x) const {
    double eta = beta[0];
    for (int j = 0; j < x.size(); ++j) eta += beta[j + 1] * x[j];
    return sigmoid(eta);
}

LogisticModel logistic_regression_fit(const MatrixXd& X, const VectorXd& y, double ridge) {
    if (X.rows() != y.size()) throw std::invalid_argument("logistic fit: row mismatch");
    bool has0 = false, has1 = false;
    for (int i = 0; i < y.size(); ++i) (y[i] > 0.5 ? has1 : has0) = true;
    if (!has0 || !has1)
        throw numerical_error("logistic fit: response contains a single class");

    const MatrixXd D = with_intercept(X);
    const int p = static_cast<int>(D.cols());
    VectorXd beta = VectorXd::Zero(p);

    auto pll = [&](const VectorXd& b) {
        const VectorXd eta = D * b;
        double ll = 0.0;
        for (int i = 0; i < eta.size(); ++i) {
            const double e = std::clamp(eta[i], -35.0, 35.0);
            ll += y[i] * e - (e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e)));
        }
        return ll - 0.5 * ridge * b.squaredNorm();
    };

    LogisticModel m;
    double ll = pll(beta);
    for (int iter = 0; iter < 100; ++iter) {
        const VectorXd eta = D * beta;
        VectorXd mu(eta.size()), w(eta.size());
        for (int i = 0; i < eta.size(); ++i) {
            mu[i] = sigmoid(eta[i]);
            w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-12);
        }
        const VectorXd grad = D.transpose() * (y - mu) - ridge * beta;
        MatrixXd info = D.transpose() * w.asDiagonal() * D;
        info.diagonal().array() += ridge;
        const VectorXd step = info.ldlt().solve(grad);

        // Damped Newton: the penalized likelihood must not decrease.
        double scale = 1.0;
        VectorXd candidate = beta + step;
        double cand_ll = pll(candidate);
        int halvings = 0;
        while (cand_ll < ll - 1e-12 && halvings < 40) {
            scale *= 0.5;
            candidate = beta + scale * step;
            cand_ll = pll(candidate);
            ++halvings;
        }
        if (cand_ll < ll - 1e-9)
            throw numerical_error("logistic fit: penalized likelihood decreased");

        const double max_change = (candidate - beta).cwiseAbs().maxCoeff();
        beta = candidate;
        ll = cand_ll;
        m.iterations = iter + 1;
        if (max_change < 1e-10) {
            m.converged = true;
            break;
        }
    }

    m.beta = beta;
    m.log_likelihood = ll + 0.5 * ridge * beta.squaredNorm();
    return m;
}

std::vector<double> mid_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (const double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

std::optional<double> spearman_rho(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("spearman_rho: length mismatch");
    if (a.size() < 3) throw std::invalid_argument("spearman_rho: need at least 3 pairs");
    const auto ra = mid_ranks(a);
    const auto rb = mid_ranks(b);
    const double ma = mean_of(ra), mb = mean_of(rb);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        const double da = ra[i] - ma, db = rb[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

namespace {

// R-squared of the subset regression, from centered cross-products. Subset
// given as a bitmask over p predictors.
double subset_r2(const MatrixXd& gram, const VectorXd& xty, double sst, unsigned mask) {
    if (mask == 0 || sst <= 0.0) return 0.0;
    std::vector<int> cols;
    for (int j = 0; j < xty.size(); ++j)
        if (mask & (1u << j)) cols.push_back(j);
    const int q = static_cast<int>(cols.size());
    MatrixXd G(q, q);
    VectorXd g(q);
    for (int r = 0; r < q; ++r) {
        g[r] = xty[cols[r]];
        for (int c = 0; c < q; ++c) G(r, c) = gram(cols[r], cols[c]);
    }
    const VectorXd b = G.ldlt().solve(g);
    return (g.dot(b)) / sst;
}

}  // namespace

ImportanceDecomposition lmg_importance(const MatrixXd& X, const VectorXd& y) {
    const int p = static_cast<int>(X.cols());
    if (p < 1 || p > 8) throw std::invalid_argument("lmg_importance: need 1..8 predictors");
    if (X.rows() != y.size()) throw std::invalid_argument("lmg_importance: row mismatch");
    require_full_rank(with_intercept(X), "lmg_importance");

    // Center everything once; every subset regression then reduces to solving
    // against a submatrix of the Gram matrix.
    MatrixXd Xc = X;
    for (int j = 0; j < p; ++j) Xc.col(j).array() -= X.col(j).mean();
    VectorXd yc = y.array() - y.mean();
    const MatrixXd gram = Xc.transpose() * Xc;
    const VectorXd xty = Xc.transpose() * yc;
    const double sst = yc.squaredNorm();

    const unsigned n_masks = 1u << p;
    std::vector<double> r2(n_masks, 0.0);
    for (unsigned mask = 1; mask < n_masks; ++mask) r2[mask] = subset_r2(gram, xty, sst, mask);

    std::vector<double> factorial(p + 1, 1.0);
    for (int i = 1; i <= p; ++i) factorial[i] = factorial[i - 1] * i;

    ImportanceDecomposition out;
    out.shares.assign(p, 0.0);
    out.full_r2 = r2[n_masks - 1];
    for (int j = 0; j < p; ++j) {
        double total = 0.0;
        for (unsigned mask = 0; mask < n_masks; ++mask) {
            if (mask & (1u << j)) continue;
            const int s = __builtin_popcount(mask);
            const double weight = factorial[s] * factorial[p - s - 1] / factorial[p];
            total += weight * (r2[mask | (1u << j)] - r2[mask]);
        }
        out.shares[j] = total;
    }
    return out;
}

BootstrapInterval percentile_bootstrap(
    const std::function<std::optional<double>(std::span<const int>)>& statistic,
    int n_rows, int iters, std::uint64_t seed, double level) {
    if (n_rows <= 0) throw std::invalid_argument("percentile_bootstrap: empty data");
    if (iters < 1) throw std::invalid_argument("percentile_bootstrap: iters < 1");

    std::vector<int> full(n_rows);
    std::iota(full.begin(), full.end(), 0);
    const auto point = statistic(full);
    if (!point) throw numerical_error("bootstrap statistic undefined on full data");

    std::vector<double> stats;
    stats.reserve(iters);
    std::vector<int> idx(n_rows);
    for (int it = 0; it < iters; ++it) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(it));
        std::optional<double> value;
        for (int attempt = 0; attempt < 32 && !value; ++attempt) {
            for (int i = 0; i < n_rows; ++i)
                idx[i] = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_rows)));
            value = statistic(idx);
        }
        if (!value) throw numerical_error("bootstrap statistic undefined after bounded redraws");
        stats.push_back(*value);
    }
    std::sort(stats.begin(), stats.end());
    const double alpha = (1.0 - level) / 2.0;
    BootstrapInterval out;
    out.point = *point;
    out.lower = quantile_sorted(stats, alpha);
    out.upper = quantile_sorted(stats, 1.0 - alpha);
    return out;
}

std::vector<int> kfold_balanced(std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold_balanced: k < 2");
    std::vector<int> class0, class1;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] ? class1 : class0).push_back(static_cast<int>(i));
    if (static_cast<int>(class0.size()) < k || static_cast<int>(class1.size()) < k)
        throw std::invalid_argument("kfold_balanced: a class has fewer members than folds");

    Rng rng(seed);
    rng.shuffle(class0);
    rng.shuffle(class1);
    std::vector<int> folds(labels.size(), -1);
    for (std::size_t i = 0; i < class0.size(); ++i) folds[class0[i]] = static_cast<int>(i % k);
    for (std::size_t i = 0; i < class1.size(); ++i) folds[class1[i]] = static_cast<int>(i % k);
    return folds;
}

// --- special functions -----------------------------------------------------

namespace {

double ln_gamma(double x) { return std::lgamma(x); }

// Continued fraction for the regularized incomplete beta (Lentz).
double beta_cf(double a, double b, double x) {
    constexpr int max_iter = 400;
    constexpr double eps = 1e-15;
    constexpr double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double regularized_upper_incomplete_gamma(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("incomplete gamma: bad arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) {
        // Lower series, then complement.
        double sum = 1.0 / a, term = sum, ap = a;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
        }
        const double lower = sum * std::exp(-x + a * std::log(x) - ln_gamma(a));
        return 1.0 - lower;
    }
    // Upper continued fraction (Lentz).
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - ln_gamma(a));
}

double chi_square_sf(double x, int df) {
    if (x < 0.0 || df < 1) throw std::invalid_argument("chi_square_sf: bad arguments");
    if (x == 0.0) return 1.0;
    return regularized_upper_incomplete_gamma(static_cast<double>(df) / 2.0, x / 2.0);
}

double student_t_sf(double t, double df) {
    if (df <= 0.0) throw std::invalid_argument("student_t_sf: df <= 0");
    const double x = df / (df + t * t);
    const double half_tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
    return t >= 0.0 ? half_tail : 1.0 - half_tail;
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

std::optional<TTestResult> welch_one_tailed_t(std::span<const double> a,
                                              std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2)
        throw std::invalid_argument("welch_one_tailed_t: need >= 2 values per sample");
    const double va = sample_variance(a), vb = sample_variance(b);
    if (va == 0.0 && vb == 0.0) return std::nullopt;
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double se2 = va / na + vb / nb;
    const double t = (mean_of(a) - mean_of(b)) / std::sqrt(se2);
    const double df =
        se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    return TTestResult{t, student_t_sf(t, df), df};
}

std::optional<TTestResult> paired_one_tailed_t(std::span<const double> a,
                                               std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired t: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("paired t: need >= 2 pairs");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double vd = sample_variance(d);
    if (vd == 0.0) {
        if (mean_of(d) == 0.0) return TTestResult{0.0, 0.5, static_cast<double>(d.size() - 1)};
        return std::nullopt;  // constant nonzero difference: t is unbounded
    }
    const double n = static_cast<double>(d.size());
    const double t = mean_of(d) / std::sqrt(vd / n);
    return TTestResult{t, student_t_sf(t, n - 1.0), n - 1.0};
}

}  // namespace lexdyn::stats
