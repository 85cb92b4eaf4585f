#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "pulasso/model.hpp"
#include "pulasso/rng.hpp"
#include "pulasso/solver.hpp"

namespace pulasso {

struct CvResult {
    std::vector<double> lambda;
    std::vector<double> mean_deviance; // held-out observed deviance, mean over folds
    std::vector<double> se_deviance;
    double lambda_min = 0.0;
    double lambda_1se = 0.0;
    std::size_t index_min = 0;
    std::size_t index_1se = 0;
    int k = 0;
    // per-fold active non-intercept groups at each lambda (for stability studies)
    std::vector<std::vector<std::vector<Index>>> fold_active; // [fold][lambda] -> groups
};

namespace detail {

/// Stratified fold ids, deterministic in (seed, n, k).
inline std::vector<int> stratified_folds(const VectorXi& z, int k, std::uint64_t seed) {
    const Index n = z.size();
    std::vector<Index> pos, neg;
    for (Index i = 0; i < n; ++i) (z[i] ? pos : neg).push_back(i);
    auto assign = [&](std::vector<Index>& idx, std::string_view name, std::vector<int>& fold) {
        auto rng = substream(seed, name);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i = 0; i < idx.size(); ++i)
            fold[static_cast<std::size_t>(idx[i])] = static_cast<int>(i % static_cast<std::size_t>(k));
    };
    std::vector<int> fold(static_cast<std::size_t>(n), 0);
    assign(pos, "cv.labeled", fold);
    assign(neg, "cv.unlabeled", fold);
    return fold;
}

inline MatrixXd take_rows(const MatrixXd& x, const std::vector<Index>& rows) {
    MatrixXd out(static_cast<Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
    return out;
}

inline SparseMatrixd take_rows(const SparseMatrixd& x, const std::vector<Index>& rows) {
    std::vector<Index> pos(static_cast<std::size_t>(x.rows()), -1);
    for (std::size_t i = 0; i < rows.size(); ++i) pos[static_cast<std::size_t>(rows[i])] = static_cast<Index>(i);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(x.nonZeros()));
    for (int c = 0; c < x.outerSize(); ++c)
        for (SparseMatrixd::InnerIterator it(x, c); it; ++it)
            if (pos[static_cast<std::size_t>(it.row())] >= 0)
                trips.emplace_back(pos[static_cast<std::size_t>(it.row())], c, it.value());
    SparseMatrixd out(static_cast<Index>(rows.size()), x.cols());
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

/// Held-out observed deviance 2 n_fold L_fold(theta), eta built from the
/// fold's own n_l/n_u counts.
template <class MatrixT>
double holdout_deviance(const VectorXd& theta, const MatrixT& x_fold, const VectorXi& z_fold,
                        double pi) {
    Index nl = 0;
    for (Index i = 0; i < z_fold.size(); ++i) nl += z_fold[i];
    const Index nu_count = z_fold.size() - nl;
    if (nl < 1 || nu_count < 1)
        throw std::invalid_argument("fold lacks a labeled or unlabeled sample");
    const double c0 = std::log(static_cast<double>(nl)) - std::log(pi) -
                      std::log(static_cast<double>(nu_count));
    const VectorXd lp = linear_predictor(x_fold, theta);
    double acc = 0.0;
    for (Index i = 0; i < lp.size(); ++i) {
        const double eta = c0 + lp[i] - log1pexp(lp[i]);
        acc += log1pexp(eta) - (z_fold[i] ? eta : 0.0);
    }
    return 2.0 * acc;
}

/// Runs jobs 0..count-1, optionally on worker threads; slot-indexed results
/// keep aggregation deterministic.
inline void run_indexed(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min<int>(jobs, static_cast<int>(count));
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace detail

/// K-fold cross-validation, stratified by z. The lambda grid is computed on
/// the full data; each fold refits the path on its training part and is
/// scored by held-out observed deviance.
template <class MatrixT>
CvResult cross_validate(const PuData<MatrixT>& d, const GroupSpec& spec, DesignMode mode,
                        const PathConfig& pcfg, const SolverConfig& cfg, int k,
                        std::uint64_t seed, int jobs = 1) {
    if (k < 2) throw std::invalid_argument("k must be >= 2");
    PathConfig shared = pcfg;
    if (shared.user_lambda.empty()) {
        const Standardizer sd_full = build_standardizer(d.x, spec, mode);
        shared.user_lambda = make_lambda_sequence(lambda_max(d, sd_full), pcfg, d.n(), d.n_coef());
    }
    const std::vector<double>& lambdas = shared.user_lambda;
    const std::vector<int> fold = detail::stratified_folds(d.z, k, seed);

    CvResult cv;
    cv.k = k;
    cv.lambda = lambdas;
    cv.fold_active.resize(static_cast<std::size_t>(k));
    MatrixXd dev(static_cast<Index>(lambdas.size()), k);

    detail::run_indexed(static_cast<std::size_t>(k), jobs, [&](std::size_t f) {
        std::vector<Index> train_rows, test_rows;
        for (Index i = 0; i < d.n(); ++i)
            ((fold[static_cast<std::size_t>(i)] == static_cast<int>(f)) ? test_rows : train_rows)
                .push_back(i);
        VectorXi z_tr(static_cast<Index>(train_rows.size())), z_te(static_cast<Index>(test_rows.size()));
        for (std::size_t i = 0; i < train_rows.size(); ++i) z_tr[static_cast<Index>(i)] = d.z[train_rows[i]];
        for (std::size_t i = 0; i < test_rows.size(); ++i) z_te[static_cast<Index>(i)] = d.z[test_rows[i]];
        Index nl_te = z_te.sum();
        if (nl_te < 1 || z_te.size() - nl_te < 1)
            throw std::invalid_argument("fold " + std::to_string(f) +
                                        " lacks a labeled or unlabeled sample");
        MatrixT x_tr = detail::take_rows(d.x, train_rows);
        MatrixT x_te = detail::take_rows(d.x, test_rows);
        auto d_tr = make_pu_data(std::move(x_tr), std::move(z_tr), d.pi);
        Standardizer sd_tr = build_standardizer(d_tr.x, spec, mode);
        auto fits = fit_path(d_tr, sd_tr, shared, cfg);
        auto& active = cv.fold_active[f];
        active.resize(fits.size());
        for (std::size_t l = 0; l < fits.size(); ++l) {
            dev(static_cast<Index>(l), static_cast<Index>(f)) =
                detail::holdout_deviance(fits[l].coef.theta, x_te, z_te, d.pi);
            active[l] = fits[l].active_groups;
        }
    });

    const double kd = static_cast<double>(k);
    cv.mean_deviance.resize(lambdas.size());
    cv.se_deviance.resize(lambdas.size());
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
        const auto row = dev.row(static_cast<Index>(l));
        const double mean = row.mean();
        const double var = (row.array() - mean).square().sum() / (kd - 1.0);
        cv.mean_deviance[l] = mean;
        cv.se_deviance[l] = std::sqrt(var / kd);
        if (!std::isfinite(mean)) throw std::runtime_error("non-finite CV deviance");
    }
    cv.index_min = static_cast<std::size_t>(
        std::min_element(cv.mean_deviance.begin(), cv.mean_deviance.end()) -
        cv.mean_deviance.begin());
    cv.lambda_min = lambdas[cv.index_min];
    const double cutoff = cv.mean_deviance[cv.index_min] + cv.se_deviance[cv.index_min];
    cv.index_1se = cv.index_min;
    for (std::size_t l = 0; l <= cv.index_min; ++l) {
        if (cv.mean_deviance[l] <= cutoff) {
            cv.index_1se = l;
            break;
        }
    }
    cv.lambda_1se = lambdas[cv.index_1se];
    return cv;
}

/// K-fold CV for the plain logistic baselines, scored by held-out logistic
/// deviance.
template <class MatrixT>
CvResult logistic_cross_validate(const VectorXd& y, const MatrixT& x, const GroupSpec& spec,
                                 DesignMode mode, const PathConfig& pcfg, const SolverConfig& cfg,
                                 int k, std::uint64_t seed, int jobs = 1) {
    if (k < 2) throw std::invalid_argument("k must be >= 2");
    if (y.size() != x.rows()) throw std::invalid_argument("y length mismatch");
    LogisticModel model{&y};
    PathConfig shared = pcfg;
    if (shared.user_lambda.empty()) {
        const Standardizer sd_full = build_standardizer(x, spec, mode);
        shared.user_lambda =
            make_lambda_sequence(lambda_max_for(model, x, sd_full), pcfg, x.rows(), spec.n_coef());
    }
    const std::vector<double>& lambdas = shared.user_lambda;

    VectorXi yz(y.size());
    for (Index i = 0; i < y.size(); ++i) yz[i] = y[i] > 0.5 ? 1 : 0;
    const std::vector<int> fold = detail::stratified_folds(yz, k, seed);

    CvResult cv;
    cv.k = k;
    cv.lambda = lambdas;
    MatrixXd dev(static_cast<Index>(lambdas.size()), k);

    detail::run_indexed(static_cast<std::size_t>(k), jobs, [&](std::size_t f) {
        std::vector<Index> train_rows, test_rows;
        for (Index i = 0; i < x.rows(); ++i)
            ((fold[static_cast<std::size_t>(i)] == static_cast<int>(f)) ? test_rows : train_rows)
                .push_back(i);
        VectorXd y_tr(static_cast<Index>(train_rows.size()));
        for (std::size_t i = 0; i < train_rows.size(); ++i) y_tr[static_cast<Index>(i)] = y[train_rows[i]];
        MatrixT x_tr = detail::take_rows(x, train_rows);
        MatrixT x_te = detail::take_rows(x, test_rows);
        Standardizer sd_tr = build_standardizer(x_tr, spec, mode);
        auto fits = logistic_fit_path(y_tr, x_tr, sd_tr, shared, cfg);
        for (std::size_t l = 0; l < fits.size(); ++l) {
            const VectorXd lp = linear_predictor(x_te, fits[l].coef.theta);
            double acc = 0.0;
            for (std::size_t i = 0; i < test_rows.size(); ++i)
                acc += log1pexp(lp[static_cast<Index>(i)]) -
                       y[test_rows[i]] * lp[static_cast<Index>(i)];
            dev(static_cast<Index>(l), static_cast<Index>(f)) = 2.0 * acc;
        }
    });

    const double kd = static_cast<double>(k);
    cv.mean_deviance.resize(lambdas.size());
    cv.se_deviance.resize(lambdas.size());
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
        const auto row = dev.row(static_cast<Index>(l));
        const double mean = row.mean();
        cv.mean_deviance[l] = mean;
        cv.se_deviance[l] = std::sqrt((row.array() - mean).square().sum() / (kd - 1.0) / kd);
    }
    cv.index_min = static_cast<std::size_t>(
        std::min_element(cv.mean_deviance.begin(), cv.mean_deviance.end()) -
        cv.mean_deviance.begin());
    cv.lambda_min = lambdas[cv.index_min];
    const double cutoff = cv.mean_deviance[cv.index_min] + cv.se_deviance[cv.index_min];
    cv.index_1se = cv.index_min;
    for (std::size_t l = 0; l <= cv.index_min; ++l) {
        if (cv.mean_deviance[l] <= cutoff) {
            cv.index_1se = l;
            break;
        }
    }
    cv.lambda_1se = lambdas[cv.index_1se];
    return cv;
}

// ---------------------------------------------------------------------------
// PU-adjusted ROC / AUC
// ---------------------------------------------------------------------------

struct RocCurve {
    std::vector<double> thresholds;
    std::vector<double> tp_rate;
    std::vector<double> fp_naive;
    std::vector<double> fp_adjusted; // clipped to [0,1] for curve output
    double auc_naive = 0.0;
    double auc_adjusted = 0.0; // reported unclipped
};

/// ROC treating unlabeled as negative, then bias-corrected:
/// FP_adj = (FP_naive - pi TP)/(1-pi), AUC_adj = (AUC_naive - pi/2)/(1-pi).
inline RocCurve adjusted_roc(const VectorXd& scores, const VectorXi& z, double pi) {
    if (scores.size() != z.size()) throw std::invalid_argument("scores and z length differ");
    if (!(pi >= 0.0 && pi < 1.0)) throw std::invalid_argument("pi must be in [0,1)");
    if (!scores.allFinite()) throw std::invalid_argument("scores must be finite");
    Index n_pos = 0;
    for (Index i = 0; i < z.size(); ++i) {
        if (z[i] != 0 && z[i] != 1) throw std::invalid_argument("z must be binary");
        n_pos += z[i];
    }
    const Index n_neg = z.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("need both labeled and unlabeled samples for a curve");

    std::vector<Index> order(static_cast<std::size_t>(scores.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.thresholds.push_back(std::numeric_limits<double>::infinity());
    curve.tp_rate.push_back(0.0);
    curve.fp_naive.push_back(0.0);
    double tp = 0.0, fp = 0.0, auc = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        double d_tp = 0.0, d_fp = 0.0;
        while (i < order.size() && scores[order[i]] == s) {
            (z[order[i]] ? d_tp : d_fp) += 1.0;
            ++i;
        }
        const double tp0 = tp / static_cast<double>(n_pos);
        tp += d_tp;
        fp += d_fp;
        const double tp1 = tp / static_cast<double>(n_pos);
        auc += (d_fp / static_cast<double>(n_neg)) * 0.5 * (tp0 + tp1);
        curve.thresholds.push_back(s);
        curve.tp_rate.push_back(tp1);
        curve.fp_naive.push_back(fp / static_cast<double>(n_neg));
    }
    curve.auc_naive = auc;
    curve.auc_adjusted = pi == 0.0 ? auc : (auc - pi / 2.0) / (1.0 - pi);
    curve.fp_adjusted.resize(curve.fp_naive.size());
    for (std::size_t t = 0; t < curve.fp_naive.size(); ++t) {
        const double adj =
            pi == 0.0 ? curve.fp_naive[t]
                      : (curve.fp_naive[t] - pi * curve.tp_rate[t]) / (1.0 - pi);
        curve.fp_adjusted[t] = std::clamp(adj, 0.0, 1.0);
    }
    return curve;
}

inline double misclassification_rate(const VectorXi& pred, const VectorXi& truth) {
    if (pred.size() != truth.size()) throw std::invalid_argument("length mismatch");
    Index wrong = 0;
    for (Index i = 0; i < pred.size(); ++i) wrong += pred[i] != truth[i];
    return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

/// F1 = 2 p r / (p + r); 0 when there are neither predicted nor true positives.
inline double f1_score(const VectorXi& pred, const VectorXi& truth) {
    if (pred.size() != truth.size()) throw std::invalid_argument("length mismatch");
    double tp = 0, fp = 0, fn = 0;
    for (Index i = 0; i < pred.size(); ++i) {
        tp += pred[i] == 1 && truth[i] == 1;
        fp += pred[i] == 1 && truth[i] == 0;
        fn += pred[i] == 0 && truth[i] == 1;
    }
    const double denom = 2.0 * tp + fp + fn;
    return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

/// Selection similarity S_S(s,s') = 1 - (|s|+|s'|-2|s∩s'|)/(|s|+|s'|-|s∩s'|),
/// i.e. the Jaccard index; two empty sets count as identical.
inline double stability_score(const std::set<Index>& s, const std::set<Index>& s2) {
    std::vector<Index> inter;
    std::set_intersection(s.begin(), s.end(), s2.begin(), s2.end(), std::back_inserter(inter));
    const double a = static_cast<double>(s.size());
    const double b = static_cast<double>(s2.size());
    const double i = static_cast<double>(inter.size());
    const double uni = a + b - i;
    if (uni == 0.0) return 1.0;
    return 1.0 - (a + b - 2.0 * i) / uni;
}

struct StabilitySummary {
    std::vector<double> pair_scores; // all pairs, lexicographic order
    double mean = 1.0;
    double q1 = 1.0, median = 1.0, q3 = 1.0;
};

/// All-pairs stability of a collection of selections (e.g. per CV fold).
inline StabilitySummary stability_summary(const std::vector<std::set<Index>>& selections) {
    StabilitySummary out;
    for (std::size_t a = 0; a + 1 < selections.size(); ++a)
        for (std::size_t b = a + 1; b < selections.size(); ++b)
            out.pair_scores.push_back(stability_score(selections[a], selections[b]));
    if (out.pair_scores.empty()) return out;
    std::vector<double> sorted = out.pair_scores;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        const double h = q * (static_cast<double>(sorted.size()) - 1.0);
        const std::size_t lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
        return sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
    };
    out.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) /
               static_cast<double>(sorted.size());
    out.q1 = quantile(0.25);
    out.median = quantile(0.5);
    out.q3 = quantile(0.75);
    return out;
}

} // namespace pulasso
