#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "pulasso/groups.hpp"
#include "pulasso/model.hpp"
#include "pulasso/standardize.hpp"

namespace pulasso {

struct SolverConfig {
    double inner_tol = 1e-7;      // BCD stop: max ||nu'_gj - nu_gj||/sqrt(|g_j|)
    double outer_tol = 1e-7;      // MM/EM stop: relative objective change
    long max_inner_iters = 100000;
    long max_outer_iters = 10000;
    bool use_strong_rules = true;
};

struct PathConfig {
    int n_lambda = 100;
    std::optional<double> lambda_min_ratio; // default 0.05, or 1e-4 when n > p
    std::vector<double> user_lambda;        // strictly decreasing, overrides the grid
};

struct Coefficients {
    VectorXd theta; // original scale, theta[0] = intercept
    VectorXd nu;    // standardized scale
};

struct FitResult {
    double lambda = 0.0;
    Coefficients coef;
    double objective = 0.0; // loss + lambda * sum_j w_j ||nu_gj||
    long outer_iters = 0;
    long inner_iters = 0; // total BCD cycles
    bool converged = false;
    double kkt = std::numeric_limits<double>::quiet_NaN();
    std::vector<Index> active_groups; // non-intercept groups with nu_gj != 0
    std::vector<double> objective_trace; // objective per outer iteration, initial first
};

/// Group soft-thresholding: S(z,t) = (||z||-t) z/||z|| if ||z|| > t, else 0.
inline VectorXd soft_threshold(const VectorXd& z, double t) {
    const double norm = z.norm();
    if (norm > t) return z * ((norm - t) / norm);
    return VectorXd::Zero(z.size());
}

inline double group_penalty(const VectorXd& nu, const GroupSpec& spec) {
    double pen = 0.0;
    for (Index j = 1; j < spec.n_groups(); ++j) {
        const auto& cols = spec.groups[static_cast<std::size_t>(j)];
        double ss = 0.0;
        for (Index c : cols) ss += nu[c] * nu[c];
        pen += spec.weights[j] * std::sqrt(ss);
    }
    return pen;
}

namespace detail {

// Group-block kernels over the orthonormalized design. Dense works on Q;
// sparse works on X with R^{-1} and column means, deferring the constant
// residual corrections (apply() returns the drift a_j it leaves behind).
struct DenseGroupOps {
    const Standardizer* sd;

    void stat(Index j, const VectorXd& r, double /*mean_r*/, VectorXd& out) const {
        const auto& cols = sd->spec.groups[static_cast<std::size_t>(j)];
        out.resize(static_cast<Index>(cols.size()));
        const double inv_n = 1.0 / static_cast<double>(sd->n);
        for (std::size_t i = 0; i < cols.size(); ++i)
            out[static_cast<Index>(i)] = sd->q.col(cols[i] - 1).dot(r) * inv_n;
    }

    double apply(Index j, const VectorXd& diff, VectorXd& r) const {
        const auto& cols = sd->spec.groups[static_cast<std::size_t>(j)];
        for (std::size_t i = 0; i < cols.size(); ++i)
            r += sd->q.col(cols[i] - 1) * diff[static_cast<Index>(i)];
        return 0.0;
    }
};

struct SparseGroupOps {
    const SparseMatrixd* x;
    const Standardizer* sd;

    // n^{-1} Q_gj^T r = R_gj^{-T} (n^{-1} X_gj^T r - colmeans * mean(r))
    void stat(Index j, const VectorXd& r, double mean_r, VectorXd& out) const {
        const auto& cols = sd->spec.groups[static_cast<std::size_t>(j)];
        const Index k = static_cast<Index>(cols.size());
        const double inv_n = 1.0 / static_cast<double>(sd->n);
        VectorXd t(k);
        for (Index i = 0; i < k; ++i) {
            double acc = 0.0;
            for (SparseMatrixd::InnerIterator it(*x, cols[static_cast<std::size_t>(i)] - 1); it; ++it)
                acc += it.value() * r[it.row()];
            t[i] = acc * inv_n - sd->col_means[static_cast<std::size_t>(j)][i] * mean_r;
        }
        out.noalias() = sd->r_inv[static_cast<std::size_t>(j)].transpose().triangularView<Eigen::Lower>() * t;
    }

    double apply(Index j, const VectorXd& diff, VectorXd& r) const {
        const auto& cols = sd->spec.groups[static_cast<std::size_t>(j)];
        VectorXd w = sd->r_inv[static_cast<std::size_t>(j)].triangularView<Eigen::Upper>() * diff;
        for (std::size_t i = 0; i < cols.size(); ++i) {
            const double wi = w[static_cast<Index>(i)];
            if (wi == 0.0) continue;
            for (SparseMatrixd::InnerIterator it(*x, cols[i] - 1); it; ++it)
                r[it.row()] += it.value() * wi;
        }
        return sd->col_means[static_cast<std::size_t>(j)].dot(w);
    }
};

/// Max first-order violation of the quadratic subproblem at residual r.
/// Intercept contributes |mean r|; active groups ||stat - 4 lambda w nu/||nu||||;
/// inactive groups max(0, ||stat|| - 4 lambda w).
template <class Ops>
double kkt_violation(const Ops& ops, const Standardizer& sd, const VectorXd& r,
                     double lambda, const VectorXd& nu,
                     const std::vector<char>* subset = nullptr) {
    const double mean_r = r.mean();
    double viol = std::abs(mean_r);
    VectorXd zb, sub;
    for (Index j = 1; j < sd.spec.n_groups(); ++j) {
        if (subset && !(*subset)[static_cast<std::size_t>(j)]) continue;
        const auto& cols = sd.spec.groups[static_cast<std::size_t>(j)];
        const Index k = static_cast<Index>(cols.size());
        ops.stat(j, r, mean_r, zb);
        sub.resize(k);
        for (Index i = 0; i < k; ++i) sub[i] = nu[cols[static_cast<std::size_t>(i)]];
        const double t = 4.0 * lambda * sd.spec.weights[j];
        const double sub_norm = sub.norm();
        if (sub_norm == 0.0)
            viol = std::max(viol, std::max(0.0, zb.norm() - t));
        else
            viol = std::max(viol, (zb - sub * (t / sub_norm)).norm());
    }
    return viol;
}

struct BcdOutcome {
    long cycles = 0;
    bool converged = false;
};

/// Block coordinate descent on (2n)^{-1}||u - Q nu||^2 + 4 lambda sum w_j ||nu_gj||.
/// Takes the residual r = u - Q nu (updated in place together with nu).
/// The intercept is solved once up front; Q_gj orthogonal to 1 keeps it optimal.
template <class Ops>
BcdOutcome bcd_core(const Ops& ops, const Standardizer& sd, double lambda, VectorXd& nu,
                    VectorXd& r, const SolverConfig& cfg,
                    const std::vector<char>* screen = nullptr) {
    const Index J = sd.spec.n_groups();

    const double d0 = r.mean();
    nu[0] += d0;
    r.array() -= d0;

    BcdOutcome out;
    VectorXd zb, sub, diff;
    while (out.cycles < cfg.max_inner_iters) {
        double mean_r = r.mean();
        double drift = 0.0; // accumulated constant corrections (sparse mode)
        double max_update = 0.0;
        for (Index j = 1; j < J; ++j) {
            if (screen && !(*screen)[static_cast<std::size_t>(j)]) continue;
            const auto& cols = sd.spec.groups[static_cast<std::size_t>(j)];
            const Index k = static_cast<Index>(cols.size());
            ops.stat(j, r, mean_r, zb);
            sub.resize(k);
            for (Index i = 0; i < k; ++i) sub[i] = nu[cols[static_cast<std::size_t>(i)]];
            zb += sub;
            const double t = 4.0 * lambda * sd.spec.weights[j];
            // ties at the threshold (within rounding) resolve to zero
            VectorXd next = zb.norm() <= t * (1.0 + 1e-12) ? VectorXd::Zero(k).eval()
                                                           : soft_threshold(zb, t);
            diff = sub - next;
            const double d = diff.norm();
            if (d > 0.0) {
                const double a = ops.apply(j, diff, r);
                drift += a;
                mean_r += a;
                for (Index i = 0; i < k; ++i) nu[cols[static_cast<std::size_t>(i)]] = next[i];
            }
            max_update = std::max(max_update, d / std::sqrt(static_cast<double>(k)));
        }
        if (drift != 0.0) r.array() -= drift; // end-of-cycle correction, all at once
        ++out.cycles;
        if (max_update < cfg.inner_tol) {
            if (kkt_violation(ops, sd, r, lambda, nu, screen) < cfg.inner_tol) {
                out.converged = true;
                break;
            }
        }
    }
    return out;
}

} // namespace detail

struct BcdResult {
    VectorXd nu;
    long cycles = 0;
    bool converged = false; // iteration cap exceeded leaves this false, no throw
};

/// Solve the penalized quadratic problem on the materialized Q.
inline BcdResult bcd_dense(const Standardizer& sd, const VectorXd& u, double lambda,
                           const VectorXd& nu0, const SolverConfig& cfg = {}) {
    if (sd.mode != DesignMode::dense) throw std::invalid_argument("dense standardizer required");
    if (u.size() != sd.n) throw std::invalid_argument("u length mismatch");
    BcdResult res;
    res.nu = nu0;
    VectorXd r = u - standardized_predictor(sd, res.nu);
    detail::DenseGroupOps ops{&sd};
    auto out = detail::bcd_core(ops, sd, lambda, res.nu, r, cfg);
    res.cycles = out.cycles;
    res.converged = out.converged;
    return res;
}

/// Same problem solved against sparse X with deferred residual corrections.
inline BcdResult bcd_sparse(const SparseMatrixd& x, const Standardizer& sd, const VectorXd& u,
                            double lambda, const VectorXd& nu0, const SolverConfig& cfg = {}) {
    if (sd.mode != DesignMode::sparse) throw std::invalid_argument("sparse standardizer required");
    if (u.size() != sd.n) throw std::invalid_argument("u length mismatch");
    BcdResult res;
    res.nu = nu0;
    VectorXd r = u - standardized_predictor(x, sd, res.nu);
    detail::SparseGroupOps ops{&x, &sd};
    auto out = detail::bcd_core(ops, sd, lambda, res.nu, r, cfg);
    res.cycles = out.cycles;
    res.converged = out.converged;
    return res;
}

// ---------------------------------------------------------------------------
// Majorization loops. A model supplies the loss and the (yhat, mu*) pair that
// defines the working response u = 4(yhat - mu*) + lp.
// ---------------------------------------------------------------------------

/// The PU observed-likelihood model (QM-EM; the E-step is folded into the
/// working response).
template <class MatrixT>
struct PuMmModel {
    const PuData<MatrixT>* d;

    double loss(const VectorXd& lp) const {
        const double c0 = d->eta_offset();
        double acc = 0.0;
        for (Index i = 0; i < lp.size(); ++i) {
            const double eta = c0 + lp[i] - log1pexp(lp[i]);
            acc += log1pexp(eta) - (d->z[i] ? eta : 0.0);
        }
        return acc / static_cast<double>(lp.size());
    }
    void responses(const VectorXd& lp, VectorXd& yhat, VectorXd& mu) const {
        yhat = e_step_from_lp(lp, d->z);
        mu = mu_star_from_lp(lp, d->offset_b());
    }
    double null_intercept() const { return std::log(d->pi) - std::log1p(-d->pi); }
};

/// M-step objective of the regularized EM algorithm: posteriors fixed at
/// yhat, loss = -Q(theta) up to the penalty.
template <class MatrixT>
struct MStepModel {
    const PuData<MatrixT>* d;
    const VectorXd* yhat;

    double loss(const VectorXd& lp) const {
        const double b = d->offset_b();
        double acc = 0.0;
        for (Index i = 0; i < lp.size(); ++i)
            acc += log1pexp(lp[i] + b) - (*yhat)[i] * (lp[i] + b);
        return acc / static_cast<double>(lp.size());
    }
    void responses(const VectorXd& lp, VectorXd& yh, VectorXd& mu) const {
        yh = *yhat;
        mu = mu_star_from_lp(lp, d->offset_b());
    }
    double null_intercept() const { return std::log(d->pi) - std::log1p(-d->pi); }
};

/// Plain penalized logistic regression on known responses y in [0,1]
/// (the oracle / treat-unlabeled-as-negative baselines).
struct LogisticModel {
    const VectorXd* y;

    double loss(const VectorXd& lp) const {
        double acc = 0.0;
        for (Index i = 0; i < lp.size(); ++i) acc += log1pexp(lp[i]) - (*y)[i] * lp[i];
        return acc / static_cast<double>(lp.size());
    }
    void responses(const VectorXd& lp, VectorXd& yh, VectorXd& mu) const {
        yh = *y;
        mu.resize(lp.size());
        for (Index i = 0; i < lp.size(); ++i) mu[i] = sigmoid(lp[i]);
    }
    double null_intercept() const {
        const double m = y->mean();
        if (!(m > 0.0 && m < 1.0))
            throw std::invalid_argument("responses are all one class");
        return std::log(m) - std::log1p(-m);
    }
};

namespace detail {

struct MmOutcome {
    VectorXd nu;
    double objective = 0.0;
    long outer = 0;
    long inner = 0;
    bool converged = false;
    double kkt = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> trace;
};

template <class Model, class MatrixT, class Ops>
MmOutcome mm_loop(const Model& model, const MatrixT& x, const Standardizer& sd,
                  const Ops& ops, double lambda, VectorXd nu, const SolverConfig& cfg,
                  const std::vector<char>* screen = nullptr) {
    MmOutcome out;
    VectorXd lp = standardized_predictor(x, sd, nu);
    double obj = model.loss(lp) + lambda * group_penalty(nu, sd.spec);
    out.trace.push_back(obj);
    VectorXd yhat, mu, r;
    while (out.outer < cfg.max_outer_iters) {
        model.responses(lp, yhat, mu);
        r = 4.0 * (yhat - mu); // = u(theta^m) - Q nu^m
        auto bcd = bcd_core(ops, sd, lambda, nu, r, cfg, screen);
        out.inner += bcd.cycles;
        ++out.outer;
        lp = standardized_predictor(x, sd, nu);
        const double next = model.loss(lp) + lambda * group_penalty(nu, sd.spec);
        const double rel = std::abs(next - obj) / (1.0 + std::abs(obj));
        obj = next;
        out.trace.push_back(obj);
        if (rel < cfg.outer_tol) {
            model.responses(lp, yhat, mu);
            r = 4.0 * (yhat - mu);
            out.kkt = kkt_violation(ops, sd, r, lambda, nu, screen);
            if (out.kkt < 10.0 * cfg.outer_tol) {
                out.converged = true;
                break;
            }
        }
    }
    out.nu = std::move(nu);
    out.objective = obj;
    return out;
}

template <class Model, class MatrixT>
MmOutcome mm_dispatch(const Model& model, const MatrixT& x, const Standardizer& sd,
                      double lambda, VectorXd nu, const SolverConfig& cfg,
                      const std::vector<char>* screen = nullptr) {
    if (sd.mode == DesignMode::dense) {
        DenseGroupOps ops{&sd};
        return mm_loop(model, x, sd, ops, lambda, std::move(nu), cfg, screen);
    }
    if constexpr (std::is_same_v<MatrixT, SparseMatrixd>) {
        SparseGroupOps ops{&x, &sd};
        return mm_loop(model, x, sd, ops, lambda, std::move(nu), cfg, screen);
    } else {
        throw std::invalid_argument("sparse standardizer requires a sparse design matrix");
    }
}

inline FitResult make_fit_result(const MmOutcome& out, const Standardizer& sd, double lambda) {
    FitResult res;
    res.lambda = lambda;
    res.coef.nu = out.nu;
    res.coef.theta = from_standardized(out.nu, sd);
    res.objective = out.objective;
    res.outer_iters = out.outer;
    res.inner_iters = out.inner;
    res.converged = out.converged;
    res.kkt = out.kkt;
    res.objective_trace = out.trace;
    for (Index j = 1; j < sd.spec.n_groups(); ++j) {
        for (Index c : sd.spec.groups[static_cast<std::size_t>(j)]) {
            if (out.nu[c] != 0.0) {
                res.active_groups.push_back(j);
                break;
            }
        }
    }
    return res;
}

template <class Model, class MatrixT>
void check_init(const Model& model, const MatrixT& x, const Standardizer& sd,
                double lambda, const VectorXd& nu0) {
    VectorXd nu_null = VectorXd::Zero(sd.n_coef());
    nu_null[0] = model.null_intercept();
    const double f0 = model.loss(standardized_predictor(x, sd, nu0)) +
                      lambda * group_penalty(nu0, sd.spec);
    const double fn = model.loss(standardized_predictor(x, sd, nu_null));
    if (f0 > fn + 1e-12)
        throw std::invalid_argument("initial point has a worse objective than the null model");
}

} // namespace detail

/// Largest lambda at which every non-intercept group stays zero:
/// max_j ||n^{-1} Q_gj^T r0|| / (4 w_j) with r0 the centered working response
/// at the null model.
template <class Model, class MatrixT>
double lambda_max_for(const Model& model, const MatrixT& x, const Standardizer& sd) {
    VectorXd nu_null = VectorXd::Zero(sd.n_coef());
    nu_null[0] = model.null_intercept();
    const VectorXd lp = standardized_predictor(x, sd, nu_null);
    VectorXd yhat, mu;
    model.responses(lp, yhat, mu);
    VectorXd u = 4.0 * (yhat - mu) + lp;
    VectorXd r0 = u.array() - u.mean();
    double lam = 0.0;
    VectorXd zb;
    auto scan = [&](const auto& ops) {
        for (Index j = 1; j < sd.spec.n_groups(); ++j) {
            ops.stat(j, r0, 0.0, zb);
            lam = std::max(lam, zb.norm() / (4.0 * sd.spec.weights[j]));
        }
    };
    if (sd.mode == DesignMode::dense) {
        scan(detail::DenseGroupOps{&sd});
    } else if constexpr (std::is_same_v<MatrixT, SparseMatrixd>) {
        scan(detail::SparseGroupOps{&x, &sd});
    } else {
        throw std::invalid_argument("sparse standardizer requires a sparse design matrix");
    }
    return lam;
}

template <class MatrixT>
double lambda_max(const PuData<MatrixT>& d, const Standardizer& sd) {
    return lambda_max_for(PuMmModel<MatrixT>{&d}, d.x, sd);
}

/// PUlasso QM-EM fit at a single lambda.
template <class MatrixT>
FitResult pulasso_fit(const PuData<MatrixT>& d, const Standardizer& sd, double lambda,
                      const VectorXd& theta0, const SolverConfig& cfg = {}) {
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    PuMmModel<MatrixT> model{&d};
    VectorXd nu0 = to_standardized(theta0, sd);
    detail::check_init(model, d.x, sd, lambda, nu0);
    auto out = detail::mm_dispatch(model, d.x, sd, lambda, std::move(nu0), cfg);
    return detail::make_fit_result(out, sd, lambda);
}

template <class MatrixT>
FitResult pulasso_fit(const PuData<MatrixT>& d, const Standardizer& sd, double lambda,
                      const SolverConfig& cfg = {}) {
    return pulasso_fit(d, sd, lambda, theta_null(d.pi, d.n_coef()), cfg);
}

/// Classic regularized EM fit: each M-step is a penalized
/// logistic problem with offset b, itself solved by the quadratic
/// majorization + BCD loop run to convergence.
template <class MatrixT>
FitResult em_fit(const PuData<MatrixT>& d, const Standardizer& sd, double lambda,
                 const VectorXd& theta0, const SolverConfig& cfg = {}) {
    if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
    PuMmModel<MatrixT> observed{&d};
    VectorXd nu = to_standardized(theta0, sd);
    detail::check_init(observed, d.x, sd, lambda, nu);

    detail::MmOutcome out;
    VectorXd lp = standardized_predictor(d.x, sd, nu);
    double obj = observed.loss(lp) + lambda * group_penalty(nu, sd.spec);
    out.trace.push_back(obj);
    VectorXd yhat, mu, r;
    while (out.outer < cfg.max_outer_iters) {
        yhat = e_step_from_lp(lp, d.z);
        MStepModel<MatrixT> mstep{&d, &yhat};
        auto inner = detail::mm_dispatch(mstep, d.x, sd, lambda, std::move(nu), cfg);
        nu = std::move(inner.nu);
        out.inner += inner.inner;
        ++out.outer;
        lp = standardized_predictor(d.x, sd, nu);
        const double next = observed.loss(lp) + lambda * group_penalty(nu, sd.spec);
        const double rel = std::abs(next - obj) / (1.0 + std::abs(obj));
        obj = next;
        out.trace.push_back(obj);
        if (rel < cfg.outer_tol) {
            VectorXd mu_obs;
            observed.responses(lp, yhat, mu_obs);
            r = 4.0 * (yhat - mu_obs);
            double kkt;
            if (sd.mode == DesignMode::dense) {
                kkt = detail::kkt_violation(detail::DenseGroupOps{&sd}, sd, r, lambda, nu);
            } else if constexpr (std::is_same_v<MatrixT, SparseMatrixd>) {
                kkt = detail::kkt_violation(detail::SparseGroupOps{&d.x, &sd}, sd, r, lambda, nu);
            } else {
                throw std::invalid_argument("sparse standardizer requires a sparse design matrix");
            }
            out.kkt = kkt;
            if (kkt < 10.0 * cfg.outer_tol) {
                out.converged = true;
                break;
            }
        }
    }
    out.nu = std::move(nu);
    out.objective = obj;
    return detail::make_fit_result(out, sd, lambda);
}

template <class MatrixT>
FitResult em_fit(const PuData<MatrixT>& d, const Standardizer& sd, double lambda,
                 const SolverConfig& cfg = {}) {
    return em_fit(d, sd, lambda, theta_null(d.pi, d.n_coef()), cfg);
}

/// Max first-order violation at nu, evaluated at the self-consistent working
/// response u(theta(nu)).
template <class MatrixT>
double kkt_check(const VectorXd& nu, const Standardizer& sd, const PuData<MatrixT>& d,
                 double lambda) {
    PuMmModel<MatrixT> model{&d};
    const VectorXd lp = standardized_predictor(d.x, sd, nu);
    VectorXd yhat, mu;
    model.responses(lp, yhat, mu);
    VectorXd r = 4.0 * (yhat - mu);
    if (sd.mode == DesignMode::dense)
        return detail::kkt_violation(detail::DenseGroupOps{&sd}, sd, r, lambda, nu);
    if constexpr (std::is_same_v<MatrixT, SparseMatrixd>)
        return detail::kkt_violation(detail::SparseGroupOps{&d.x, &sd}, sd, r, lambda, nu);
    else
        throw std::invalid_argument("sparse standardizer requires a sparse design matrix");
}

inline std::vector<double> make_lambda_sequence(double lam_max, const PathConfig& pcfg,
                                                Index n, Index p) {
    if (!pcfg.user_lambda.empty()) {
        const auto& ul = pcfg.user_lambda;
        for (std::size_t i = 0; i < ul.size(); ++i) {
            if (!(ul[i] > 0.0)) throw std::invalid_argument("user lambdas must be positive");
            if (i > 0 && !(ul[i] < ul[i - 1]))
                throw std::invalid_argument("user lambdas must be strictly decreasing");
        }
        return ul;
    }
    if (pcfg.n_lambda < 1) throw std::invalid_argument("n_lambda must be >= 1");
    double ratio = pcfg.lambda_min_ratio.value_or(n > p ? 1e-4 : 0.05);
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("lambda_min_ratio must be in (0,1)");
    std::vector<double> seq(static_cast<std::size_t>(pcfg.n_lambda));
    if (pcfg.n_lambda == 1) {
        seq[0] = lam_max;
        return seq;
    }
    const double step = std::log(ratio) / static_cast<double>(pcfg.n_lambda - 1);
    for (int i = 0; i < pcfg.n_lambda; ++i)
        seq[static_cast<std::size_t>(i)] = lam_max * std::exp(step * i);
    return seq;
}

namespace detail {

/// Shared path driver: warm starts, sequential group strong rule, exact KKT
/// repair after every solve so screening is lossless.
template <class Model, class MatrixT>
std::vector<FitResult> path_core(const Model& model, const MatrixT& x, const Standardizer& sd,
                                 const PathConfig& pcfg, const SolverConfig& cfg) {
    const Index J = sd.spec.n_groups();
    const double lam_max = lambda_max_for(model, x, sd);
    const std::vector<double> lambdas = make_lambda_sequence(lam_max, pcfg, sd.n, sd.n_coef());

    VectorXd nu_null = VectorXd::Zero(sd.n_coef());
    nu_null[0] = model.null_intercept();
    const double f_null = model.loss(standardized_predictor(x, sd, nu_null));

    std::vector<FitResult> results;
    results.reserve(lambdas.size());

    VectorXd nu_warm = nu_null;
    VectorXd r_prev, zb; // self-consistent residual of the previous solution
    double lam_prev = 0.0;

    auto self_residual = [&](const VectorXd& nu, VectorXd& r) {
        VectorXd lp = standardized_predictor(x, sd, nu);
        VectorXd yhat, mu;
        model.responses(lp, yhat, mu);
        r = 4.0 * (yhat - mu);
    };

    auto run = [&](std::size_t k, const auto& ops) {
        const double lam = lambdas[k];
        // warm start unless it violates the initialization condition
        VectorXd nu0 = nu_warm;
        if (model.loss(standardized_predictor(x, sd, nu0)) +
                lam * group_penalty(nu0, sd.spec) > f_null + 1e-12)
            nu0 = nu_null;

        std::vector<char> screen(static_cast<std::size_t>(J), 1);
        if (cfg.use_strong_rules && k > 0) {
            const double mean_r = r_prev.mean();
            for (Index j = 1; j < J; ++j) {
                ops.stat(j, r_prev, mean_r, zb);
                const double keep_at = 4.0 * sd.spec.weights[j] * (2.0 * lam - lam_prev);
                bool keep = zb.norm() >= keep_at;
                if (!keep) {
                    for (Index c : sd.spec.groups[static_cast<std::size_t>(j)])
                        if (nu0[c] != 0.0) { keep = true; break; }
                }
                screen[static_cast<std::size_t>(j)] = keep ? 1 : 0;
            }
        }

        MmOutcome out;
        while (true) {
            out = mm_loop(model, x, sd, ops, lam, nu0, cfg, &screen);
            // exact KKT sweep over the excluded groups; re-admit violators
            VectorXd r;
            self_residual(out.nu, r);
            const double mean_r = r.mean();
            bool violated = false;
            for (Index j = 1; j < J; ++j) {
                if (screen[static_cast<std::size_t>(j)]) continue;
                ops.stat(j, r, mean_r, zb);
                if (zb.norm() - 4.0 * lam * sd.spec.weights[j] > 1e-12) {
                    screen[static_cast<std::size_t>(j)] = 1;
                    violated = true;
                }
            }
            if (!violated) break;
            nu0 = out.nu;
        }

        FitResult res = make_fit_result(out, sd, lam);
        nu_warm = res.coef.nu;
        self_residual(nu_warm, r_prev);
        lam_prev = lam;
        results.push_back(std::move(res));
    };

    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        if (sd.mode == DesignMode::dense) {
            run(k, DenseGroupOps{&sd});
        } else if constexpr (std::is_same_v<MatrixT, SparseMatrixd>) {
            run(k, SparseGroupOps{&x, &sd});
        } else {
            throw std::invalid_argument("sparse standardizer requires a sparse design matrix");
        }
    }
    return results;
}

} // namespace detail

/// PUlasso regularization path with warm starts and (lossless) strong rules.
template <class MatrixT>
std::vector<FitResult> fit_path(const PuData<MatrixT>& d, const Standardizer& sd,
                                const PathConfig& pcfg = {}, const SolverConfig& cfg = {}) {
    return detail::path_core(PuMmModel<MatrixT>{&d}, d.x, sd, pcfg, cfg);
}

/// Penalized logistic path on known responses (oracle / naive baselines).
template <class MatrixT>
std::vector<FitResult> logistic_fit_path(const VectorXd& y, const MatrixT& x,
                                         const Standardizer& sd, const PathConfig& pcfg = {},
                                         const SolverConfig& cfg = {}) {
    if (y.size() != x.rows()) throw std::invalid_argument("y length mismatch");
    return detail::path_core(LogisticModel{&y}, x, sd, pcfg, cfg);
}

template <class MatrixT>
FitResult logistic_fit(const VectorXd& y, const MatrixT& x, const Standardizer& sd,
                       double lambda, const SolverConfig& cfg = {}) {
    if (y.size() != x.rows()) throw std::invalid_argument("y length mismatch");
    LogisticModel model{&y};
    VectorXd nu0 = VectorXd::Zero(sd.n_coef());
    nu0[0] = model.null_intercept();
    auto out = detail::mm_dispatch(model, x, sd, lambda, std::move(nu0), cfg);
    return detail::make_fit_result(out, sd, lambda);
}

} // namespace pulasso
