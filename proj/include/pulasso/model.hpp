#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace pulasso {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;
using SparseMatrixd = Eigen::SparseMatrix<double>;

inline double log1pexp(double u) {
    // log(1 + e^u) without overflow on either side
    return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

inline double sigmoid(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

/// Positive-unlabeled sample: user feature matrix x (n x d, no intercept
/// column; the library supplies the constant column implicitly), labels z
/// (1 = labeled positive, 0 = unlabeled) and the known prevalence pi.
template <class MatrixT>
struct PuData {
    MatrixT x;
    VectorXi z;
    double pi = 0.0;
    Index n_labeled = 0;
    Index n_unlabeled = 0;

    Index n() const { return x.rows(); }
    Index n_user_cols() const { return x.cols(); }
    Index n_coef() const { return x.cols() + 1; } // p, intercept included

    /// b = log((n_l + pi*n_u) / (pi*n_u)), the full-likelihood offset. > 0.
    double offset_b() const {
        const double nl = static_cast<double>(n_labeled);
        const double nu = static_cast<double>(n_unlabeled);
        return std::log(nl + pi * nu) - std::log(pi * nu);
    }

    /// log(n_l / (pi * n_u)), the constant in the GLM linear predictor eta.
    double eta_offset() const {
        return std::log(static_cast<double>(n_labeled)) - std::log(pi) -
               std::log(static_cast<double>(n_unlabeled));
    }
};

namespace detail {

inline bool all_finite(const MatrixXd& m) { return m.allFinite(); }
inline bool all_finite(const SparseMatrixd& m) {
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMatrixd::InnerIterator it(m, k); it; ++it)
            if (!std::isfinite(it.value())) return false;
    return true;
}

} // namespace detail

template <class MatrixT>
PuData<MatrixT> make_pu_data(MatrixT x, VectorXi z, double pi) {
    PuData<MatrixT> d;
    if (z.size() != x.rows()) throw std::invalid_argument("x rows and z length differ");
    if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("pi must be in (0,1)");
    if (!detail::all_finite(x)) throw std::invalid_argument("x contains non-finite entries");
    Index nl = 0;
    for (Index i = 0; i < z.size(); ++i) {
        if (z[i] != 0 && z[i] != 1) throw std::invalid_argument("z must be binary");
        nl += z[i];
    }
    d.n_labeled = nl;
    d.n_unlabeled = z.size() - nl;
    if (d.n_labeled < 1 || d.n_unlabeled < 1)
        throw std::invalid_argument("need at least one labeled and one unlabeled sample");
    d.x = std::move(x);
    d.z = std::move(z);
    d.pi = pi;
    return d;
}

namespace detail {

template <class MatrixT>
void check_theta(const VectorXd& theta, const PuData<MatrixT>& d) {
    if (theta.size() != d.n_coef())
        throw std::invalid_argument("theta has length " + std::to_string(theta.size()) +
                                    ", expected " + std::to_string(d.n_coef()));
    if (!theta.allFinite()) throw std::invalid_argument("theta contains non-finite entries");
}

} // namespace detail

/// lp_i = theta_1 + x_i^T theta_{2:p} (intercept supplied implicitly).
template <class MatrixT>
VectorXd linear_predictor(const MatrixT& x, const VectorXd& theta) {
    VectorXd lp = x * theta.tail(theta.size() - 1);
    lp.array() += theta[0];
    return lp;
}

/// Observed negative log-likelihood (mean form), exponential-family shape:
/// eta_i = log(n_l/(pi n_u)) + lp_i - log(1+e^{lp_i}),
/// loss = -n^{-1} sum_i [z_i eta_i - log(1+e^{eta_i})].
template <class MatrixT>
double observed_loss(const VectorXd& theta, const PuData<MatrixT>& d) {
    detail::check_theta(theta, d);
    const VectorXd lp = linear_predictor(d.x, theta);
    const double c0 = d.eta_offset();
    double acc = 0.0;
    for (Index i = 0; i < d.n(); ++i) {
        const double eta = c0 + lp[i] - log1pexp(lp[i]);
        acc += log1pexp(eta) - (d.z[i] ? eta : 0.0);
    }
    return acc / static_cast<double>(d.n());
}

/// Analytic gradient: n^{-1} sum_i (mu(eta_i) - z_i) f'(lp_i) x_i with
/// f'(u) = 1/(1+e^u).
template <class MatrixT>
VectorXd observed_loss_grad(const VectorXd& theta, const PuData<MatrixT>& d) {
    detail::check_theta(theta, d);
    const VectorXd lp = linear_predictor(d.x, theta);
    const double c0 = d.eta_offset();
    VectorXd w(d.n());
    for (Index i = 0; i < d.n(); ++i) {
        const double eta = c0 + lp[i] - log1pexp(lp[i]);
        w[i] = (sigmoid(eta) - static_cast<double>(d.z[i])) * sigmoid(-lp[i]);
    }
    const double inv_n = 1.0 / static_cast<double>(d.n());
    VectorXd grad(theta.size());
    grad[0] = w.sum() * inv_n;
    grad.tail(theta.size() - 1) = (d.x.transpose() * w) * inv_n;
    return grad;
}

inline VectorXd e_step_from_lp(const VectorXd& lp, const VectorXi& z) {
    VectorXd yhat(lp.size());
    for (Index i = 0; i < lp.size(); ++i)
        yhat[i] = z[i] ? 1.0 : sigmoid(lp[i]);
    return yhat;
}

/// Posterior of the latent response: yhat_i = sigmoid(lp_i)^{1-z_i}.
template <class MatrixT>
VectorXd e_step(const VectorXd& theta, const PuData<MatrixT>& d) {
    detail::check_theta(theta, d);
    return e_step_from_lp(linear_predictor(d.x, theta), d.z);
}

inline VectorXd mu_star_from_lp(const VectorXd& lp, double b) {
    VectorXd mu(lp.size());
    for (Index i = 0; i < lp.size(); ++i) mu[i] = sigmoid(lp[i] + b);
    return mu;
}

/// mu*_i = sigmoid(lp_i + b), the full-model mean at the offset b.
template <class MatrixT>
VectorXd mu_star(const VectorXd& theta, const PuData<MatrixT>& d) {
    detail::check_theta(theta, d);
    return mu_star_from_lp(linear_predictor(d.x, theta), d.offset_b());
}

/// Working response u = 4(yhat - mu*) + X theta.
template <class MatrixT>
VectorXd working_response(const VectorXd& theta, const PuData<MatrixT>& d) {
    detail::check_theta(theta, d);
    const VectorXd lp = linear_predictor(d.x, theta);
    return 4.0 * (e_step_from_lp(lp, d.z) - mu_star_from_lp(lp, d.offset_b())) + lp;
}

/// P(y=1|x) under the logistic model. x includes the intercept slot.
inline double predict_prob_y(const VectorXd& theta, const VectorXd& x_row) {
    if (theta.size() != x_row.size()) throw std::invalid_argument("theta and x length differ");
    return sigmoid(theta.dot(x_row));
}

/// P(z=1|x, s=1) for the case-control sampling scheme; equals sigmoid(eta)
/// with the same eta as observed_loss.
template <class MatrixT>
double predict_prob_z(const VectorXd& theta, const VectorXd& x_row, const PuData<MatrixT>& d) {
    if (theta.size() != x_row.size()) throw std::invalid_argument("theta and x length differ");
    const double lp = theta.dot(x_row);
    return sigmoid(d.eta_offset() + lp - log1pexp(lp));
}

/// Intercept-only parameter [log(pi/(1-pi)), 0, ..., 0].
inline VectorXd theta_null(double pi, Index p) {
    if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("pi must be in (0,1)");
    VectorXd t = VectorXd::Zero(p);
    t[0] = std::log(pi) - std::log1p(-pi);
    return t;
}

/// Expected full log-likelihood given posteriors yhat (mean form):
/// Q = n^{-1} sum_i [yhat_i (lp_i + b) - log(1+e^{lp_i+b})].
/// This is the function each M-step maximizes (up to the penalty).
template <class MatrixT>
double estep_expected_loglik(const VectorXd& theta, const VectorXd& yhat,
                             const PuData<MatrixT>& d) {
    detail::check_theta(theta, d);
    const VectorXd lp = linear_predictor(d.x, theta);
    const double b = d.offset_b();
    double acc = 0.0;
    for (Index i = 0; i < d.n(); ++i)
        acc += yhat[i] * (lp[i] + b) - log1pexp(lp[i] + b);
    return acc / static_cast<double>(d.n());
}

/// Quadratic minorant of Q at theta_m (Hessian bound X^T X / 4):
/// Qbar(theta; theta_m) = Q(theta_m;theta_m) + n^{-1}(yhat-mu*)^T X(theta-theta_m)
///                        - (8n)^{-1} ||X(theta-theta_m)||^2.
template <class MatrixT>
double quadratic_surrogate(const VectorXd& theta, const VectorXd& theta_m,
                           const PuData<MatrixT>& d) {
    detail::check_theta(theta, d);
    detail::check_theta(theta_m, d);
    const VectorXd lp_m = linear_predictor(d.x, theta_m);
    const VectorXd lp = linear_predictor(d.x, theta);
    const VectorXd yhat = e_step_from_lp(lp_m, d.z);
    const VectorXd mu = mu_star_from_lp(lp_m, d.offset_b());
    const VectorXd delta = lp - lp_m;
    const double n = static_cast<double>(d.n());
    return estep_expected_loglik(theta_m, yhat, d) +
           (yhat - mu).dot(delta) / n - delta.squaredNorm() / (8.0 * n);
}

} // namespace pulasso
