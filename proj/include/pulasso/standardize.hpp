#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "pulasso/groups.hpp"
#include "pulasso/model.hpp"

namespace pulasso {

enum class DesignMode { dense, sparse };

/// Group-wise QR factors of the centered design: P0 X_gj = Q_gj R_gj with
/// Q_gj^T Q_gj = n I and positive diag(R_gj). Dense mode materializes Q
/// (column layout identical to X); sparse mode keeps only R factors and
/// column means and never forms Q.
struct Standardizer {
    DesignMode mode = DesignMode::dense;
    Index n = 0;
    GroupSpec spec;
    std::vector<MatrixXd> r;         // per group j>=1, |g|x|g| upper triangular
    std::vector<MatrixXd> r_inv;     // inverse scale factors R_gj^{-1}
    std::vector<VectorXd> col_means; // X_gj^T 1 / n
    MatrixXd q;                      // dense mode only, n x (p-1)

    Index n_coef() const { return spec.n_coef(); }
};

namespace detail {

inline void gather_group(const MatrixXd& x, const std::vector<Index>& cols, MatrixXd& out) {
    out.resize(x.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
        out.col(static_cast<Index>(k)) = x.col(cols[k] - 1);
}

inline void gather_group(const SparseMatrixd& x, const std::vector<Index>& cols, MatrixXd& out) {
    out.setZero(x.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k)
        for (SparseMatrixd::InnerIterator it(x, cols[k] - 1); it; ++it)
            out(it.row(), static_cast<Index>(k)) = it.value();
}

} // namespace detail

/// QR-standardize the design group by group. Rank deficiency after centering
/// (including constant columns) is an error naming the offending group.
template <class MatrixT>
Standardizer build_standardizer(const MatrixT& x, const GroupSpec& spec, DesignMode mode) {
    spec.validate(x.cols() + 1);
    if (!detail::all_finite(x)) throw std::invalid_argument("x contains non-finite entries");

    const Index n = x.rows();
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const Index J = spec.n_groups();

    Standardizer sd;
    sd.mode = mode;
    sd.n = n;
    sd.spec = spec;
    sd.r.resize(static_cast<std::size_t>(J));
    sd.r_inv.resize(static_cast<std::size_t>(J));
    sd.col_means.resize(static_cast<std::size_t>(J));
    if (mode == DesignMode::dense) sd.q.resize(n, x.cols());

    MatrixXd block;
    for (Index j = 1; j < J; ++j) {
        const auto& cols = spec.groups[static_cast<std::size_t>(j)];
        const Index k = static_cast<Index>(cols.size());
        if (k > n - 1)
            throw std::invalid_argument("group " + std::to_string(j) + " has " +
                                        std::to_string(k) + " columns but only " +
                                        std::to_string(n) + " samples");
        detail::gather_group(x, cols, block);
        VectorXd means = block.colwise().mean();
        block.rowwise() -= means.transpose();

        const double max_col_norm = block.colwise().norm().maxCoeff();
        Eigen::HouseholderQR<MatrixXd> qr(block);
        MatrixXd r0 = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
        MatrixXd q0 = qr.householderQ() * MatrixXd::Identity(n, k);
        // positive-diagonal sign convention makes the factorization unique
        for (Index i = 0; i < k; ++i) {
            if (r0(i, i) < 0.0) {
                r0.row(i) = -r0.row(i);
                q0.col(i) = -q0.col(i);
            }
        }
        const double pivot_floor = 1e-10 * sqrt_n * max_col_norm;
        for (Index i = 0; i < k; ++i)
            if (!(r0(i, i) > pivot_floor))
                throw std::invalid_argument(
                    "group " + std::to_string(j) +
                    " is rank-deficient after centering (constant or collinear columns)");

        MatrixXd r_scaled = r0 / sqrt_n; // so that (sqrt(n) q0) r_scaled = centered block
        sd.r[static_cast<std::size_t>(j)] = r_scaled;
        sd.r_inv[static_cast<std::size_t>(j)] =
            r_scaled.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(k, k));
        sd.col_means[static_cast<std::size_t>(j)] = std::move(means);

        if (mode == DesignMode::dense) {
            q0 *= sqrt_n;
            const double ortho_err =
                (q0.transpose() * q0 - static_cast<double>(n) * MatrixXd::Identity(k, k))
                    .cwiseAbs().maxCoeff();
            const double center_err = (q0.colwise().sum() / static_cast<double>(n)).cwiseAbs().maxCoeff();
            if (ortho_err > 1e-8 * n || center_err > 1e-8)
                throw std::runtime_error("standardization failed orthonormality check for group " +
                                         std::to_string(j));
            for (std::size_t c = 0; c < cols.size(); ++c)
                sd.q.col(cols[c] - 1) = q0.col(static_cast<Index>(c));
        }
    }
    return sd;
}

/// nu -> theta (the back-transformation):
/// theta_gj = R_gj^{-1} nu_gj, theta_1 = nu_1 - sum_j colmeans_gj^T theta_gj.
inline VectorXd from_standardized(const VectorXd& nu, const Standardizer& sd) {
    const Index p = sd.n_coef();
    if (nu.size() != p) throw std::invalid_argument("nu length mismatch");
    VectorXd theta = VectorXd::Zero(p);
    double intercept = nu[0];
    VectorXd sub;
    for (Index j = 1; j < sd.spec.n_groups(); ++j) {
        const auto& cols = sd.spec.groups[static_cast<std::size_t>(j)];
        const Index k = static_cast<Index>(cols.size());
        sub.resize(k);
        for (Index i = 0; i < k; ++i) sub[i] = nu[cols[static_cast<std::size_t>(i)]];
        VectorXd tj = sd.r_inv[static_cast<std::size_t>(j)] * sub;
        intercept -= sd.col_means[static_cast<std::size_t>(j)].dot(tj);
        for (Index i = 0; i < k; ++i) theta[cols[static_cast<std::size_t>(i)]] = tj[i];
    }
    theta[0] = intercept;
    return theta;
}

/// theta -> nu, the inverse map (used for warm starts).
inline VectorXd to_standardized(const VectorXd& theta, const Standardizer& sd) {
    const Index p = sd.n_coef();
    if (theta.size() != p) throw std::invalid_argument("theta length mismatch");
    VectorXd nu = VectorXd::Zero(p);
    double intercept = theta[0];
    VectorXd sub;
    for (Index j = 1; j < sd.spec.n_groups(); ++j) {
        const auto& cols = sd.spec.groups[static_cast<std::size_t>(j)];
        const Index k = static_cast<Index>(cols.size());
        sub.resize(k);
        for (Index i = 0; i < k; ++i) sub[i] = theta[cols[static_cast<std::size_t>(i)]];
        VectorXd nj = sd.r[static_cast<std::size_t>(j)] * sub;
        intercept += sd.col_means[static_cast<std::size_t>(j)].dot(sub);
        for (Index i = 0; i < k; ++i) nu[cols[static_cast<std::size_t>(i)]] = nj[i];
    }
    nu[0] = intercept;
    return nu;
}

/// Linear predictor in the standardized parametrization (dense mode):
/// lp = nu_1 1 + sum_j Q_gj nu_gj.
inline VectorXd standardized_predictor(const Standardizer& sd, const VectorXd& nu) {
    if (sd.mode != DesignMode::dense) throw std::logic_error("dense standardizer required");
    if (nu.size() != sd.n_coef()) throw std::invalid_argument("nu length mismatch");
    VectorXd lp = VectorXd::Constant(sd.n, nu[0]);
    for (Index j = 1; j < sd.spec.n_groups(); ++j) {
        const auto& cols = sd.spec.groups[static_cast<std::size_t>(j)];
        for (std::size_t i = 0; i < cols.size(); ++i) {
            const double v = nu[cols[i]];
            if (v != 0.0) lp += sd.q.col(cols[i] - 1) * v;
        }
    }
    return lp;
}

/// Same predictor computed without Q when the standardizer is sparse.
template <class MatrixT>
VectorXd standardized_predictor(const MatrixT& x, const Standardizer& sd, const VectorXd& nu) {
    if (sd.mode == DesignMode::dense) return standardized_predictor(sd, nu);
    if (nu.size() != sd.n_coef()) throw std::invalid_argument("nu length mismatch");
    VectorXd lp = VectorXd::Constant(sd.n, nu[0]);
    VectorXd sub;
    for (Index j = 1; j < sd.spec.n_groups(); ++j) {
        const auto& cols = sd.spec.groups[static_cast<std::size_t>(j)];
        const Index k = static_cast<Index>(cols.size());
        sub.resize(k);
        for (Index i = 0; i < k; ++i) sub[i] = nu[cols[static_cast<std::size_t>(i)]];
        if (sub.isZero(0.0)) continue;
        VectorXd w = sd.r_inv[static_cast<std::size_t>(j)] * sub;
        lp.array() -= sd.col_means[static_cast<std::size_t>(j)].dot(w);
        for (Index i = 0; i < k; ++i)
            lp += x.col(cols[static_cast<std::size_t>(i)] - 1) * w[i];
    }
    return lp;
}

} // namespace pulasso
