#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <random>

#include "pulasso/simulate.hpp"
#include "pulasso/solver.hpp"
#include "test_util.hpp"

using namespace pulasso;
using Catch::Approx;

namespace {

double quad_objective(const Standardizer& sd, const VectorXd& u, double lambda,
                      const VectorXd& nu) {
    VectorXd resid = u - standardized_predictor(sd, nu);
    return resid.squaredNorm() / (2.0 * double(sd.n)) + 4.0 * lambda * group_penalty(nu, sd.spec);
}

/// Independent reference for the quadratic subproblem: proximal gradient
/// descent with an exact Lipschitz step, run to high accuracy.
VectorXd prox_grad_reference(const Standardizer& sd, const VectorXd& u, double lambda,
                             long iters = 200000) {
    const Index n = sd.n;
    const Index p = sd.n_coef();
    MatrixXd qfull(n, p);
    qfull.col(0).setOnes();
    qfull.rightCols(p - 1) = sd.q;
    MatrixXd gram = qfull.transpose() * qfull / double(n);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
    const double lip = eig.eigenvalues().maxCoeff();
    VectorXd nu = VectorXd::Zero(p);
    VectorXd grad(p), next(p);
    for (long it = 0; it < iters; ++it) {
        grad = -qfull.transpose() * (u - qfull * nu) / double(n);
        VectorXd cand = nu - grad / lip;
        next = cand;
        for (Index j = 1; j < sd.spec.n_groups(); ++j) {
            const auto& cols = sd.spec.groups[static_cast<std::size_t>(j)];
            VectorXd sub(static_cast<Index>(cols.size()));
            for (std::size_t i = 0; i < cols.size(); ++i) sub[static_cast<Index>(i)] = cand[cols[i]];
            VectorXd thr = soft_threshold(sub, 4.0 * lambda * sd.spec.weights[j] / lip);
            for (std::size_t i = 0; i < cols.size(); ++i) next[cols[i]] = thr[static_cast<Index>(i)];
        }
        const double step = (next - nu).cwiseAbs().maxCoeff();
        nu = next;
        if (step < 1e-14) break;
    }
    return nu;
}

PuData<MatrixXd> signal_instance(Index nl, Index nu_count, Index p, std::uint64_t seed,
                                 double d_sep = 2.0) {
    SimConfig cfg;
    cfg.n_labeled = nl;
    cfg.n_unlabeled = nu_count;
    cfg.p = p;
    cfg.s = std::min<Index>(5, p);
    cfg.d = d_sep;
    cfg.seed = seed;
    SimData sim = gen_mixture(cfg);
    return make_pu_data(std::move(sim.x), std::move(sim.z), sim.pi);
}

} // namespace

TEST_CASE("soft_threshold") {
    VectorXd z(2);
    z << 3.0, 4.0;
    REQUIRE(soft_threshold(z, 5.0).isZero(0.0)); // ||z|| == t: zero, not strictly greater
    VectorXd s = soft_threshold(z, 1.0);
    REQUIRE(s[0] == Approx(2.4).margin(1e-15));
    REQUIRE(s[1] == Approx(3.2).margin(1e-15));
    VectorXd r = testutil::random_theta(5, 1, 2.0);
    REQUIRE((soft_threshold(r, 0.0) - r).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(soft_threshold(VectorXd::Zero(3), 0.0).isZero(0.0));
}

TEST_CASE("bcd: lambda above the local threshold zeroes every block") {
    auto d = testutil::random_pu(40, 6, 55);
    GroupSpec spec = GroupSpec::from_ids({1, 1, 1, 2, 2, 3});
    Standardizer sd = build_standardizer(d.x, spec, DesignMode::dense);
    VectorXd u = testutil::random_theta(40, 56, 1.0);

    VectorXd centered = u.array() - u.mean();
    double lam_loc = 0.0;
    for (Index j = 1; j < spec.n_groups(); ++j) {
        const auto& cols = spec.groups[static_cast<std::size_t>(j)];
        VectorXd stat(static_cast<Index>(cols.size()));
        for (std::size_t i = 0; i < cols.size(); ++i)
            stat[static_cast<Index>(i)] = sd.q.col(cols[i] - 1).dot(centered) / 40.0;
        lam_loc = std::max(lam_loc, stat.norm() / (4.0 * spec.weights[j]));
    }
    auto bres = bcd_dense(sd, u, 1.0001 * lam_loc, VectorXd::Zero(7));
    REQUIRE(bres.converged);
    const VectorXd& nu = bres.nu;
    REQUIRE(nu.tail(6).isZero(0.0));
    REQUIRE(nu[0] == Approx(u.mean()).margin(1e-12));
}

TEST_CASE("bcd: lambda = 0 on an orthonormal design is least squares") {
    const Index n = 24, p = 4;
    MatrixXd g = MatrixXd::Random(n, p + 1);
    g.col(0).setOnes();
    Eigen::HouseholderQR<MatrixXd> qr(g);
    MatrixXd q0 = qr.householderQ() * MatrixXd::Identity(n, p + 1);
    MatrixXd x = q0.rightCols(p); // columns orthogonal to 1 and to each other
    GroupSpec spec = GroupSpec::singletons(p);
    Standardizer sd = build_standardizer(x, spec, DesignMode::dense);
    VectorXd u = testutil::random_theta(n, 57, 1.0);
    VectorXd nu = bcd_dense(sd, u, 0.0, VectorXd::Zero(p + 1)).nu;
    REQUIRE(nu[0] == Approx(u.mean()).margin(1e-12));
    for (Index j = 0; j < p; ++j)
        REQUIRE(nu[j + 1] == Approx(sd.q.col(j).dot(u) / double(n)).margin(1e-12));
}

TEST_CASE("bcd matches an independent proximal-gradient reference") {
    const Index n = 40;
    MatrixXd x = MatrixXd::Random(n, 6);
    GroupSpec spec = GroupSpec::from_ids({1, 1, 1, 2, 2, 2});
    Standardizer sd = build_standardizer(x, spec, DesignMode::dense);
    VectorXd u = testutil::random_theta(n, 58, 1.5);

    // mid-path lambda
    VectorXd centered = u.array() - u.mean();
    double lam_loc = 0.0;
    for (Index j = 1; j < spec.n_groups(); ++j) {
        const auto& cols = spec.groups[static_cast<std::size_t>(j)];
        VectorXd stat(static_cast<Index>(cols.size()));
        for (std::size_t i = 0; i < cols.size(); ++i)
            stat[static_cast<Index>(i)] = sd.q.col(cols[i] - 1).dot(centered) / double(n);
        lam_loc = std::max(lam_loc, stat.norm() / (4.0 * spec.weights[j]));
    }
    const double lambda = 0.4 * lam_loc;

    VectorXd nu = bcd_dense(sd, u, lambda, VectorXd::Zero(7)).nu;
    VectorXd ref = prox_grad_reference(sd, u, lambda);
    REQUIRE(std::abs(quad_objective(sd, u, lambda, nu) - quad_objective(sd, u, lambda, ref)) <
            1e-8);
}

TEST_CASE("sparse BCD equals dense BCD") {
    auto [xd, z] = testutil::sparse_binary_design(300, 12, 0.08, 60);
    GroupSpec spec = GroupSpec::from_ids({1, 1, 1, 2, 2, 2, 3, 3, 4, 4, 5, 6});
    auto dd = make_pu_data(MatrixXd(xd), VectorXi(z), 0.4);
    auto ds = make_pu_data(testutil::to_sparse(xd), VectorXi(z), 0.4);
    Standardizer sdd = build_standardizer(dd.x, spec, DesignMode::dense);
    Standardizer sds = build_standardizer(ds.x, spec, DesignMode::sparse);

    VectorXd u = working_response(theta_null(0.4, 13), dd);
    const double lam = 0.3 * lambda_max(dd, sdd);
    VectorXd nu_dense = bcd_dense(sdd, u, lam, VectorXd::Zero(13)).nu;
    VectorXd nu_sparse = bcd_sparse(ds.x, sds, u, lam, VectorXd::Zero(13)).nu;
    REQUIRE((nu_dense - nu_sparse).cwiseAbs().maxCoeff() < 1e-10);

    // whole fits agree too
    auto fd = pulasso_fit(dd, sdd, lam);
    auto fs = pulasso_fit(ds, sds, lam);
    REQUIRE((fd.coef.theta - fs.coef.theta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("sparse BCD hand trace: residual differs by the deferred constant") {
    // n = 4, two single-column groups; one full cycle of the dense (on Q) and
    // sparse (on X, deferred correction) updates carried out by hand with the
    // library's factors.
    MatrixXd x(4, 2);
    x << 1.0, 0.0, 0.0, 2.0, 3.0, 1.0, -1.0, 0.5;
    GroupSpec spec = GroupSpec::singletons(2);
    Standardizer sd = build_standardizer(x, spec, DesignMode::dense);
    const double n = 4.0;
    VectorXd u(4);
    u << 0.7, -1.1, 0.4, 2.0;
    const double lambda = 0.01;

    VectorXd ones = VectorXd::Ones(4);
    VectorXd nu_dense = VectorXd::Zero(3), nu_sparse = VectorXd::Zero(3);

    // intercept step (identical in both algorithms)
    VectorXd r_dense = u.array() - u.mean();
    VectorXd r_sparse = r_dense;
    nu_dense[0] = nu_sparse[0] = u.mean();

    double a_sum = 0.0;
    for (Index j = 1; j <= 2; ++j) {
        const Index col = j - 1;
        const double rinv = sd.r_inv[static_cast<std::size_t>(j)](0, 0);
        const double mean_col = sd.col_means[static_cast<std::size_t>(j)][0];

        // dense update on Q
        double zd = sd.q.col(col).dot(r_dense) / n + nu_dense[j];
        double nd = soft_threshold(VectorXd::Constant(1, zd), 4.0 * lambda)(0);
        r_dense += sd.q.col(col) * (nu_dense[j] - nd);
        nu_dense[j] = nd;

        // sparse update on X with deferred correction
        double zs = rinv * (x.col(col).dot(r_sparse) / n) -
                    rinv * mean_col * (ones.dot(r_sparse) / n) + nu_sparse[j];
        REQUIRE(zs == Approx(zd).margin(1e-12));
        double ns = soft_threshold(VectorXd::Constant(1, zs), 4.0 * lambda)(0);
        const double w = rinv * (nu_sparse[j] - ns);
        r_sparse += x.col(col) * w;
        const double aj = mean_col * w;
        a_sum += aj;
        nu_sparse[j] = ns;

        // intermediate residuals differ by exactly the accumulated constant
        REQUIRE((r_sparse - r_dense - a_sum * ones).cwiseAbs().maxCoeff() < 1e-13);
    }
    r_sparse -= a_sum * ones; // end-of-cycle correction
    REQUIRE((r_sparse - r_dense).cwiseAbs().maxCoeff() < 1e-13);
    REQUIRE((nu_sparse - nu_dense).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("pulasso_fit at dominating lambda returns the null model") {
    auto d = signal_instance(120, 120, 8, 61);
    Standardizer sd = build_standardizer(d.x, GroupSpec::singletons(8), DesignMode::dense);
    const double lam_max_v = lambda_max(d, sd);
    auto fit = pulasso_fit(d, sd, 1.01 * lam_max_v);
    REQUIRE(fit.coef.theta.tail(8).isZero(0.0));
    REQUIRE(fit.active_groups.empty());
    REQUIRE(fit.outer_iters == 1);
    REQUIRE(std::abs(fit.coef.theta[0] - (std::log(d.pi) - std::log1p(-d.pi))) < 1e-12);
    REQUIRE(fit.objective ==
            Approx(observed_loss(theta_null(d.pi, 9), d)).margin(1e-12));

    auto em = em_fit(d, sd, 1.01 * lam_max_v);
    REQUIRE(em.coef.theta.tail(8).isZero(0.0));
    REQUIRE(em.active_groups.empty());
    REQUIRE(em.objective == Approx(fit.objective).margin(1e-12));
}

TEST_CASE("descent: objective trace is monotone for QM-EM and EM") {
    auto d = signal_instance(100, 100, 5, 62);
    Standardizer sd = build_standardizer(d.x, GroupSpec::singletons(5), DesignMode::dense);
    const double lam = 0.1 * lambda_max(d, sd);
    auto qm = pulasso_fit(d, sd, lam);
    auto em = em_fit(d, sd, lam);
    for (const auto& fit : {qm, em}) {
        REQUIRE(fit.converged);
        REQUIRE(fit.objective_trace.size() >= 2);
        for (std::size_t m = 1; m < fit.objective_trace.size(); ++m)
            REQUIRE(fit.objective_trace[m] <= fit.objective_trace[m - 1] + 1e-12);
    }
    REQUIRE(std::abs(qm.objective - em.objective) < 1e-6);
}

TEST_CASE("initialization condition is enforced") {
    auto d = signal_instance(80, 80, 5, 63);
    Standardizer sd = build_standardizer(d.x, GroupSpec::singletons(5), DesignMode::dense);
    const double lam = 0.5 * lambda_max(d, sd);
    VectorXd bad = VectorXd::Zero(6);
    bad[1] = 50.0; // grossly worse objective than the null model
    REQUIRE_THROWS_AS(pulasso_fit(d, sd, lam, bad), std::invalid_argument);
    REQUIRE_THROWS_AS(em_fit(d, sd, lam, bad), std::invalid_argument);
}

TEST_CASE("iteration caps flag non-convergence without throwing") {
    auto d = signal_instance(80, 80, 5, 64);
    Standardizer sd = build_standardizer(d.x, GroupSpec::singletons(5), DesignMode::dense);
    SolverConfig cfg;
    cfg.max_outer_iters = 2;
    auto fit = pulasso_fit(d, sd, 0.01 * lambda_max(d, sd), cfg);
    REQUIRE_FALSE(fit.converged);
    REQUIRE(fit.outer_iters == 2);
}

TEST_CASE("lambda_max contract") {
    auto d = signal_instance(150, 150, 10, 65, 2.5);
    Standardizer sd = build_standardizer(d.x, GroupSpec::singletons(10), DesignMode::dense);
    const double lm = lambda_max(d, sd);
    auto above = pulasso_fit(d, sd, 1.01 * lm);
    REQUIRE(above.active_groups.empty());
    auto below = pulasso_fit(d, sd, 0.95 * lm);
    REQUIRE(below.active_groups.size() >= 1);

    // noise-only design yields a smaller lambda_max than a signal design
    auto noise = testutil::random_pu(300, 10, 66, d.pi);
    Standardizer sdn = build_standardizer(noise.x, GroupSpec::singletons(10), DesignMode::dense);
    REQUIRE(lambda_max(noise, sdn) < lm);
}

TEST_CASE("kkt_check") {
    auto d = signal_instance(120, 120, 6, 67);
    Standardizer sd = build_standardizer(d.x, GroupSpec::singletons(6), DesignMode::dense);
    const double lm = lambda_max(d, sd);

    // boundary: the null model at lambda_max has zero violation
    VectorXd nu_null = to_standardized(theta_null(d.pi, 7), sd);
    REQUIRE(kkt_check(nu_null, sd, d, lm) < 1e-12);

    SolverConfig cfg;
    auto fit = pulasso_fit(d, sd, 0.3 * lm, cfg);
    REQUIRE(fit.converged);
    REQUIRE(kkt_check(fit.coef.nu, sd, d, 0.3 * lm) < 10.0 * cfg.inner_tol);

    VectorXd perturbed = fit.coef.nu;
    REQUIRE_FALSE(fit.active_groups.empty());
    const Index g = fit.active_groups.front();
    perturbed[sd.spec.groups[static_cast<std::size_t>(g)][0]] += 0.1;
    REQUIRE(kkt_check(perturbed, sd, d, 0.3 * lm) > cfg.inner_tol);
}

TEST_CASE("fit_path: first point is null, strong rules are lossless") {
    PathConfig pcfg;
    pcfg.n_lambda = 60;
    pcfg.lambda_min_ratio = 0.05;
    for (std::uint64_t seed : {201u, 202u, 203u}) {
        auto d = signal_instance(150, 150, 8, seed);
        Standardizer sd = build_standardizer(d.x, GroupSpec::singletons(8), DesignMode::dense);
        SolverConfig off;
        off.use_strong_rules = false;
        auto on = fit_path(d, sd, pcfg);
        auto no = fit_path(d, sd, pcfg, off);
        REQUIRE(on.size() == 60);
        REQUIRE(on.front().active_groups.empty());
        REQUIRE(on.front().coef.theta.tail(8).isZero(0.0));
        double max_diff = 0.0;
        for (std::size_t k = 0; k < on.size(); ++k) {
            REQUIRE(on[k].converged);
            max_diff = std::max(max_diff,
                                (on[k].coef.theta - no[k].coef.theta).cwiseAbs().maxCoeff());
        }
        REQUIRE(max_diff < 1e-8);

        // report-only: group lasso paths need not grow monotonically in l1 norm
        for (std::size_t k = 1; k < on.size(); ++k) {
            if (on[k].coef.theta.cwiseAbs().sum() <
                on[k - 1].coef.theta.cwiseAbs().sum() - 1e-8)
                WARN("l1 norm decreased along the path at index " << k);
        }
    }
}

TEST_CASE("fit_path validates user lambda sequences") {
    auto d = signal_instance(60, 60, 4, 70);
    Standardizer sd = build_standardizer(d.x, GroupSpec::singletons(4), DesignMode::dense);
    PathConfig bad;
    bad.user_lambda = {0.1, 0.1};
    REQUIRE_THROWS_AS(fit_path(d, sd, bad), std::invalid_argument);
    bad.user_lambda = {0.1, -0.2};
    REQUIRE_THROWS_AS(fit_path(d, sd, bad), std::invalid_argument);
    PathConfig single;
    single.user_lambda = {0.05};
    REQUIRE(fit_path(d, sd, single).size() == 1);
}

TEST_CASE("determinism: identical inputs give bit-identical coefficients") {
    auto d = signal_instance(100, 100, 6, 71);
    Standardizer sd = build_standardizer(d.x, GroupSpec::singletons(6), DesignMode::dense);
    const double lam = 0.2 * lambda_max(d, sd);
    auto a = pulasso_fit(d, sd, lam);
    auto b = pulasso_fit(d, sd, lam);
    REQUIRE(std::memcmp(a.coef.theta.data(), b.coef.theta.data(),
                        sizeof(double) * static_cast<std::size_t>(a.coef.theta.size())) == 0);
}

TEST_CASE("surrogate tangency and majorization at random iterates") {
    auto d = signal_instance(90, 90, 5, 72);
    std::mt19937_64 rng(73);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int it = 0; it < 5; ++it) {
        VectorXd theta_m = testutil::random_theta(6, 100 + it, 0.4);
        VectorXd yhat = e_step(theta_m, d);

        // tangency of values
        REQUIRE(quadratic_surrogate(theta_m, theta_m, d) ==
                Approx(estep_expected_loglik(theta_m, yhat, d)).margin(1e-12));

        // tangency of gradients along random directions (finite differences)
        for (int dir = 0; dir < 3; ++dir) {
            VectorXd v(6);
            for (Index i = 0; i < 6; ++i) v[i] = gauss(rng);
            v.normalize();
            const double h = 1e-6;
            auto q_of = [&](double t) {
                return estep_expected_loglik(VectorXd(theta_m + t * v), yhat, d);
            };
            auto qbar_of = [&](double t) {
                return quadratic_surrogate(VectorXd(theta_m + t * v), theta_m, d);
            };
            const double dq = (q_of(h) - q_of(-h)) / (2.0 * h);
            const double dqbar = (qbar_of(h) - qbar_of(-h)) / (2.0 * h);
            REQUIRE(std::abs(dq - dqbar) < 1e-5 * std::max(1.0, std::abs(dq)));
        }

        // majorization: -Qbar >= -Q, i.e. Qbar <= Q, at random probes
        for (int probe = 0; probe < 10; ++probe) {
            VectorXd theta = theta_m + 0.5 * testutil::random_theta(6, 500 + 10 * it + probe, 1.0);
            REQUIRE(quadratic_surrogate(theta, theta_m, d) <=
                    estep_expected_loglik(theta, e_step(theta_m, d), d) + 1e-12);
        }
    }
}

TEST_CASE("unpenalized fit agrees with direct gradient descent on the observed loss") {
    auto d = signal_instance(250, 250, 4, 80, 1.5);
    Standardizer sd = build_standardizer(d.x, GroupSpec::singletons(4), DesignMode::dense);
    auto fit = pulasso_fit(d, sd, 0.0);
    REQUIRE(fit.converged);

    // independent route: backtracking gradient descent from the null model
    VectorXd theta = theta_null(d.pi, 5);
    double loss = observed_loss(theta, d);
    double step = 1.0;
    for (int it = 0; it < 200000; ++it) {
        const VectorXd grad = observed_loss_grad(theta, d);
        if (grad.norm() < 1e-10) break;
        step *= 2.0; // re-grow after previous backtracking
        while (true) {
            VectorXd cand = theta - step * grad;
            const double cand_loss = observed_loss(cand, d);
            if (cand_loss <= loss - 0.5 * step * grad.squaredNorm()) {
                theta = std::move(cand);
                loss = cand_loss;
                break;
            }
            step *= 0.5;
            REQUIRE(step > 1e-300);
        }
    }
    REQUIRE(std::abs(loss - fit.objective) < 1e-8);
    REQUIRE((theta - fit.coef.theta).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("logistic baseline fits behave") {
    auto [x, zi] = testutil::sparse_binary_design(200, 6, 0.3, 74);
    VectorXd y = zi.cast<double>();
    Standardizer sd = build_standardizer(x, GroupSpec::singletons(6), DesignMode::dense);
    auto path = logistic_fit_path(y, x, sd, PathConfig{20, 0.05, {}});
    REQUIRE(path.size() == 20);
    REQUIRE(path.front().active_groups.empty());
    REQUIRE(path.back().converged);
    // the unpenalized-ish end should fit the training labels better than null
    const VectorXd lp = linear_predictor(x, path.back().coef.theta);
    double correct = 0;
    for (Index i = 0; i < x.rows(); ++i) correct += (lp[i] > 0.0) == (zi[i] == 1);
    REQUIRE(correct / double(x.rows()) > 0.6);
}
