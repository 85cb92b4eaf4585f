#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pulasso/evaluate.hpp"
#include "pulasso/model.hpp"
#include "pulasso/rng.hpp"
#include "pulasso/solver.hpp"

namespace pulasso {

enum class Scheme { logistic, misspecified };

struct SimConfig {
    Index n_labeled = 500;
    Index n_unlabeled = 500;
    Index p = 10;
    Index s = 5;
    double rho = 0.0; // feature auto-correlation, in [0,1)
    double d = 3.5;   // separation distance, needs 2d^2 - 1 > 0
    Scheme scheme = Scheme::logistic;
    std::uint64_t seed = 0;

    void validate() const {
        if (s < 1 || s > p) throw std::invalid_argument("need 1 <= s <= p");
        if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("rho must be in [0,1)");
        if (!(2.0 * d * d - 1.0 > 0.0))
            throw std::invalid_argument("d must satisfy 2d^2 - 1 > 0");
        if (n_labeled < 1 || n_unlabeled < 1) throw std::invalid_argument("need n_l, n_u >= 1");
    }
};

struct SimData {
    MatrixXd x;   // n x p user columns, labeled rows first
    VectorXi z;
    VectorXi y;   // true responses; z=1 rows always have y=1
    std::optional<VectorXd> theta_star; // intercept slot included; absent if misspecified
    std::vector<Index> support;         // 0-based user column indices
    double pi = 0.0; // population positive rate, from the generator
};

/// Scale K_rho making 1_S^T Sigma_rho 1_S = s, so the signal strength is the
/// same across rho.
inline double k_rho(double rho, const std::vector<Index>& support) {
    double acc = 0.0;
    for (Index a : support)
        for (Index b : support) acc += std::pow(rho, std::abs(static_cast<double>(a - b)));
    return static_cast<double>(support.size()) / acc;
}

/// mu_1: on S, N(sqrt((2d^2-1)/8s), sd = 1/sqrt(8s)); zero elsewhere.
/// mu_2 = -mu_1, giving E||mu_1 - mu_2||^2 = d^2.
inline VectorXd sample_mean_vector(Index p, const std::vector<Index>& support, double d,
                                   std::mt19937_64& rng) {
    const double s = static_cast<double>(support.size());
    const double mean = std::sqrt((2.0 * d * d - 1.0) / (8.0 * s));
    const double sd = 1.0 / std::sqrt(8.0 * s);
    std::normal_distribution<double> gauss(0.0, 1.0);
    VectorXd mu = VectorXd::Zero(p);
    for (Index j : support) mu[j] = mean + sd * gauss(rng);
    return mu;
}

namespace detail {

struct MixturePopulation {
    VectorXd mu1;
    MatrixXd chol; // lower factor of Sigma_rho
    std::optional<VectorXd> theta_star_user; // no intercept slot
    Scheme scheme;

    // returns (x, y)
    template <class Rng>
    std::pair<VectorXd, int> draw(Rng& rng) const {
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const bool u = unif(rng) < 0.5;
        VectorXd g(mu1.size());
        for (Index i = 0; i < g.size(); ++i) g[i] = gauss(rng);
        VectorXd x = (u ? mu1 : VectorXd(-mu1)) + chol * g;
        int y;
        if (scheme == Scheme::logistic) {
            y = unif(rng) < sigmoid(theta_star_user->dot(x)) ? 1 : 0;
        } else {
            y = u ? 1 : 0;
        }
        return {std::move(x), y};
    }
};

inline MixturePopulation make_population(const SimConfig& cfg,
                                         const std::vector<Index>& support,
                                         std::mt19937_64& mean_rng) {
    MixturePopulation pop;
    pop.scheme = cfg.scheme;
    pop.mu1 = sample_mean_vector(cfg.p, support, cfg.d, mean_rng);
    MatrixXd sigma(cfg.p, cfg.p);
    const double k = k_rho(cfg.rho, support);
    for (Index a = 0; a < cfg.p; ++a)
        for (Index b = 0; b < cfg.p; ++b)
            sigma(a, b) = k * std::pow(cfg.rho, std::abs(static_cast<double>(a - b)));
    Eigen::LLT<MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw std::runtime_error("covariance factorization failed");
    pop.chol = llt.matrixL();
    VectorXd ts = VectorXd::Zero(cfg.p);
    for (Index j : support) ts[j] = 1.0;
    pop.theta_star_user = std::move(ts);
    return pop;
}

inline std::vector<Index> sample_support(Index p, Index s, std::mt19937_64& rng) {
    std::vector<Index> all(static_cast<std::size_t>(p));
    std::iota(all.begin(), all.end(), Index{0});
    for (Index i = 0; i < s; ++i) {
        std::uniform_int_distribution<Index> pick(i, p - 1);
        std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<Index> sup(all.begin(), all.begin() + s);
    std::sort(sup.begin(), sup.end());
    return sup;
}

} // namespace detail

/// Case-control PU sample from the two-component Gaussian mixture: labeled
/// rows are positives collected by rejection, unlabeled rows are fresh
/// population draws with y hidden from the fit but kept for oracles.
inline SimData gen_mixture(const SimConfig& cfg) {
    cfg.validate();
    auto sup_rng = substream(cfg.seed, "sim.support");
    auto mean_rng = substream(cfg.seed, "sim.means");

    SimData out;
    out.support = detail::sample_support(cfg.p, cfg.s, sup_rng);
    auto pop = detail::make_population(cfg, out.support, mean_rng);

    if (cfg.scheme == Scheme::logistic) {
        auto cal_rng = substream(cfg.seed, "sim.calibration");
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const Index n_cal = 100000;
        double acc = 0.0;
        for (Index i = 0; i < n_cal; ++i) {
            const bool u = unif(cal_rng) < 0.5;
            VectorXd g(cfg.p);
            for (Index j = 0; j < cfg.p; ++j) g[j] = gauss(cal_rng);
            VectorXd x = (u ? pop.mu1 : VectorXd(-pop.mu1)) + pop.chol * g;
            acc += sigmoid(pop.theta_star_user->dot(x));
        }
        out.pi = acc / static_cast<double>(n_cal);
        VectorXd ts(cfg.p + 1);
        ts[0] = 0.0;
        ts.tail(cfg.p) = *pop.theta_star_user;
        out.theta_star = std::move(ts);
    } else {
        out.pi = 0.5; // mixture weight; no theta_star exists under misspecification
    }

    const Index n = cfg.n_labeled + cfg.n_unlabeled;
    out.x.resize(n, cfg.p);
    out.z.resize(n);
    out.y.resize(n);

    auto lab_rng = substream(cfg.seed, "sim.labeled");
    Index got = 0;
    for (int attempt = 0; attempt < 100 && got < cfg.n_labeled; ++attempt) {
        const Index chunk = std::max<Index>(1000, 4 * cfg.n_labeled);
        for (Index i = 0; i < chunk && got < cfg.n_labeled; ++i) {
            auto [x, y] = pop.draw(lab_rng);
            if (y == 1) {
                out.x.row(got) = x.transpose();
                out.z[got] = 1;
                out.y[got] = 1;
                ++got;
            }
        }
    }
    if (got < cfg.n_labeled)
        throw std::runtime_error("could not collect enough positive samples after 100 attempts");

    auto unlab_rng = substream(cfg.seed, "sim.unlabeled");
    for (Index i = 0; i < cfg.n_unlabeled; ++i) {
        auto [x, y] = pop.draw(unlab_rng);
        out.x.row(cfg.n_labeled + i) = x.transpose();
        out.z[cfg.n_labeled + i] = 0;
        out.y[cfg.n_labeled + i] = y;
    }
    return out;
}

/// Fresh population draws (x with true y) from the same mixture, for test
/// sets scored against the truth.
inline std::pair<MatrixXd, VectorXi> gen_mixture_test(const SimConfig& cfg, Index n_test,
                                                      std::uint64_t stream_index = 0) {
    cfg.validate();
    auto sup_rng = substream(cfg.seed, "sim.support");
    auto mean_rng = substream(cfg.seed, "sim.means");
    auto sup = detail::sample_support(cfg.p, cfg.s, sup_rng);
    auto pop = detail::make_population(cfg, sup, mean_rng);
    auto rng = substream(cfg.seed, "sim.test", stream_index);
    MatrixXd x(n_test, cfg.p);
    VectorXi y(n_test);
    for (Index i = 0; i < n_test; ++i) {
        auto [xi, yi] = pop.draw(rng);
        x.row(i) = xi.transpose();
        y[i] = yi;
    }
    return {std::move(x), std::move(y)};
}

/// Isotropic-Gaussian PU sample (x ~ N(0, I_p), theta*_j = 1 on S) used by
/// the mean-squared-error scaling experiment. pi = 1/2 exactly by symmetry.
inline SimData gen_gaussian_logistic(Index n_labeled, Index n_unlabeled, Index p, Index s,
                                     std::uint64_t seed) {
    if (s < 0 || s > p) throw std::invalid_argument("need 0 <= s <= p");
    SimData out;
    auto sup_rng = substream(seed, "gauss.support");
    out.support = s > 0 ? detail::sample_support(p, s, sup_rng) : std::vector<Index>{};
    VectorXd ts_user = VectorXd::Zero(p);
    for (Index j : out.support) ts_user[j] = 1.0;
    out.pi = 0.5;
    VectorXd ts(p + 1);
    ts[0] = 0.0;
    ts.tail(p) = ts_user;
    out.theta_star = std::move(ts);

    const Index n = n_labeled + n_unlabeled;
    out.x.resize(n, p);
    out.z.resize(n);
    out.y.resize(n);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    auto draw = [&](auto& rng, VectorXd& x) {
        for (Index j = 0; j < p; ++j) x[j] = gauss(rng);
        return unif(rng) < sigmoid(ts_user.dot(x)) ? 1 : 0;
    };

    auto lab_rng = substream(seed, "gauss.labeled");
    VectorXd xbuf(p);
    Index got = 0;
    for (int attempt = 0; attempt < 100 && got < n_labeled; ++attempt) {
        const Index chunk = std::max<Index>(1000, 4 * n_labeled);
        for (Index i = 0; i < chunk && got < n_labeled; ++i) {
            if (draw(lab_rng, xbuf) == 1) {
                out.x.row(got) = xbuf.transpose();
                out.z[got] = 1;
                out.y[got] = 1;
                ++got;
            }
        }
    }
    if (got < n_labeled)
        throw std::runtime_error("could not collect enough positive samples after 100 attempts");
    auto unlab_rng = substream(seed, "gauss.unlabeled");
    for (Index i = 0; i < n_unlabeled; ++i) {
        const int y = draw(unlab_rng, xbuf);
        out.x.row(n_labeled + i) = xbuf.transpose();
        out.z[n_labeled + i] = 0;
        out.y[n_labeled + i] = y;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Experiment drivers
// ---------------------------------------------------------------------------

struct MseCell {
    Index s = 0;
    Index n = 0;       // total sample count, n_l = n_u = n/2
    double x_value = 0.0; // sqrt(s log p / n)
    double mean_error = 0.0;
    double se_error = 0.0;
    int n_dropped = 0; // non-converged reps excluded from the mean
    double c_s = 0.0;  // lambda_n = c_s sqrt(log p / n)
};

namespace detail {

/// theta-hat at lambda_n, warm-started down a short geometric path.
inline VectorXd fit_at_lambda(const PuData<MatrixXd>& d, const Standardizer& sd, double lam,
                              const SolverConfig& cfg, bool& ok) {
    const double lam_max_v = lambda_max(d, sd);
    PathConfig pcfg;
    if (lam >= lam_max_v) {
        pcfg.user_lambda = {lam};
    } else {
        const int points = 5;
        pcfg.user_lambda.resize(points);
        const double step = std::log(lam / lam_max_v) / (points - 1);
        for (int i = 0; i < points; ++i) pcfg.user_lambda[static_cast<std::size_t>(i)] =
            lam_max_v * std::exp(step * i);
        pcfg.user_lambda.back() = lam;
    }
    auto path = fit_path(d, sd, pcfg, cfg);
    ok = path.back().converged;
    return path.back().coef.theta;
}

inline double mse_single_rep(Index p, Index s, Index n, double c, std::uint64_t seed,
                             const SolverConfig& cfg, bool& ok) {
    SimData sim = gen_gaussian_logistic(n / 2, n - n / 2, p, s, seed);
    auto d = make_pu_data(std::move(sim.x), std::move(sim.z), sim.pi);
    GroupSpec spec = GroupSpec::singletons(p);
    Standardizer sd = build_standardizer(d.x, spec, DesignMode::dense);
    const double lam = c * std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
    VectorXd theta = fit_at_lambda(d, sd, lam, cfg, ok);
    return (theta - *sim.theta_star).norm();
}

} // namespace detail

/// Mean l2 error of theta-hat at lambda_n = c_s sqrt(log p / n) over a grid
/// of (s, n); emits the x = sqrt(s log p / n) pairs for the scaling plot.
/// Missing c_s entries are calibrated by a coarse pilot grid search.
inline std::vector<MseCell> mse_experiment(Index p, const std::vector<Index>& s_grid,
                                           const std::vector<Index>& n_grid, int reps,
                                           std::map<Index, double> c_s = {},
                                           std::uint64_t seed = 0, const SolverConfig& cfg = {},
                                           int jobs = 1) {
    if (s_grid.empty() || n_grid.empty()) throw std::invalid_argument("grids must be non-empty");
    if (reps < 1) throw std::invalid_argument("reps must be >= 1");

    // pilot calibration of c_s at the middle n of the grid
    const Index n_pilot = n_grid[n_grid.size() / 2];
    const std::vector<double> c_grid{0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0};
    const int pilot_reps = 5;
    for (Index s : s_grid) {
        if (c_s.count(s)) continue;
        double best_c = c_grid.front();
        double best_err = std::numeric_limits<double>::infinity();
        for (double c : c_grid) {
            double acc = 0.0;
            int used = 0;
            for (int r = 0; r < pilot_reps; ++r) {
                bool ok = true;
                const double err = detail::mse_single_rep(
                    p, s, n_pilot, c, fnv1a64("mse.pilot") ^ (seed + 977u * r + 31u * s), cfg, ok);
                if (ok) {
                    acc += err;
                    ++used;
                }
            }
            if (used > 0 && acc / used < best_err) {
                best_err = acc / used;
                best_c = c;
            }
        }
        c_s[s] = best_c;
    }

    struct Job { Index s, n; int rep; };
    std::vector<Job> jobs_list;
    for (Index s : s_grid)
        for (Index n : n_grid)
            for (int r = 0; r < reps; ++r) jobs_list.push_back({s, n, r});
    std::vector<double> errors(jobs_list.size());
    std::vector<char> ok_flags(jobs_list.size(), 0);
    detail::run_indexed(jobs_list.size(), jobs, [&](std::size_t i) {
        const Job& job = jobs_list[i];
        bool ok = true;
        errors[i] = detail::mse_single_rep(
            p, job.s, job.n, c_s.at(job.s),
            fnv1a64("mse.rep") ^ (seed + 7919u * static_cast<std::uint64_t>(i)), cfg, ok);
        ok_flags[i] = ok ? 1 : 0;
    });

    std::vector<MseCell> table;
    std::size_t idx = 0;
    for (Index s : s_grid) {
        for (Index n : n_grid) {
            MseCell cell;
            cell.s = s;
            cell.n = n;
            cell.c_s = c_s.at(s);
            cell.x_value = std::sqrt(static_cast<double>(s) *
                                     std::log(static_cast<double>(p)) / static_cast<double>(n));
            double acc = 0.0, acc2 = 0.0;
            int used = 0;
            for (int r = 0; r < reps; ++r, ++idx) {
                if (!ok_flags[idx]) {
                    ++cell.n_dropped;
                    continue;
                }
                acc += errors[idx];
                acc2 += errors[idx] * errors[idx];
                ++used;
            }
            if (used > 0) {
                cell.mean_error = acc / used;
                if (used > 1)
                    cell.se_error = std::sqrt((acc2 - acc * acc / used) / (used - 1) / used);
            }
            table.push_back(cell);
        }
    }
    return table;
}

struct ClassificationCell {
    SimConfig config;
    std::string method; // "oracle" | "pulasso" | "naive"
    double mean_misclass = 0.0;
    double se_misclass = 0.0;
    double mean_f1 = 0.0;
    double se_f1 = 0.0;
    int reps = 0;
};

/// Per-cell classification comparison: PUlasso against the known-response
/// oracle and the treat-unlabeled-as-negative baseline, each tuned by k-fold
/// CV, scored on a fresh test set with known responses.
inline std::vector<ClassificationCell> classification_experiment(
    const std::vector<SimConfig>& grid, int reps, Index n_test = 1000, int cv_k = 10,
    const PathConfig& pcfg = {}, const SolverConfig& cfg = {}, int jobs = 1) {
    if (reps < 1) throw std::invalid_argument("reps must be >= 1");
    static const std::vector<std::string> methods{"oracle", "pulasso", "naive"};

    std::vector<ClassificationCell> table;
    for (const SimConfig& base : grid) {
        MatrixXd mis(reps, 3), f1(reps, 3);
        detail::run_indexed(static_cast<std::size_t>(reps), jobs, [&](std::size_t r) {
            SimConfig cfg_rep = base;
            cfg_rep.seed = fnv1a64("classify.rep") ^ (base.seed + 104729u * r);
            SimData train = gen_mixture(cfg_rep);
            auto [x_test, y_test] = gen_mixture_test(cfg_rep, n_test);

            GroupSpec spec = GroupSpec::singletons(base.p);
            auto classify = [&](const VectorXd& theta) {
                const VectorXd lp = linear_predictor(x_test, theta);
                VectorXi pred(lp.size());
                for (Index i = 0; i < lp.size(); ++i) pred[i] = lp[i] > 0.0 ? 1 : 0;
                return pred;
            };

            // PUlasso at the CV-selected lambda
            auto d = make_pu_data(MatrixXd(train.x), VectorXi(train.z), train.pi);
            auto cv = cross_validate(d, spec, DesignMode::dense, pcfg, cfg, cv_k, cfg_rep.seed);
            PathConfig at_cv;
            at_cv.user_lambda = cv.lambda;
            Standardizer sd = build_standardizer(d.x, spec, DesignMode::dense);
            auto path = fit_path(d, sd, at_cv, cfg);
            VectorXi pred_pu = classify(path[cv.index_min].coef.theta);

            // oracle: true responses revealed; naive: z as the response
            auto logistic_best = [&](const VectorXd& y) {
                auto lcv = logistic_cross_validate(y, train.x, spec, DesignMode::dense, pcfg,
                                                   cfg, cv_k, cfg_rep.seed);
                PathConfig at;
                at.user_lambda = lcv.lambda;
                auto lpath = logistic_fit_path(y, train.x, sd, at, cfg);
                return lpath[lcv.index_min].coef.theta;
            };
            VectorXi pred_oracle = classify(logistic_best(train.y.cast<double>()));
            VectorXi pred_naive = classify(logistic_best(train.z.cast<double>()));

            const VectorXi preds[3] = {pred_oracle, pred_pu, pred_naive};
            for (int m = 0; m < 3; ++m) {
                mis(static_cast<Index>(r), m) = misclassification_rate(preds[m], y_test);
                f1(static_cast<Index>(r), m) = f1_score(preds[m], y_test);
            }
        });
        for (int m = 0; m < 3; ++m) {
            ClassificationCell cell;
            cell.config = base;
            cell.method = methods[static_cast<std::size_t>(m)];
            cell.reps = reps;
            const auto col_m = mis.col(m);
            const auto col_f = f1.col(m);
            cell.mean_misclass = col_m.mean();
            cell.mean_f1 = col_f.mean();
            if (reps > 1) {
                cell.se_misclass = std::sqrt((col_m.array() - cell.mean_misclass).square().sum() /
                                             (reps - 1) / reps);
                cell.se_f1 =
                    std::sqrt((col_f.array() - cell.mean_f1).square().sum() / (reps - 1) / reps);
            }
            table.push_back(cell);
        }
    }
    return table;
}

} // namespace pulasso
