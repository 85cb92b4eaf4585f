#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pulasso/model.hpp"
#include "test_util.hpp"

using namespace pulasso;
using Catch::Approx;

namespace {

/// Independent oracle: the observed log-likelihood in its product form,
/// per-sample probabilities written out directly.
template <class MatrixT>
double loss_product_form(const VectorXd& theta, const PuData<MatrixT>& d) {
    const VectorXd lp = linear_predictor(d.x, theta);
    const double c = static_cast<double>(d.n_labeled) / (d.pi * static_cast<double>(d.n_unlabeled));
    double acc = 0.0;
    for (Index i = 0; i < d.n(); ++i) {
        const double et = std::exp(lp[i]);
        const double denom = 1.0 + (1.0 + c) * et;
        const double prob = d.z[i] ? c * et / denom : (1.0 + et) / denom;
        acc -= std::log(prob);
    }
    return acc / static_cast<double>(d.n());
}

} // namespace

TEST_CASE("observed_loss at theta = 0 with n_l = n_u and pi = 1/2 is log 2") {
    auto d = testutil::random_pu(2, 3, 11, 0.5);
    d.z << 1, 0; // n_l = n_u = 1
    d.n_labeled = 1;
    d.n_unlabeled = 1;
    VectorXd theta = VectorXd::Zero(4);
    REQUIRE(observed_loss(theta, d) == Approx(std::log(2.0)).epsilon(0).margin(1e-15));
}

TEST_CASE("observed_loss matches the hand-evaluated per-sample formula") {
    MatrixXd x(2, 1);
    x << 1.0, 0.0;
    VectorXi z(2);
    z << 1, 0;
    auto d = make_pu_data(std::move(x), std::move(z), 0.5);
    VectorXd theta(2);
    theta << 0.0, 1.0; // linear predictor 1 for the first sample

    // eta = log 2 + 1 - log(1 + e); -(eta - log(1+e^eta)) = 0.521136119802815...
    const double eta = std::log(2.0) + 1.0 - log1pexp(1.0);
    REQUIRE(eta == Approx(0.37988549304172247).margin(1e-14));
    REQUIRE(std::abs(eta - 0.37989) < 1e-5);
    const double sample0 = log1pexp(eta) - eta;
    REQUIRE(sample0 == Approx(0.52113611980281506).margin(1e-14));
    REQUIRE(std::abs(sample0 - 0.52111) < 5e-5);

    // the second sample sits at lp = 0, eta = 0, contributing log 2
    const double expected = 0.5 * (sample0 + std::log(2.0));
    REQUIRE(observed_loss(theta, d) == Approx(expected).epsilon(1e-14));
}

TEST_CASE("observed_loss: product form and exponential-family form agree") {
    std::mt19937_64 seeds(2024);
    for (int rep = 0; rep < 200; ++rep) {
        const Index n = 5 + static_cast<Index>(seeds() % 40);
        const Index p = 1 + static_cast<Index>(seeds() % 8);
        auto d = testutil::random_pu(n, p, seeds(), 0.2 + 0.6 * (rep % 7) / 7.0);
        VectorXd theta = testutil::random_theta(p + 1, seeds());
        const double glm = observed_loss(theta, d);
        const double prod = loss_product_form(theta, d);
        REQUIRE(std::abs(glm - prod) <= 1e-12 * std::max(1.0, std::abs(prod)));
    }
}

TEST_CASE("observed_loss rejects bad inputs") {
    auto d = testutil::random_pu(10, 3, 5);
    REQUIRE_THROWS_AS(observed_loss(VectorXd::Zero(3), d), std::invalid_argument);
    VectorXd bad = VectorXd::Zero(4);
    bad[1] = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(observed_loss(bad, d), std::invalid_argument);
}

TEST_CASE("make_pu_data validates the dataset invariants") {
    MatrixXd x = MatrixXd::Zero(4, 2);
    VectorXi z(4);
    z << 1, 0, 1, 0;
    REQUIRE_THROWS_AS(make_pu_data(MatrixXd(x), VectorXi(z), 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(make_pu_data(MatrixXd(x), VectorXi(z), 1.0), std::invalid_argument);
    VectorXi all_one = VectorXi::Ones(4);
    REQUIRE_THROWS_AS(make_pu_data(MatrixXd(x), std::move(all_one), 0.5), std::invalid_argument);
    VectorXi not_binary(4);
    not_binary << 1, 0, 2, 0;
    REQUIRE_THROWS_AS(make_pu_data(MatrixXd(x), std::move(not_binary), 0.5), std::invalid_argument);
    MatrixXd with_nan = x;
    with_nan(1, 1) = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(make_pu_data(std::move(with_nan), VectorXi(z), 0.5), std::invalid_argument);
}

TEST_CASE("gradient matches central finite differences") {
    std::mt19937_64 seeds(77);
    for (int rep = 0; rep < 6; ++rep) {
        const Index n = 10 + static_cast<Index>(seeds() % 41); // up to 50
        const Index p = 2 + static_cast<Index>(seeds() % 9);   // up to 10
        auto d = testutil::random_pu(n, p, seeds());
        VectorXd theta = testutil::random_theta(p + 1, seeds());
        const VectorXd grad = observed_loss_grad(theta, d);
        const double h = 1e-5;
        for (Index j = 0; j < theta.size(); ++j) {
            VectorXd tp = theta, tm = theta;
            tp[j] += h;
            tm[j] -= h;
            const double fd = (observed_loss(tp, d) - observed_loss(tm, d)) / (2.0 * h);
            REQUIRE(std::abs(fd - grad[j]) < 1e-5 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("gradient is zero along an all-zero column") {
    auto d = testutil::random_pu(15, 4, 3);
    d.x.col(2).setZero();
    VectorXd theta = testutil::random_theta(5, 4);
    REQUIRE(observed_loss_grad(theta, d)[3] == 0.0); // coefficient 3 <-> user column 2
}

TEST_CASE("gradient at theta = 0 with n_l = n_u, pi = 1/2 has the closed form") {
    auto d = testutil::random_pu(8, 3, 9, 0.5);
    d.z << 1, 1, 1, 1, 0, 0, 0, 0;
    d.n_labeled = 4;
    d.n_unlabeled = 4;
    VectorXd theta = VectorXd::Zero(4);
    const VectorXd grad = observed_loss_grad(theta, d);
    // mu(eta) = 1/2, f' = 1/2: grad = n^{-1} sum (1/2 - z_i) (1/2) x_i
    VectorXd expect = VectorXd::Zero(4);
    for (Index i = 0; i < d.n(); ++i) {
        const double wi = (0.5 - d.z[i]) * 0.5;
        expect[0] += wi;
        expect.tail(3) += wi * d.x.row(i).transpose();
    }
    expect /= static_cast<double>(d.n());
    REQUIRE((grad - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("e_step posterior") {
    auto d = testutil::random_pu(50, 4, 21);
    VectorXd theta = testutil::random_theta(5, 22, 1.0);
    const VectorXd yhat = e_step(theta, d);
    for (Index i = 0; i < d.n(); ++i) {
        REQUIRE(yhat[i] > 0.0);
        REQUIRE(yhat[i] <= 1.0);
        if (d.z[i])
            REQUIRE(yhat[i] == 1.0);
        else
            REQUIRE(yhat[i] < 1.0);
    }

    MatrixXd x(2, 1);
    x << 0.0, std::log(3.0);
    VectorXi z(2);
    z << 1, 0;
    auto d2 = make_pu_data(std::move(x), std::move(z), 0.5);
    VectorXd unit(2);
    unit << 0.0, 1.0;
    VectorXd y2 = e_step(unit, d2);
    REQUIRE(y2[0] == 1.0);                        // labeled
    REQUIRE(y2[1] == Approx(0.75).margin(1e-15)); // sigmoid(log 3)
    VectorXd zero2 = VectorXd::Zero(2);
    REQUIRE(e_step(zero2, d2)[1] == Approx(0.5).margin(1e-15));
}

TEST_CASE("mu_star values and range") {
    MatrixXd x(2, 1);
    x << 0.0, 1.0;
    VectorXi z(2);
    z << 1, 0;
    auto d = make_pu_data(std::move(x), std::move(z), 0.5); // n_l = n_u = 1, b = log 3
    REQUIRE(d.offset_b() == Approx(std::log(3.0)).margin(1e-15));
    REQUIRE(d.offset_b() > 0.0);

    VectorXd theta = VectorXd::Zero(2);
    REQUIRE(mu_star(theta, d)[0] == Approx(0.75).margin(1e-15)); // sigmoid(log 3)

    theta << -d.offset_b(), 0.0; // lp = -b everywhere
    REQUIRE(mu_star(theta, d)[0] == Approx(0.5).margin(1e-15));

    theta << -50.0, 0.0;
    REQUIRE(mu_star(theta, d)[0] < 1e-8);
    REQUIRE(mu_star(theta, d)[0] > 0.0);
}

TEST_CASE("working_response values and composition") {
    MatrixXd x(2, 1);
    x << 0.5, -0.5;
    VectorXi z(2);
    z << 1, 0;
    auto d = make_pu_data(std::move(x), std::move(z), 0.5);
    VectorXd theta = VectorXd::Zero(2);
    const VectorXd u = working_response(theta, d);
    REQUIRE(u[0] == Approx(1.0).margin(1e-15));  // 4(1 - 3/4)
    REQUIRE(u[1] == Approx(-1.0).margin(1e-15)); // 4(1/2 - 3/4)

    auto d2 = testutil::random_pu(40, 6, 31);
    VectorXd t2 = testutil::random_theta(7, 32);
    const VectorXd u2 = working_response(t2, d2);
    const VectorXd lp = linear_predictor(d2.x, t2);
    const VectorXd recomposed = 4.0 * (e_step(t2, d2) - mu_star(t2, d2));
    REQUIRE((u2 - lp - recomposed).cwiseAbs().maxCoeff() < 1e-14);
    REQUIRE((4.0 * (e_step(t2, d2) - mu_star(t2, d2))).cwiseAbs().maxCoeff() <= 4.0);
}

TEST_CASE("predict_prob_y") {
    VectorXd theta(3), x(3);
    theta << 0.3, -0.2, 0.5;
    x << 1.0, 2.0, -1.0;
    REQUIRE(predict_prob_y(theta, VectorXd::Zero(3)) == Approx(0.5).margin(1e-15));
    VectorXd tlog(1), xone(1);
    tlog << std::log(3.0);
    xone << 1.0;
    REQUIRE(predict_prob_y(tlog, xone) == Approx(0.75).margin(1e-15));
    REQUIRE(predict_prob_y(theta, x) ==
            Approx(1.0 - predict_prob_y(VectorXd(-theta), x)).margin(1e-15));
    REQUIRE_THROWS_AS(predict_prob_y(theta, VectorXd::Zero(2)), std::invalid_argument);
}

TEST_CASE("predict_prob_z") {
    MatrixXd xm(2, 1);
    xm << 0.0, 1.0;
    VectorXi z(2);
    z << 1, 0;
    auto d = make_pu_data(std::move(xm), std::move(z), 0.5); // c = n_l/(pi n_u) = 2

    VectorXd theta(2), x(2);
    theta << 0.0, 1.0;
    x << 1.0, 0.0; // lp = 0
    REQUIRE(predict_prob_z(theta, x, d) == Approx(0.5).margin(1e-15));

    // limit: c/(1+c) = 2/3
    x << 1.0, 60.0;
    REQUIRE(predict_prob_z(theta, x, d) == Approx(2.0 / 3.0).margin(1e-10));

    // equals sigmoid(eta) and is monotone in the linear predictor
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u01(-4.0, 4.0);
    double prev = 0.0;
    for (int k = 0; k < 50; ++k) {
        const double t = -6.0 + 0.25 * k;
        x << 1.0, t;
        const double p = predict_prob_z(theta, x, d);
        const double eta = d.eta_offset() + t - log1pexp(t);
        REQUIRE(std::abs(p - sigmoid(eta)) < 1e-14);
        if (k > 0) REQUIRE(p > prev);
        REQUIRE(p < 2.0 / 3.0 + 1e-12);
        prev = p;
    }
    (void)u01;
}

TEST_CASE("theta_null") {
    REQUIRE(theta_null(0.5, 4).isZero(0.0));
    REQUIRE(theta_null(0.75, 3)[0] == Approx(std::log(3.0)).margin(1e-15));
    REQUIRE(theta_null(0.25, 3)[0] == Approx(-std::log(3.0)).margin(1e-15));
    REQUIRE(theta_null(0.25, 3).tail(2).isZero(0.0));
    REQUIRE_THROWS_AS(theta_null(0.0, 3), std::invalid_argument);
    REQUIRE_THROWS_AS(theta_null(1.0, 3), std::invalid_argument);
}
