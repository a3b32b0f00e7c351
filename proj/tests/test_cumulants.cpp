#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracle_tables.hpp"
#include "thorinfit/cumulants.hpp"
#include "thorinfit/multiindex.hpp"
#include "thorinfit/rng.hpp"

using thorinfit::IndexSet;
using thorinfit::RecursionPlan;
using thorinfit::jacobian_b;
using thorinfit::mu_from_tau;
using thorinfit::shifted_moments;
using thorinfit::shifted_moments_1d;
using thorinfit::tau_from_mu_1d;

TEST_CASE("shifted moments of single observations", "[cumulants]") {
    const IndexSet line(2, 1);
    Eigen::MatrixXd zero(1, 1);
    zero << 0.0;
    const Eigen::VectorXd mu0 = shifted_moments(zero, line);
    CHECK(mu0[0] == 1.0);
    CHECK(mu0[1] == 0.0);
    CHECK(mu0[2] == 0.0);

    Eigen::MatrixXd one(1, 1);
    one << 1.0;
    const Eigen::VectorXd mu1 = shifted_moments(one, line);
    for (int k = 0; k <= 2; ++k) CHECK(mu1[k] == Catch::Approx(std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("shifted moments agree with the univariate fast path", "[cumulants]") {
    thorinfit::Rng rng(5);
    Eigen::MatrixXd data(200, 1);
    for (Eigen::Index i = 0; i < data.rows(); ++i) data(i, 0) = rng.gamma(1.5);
    const IndexSet line(12, 1);
    const Eigen::VectorXd a = shifted_moments(data, line);
    const Eigen::VectorXd b = shifted_moments_1d(data.col(0), 12);
    // The two paths multiply the damping factor in different orders, so
    // agreement is to rounding, not bitwise.
    CHECK((a - b).lpNorm<Eigen::Infinity>() <
          1e-12 * b.lpNorm<Eigen::Infinity>());
}

TEST_CASE("shifted moments of a Gamma sample approach the closed form", "[cumulants]") {
    const double shape = 2.0, scale = 1.0;
    const std::int64_t n = 1'000'000;
    thorinfit::Rng rng(42);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = scale * rng.gamma(shape);
    const int m = 6;
    const Eigen::VectorXd mu = shifted_moments_1d(y, m);
    // Standard error from the same sample.
    for (int k = 0; k <= m; ++k) {
        double ss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double term = std::pow(y[i], k) * std::exp(-y[i]);
            ss += (term - mu[k]) * (term - mu[k]);
        }
        const double se = std::sqrt(ss / (static_cast<double>(n) - 1.0) / static_cast<double>(n));
        const double truth = oracle::gamma_shifted_moment(shape, scale, k);
        CAPTURE(k, mu[k], truth, se);
        CHECK(std::abs(mu[k] - truth) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("shifted moment input validation", "[cumulants]") {
    const IndexSet line(2, 1);
    Eigen::MatrixXd neg(2, 1);
    neg << 1.0, -0.5;
    CHECK_THROWS_AS(shifted_moments(neg, line), thorinfit::data_error);
    const Eigen::MatrixXd empty(0, 1);
    CHECK_THROWS_AS(shifted_moments(empty, line), thorinfit::data_error);
    Eigen::MatrixXd wide(3, 2);
    wide.setConstant(1.0);
    CHECK_THROWS_AS(shifted_moments(wide, line), thorinfit::data_error);
}

TEST_CASE("moment recursion pinned cases", "[cumulants]") {
    const IndexSet line(2, 1);
    Eigen::VectorXd tau(3);
    tau << -1.3, 0.0, 0.0;
    const Eigen::VectorXd mu = mu_from_tau(tau, line);
    CHECK(mu[0] == Catch::Approx(std::exp(-1.3)).epsilon(1e-14));
    CHECK(mu[1] == 0.0);
    CHECK(mu[2] == 0.0);

    // Gamma(2, 1): tau = (-2 ln 2, 1, 1/2) -> mu = (1/4, 1/4, 3/8).
    Eigen::VectorXd tau_gamma(3);
    tau_gamma << -2.0 * std::log(2.0), 1.0, 0.5;
    const Eigen::VectorXd mu_gamma = mu_from_tau(tau_gamma, line);
    CHECK(mu_gamma[0] == Catch::Approx(0.25).epsilon(1e-14));
    CHECK(mu_gamma[1] == Catch::Approx(0.25).epsilon(1e-14));
    CHECK(mu_gamma[2] == Catch::Approx(0.375).epsilon(1e-14));
}

TEST_CASE("moment recursion matches the Gamma closed form", "[cumulants]") {
    const int m = 15;
    const IndexSet line(m, 1);
    const RecursionPlan plan(line);
    thorinfit::Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const double shape = 0.1 + 4.9 * rng.uniform01();
        const double scale = 0.1 + 4.9 * rng.uniform01();
        Eigen::VectorXd tau(m + 1);
        for (int k = 0; k <= m; ++k) tau[k] = oracle::gamma_tau(shape, scale, k);
        const Eigen::VectorXd mu = mu_from_tau(tau, line, plan);
        for (int k = 0; k <= m; ++k) {
            const double truth = oracle::gamma_shifted_moment(shape, scale, k);
            CAPTURE(trial, shape, scale, k);
            CHECK(mu[k] == Catch::Approx(truth).epsilon(1e-10));
        }
    }
}

TEST_CASE("moment recursion factorizes over independent coordinates", "[cumulants]") {
    // For X = (X1, X2) independent, tau vanishes on mixed indices and
    // restricts to the univariate tau on the axes; mu must factorize.
    const double shape1 = 1.7, scale1 = 0.8, shape2 = 2.4, scale2 = 1.9;
    const int m = 6;
    const IndexSet plane(m, 2);
    Eigen::VectorXd tau = Eigen::VectorXd::Zero(plane.size());
    for (std::int64_t i = 0; i < plane.size(); ++i) {
        const auto k = plane[i];
        if (k[0] > 0 && k[1] > 0) continue;
        if (k[0] == 0 && k[1] == 0)
            tau[i] = oracle::gamma_tau(shape1, scale1, 0) + oracle::gamma_tau(shape2, scale2, 0);
        else if (k[1] == 0)
            tau[i] = oracle::gamma_tau(shape1, scale1, k[0]);
        else
            tau[i] = oracle::gamma_tau(shape2, scale2, k[1]);
    }
    const Eigen::VectorXd mu = mu_from_tau(tau, plane);
    for (std::int64_t i = 0; i < plane.size(); ++i) {
        const auto k = plane[i];
        const double truth = oracle::gamma_shifted_moment(shape1, scale1, k[0]) *
                             oracle::gamma_shifted_moment(shape2, scale2, k[1]);
        CAPTURE(k[0], k[1]);
        CHECK(mu[i] == Catch::Approx(truth).epsilon(1e-9));
    }
}

TEST_CASE("jacobian structure", "[cumulants]") {
    const IndexSet line(4, 1);
    Eigen::VectorXd tau(5);
    tau << -2.0 * std::log(2.0), 1.0, 0.5, 0.25, 0.125;
    const auto [jac, mu] = jacobian_b(tau, line);
    CHECK(jac(0, 0) == Catch::Approx(std::exp(tau[0])).epsilon(1e-14));
    for (int l = 1; l <= 4; ++l) CHECK(jac(0, l) == 0.0);
    // d mu_1 / d tau_1 = mu_0.
    CHECK(jac(1, 1) == Catch::Approx(mu[0]).epsilon(1e-14));
    // Diagonal: mu_0 (k - 1)!.
    CHECK(jac(2, 2) == Catch::Approx(mu[0]).epsilon(1e-13));
    CHECK(jac(3, 3) == Catch::Approx(2.0 * mu[0]).epsilon(1e-13));
    CHECK(jac(4, 4) == Catch::Approx(6.0 * mu[0]).epsilon(1e-13));
    // Strictly upper entries vanish.
    for (int r = 0; r <= 4; ++r)
        for (int c = r + 1; c <= 4; ++c) CHECK(jac(r, c) == 0.0);
}

TEST_CASE("jacobian matches finite differences", "[cumulants]") {
    const int m = 10;
    const IndexSet line(m, 1);
    const RecursionPlan plan(line);
    thorinfit::Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd tau(m + 1);
        tau[0] = -2.0 * rng.uniform01();
        for (int k = 1; k <= m; ++k) tau[k] = rng.normal() * 0.5;
        const auto [jac, mu] = jacobian_b(tau, line, plan);
        const double h = 1e-6;
        for (int c = 0; c <= m; ++c) {
            Eigen::VectorXd hi = tau, lo = tau;
            hi[c] += h;
            lo[c] -= h;
            const Eigen::VectorXd fd =
                (mu_from_tau(hi, line, plan) - mu_from_tau(lo, line, plan)) / (2.0 * h);
            for (int r = 0; r <= m; ++r) {
                const double expected = fd[r];
                const double got = jac(r, c);
                CAPTURE(trial, r, c, expected, got);
                if (std::abs(expected) < 1e-8)
                    CHECK(std::abs(got - expected) < 1e-6);
                else
                    CHECK(got == Catch::Approx(expected).epsilon(1e-5));
            }
        }
    }
}

TEST_CASE("jacobian in two dimensions matches finite differences", "[cumulants]") {
    const IndexSet plane(3, 2);
    const RecursionPlan plan(plane);
    thorinfit::Rng rng(29);
    Eigen::VectorXd tau(plane.size());
    tau[0] = -1.1;
    for (Eigen::Index i = 1; i < tau.size(); ++i) tau[i] = 0.4 * rng.normal();
    const auto [jac, mu] = jacobian_b(tau, plane, plan);
    const double h = 1e-6;
    for (Eigen::Index c = 0; c < tau.size(); ++c) {
        Eigen::VectorXd hi = tau, lo = tau;
        hi[c] += h;
        lo[c] -= h;
        const Eigen::VectorXd fd =
            (mu_from_tau(hi, plane, plan) - mu_from_tau(lo, plane, plan)) / (2.0 * h);
        for (Eigen::Index r = 0; r < tau.size(); ++r) {
            CAPTURE(r, c);
            CHECK(jac(r, c) == Catch::Approx(fd[r]).epsilon(1e-5).margin(1e-7));
        }
    }
}

TEST_CASE("jacobian moment by-product is bit-identical", "[cumulants]") {
    const int m = 12;
    const IndexSet line(m, 1);
    const RecursionPlan plan(line);
    thorinfit::Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd tau(m + 1);
        tau[0] = -rng.uniform01();
        for (int k = 1; k <= m; ++k) tau[k] = rng.normal();
        const Eigen::VectorXd direct = mu_from_tau(tau, line, plan);
        const auto [jac, mu] = jacobian_b(tau, line, plan);
        for (int k = 0; k <= m; ++k) {
            CAPTURE(trial, k);
            CHECK(mu[k] == direct[k]); // exact equality, same arithmetic
        }
    }
}

TEST_CASE("univariate inversion recovers Gamma cumulants", "[cumulants]") {
    const int m = 12;
    Eigen::VectorXd mu(m + 1);
    for (int k = 0; k <= m; ++k) mu[k] = oracle::gamma_shifted_moment(2.0, 1.0, k);
    const Eigen::VectorXd tau = tau_from_mu_1d(mu);
    for (int k = 0; k <= m; ++k) {
        CAPTURE(k);
        CHECK(tau[k] == Catch::Approx(oracle::gamma_tau(2.0, 1.0, k)).epsilon(1e-10));
    }

    Eigen::VectorXd point(3);
    point << 0.7, 0.0, 0.0;
    const Eigen::VectorXd tau_point = tau_from_mu_1d(point);
    CHECK(tau_point[0] == Catch::Approx(std::log(0.7)).epsilon(1e-14));
    CHECK(tau_point[1] == 0.0);
    CHECK(tau_point[2] == 0.0);
}

TEST_CASE("forward and inverse recursions round-trip", "[cumulants]") {
    const int m = 20;
    const IndexSet line(m, 1);
    const RecursionPlan plan(line);
    thorinfit::Rng rng(37);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd tau(m + 1);
        tau[0] = -3.0 * rng.uniform01();
        for (int k = 1; k <= m; ++k) tau[k] = rng.uniform01(); // nonnegative: measure-like
        const Eigen::VectorXd mu = mu_from_tau(tau, line, plan);
        const Eigen::VectorXd tau_back = tau_from_mu_1d(mu);
        for (int k = 0; k <= m; ++k) {
            CAPTURE(trial, k);
            CHECK(tau_back[k] == Catch::Approx(tau[k]).epsilon(1e-9).margin(1e-11));
        }
        const Eigen::VectorXd mu_back = mu_from_tau(tau_back, line, plan);
        for (int k = 0; k <= m; ++k)
            CHECK(mu_back[k] == Catch::Approx(mu[k]).epsilon(1e-9).margin(1e-12));
    }
}

TEST_CASE("inversion rejects nonpositive zeroth moments", "[cumulants]") {
    Eigen::VectorXd mu(3);
    mu << 0.0, 0.1, 0.1;
    CHECK_THROWS_AS(tau_from_mu_1d(mu), thorinfit::data_error);
    mu[0] = -0.2;
    CHECK_THROWS_AS(tau_from_mu_1d(mu), thorinfit::data_error);
}
