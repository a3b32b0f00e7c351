#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "thorinfit/laguerre.hpp"
#include "thorinfit/multiindex.hpp"
#include "thorinfit/rng.hpp"

using thorinfit::IndexSet;
using thorinfit::laguerre_phi;
using thorinfit::sqrt2;

namespace {

// Direct binomial-sum evaluation, trustworthy at low degree.
double phi_direct(int k, double x) {
    double sum = 0.0;
    double binom = 1.0; // binom(k, j)
    double power = 1.0; // (-2x)^j / j!
    for (int j = 0; j <= k; ++j) {
        sum += binom * power;
        binom = binom * (k - j) / (j + 1.0);
        power *= -2.0 * x / (j + 1.0);
    }
    return sqrt2 * sum * std::exp(-x);
}

} // namespace

TEST_CASE("pinned basis values", "[laguerre]") {
    CHECK(laguerre_phi(0, 0.0) == Catch::Approx(sqrt2).epsilon(1e-14));
    CHECK(laguerre_phi(1, 0.5) == Catch::Approx(0.0).margin(1e-14));
    const std::array<int, 2> k{1, 0};
    const std::array<double, 2> x{0.5, 2.3};
    CHECK(laguerre_phi(k, x) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("recurrence agrees with the direct sum at low degree", "[laguerre]") {
    thorinfit::Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = static_cast<int>(rng.uniform01() * 16);
        const double x = rng.uniform01() * 8.0;
        CAPTURE(k, x);
        CHECK(laguerre_phi(k, x) == Catch::Approx(phi_direct(k, x)).margin(1e-8));
    }
}

TEST_CASE("uniform bound sqrt(2)^d", "[laguerre]") {
    thorinfit::Rng rng(11);
    for (int trial = 0; trial < 10000; ++trial) {
        const int k = static_cast<int>(rng.uniform01() * 41);
        const double x = rng.uniform01() * 100.0;
        CAPTURE(k, x);
        CHECK(std::abs(laguerre_phi(k, x)) <= sqrt2 + 1e-9);
    }
    for (int trial = 0; trial < 2000; ++trial) {
        const std::array<int, 2> k{static_cast<int>(rng.uniform01() * 41),
                                   static_cast<int>(rng.uniform01() * 41)};
        const std::array<double, 2> x{rng.uniform01() * 100.0, rng.uniform01() * 100.0};
        CHECK(std::abs(laguerre_phi(k, x)) <= 2.0 + 1e-9);
    }
}

TEST_CASE("orthonormality under quadrature", "[laguerre]") {
    // Composite Simpson on [0, 40]; the integrand decays like exp(-2x).
    const int petals = 40000;
    const double h = 40.0 / petals;
    for (int j = 0; j <= 10; ++j)
        for (int k = j; k <= 10; ++k) {
            double integral = 0.0;
            for (int i = 0; i <= petals; ++i) {
                const double x = i * h;
                const double w = (i == 0 || i == petals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
                integral += w * laguerre_phi(j, x) * laguerre_phi(k, x);
            }
            integral *= h / 3.0;
            CAPTURE(j, k);
            CHECK(integral == Catch::Approx(j == k ? 1.0 : 0.0).margin(1e-6));
        }
}

TEST_CASE("negative arguments are rejected", "[laguerre]") {
    CHECK_THROWS_AS(laguerre_phi(3, -0.5), thorinfit::data_error);
    CHECK_THROWS_AS(laguerre_phi(-1, 0.5), thorinfit::data_error);
    const std::array<int, 2> k{1, 1};
    const std::array<double, 2> x{0.5, -0.1};
    CHECK_THROWS_AS(laguerre_phi(k, x), thorinfit::data_error);
}

TEST_CASE("basis column matches individual evaluations", "[laguerre]") {
    const Eigen::VectorXd col = thorinfit::laguerre_phi_column(25, 1.7);
    for (int k = 0; k <= 25; ++k)
        CHECK(col[k] == Catch::Approx(laguerre_phi(k, 1.7)).epsilon(1e-13).margin(1e-300));
}

TEST_CASE("pinned basis-change rows", "[laguerre]") {
    const IndexSet line(2, 1);
    const Eigen::MatrixXd a = thorinfit::build_a_matrix(line);
    // Row 0: a_0 = sqrt(2) mu_0.
    CHECK(a(0, 0) == Catch::Approx(sqrt2));
    CHECK(a(0, 1) == 0.0);
    // Row 1: a_1 = sqrt(2) (mu_0 - 2 mu_1).
    CHECK(a(1, 0) == Catch::Approx(sqrt2));
    CHECK(a(1, 1) == Catch::Approx(-2.0 * sqrt2));
    // Row 2: a_2 = sqrt(2) (mu_0 - 4 mu_1 + 2 mu_2).
    CHECK(a(2, 0) == Catch::Approx(sqrt2));
    CHECK(a(2, 1) == Catch::Approx(-4.0 * sqrt2));
    CHECK(a(2, 2) == Catch::Approx(2.0 * sqrt2));
}

TEST_CASE("point mass at zero has constant coefficients", "[laguerre]") {
    // mu = (1, 0, 0, ...) gives a_k = sqrt(2)^d for every k.
    for (int d = 1; d <= 2; ++d) {
        const IndexSet set(3, d);
        const Eigen::MatrixXd a = thorinfit::build_a_matrix(set);
        Eigen::VectorXd mu = Eigen::VectorXd::Zero(set.size());
        mu[0] = 1.0;
        const Eigen::VectorXd coeffs = a * mu;
        for (std::int64_t i = 0; i < set.size(); ++i) {
            CAPTURE(d, i);
            CHECK(coeffs[i] == Catch::Approx(std::pow(sqrt2, d)).epsilon(1e-12));
        }
    }
}

TEST_CASE("basis change is invertible and round-trips", "[laguerre]") {
    const IndexSet line(20, 1);
    const Eigen::MatrixXd a = thorinfit::build_a_matrix(line);
    thorinfit::Rng rng(3);
    Eigen::VectorXd coeffs(line.size());
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) coeffs[i] = rng.normal();
    const Eigen::VectorXd mu = a.triangularView<Eigen::Lower>().solve(coeffs);
    const Eigen::VectorXd back = a * mu;
    // The matrix is severely ill conditioned at degree 20, so the
    // residual is judged against the componentwise backward bound
    // |A| |mu| instead of the size of the coefficients.
    const Eigen::VectorXd bound = a.cwiseAbs() * mu.cwiseAbs();
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
        CAPTURE(i);
        CHECK(std::abs(back[i] - coeffs[i]) <= 1e-13 * bound[i] + 1e-12);
    }
}

TEST_CASE("density series reproduces the unit exponential", "[laguerre]") {
    // exp(-x) = phi_0 / sqrt(2): from mu_k = k!/2^(k+1) the series at
    // any x collapses back to exp(-x) despite large internal terms.
    const IndexSet line(30, 1);
    const Eigen::MatrixXd a = thorinfit::build_a_matrix(line);
    Eigen::VectorXd mu(line.size());
    double scale = 0.5; // k! / 2^(k+1)
    mu[0] = scale;
    for (int k = 1; k <= 30; ++k) {
        scale *= k / 2.0;
        mu[k] = scale;
    }
    const Eigen::VectorXd coeffs = a * mu;
    const std::array<double, 1> x{1.0};
    CHECK(thorinfit::density_series(coeffs, line, x) == Catch::Approx(std::exp(-1.0)).margin(1e-4));
    const std::array<double, 1> zero{0.0};
    CHECK(thorinfit::density_series(coeffs, line, zero) == Catch::Approx(1.0).margin(1e-4));
}

TEST_CASE("density series input checks", "[laguerre]") {
    const IndexSet set(2, 2);
    const Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(set.size());
    const std::array<double, 2> ok{0.1, 0.2};
    CHECK(thorinfit::density_series(coeffs, set, ok) == 0.0);
    const std::array<double, 2> neg{0.1, -0.2};
    CHECK_THROWS_AS(thorinfit::density_series(coeffs, set, neg), thorinfit::data_error);
    const std::array<double, 1> short_point{0.1};
    CHECK_THROWS_AS(thorinfit::density_series(coeffs, set, short_point), thorinfit::data_error);
    const IndexSet big(1, 4);
    const Eigen::VectorXd c4 = Eigen::VectorXd::Zero(big.size());
    const std::array<double, 4> x4{0.1, 0.1, 0.1, 0.1};
    CHECK_THROWS_AS(thorinfit::density_series(c4, big, x4), thorinfit::data_error);
}
