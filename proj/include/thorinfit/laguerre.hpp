#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "thorinfit/errors.hpp"
#include "thorinfit/multiindex.hpp"

namespace thorinfit {

inline constexpr double sqrt2 = 1.41421356237309504880;

/// Univariate basis value phi_k(x) = sqrt(2) L_k(2x) exp(-x), with L_k
/// the Laguerre polynomial evaluated by the three-term recurrence.
/// Uniformly bounded by sqrt(2) on x >= 0.
[[nodiscard]] inline double laguerre_phi(int k, double x) {
    if (k < 0) throw data_error("basis degree must be nonnegative");
    if (!(x >= 0.0)) throw data_error("basis argument must be nonnegative");
    if (x > 745.0) return 0.0; // exp(-x) underflows; the product is 0 mathematically
    const double damp = sqrt2 * std::exp(-x);
    if (k == 0) return damp;
    const double y = 2.0 * x;
    double prev = 1.0;
    double cur = 1.0 - y;
    for (int j = 1; j < k; ++j) {
        const double next = ((2.0 * j + 1.0 - y) * cur - j * prev) / (j + 1.0);
        prev = cur;
        cur = next;
    }
    return damp * cur;
}

/// phi_0(x), ..., phi_m(x) in one recurrence pass.
[[nodiscard]] inline Eigen::VectorXd laguerre_phi_column(int m, double x) {
    if (m < 0) throw data_error("basis degree must be nonnegative");
    if (!(x >= 0.0)) throw data_error("basis argument must be nonnegative");
    Eigen::VectorXd phi(m + 1);
    if (x > 745.0) {
        phi.setZero();
        return phi;
    }
    const double damp = sqrt2 * std::exp(-x);
    const double y = 2.0 * x;
    double prev = 1.0;
    phi[0] = damp;
    if (m == 0) return phi;
    double cur = 1.0 - y;
    phi[1] = damp * cur;
    for (int j = 1; j < m; ++j) {
        const double next = ((2.0 * j + 1.0 - y) * cur - j * prev) / (j + 1.0);
        prev = cur;
        cur = next;
        phi[j + 1] = damp * cur;
    }
    return phi;
}

/// Product-form multivariate basis value, bounded by sqrt(2)^d.
[[nodiscard]] inline double laguerre_phi(std::span<const int> k, std::span<const double> x) {
    if (k.size() != x.size()) throw data_error("index and point dimension mismatch");
    if (k.empty()) throw data_error("dimension must be positive");
    double v = 1.0;
    for (std::size_t r = 0; r < k.size(); ++r) v *= laguerre_phi(k[r], x[r]);
    return v;
}

/// Change of basis from shifted moments to Laguerre coefficients:
/// a = A mu with A(k, j) = sqrt(2)^d binom(k, j) (-2)^{|j|} / j! for
/// j <= k componentwise, zero otherwise.  Lower triangular in the
/// degree-lex ordering with nonzero diagonal, hence invertible.
[[nodiscard]] inline Eigen::MatrixXd build_a_matrix(const IndexSet& indices) {
    const int m = indices.max_degree();
    const int d = indices.dim();
    const std::int64_t n = indices.size();
    // t(a, b) = binom(a, b) 2^b / b!, the per-coordinate entry magnitude.
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + 1, m + 1);
    for (int a = 0; a <= m; ++a) {
        t(a, 0) = 1.0;
        for (int b = 1; b <= a; ++b)
            t(a, b) = t(a, b - 1) * 2.0 * (a - b + 1) / (static_cast<double>(b) * b);
    }
    const double scale = std::pow(sqrt2, d);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    std::vector<int> j(static_cast<std::size_t>(d));
    for (std::int64_t row = 0; row < n; ++row) {
        const auto k = indices[row];
        // Odometer over all j <= k componentwise.
        std::fill(j.begin(), j.end(), 0);
        for (;;) {
            double v = scale;
            int total = 0;
            for (int r = 0; r < d; ++r) {
                v *= t(k[r], j[r]);
                total += j[r];
            }
            if (total % 2 != 0) v = -v;
            a(row, indices.position(j)) = v;
            int r = 0;
            while (r < d && j[static_cast<std::size_t>(r)] == k[r]) {
                j[static_cast<std::size_t>(r)] = 0;
                ++r;
            }
            if (r == d) break;
            ++j[static_cast<std::size_t>(r)];
        }
    }
    return a;
}

/// Truncated density expansion sum_k a_k phi_k(x).  Intended for low
/// dimension; refuses d > 3 where the expansion is not practical.
[[nodiscard]] inline double density_series(const Eigen::VectorXd& coeffs, const IndexSet& indices,
                                           std::span<const double> x) {
    const int d = indices.dim();
    if (d > 3) throw data_error("density evaluation supports dimension at most 3");
    if (static_cast<int>(x.size()) != d) throw data_error("point dimension mismatch");
    if (coeffs.size() != indices.size()) throw data_error("coefficient count mismatch");
    const int m = indices.max_degree();
    std::vector<Eigen::VectorXd> phi;
    phi.reserve(static_cast<std::size_t>(d));
    for (int r = 0; r < d; ++r) phi.push_back(laguerre_phi_column(m, x[r]));
    double total = 0.0;
    for (std::int64_t i = 0; i < indices.size(); ++i) {
        const auto k = indices[i];
        double v = coeffs[i];
        for (int r = 0; r < d; ++r) v *= phi[static_cast<std::size_t>(r)][k[r]];
        total += v;
    }
    return total;
}

} // namespace thorinfit
