#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "thorinfit/errors.hpp"
#include "thorinfit/multiindex.hpp"

namespace thorinfit {

/// Sample averages of x^k exp(-|x|_1) over the rows of data, one entry
/// per multi-index.  Powers are accumulated from the damping factor
/// upward so no intermediate overflows even when x^k alone would.
[[nodiscard]] inline Eigen::VectorXd shifted_moments(const Eigen::MatrixXd& data, const IndexSet& indices) {
    const auto n_obs = data.rows();
    const int d = indices.dim();
    if (n_obs == 0) throw data_error("no observations");
    if (data.cols() != d) throw data_error("data dimension mismatch");
    if (data.minCoeff() < 0.0) throw data_error("observations must be nonnegative");
    const int m = indices.max_degree();
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(indices.size());
    Eigen::MatrixXd pow(d, m + 1);
    for (Eigen::Index i = 0; i < n_obs; ++i) {
        const double damp = std::exp(-data.row(i).sum());
        for (int r = 0; r < d; ++r) {
            pow(r, 0) = 1.0;
            for (int p = 1; p <= m; ++p) pow(r, p) = pow(r, p - 1) * data(i, r);
        }
        for (std::int64_t a = 0; a < indices.size(); ++a) {
            const auto k = indices[a];
            double term = damp;
            for (int r = 0; r < d; ++r) term *= pow(r, k[r]);
            mu[a] += term;
        }
    }
    return mu / static_cast<double>(n_obs);
}

/// Univariate fast path: averages of y^k exp(-y) for k = 0..m.
[[nodiscard]] inline Eigen::VectorXd shifted_moments_1d(const Eigen::VectorXd& y, int m) {
    if (y.size() == 0) throw data_error("no observations");
    if (y.minCoeff() < 0.0) throw data_error("observations must be nonnegative");
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(m + 1);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double term = std::exp(-y[i]);
        mu[0] += term;
        for (int k = 1; k <= m; ++k) {
            term *= y[i];
            mu[k] += term;
        }
    }
    return mu / static_cast<double>(y.size());
}

/// Precomputed traversal for the moment/cumulant recursions on a fixed
/// index set.  For each target index k past the first, stores the
/// positions of mu_l and tau_{k-l} for every l <= k - e_i0 (i0 the first
/// nonzero coordinate of k) together with the combinatorial coefficient
/// binom(k - e_i0, l) (|k - l| - 1)!.
struct RecursionPlan {
    struct Term {
        std::int64_t mu_pos;
        std::int64_t tau_pos;
        double coeff;
    };

    std::vector<Term> terms;
    std::vector<std::int64_t> row_begin;

    explicit RecursionPlan(const IndexSet& indices) {
        const int d = indices.dim();
        const int m = indices.max_degree();
        const Eigen::MatrixXd binom = detail::binomial_table(m);
        const Eigen::VectorXd fact = detail::factorial_table(m);
        const std::int64_t n = indices.size();
        row_begin.assign(static_cast<std::size_t>(n) + 1, 0);
        std::vector<int> p(static_cast<std::size_t>(d)), l(static_cast<std::size_t>(d)),
            rest(static_cast<std::size_t>(d));
        for (std::int64_t a = 1; a < n; ++a) {
            row_begin[static_cast<std::size_t>(a)] = static_cast<std::int64_t>(terms.size());
            const auto k = indices[a];
            int i0 = 0;
            while (k[i0] == 0) ++i0;
            for (int r = 0; r < d; ++r) p[static_cast<std::size_t>(r)] = k[r];
            p[static_cast<std::size_t>(i0)] -= 1;
            std::fill(l.begin(), l.end(), 0);
            for (;;) {
                double c = 1.0;
                int rest_deg = 0;
                for (int r = 0; r < d; ++r) {
                    c *= binom(p[static_cast<std::size_t>(r)], l[static_cast<std::size_t>(r)]);
                    rest[static_cast<std::size_t>(r)] = k[r] - l[static_cast<std::size_t>(r)];
                    rest_deg += rest[static_cast<std::size_t>(r)];
                }
                c *= fact[rest_deg - 1];
                terms.push_back({indices.position(l), indices.position(rest), c});
                int r = 0;
                while (r < d && l[static_cast<std::size_t>(r)] == p[static_cast<std::size_t>(r)]) {
                    l[static_cast<std::size_t>(r)] = 0;
                    ++r;
                }
                if (r == d) break;
                ++l[static_cast<std::size_t>(r)];
            }
        }
        row_begin[static_cast<std::size_t>(n)] = static_cast<std::int64_t>(terms.size());
    }
};

/// Shifted moments from Thorin cumulants: mu_0 = exp(tau_0) and each
/// further mu_k from earlier entries via the plan.  Total on finite
/// inputs; overflow shows up as non-finite output rather than a throw.
[[nodiscard]] inline Eigen::VectorXd mu_from_tau(const Eigen::VectorXd& tau, const IndexSet& indices,
                                                 const RecursionPlan& plan) {
    const std::int64_t n = indices.size();
    if (tau.size() != n) throw data_error("cumulant vector length mismatch");
    Eigen::VectorXd mu(n);
    mu[0] = std::exp(tau[0]);
    for (std::int64_t a = 1; a < n; ++a) {
        double s = 0.0;
        for (std::int64_t t = plan.row_begin[static_cast<std::size_t>(a)];
             t < plan.row_begin[static_cast<std::size_t>(a) + 1]; ++t) {
            const auto& term = plan.terms[static_cast<std::size_t>(t)];
            s += term.coeff * mu[term.mu_pos] * tau[term.tau_pos];
        }
        mu[a] = s;
    }
    return mu;
}

[[nodiscard]] inline Eigen::VectorXd mu_from_tau(const Eigen::VectorXd& tau, const IndexSet& indices) {
    return mu_from_tau(tau, indices, RecursionPlan(indices));
}

struct JacobianResult {
    Eigen::MatrixXd jacobian; // d mu / d tau, lower triangular
    Eigen::VectorXd mu;       // forward recursion by-product, bit-identical to mu_from_tau
};

/// Differentiates the moment recursion in tau.  The diagonal entry for
/// index k is mu_0 (|k| - 1)!, so the Jacobian is invertible whenever
/// tau_0 is finite.
[[nodiscard]] inline JacobianResult jacobian_b(const Eigen::VectorXd& tau, const IndexSet& indices,
                                               const RecursionPlan& plan) {
    const std::int64_t n = indices.size();
    if (tau.size() != n) throw data_error("cumulant vector length mismatch");
    JacobianResult out;
    out.jacobian = Eigen::MatrixXd::Zero(n, n);
    out.mu.resize(n);
    out.mu[0] = std::exp(tau[0]);
    out.jacobian(0, 0) = out.mu[0];
    for (std::int64_t a = 1; a < n; ++a) {
        double s = 0.0;
        for (std::int64_t t = plan.row_begin[static_cast<std::size_t>(a)];
             t < plan.row_begin[static_cast<std::size_t>(a) + 1]; ++t) {
            const auto& term = plan.terms[static_cast<std::size_t>(t)];
            s += term.coeff * out.mu[term.mu_pos] * tau[term.tau_pos];
            out.jacobian.row(a).head(term.mu_pos + 1) +=
                (term.coeff * tau[term.tau_pos]) * out.jacobian.row(term.mu_pos).head(term.mu_pos + 1);
            out.jacobian(a, term.tau_pos) += term.coeff * out.mu[term.mu_pos];
        }
        out.mu[a] = s;
    }
    return out;
}

[[nodiscard]] inline JacobianResult jacobian_b(const Eigen::VectorXd& tau, const IndexSet& indices) {
    return jacobian_b(tau, indices, RecursionPlan(indices));
}

/// Inverts the univariate moment recursion: tau_0 = ln mu_0 and, with
/// eta_k = mu_k / (k! mu_0), tau_k = k eta_k - sum_{j<k} tau_j eta_{k-j}.
[[nodiscard]] inline Eigen::VectorXd tau_from_mu_1d(const Eigen::VectorXd& mu) {
    const auto n = mu.size();
    if (n == 0) throw data_error("empty moment vector");
    if (!(mu[0] > 0.0) || !std::isfinite(mu[0]))
        throw data_error("zeroth shifted moment must be positive");
    Eigen::VectorXd eta(n), tau(n);
    double fact = 1.0;
    eta[0] = 1.0;
    for (Eigen::Index k = 1; k < n; ++k) {
        fact *= static_cast<double>(k);
        eta[k] = mu[k] / (fact * mu[0]);
    }
    tau[0] = std::log(mu[0]);
    for (Eigen::Index k = 1; k < n; ++k) {
        double s = static_cast<double>(k) * eta[k];
        for (Eigen::Index j = 1; j < k; ++j) s -= tau[j] * eta[k - j];
        tau[k] = s;
    }
    return tau;
}

} // namespace thorinfit
