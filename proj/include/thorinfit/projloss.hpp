#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "thorinfit/cumulants.hpp"
#include "thorinfit/errors.hpp"
#include "thorinfit/laguerre.hpp"
#include "thorinfit/multiindex.hpp"
#include "thorinfit/thorin.hpp"

namespace thorinfit {

/// Everything the per-direction loss needs that depends only on the
/// data and the direction, not on the parameters.
struct DirectionContext {
    Eigen::VectorXd c;       // direction in [0,1]^d
    Eigen::VectorXd tau_hat; // estimated projected Thorin cumulants, length m + 1
    Eigen::MatrixXd nabla;   // A . (d mu / d tau) at tau_hat
    Eigen::MatrixXd gram;    // nabla^T nabla, positive definite
};

/// Reusable univariate tables (index set, recursion plan, basis change)
/// for a fixed truncation degree.  Construction is O(m^3); build once
/// per fit, then build_context per direction is O(N m + m^3) with tiny
/// constants.  Const methods are safe to call concurrently.
class ProjectionWorkspace {
public:
    explicit ProjectionWorkspace(int m)
        : indices_(m, 1), plan_(indices_), a_matrix_(build_a_matrix(indices_)) {
        if (m < 1) throw data_error("truncation degree must be at least 1");
    }

    [[nodiscard]] int degree() const { return indices_.max_degree(); }

    /// Projects the data onto c, estimates shifted moments and Thorin
    /// cumulants of the projection, and assembles the weighting matrix.
    /// Throws degenerate_projection_error when every projected
    /// observation damps to numerical zero.
    [[nodiscard]] DirectionContext build_context(const Eigen::MatrixXd& data,
                                                 const Eigen::VectorXd& c) const {
        if (data.cols() != c.size()) throw data_error("direction dimension mismatch");
        if (c.minCoeff() < 0.0 || c.maxCoeff() > 1.0)
            throw data_error("direction outside the unit cube");
        DirectionContext ctx;
        ctx.c = c;
        const Eigen::VectorXd projected = data * c;
        const Eigen::VectorXd mu = shifted_moments_1d(projected, degree());
        if (!(mu[0] > 0.0))
            throw degenerate_projection_error(
                "projected observations all vanish under damping; rescale the data");
        ctx.tau_hat = tau_from_mu_1d(mu);
        const JacobianResult jac = jacobian_b(ctx.tau_hat, indices_, plan_);
        ctx.nabla.noalias() = a_matrix_.triangularView<Eigen::Lower>() * jac.jacobian;
        ctx.gram.noalias() = ctx.nabla.transpose() * ctx.nabla;
        return ctx;
    }

private:
    IndexSet indices_;
    RecursionPlan plan_;
    Eigen::MatrixXd a_matrix_;
};

[[nodiscard]] inline DirectionContext build_context(const Eigen::MatrixXd& data,
                                                    const Eigen::VectorXd& c, int m) {
    if (data.rows() == 0) throw data_error("no observations");
    if (data.minCoeff() < 0.0) throw data_error("observations must be nonnegative");
    return ProjectionWorkspace(m).build_context(data, c);
}

struct LossGradient {
    double value = 0.0;
    Eigen::VectorXd grad_p;  // n
    Eigen::MatrixXd grad_q;  // n x d
};

/// Weighted squared distance between the estimated projected cumulants
/// and those of the parametrized measure, plus a lasso term on the
/// weights, with its gradient in the conic parametrization.  The scale
/// gradient omits the p_i^2 weight factor (mirror descent in the conic
/// geometry), so it matches the Euclidean gradient only up to that
/// positive per-atom factor.
[[nodiscard]] inline LossGradient loss_and_gradient(const DirectionContext& ctx,
                                                    const ConicParams& params, double lasso = 0.0) {
    const Eigen::Index n = params.p.size();
    const Eigen::Index d = ctx.c.size();
    if (params.q.rows() != n || params.q.cols() != d)
        throw data_error("parameter dimension mismatch");
    if (lasso < 0.0) throw data_error("lasso strength must be nonnegative");
    const int m = static_cast<int>(ctx.tau_hat.size()) - 1;

    Eigen::VectorXd u(n), log1pu(n), ratio(n), p2(n);
    Eigen::VectorXd tau_model = Eigen::VectorXd::Zero(m + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        p2[i] = params.p[i] * params.p[i];
        u[i] = (params.q.row(i).array().square() * ctx.c.transpose().array()).sum();
        log1pu[i] = std::log1p(u[i]);
        ratio[i] = u[i] / (1.0 + u[i]);
        tau_model[0] -= p2[i] * log1pu[i];
        double power = 1.0;
        for (int k = 1; k <= m; ++k) {
            power *= ratio[i];
            tau_model[k] += p2[i] * power;
        }
    }

    const Eigen::VectorXd residual = ctx.tau_hat - tau_model;
    const Eigen::VectorXd weighted = ctx.gram * residual;

    LossGradient out;
    out.value = residual.dot(weighted) + lasso * p2.sum();
    out.grad_p.resize(n);
    out.grad_q.resize(n, d);
    // g_k = d value / d tau_model_k.
    const Eigen::VectorXd g = -2.0 * weighted;
    for (Eigen::Index i = 0; i < n; ++i) {
        double s_tau = 0.0;      // sum_k g_k ratio^k
        double s_dtau = 0.0;     // sum_k g_k k ratio^(k-1)
        double power = 1.0;      // ratio^(k-1) entering iteration k
        for (int k = 1; k <= m; ++k) {
            s_dtau += g[k] * k * power;
            power *= ratio[i];
            s_tau += g[k] * power;
        }
        out.grad_p[i] = 2.0 * params.p[i] * (s_tau - g[0] * log1pu[i] + lasso);
        const double scale_factor =
            2.0 * (-g[0] / (1.0 + u[i]) + s_dtau / ((1.0 + u[i]) * (1.0 + u[i])));
        out.grad_q.row(i) =
            (scale_factor * ctx.c.transpose().array() * params.q.row(i).array()).matrix();
    }

    if (!std::isfinite(out.value) || !out.grad_p.allFinite() || !out.grad_q.allFinite()) {
        Eigen::Index bad = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!std::isfinite(out.grad_p[i]) || !out.grad_q.row(i).allFinite()) {
                bad = i;
                break;
            }
        throw numeric_error("non-finite loss gradient at atom " + std::to_string(bad));
    }
    return out;
}

/// Delta-method standard errors for the estimated projected cumulants:
/// tau_hat = B^{-1}(mu_hat), so Cov(tau_hat) ~ J^{-1} Cov(mu_hat) J^{-T}
/// with J the moment-recursion Jacobian at tau_hat and Cov(mu_hat) the
/// sample covariance of the per-observation moment terms over N.
[[nodiscard]] inline Eigen::VectorXd projected_tau_standard_errors(const Eigen::MatrixXd& data,
                                                                   const Eigen::VectorXd& c, int m) {
    if (data.rows() < 2) throw data_error("need at least two observations");
    if (data.cols() != c.size()) throw data_error("direction dimension mismatch");
    const Eigen::VectorXd y = data * c;
    const Eigen::Index n_obs = y.size();
    Eigen::MatrixXd terms(n_obs, m + 1);
    for (Eigen::Index i = 0; i < n_obs; ++i) {
        double t = std::exp(-y[i]);
        terms(i, 0) = t;
        for (int k = 1; k <= m; ++k) {
            t *= y[i];
            terms(i, k) = t;
        }
    }
    const Eigen::RowVectorXd mean = terms.colwise().mean();
    if (!(mean[0] > 0.0))
        throw degenerate_projection_error(
            "projected observations all vanish under damping; rescale the data");
    const Eigen::MatrixXd centered = terms.rowwise() - mean;
    const Eigen::MatrixXd cov_mu =
        centered.transpose() * centered / (static_cast<double>(n_obs) - 1.0) /
        static_cast<double>(n_obs);
    const Eigen::VectorXd tau = tau_from_mu_1d(mean.transpose());
    const IndexSet indices(m, 1);
    const JacobianResult jac = jacobian_b(tau, indices);
    const Eigen::MatrixXd jinv_cov = jac.jacobian.triangularView<Eigen::Lower>().solve(cov_mu);
    const Eigen::MatrixXd cov_tau =
        jac.jacobian.triangularView<Eigen::Lower>()
            .solve(jinv_cov.transpose())
            .transpose();
    return cov_tau.diagonal().cwiseMax(0.0).cwiseSqrt();
}

} // namespace thorinfit
