#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "thorinfit/errors.hpp"
#include "thorinfit/rng.hpp"

namespace thorinfit {

/// Finitely atomic Thorin measure: atom i carries weight alpha[i] at
/// the point given by row i of scales.  The associated distribution is
/// that of scales^T g where g has independent Gamma(alpha[i], 1)
/// coordinates.
struct ThorinMeasure {
    Eigen::VectorXd alpha;  // n weights, >= 0
    Eigen::MatrixXd scales; // n x d atom locations, >= 0

    [[nodiscard]] Eigen::Index atom_count() const { return alpha.size(); }
    [[nodiscard]] int dim() const { return static_cast<int>(scales.cols()); }
    [[nodiscard]] double total_mass() const { return alpha.size() == 0 ? 0.0 : alpha.sum(); }
};

inline void validate(const ThorinMeasure& nu) {
    if (nu.scales.rows() != nu.alpha.size()) throw data_error("weight/scale row count mismatch");
    if (nu.scales.cols() < 1) throw data_error("measure dimension must be positive");
    if (nu.alpha.size() > 0) {
        if (!nu.alpha.allFinite() || nu.alpha.minCoeff() < 0.0)
            throw data_error("weights must be finite and nonnegative");
        if (!nu.scales.allFinite() || nu.scales.minCoeff() < 0.0)
            throw data_error("scales must be finite and nonnegative");
    }
}

/// Unconstrained square-root parametrization: weights p_i^2, scale
/// entries q_ij^2.
struct ConicParams {
    Eigen::VectorXd p;  // n
    Eigen::MatrixXd q;  // n x d
};

[[nodiscard]] inline ThorinMeasure conic_to_measure(const ConicParams& params) {
    if (params.q.rows() != params.p.size()) throw data_error("parameter row count mismatch");
    ThorinMeasure nu;
    nu.alpha = params.p.array().square().matrix();
    nu.scales = params.q.array().square().matrix();
    return nu;
}

/// Thorin cumulants tau_0..tau_m of the projection <c, .> pushforward:
/// with u_i = <c, s_i>, tau_0 = -sum alpha_i ln(1 + u_i) and
/// tau_k = sum alpha_i (u_i / (1 + u_i))^k.
[[nodiscard]] inline Eigen::VectorXd tau_of_projected_measure(const ThorinMeasure& nu,
                                                              const Eigen::VectorXd& c, int m) {
    validate(nu);
    if (c.size() != nu.scales.cols()) throw data_error("direction dimension mismatch");
    if (c.minCoeff() < 0.0 || c.maxCoeff() > 1.0) throw data_error("direction outside the unit cube");
    if (m < 0) throw data_error("degree must be nonnegative");
    Eigen::VectorXd tau = Eigen::VectorXd::Zero(m + 1);
    for (Eigen::Index i = 0; i < nu.atom_count(); ++i) {
        const double u = nu.scales.row(i).dot(c);
        const double a = nu.alpha[i];
        tau[0] -= a * std::log1p(u);
        const double ratio = u / (1.0 + u);
        double power = 1.0;
        for (int k = 1; k <= m; ++k) {
            power *= ratio;
            tau[k] += a * power;
        }
    }
    return tau;
}

/// Drops atoms lighter than weight_eps and zeroes scale entries below
/// scale_eps.  Idempotent; preserves atom order.
[[nodiscard]] inline ThorinMeasure threshold(const ThorinMeasure& nu, double weight_eps,
                                             double scale_eps) {
    validate(nu);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < nu.atom_count(); ++i)
        if (nu.alpha[i] >= weight_eps) keep.push_back(i);
    ThorinMeasure out;
    out.alpha.resize(static_cast<Eigen::Index>(keep.size()));
    out.scales.resize(static_cast<Eigen::Index>(keep.size()), nu.scales.cols());
    for (std::size_t j = 0; j < keep.size(); ++j) {
        out.alpha[static_cast<Eigen::Index>(j)] = nu.alpha[keep[j]];
        out.scales.row(static_cast<Eigen::Index>(j)) =
            (nu.scales.row(keep[j]).array() < scale_eps).select(0.0, nu.scales.row(keep[j]));
    }
    return out;
}

/// Draws N observations of scales^T g, g ~ product of Gamma(alpha_i, 1).
/// An empty or massless measure yields all zeros and sets *degenerate.
[[nodiscard]] inline Eigen::MatrixXd sample(const ThorinMeasure& nu, std::int64_t n_obs, Rng& rng,
                                            bool* degenerate = nullptr) {
    validate(nu);
    if (n_obs < 0) throw data_error("sample count must be nonnegative");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_obs, nu.scales.cols());
    const bool empty = nu.atom_count() == 0 || nu.total_mass() == 0.0;
    if (degenerate) *degenerate = empty;
    if (empty) return out;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index a = 0; a < nu.atom_count(); ++a) {
            const double g = rng.gamma(nu.alpha[a]);
            if (g != 0.0) out.row(i) += g * nu.scales.row(a);
        }
    return out;
}

enum class WellBehavedStatus { well_behaved, not_well_behaved, indeterminate };

struct WellBehavedReport {
    WellBehavedStatus status;
    std::string detail;
};

/// Checks the support condition for distinguishability: total mass at
/// least 1, atoms span R^d, and no rank-deficient family of rays
/// carries a strict majority of the mass.  Rays (atoms equal up to
/// positive scaling) are grouped first; candidate rank-deficient
/// families are spans of up to d-1 rays, which is exhaustive because a
/// violating family can always be enlarged to every ray inside its
/// span.  Beyond 20 atoms the check reports indeterminate rather than
/// sampling subsets.
[[nodiscard]] inline WellBehavedReport check_well_behaved(const ThorinMeasure& nu) {
    validate(nu);
    const int d = nu.dim();
    if (nu.total_mass() < 1.0)
        return {WellBehavedStatus::not_well_behaved,
                "total mass " + std::to_string(nu.total_mass()) + " is below 1"};
    if (nu.atom_count() > 20)
        return {WellBehavedStatus::indeterminate, "more than 20 atoms; subset check not attempted"};

    // Group atoms into rays; zero atoms sit on every ray and cancel out
    // of every majority comparison, so they are skipped.
    std::vector<Eigen::VectorXd> ray_dirs;
    std::vector<double> ray_mass;
    std::vector<std::vector<Eigen::Index>> ray_atoms;
    for (Eigen::Index i = 0; i < nu.atom_count(); ++i) {
        const double norm = nu.scales.row(i).norm();
        if (norm == 0.0 || nu.alpha[i] == 0.0) continue;
        Eigen::VectorXd dir = nu.scales.row(i).transpose() / norm;
        bool found = false;
        for (std::size_t r = 0; r < ray_dirs.size(); ++r)
            if ((ray_dirs[r] - dir).lpNorm<Eigen::Infinity>() < 1e-12) {
                ray_mass[r] += nu.alpha[i];
                ray_atoms[r].push_back(i);
                found = true;
                break;
            }
        if (!found) {
            ray_dirs.push_back(std::move(dir));
            ray_mass.push_back(nu.alpha[i]);
            ray_atoms.push_back({i});
        }
    }
    const int rays = static_cast<int>(ray_dirs.size());
    if (rays == 0)
        return {WellBehavedStatus::not_well_behaved, "no atoms with nonzero scale and weight"};
    double active_mass = 0.0;
    for (double w : ray_mass) active_mass += w;

    Eigen::MatrixXd all_rows(rays, d);
    for (int r = 0; r < rays; ++r) all_rows.row(r) = ray_dirs[static_cast<std::size_t>(r)];
    const auto rank_of = [&](const Eigen::MatrixXd& rows) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(rows);
        qr.setThreshold(1e-9);
        return static_cast<int>(qr.rank());
    };
    if (const int full_rank = rank_of(all_rows); full_rank < d)
        return {WellBehavedStatus::not_well_behaved,
                "atom directions span rank " + std::to_string(full_rank) +
                    " which is below the dimension " + std::to_string(d)};

    // Enumerate seed subsets of size <= d - 1, close each under its span,
    // and demand the closed family never carries a strict mass majority.
    std::vector<int> seed;
    std::string violation;
    const auto inspect = [&](const std::vector<int>& s) {
        Eigen::MatrixXd rows(s.size(), d);
        for (std::size_t j = 0; j < s.size(); ++j)
            rows.row(static_cast<Eigen::Index>(j)) = ray_dirs[static_cast<std::size_t>(s[j])];
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(rows.transpose());
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, static_cast<Eigen::Index>(s.size()));
        double mass = 0.0;
        std::vector<Eigen::Index> members;
        for (int r = 0; r < rays; ++r) {
            const Eigen::VectorXd v = ray_dirs[static_cast<std::size_t>(r)];
            const double residual = (v - q * (q.transpose() * v)).norm();
            if (residual < 1e-9) {
                mass += ray_mass[static_cast<std::size_t>(r)];
                for (Eigen::Index atom : ray_atoms[static_cast<std::size_t>(r)]) members.push_back(atom);
            }
        }
        if (mass > active_mass - mass) {
            std::string atoms;
            for (Eigen::Index a : members) atoms += (atoms.empty() ? "" : ",") + std::to_string(a);
            violation = "atoms {" + atoms + "} carry mass " + std::to_string(mass) + " of " +
                        std::to_string(active_mass) + " on a subspace of rank at most " +
                        std::to_string(s.size());
            return false;
        }
        return true;
    };
    const std::function<bool(int, int)> enumerate_seeds = [&](int start, int remaining) {
        if (!seed.empty() && !inspect(seed)) return false;
        if (remaining == 0) return true;
        for (int r = start; r < rays; ++r) {
            seed.push_back(r);
            if (!enumerate_seeds(r + 1, remaining - 1)) return false;
            seed.pop_back();
        }
        return true;
    };
    if (!enumerate_seeds(0, std::min(d - 1, rays)))
        return {WellBehavedStatus::not_well_behaved, violation};
    return {WellBehavedStatus::well_behaved, ""};
}

} // namespace thorinfit
