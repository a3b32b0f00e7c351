#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "thorinfit/errors.hpp"
#include "thorinfit/multiindex.hpp"
#include "thorinfit/rng.hpp"
#include "thorinfit/thorin.hpp"

namespace thorinfit {

/// A family of projection directions sized to the coefficient count of
/// degree m in dimension d, one direction per multi-index.
struct DirectionSet {
    int degree = 0;
    Eigen::MatrixXd directions; // count_coefficients(degree, d) x d

    [[nodiscard]] static DirectionSet random(int m, int d, Rng& rng) {
        const std::uint64_t n = count_coefficients(m, d);
        if (n > 100'000ull) throw data_error("direction set too large");
        DirectionSet set;
        set.degree = m;
        set.directions.resize(static_cast<Eigen::Index>(n), d);
        for (Eigen::Index i = 0; i < set.directions.rows(); ++i)
            for (int j = 0; j < d; ++j) set.directions(i, j) = rng.uniform01();
        return set;
    }
};

/// Moment-matching matrix P with P(i, k) = m!/(k! (m - |k|)!) c_i^k.
/// P x = r where x collects the multivariate raw moments up to degree m
/// and r_i is the m-th order mixed projected moment sum for direction i.
[[nodiscard]] inline Eigen::MatrixXd build_p_matrix(const DirectionSet& set) {
    const int m = set.degree;
    const int d = static_cast<int>(set.directions.cols());
    const IndexSet indices(m, d);
    if (set.directions.rows() != indices.size())
        throw data_error("direction count must match the coefficient count");
    const Eigen::VectorXd fact = detail::factorial_table(m);
    Eigen::MatrixXd p(indices.size(), indices.size());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (std::int64_t a = 0; a < indices.size(); ++a) {
            const auto k = indices[a];
            double coeff = fact[m];
            double power = 1.0;
            int total = 0;
            for (int r = 0; r < d; ++r) {
                coeff /= fact[k[r]];
                total += k[r];
                for (int e = 0; e < k[r]; ++e) power *= set.directions(i, r);
            }
            coeff /= fact[m - total];
            p(i, static_cast<Eigen::Index>(a)) = coeff * power;
        }
    }
    return p;
}

/// Recovers multivariate raw moments up to degree m from univariate raw
/// moments of the projections.  projected(i, p) holds the p-th raw
/// moment of the pushforward along direction i.  Solved degree by
/// degree in the least-squares sense; refuses ill-conditioned systems.
[[nodiscard]] inline Eigen::VectorXd reconstruct_moments(const DirectionSet& set,
                                                         const Eigen::MatrixXd& projected) {
    const int m = set.degree;
    const int d = static_cast<int>(set.directions.cols());
    const IndexSet indices(m, d);
    if (projected.rows() != set.directions.rows())
        throw data_error("projected moment row count mismatch");
    if (projected.cols() != m + 1) throw data_error("projected moment column count mismatch");
    const Eigen::VectorXd fact = detail::factorial_table(m);
    Eigen::VectorXd moments(indices.size());
    for (int p = 0; p <= m; ++p) {
        const std::int64_t lo = indices.degree_offset(p);
        const std::int64_t hi = indices.degree_offset(p + 1);
        Eigen::MatrixXd design(set.directions.rows(), hi - lo);
        for (Eigen::Index i = 0; i < design.rows(); ++i)
            for (std::int64_t a = lo; a < hi; ++a) {
                const auto k = indices[a];
                double coeff = fact[p];
                double power = 1.0;
                for (int r = 0; r < d; ++r) {
                    coeff /= fact[k[r]];
                    for (int e = 0; e < k[r]; ++e) power *= set.directions(i, r);
                }
                design(i, static_cast<Eigen::Index>(a - lo)) = coeff * power;
            }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const double smin = svd.singularValues().tail(1)[0];
        const double smax = svd.singularValues()[0];
        if (!(smin > 0.0) || smax / smin > 1e12)
            throw numeric_error("moment reconstruction is ill-conditioned at degree " +
                                std::to_string(p));
        moments.segment(lo, hi - lo) = svd.solve(projected.col(p));
    }
    return moments;
}

struct SubsetIndependence {
    bool holds = false;
    bool exhaustive = false;
    std::uint64_t subsets_checked = 0;
    double coverage = 0.0; // fraction of size-d subsets inspected
};

/// Checks that every size-d subset of direction rows is linearly
/// independent (the identifiability hypothesis at order 1).  Exhaustive
/// when there are at most max_subsets subsets, random sampling with
/// reported coverage otherwise.
[[nodiscard]] inline SubsetIndependence check_hypothesis_h(const Eigen::MatrixXd& dirs, int order = 1,
                                                           std::uint64_t max_subsets = 100'000,
                                                           std::uint64_t seed = 0) {
    if (order != 1) throw std::invalid_argument("only order 1 is supported");
    const Eigen::Index n = dirs.rows();
    const int d = static_cast<int>(dirs.cols());
    if (d < 1) throw data_error("dimension must be positive");
    SubsetIndependence out;
    if (n < d) { // no subset to falsify
        out.holds = true;
        out.exhaustive = true;
        out.coverage = 1.0;
        return out;
    }
    // Normalized rows make the determinant test scale-free.
    Eigen::MatrixXd unit = dirs;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double norm = unit.row(i).norm();
        if (norm == 0.0) { // a zero direction defeats every subset it joins
            out.holds = false;
            out.exhaustive = true;
            out.coverage = 1.0;
            return out;
        }
        unit.row(i) /= norm;
    }
    const auto independent = [&](const std::vector<Eigen::Index>& rows) {
        Eigen::MatrixXd sub(d, d);
        for (int r = 0; r < d; ++r) sub.row(r) = unit.row(rows[static_cast<std::size_t>(r)]);
        return std::abs(sub.determinant()) > 1e-9;
    };
    // Total subset count, saturating.
    double total = 1.0;
    for (int r = 0; r < d; ++r) total = total * static_cast<double>(n - r) / (r + 1);
    if (total <= static_cast<double>(max_subsets)) {
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(d));
        for (int r = 0; r < d; ++r) rows[static_cast<std::size_t>(r)] = r;
        for (;;) {
            ++out.subsets_checked;
            if (!independent(rows)) {
                out.holds = false;
                out.exhaustive = true;
                out.coverage = static_cast<double>(out.subsets_checked) / total;
                return out;
            }
            int r = d - 1;
            while (r >= 0 && rows[static_cast<std::size_t>(r)] == n - d + r) --r;
            if (r < 0) break;
            ++rows[static_cast<std::size_t>(r)];
            for (int s = r + 1; s < d; ++s)
                rows[static_cast<std::size_t>(s)] = rows[static_cast<std::size_t>(s - 1)] + 1;
        }
        out.holds = true;
        out.exhaustive = true;
        out.coverage = 1.0;
        return out;
    }
    Rng rng(seed);
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(d));
    for (std::uint64_t trial = 0; trial < max_subsets; ++trial) {
        // Floyd's algorithm would avoid rejections; plain redraw is fine
        // at these sizes.
        for (int r = 0; r < d; ++r) {
            for (;;) {
                const Eigen::Index candidate =
                    static_cast<Eigen::Index>(rng.uniform01() * static_cast<double>(n));
                bool dup = false;
                for (int s = 0; s < r; ++s)
                    if (rows[static_cast<std::size_t>(s)] == candidate) dup = true;
                if (!dup && candidate < n) {
                    rows[static_cast<std::size_t>(r)] = candidate;
                    break;
                }
            }
        }
        ++out.subsets_checked;
        if (!independent(rows)) {
            out.holds = false;
            out.exhaustive = false;
            out.coverage = static_cast<double>(out.subsets_checked) / total;
            return out;
        }
    }
    out.holds = true;
    out.exhaustive = false;
    out.coverage = static_cast<double>(max_subsets) / total;
    return out;
}

struct AtomDistanceBound {
    bool premises_hold = false;
    double bound = 0.0;                  // (d - order) / n_dirs * max total mass
    double max_weight_discrepancy = 0.0; // observed atomwise weight gap
    std::string detail;
};

namespace detail {

/// Clusters (position, signed mass) pairs on the line and returns the
/// largest absolute cluster mass.
[[nodiscard]] inline double max_cluster_mass_1d(std::vector<std::pair<double, double>>& atoms,
                                                double tol) {
    std::sort(atoms.begin(), atoms.end());
    double worst = 0.0;
    std::size_t i = 0;
    while (i < atoms.size()) {
        double mass = atoms[i].second;
        std::size_t j = i + 1;
        while (j < atoms.size() &&
               atoms[j].first - atoms[j - 1].first <= tol * (1.0 + std::abs(atoms[j].first))) {
            mass += atoms[j].second;
            ++j;
        }
        worst = std::max(worst, std::abs(mass));
        i = j;
    }
    return worst;
}

} // namespace detail

/// Identification bound: if two measures have matching projections on
/// every direction of an independent family, their atomwise weight
/// discrepancy is at most (d - order)/n_dirs times the larger total
/// mass.  Returns the bound together with the observed discrepancy so
/// callers can verify the inequality.
[[nodiscard]] inline AtomDistanceBound atom_distance_bound(const ThorinMeasure& nu1,
                                                           const ThorinMeasure& nu2,
                                                           const Eigen::MatrixXd& dirs,
                                                           int order = 1, double tol = 1e-8) {
    if (order != 1) throw std::invalid_argument("only order 1 is supported");
    validate(nu1);
    validate(nu2);
    const int d = nu1.dim();
    if (nu2.dim() != d || dirs.cols() != d) throw data_error("dimension mismatch");
    if (dirs.rows() < 1) throw data_error("need at least one direction");

    AtomDistanceBound out;
    out.bound = static_cast<double>(d - order) / static_cast<double>(dirs.rows()) *
                std::max(nu1.total_mass(), nu2.total_mass());

    const SubsetIndependence h = check_hypothesis_h(dirs, order);
    if (!h.holds) {
        out.detail = "direction family fails the independence hypothesis";
        return out;
    }

    // Projections of both measures must agree (signed masses cancel
    // within tolerance) on every direction.
    for (Eigen::Index c = 0; c < dirs.rows(); ++c) {
        std::vector<std::pair<double, double>> line;
        for (Eigen::Index i = 0; i < nu1.atom_count(); ++i)
            line.emplace_back(nu1.scales.row(i).dot(dirs.row(c)), nu1.alpha[i]);
        for (Eigen::Index i = 0; i < nu2.atom_count(); ++i)
            line.emplace_back(nu2.scales.row(i).dot(dirs.row(c)), -nu2.alpha[i]);
        const double gap = detail::max_cluster_mass_1d(line, tol);
        if (gap > tol * std::max(1.0, nu1.total_mass() + nu2.total_mass())) {
            out.detail = "projections differ on direction " + std::to_string(c) + " by " +
                         std::to_string(gap);
            return out;
        }
    }
    out.premises_hold = true;

    // Atomwise discrepancy in R^d via union-find clustering.
    const Eigen::Index n1 = nu1.atom_count();
    const Eigen::Index total = n1 + nu2.atom_count();
    std::vector<Eigen::Index> parent(static_cast<std::size_t>(total));
    for (Eigen::Index i = 0; i < total; ++i) parent[static_cast<std::size_t>(i)] = i;
    const std::function<Eigen::Index(Eigen::Index)> find = [&](Eigen::Index x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    const auto row_of = [&](Eigen::Index i) {
        return i < n1 ? nu1.scales.row(i) : nu2.scales.row(i - n1);
    };
    for (Eigen::Index i = 0; i < total; ++i)
        for (Eigen::Index j = i + 1; j < total; ++j)
            if ((row_of(i) - row_of(j)).norm() <= tol * (1.0 + row_of(i).norm()))
                parent[static_cast<std::size_t>(find(i))] = find(j);
    std::vector<double> mass(static_cast<std::size_t>(total), 0.0);
    for (Eigen::Index i = 0; i < total; ++i)
        mass[static_cast<std::size_t>(find(i))] += i < n1 ? nu1.alpha[i] : -nu2.alpha[i - n1];
    for (double m : mass) out.max_weight_discrepancy = std::max(out.max_weight_discrepancy, std::abs(m));
    return out;
}

} // namespace thorinfit
