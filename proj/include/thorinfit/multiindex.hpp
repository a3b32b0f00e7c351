#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "thorinfit/errors.hpp"

namespace thorinfit {

/// Number of multi-indices k in N^d with |k| <= m, computed in exact
/// integer arithmetic.  Equals binom(m + d, d).
[[nodiscard]] inline std::uint64_t count_coefficients(int m, int d) {
    if (d <= 0) throw data_error("dimension must be positive");
    if (m < 0) throw data_error("degree must be nonnegative");
    constexpr unsigned __int128 cap = std::numeric_limits<std::uint64_t>::max();
    // Accumulate the per-degree counts binom(i + d - 1, d - 1); the
    // incremental update divides exactly at every step.
    unsigned __int128 block = 1;
    unsigned __int128 total = 0;
    for (int i = 0;; ++i) {
        total += block;
        if (total > cap) throw numeric_error("coefficient count exceeds 64-bit range");
        if (i == m) break;
        block = block * static_cast<unsigned>(i + d) / static_cast<unsigned>(i + 1);
        if (block > cap) throw numeric_error("coefficient count exceeds 64-bit range");
    }
    return static_cast<std::uint64_t>(total);
}

/// All multi-indices with |k| <= max_degree in dimension dim, ordered by
/// total degree and lexicographically within a degree.  The ordering is
/// load-bearing: the set for degree m is a prefix of the set for m + 1,
/// and k - e_i precedes k for every nonzero coordinate i, so recursions
/// over the list only look backwards.
class IndexSet {
public:
    IndexSet(int max_degree, int dim) : m_(max_degree), d_(dim) {
        const std::uint64_t n = count_coefficients(max_degree, dim);
        if (n > 100'000'000ull) throw data_error("index set too large to materialize");
        flat_.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(dim));
        degree_begin_.assign(static_cast<std::size_t>(m_) + 2, 0);
        std::vector<int> k(static_cast<std::size_t>(dim), 0);
        for (int p = 0; p <= m_; ++p) {
            degree_begin_[static_cast<std::size_t>(p)] = size();
            emit_degree(k, 0, p);
        }
        degree_begin_.back() = size();
    }

    [[nodiscard]] int max_degree() const { return m_; }
    [[nodiscard]] int dim() const { return d_; }
    [[nodiscard]] std::int64_t size() const {
        return static_cast<std::int64_t>(flat_.size()) / d_;
    }

    [[nodiscard]] std::span<const int> operator[](std::int64_t i) const {
        return {flat_.data() + i * d_, static_cast<std::size_t>(d_)};
    }

    [[nodiscard]] int degree(std::int64_t i) const {
        const auto k = (*this)[i];
        int s = 0;
        for (int v : k) s += v;
        return s;
    }

    /// First position of total degree p (one past the end for p = m + 1).
    [[nodiscard]] std::int64_t degree_offset(int p) const {
        return degree_begin_[static_cast<std::size_t>(p)];
    }

    /// Position of k in the ordering, or -1 if |k| > max_degree.
    [[nodiscard]] std::int64_t position(std::span<const int> k) const {
        int p = 0;
        for (int v : k) {
            if (v < 0) return -1;
            p += v;
        }
        if (p > m_) return -1;
        std::int64_t lo = degree_offset(p);
        std::int64_t hi = degree_offset(p + 1);
        while (lo < hi) {
            const std::int64_t mid = lo + (hi - lo) / 2;
            if (lex_less((*this)[mid], k)) lo = mid + 1;
            else hi = mid;
        }
        return lo;
    }

private:
    static bool lex_less(std::span<const int> a, std::span<const int> b) {
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i] != b[i]) return a[i] < b[i];
        return false;
    }

    void emit_degree(std::vector<int>& k, int coord, int remaining) {
        if (coord == d_ - 1) {
            k[static_cast<std::size_t>(coord)] = remaining;
            flat_.insert(flat_.end(), k.begin(), k.end());
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            k[static_cast<std::size_t>(coord)] = v;
            emit_degree(k, coord + 1, remaining - v);
        }
    }

    int m_, d_;
    std::vector<int> flat_;
    std::vector<std::int64_t> degree_begin_;
};

/// Convenience spelling mirroring count_coefficients.
[[nodiscard]] inline IndexSet enumerate_indices(int m, int d) { return IndexSet(m, d); }

namespace detail {

/// Pascal's triangle up to row n, as doubles.
[[nodiscard]] inline Eigen::MatrixXd binomial_table(int n) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n + 1, n + 1);
    for (int i = 0; i <= n; ++i) {
        c(i, 0) = 1.0;
        for (int j = 1; j <= i; ++j)
            c(i, j) = c(i - 1, j - 1) + (j <= i - 1 ? c(i - 1, j) : 0.0);
    }
    return c;
}

/// 0!, 1!, ..., n! as doubles.
[[nodiscard]] inline Eigen::VectorXd factorial_table(int n) {
    Eigen::VectorXd f(n + 1);
    f[0] = 1.0;
    for (int i = 1; i <= n; ++i) f[i] = f[i - 1] * i;
    return f;
}

} // namespace detail

} // namespace thorinfit
