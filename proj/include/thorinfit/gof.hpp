#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "thorinfit/errors.hpp"
#include "thorinfit/rng.hpp"

namespace thorinfit {

/// Draws an N x d sample; must be a pure function of (N, seed) so
/// benchmark repetitions can run on any thread layout.
using Sampler = std::function<Eigen::MatrixXd(std::int64_t, std::uint64_t)>;

/// Fraction of data rows dominated componentwise by x.
[[nodiscard]] inline double empirical_cdf(const Eigen::MatrixXd& data, const Eigen::VectorXd& x) {
    if (data.cols() != x.size()) throw data_error("evaluation point dimension mismatch");
    if (data.rows() == 0) throw data_error("no observations");
    std::int64_t count = 0;
    for (Eigen::Index i = 0; i < data.rows(); ++i)
        if ((data.row(i).transpose().array() <= x.array()).all()) ++count;
    return static_cast<double>(count) / static_cast<double>(data.rows());
}

namespace detail {

inline void guard_two_sample_cost(Eigen::Index n1, Eigen::Index n2, Eigen::Index d, bool force) {
    if (force) return;
    if (d > 6)
        throw cost_guard_error("empirical CDF comparison beyond dimension 6; pass force to override");
    if (static_cast<double>(n1) * static_cast<double>(n1 + n2) > 1e8)
        throw cost_guard_error("two-sample scan would exceed 1e8 row comparisons; pass force to override");
}

/// Two-sample Kolmogorov-Smirnov and Cramer-von-Mises statistics, both
/// evaluated over the first sample's points: KS is the sup CDF gap,
/// CvM the mean squared gap.
[[nodiscard]] inline std::pair<double, double> two_sample_statistics(const Eigen::MatrixXd& d1,
                                                                     const Eigen::MatrixXd& d2,
                                                                     bool force = false) {
    if (d1.cols() != d2.cols()) throw data_error("sample dimension mismatch");
    if (d1.rows() == 0 || d2.rows() == 0) throw data_error("empty sample");
    guard_two_sample_cost(d1.rows(), d2.rows(), d1.cols(), force);
    const double inv1 = 1.0 / static_cast<double>(d1.rows());
    const double inv2 = 1.0 / static_cast<double>(d2.rows());
    double ks = 0.0, cvm = 0.0;
    for (Eigen::Index i = 0; i < d1.rows(); ++i) {
        std::int64_t c1 = 0, c2 = 0;
        for (Eigen::Index j = 0; j < d1.rows(); ++j)
            if ((d1.row(j).array() <= d1.row(i).array()).all()) ++c1;
        for (Eigen::Index j = 0; j < d2.rows(); ++j)
            if ((d2.row(j).array() <= d1.row(i).array()).all()) ++c2;
        const double gap = static_cast<double>(c1) * inv1 - static_cast<double>(c2) * inv2;
        ks = std::max(ks, std::abs(gap));
        cvm += gap * gap;
    }
    return {ks, cvm * inv1};
}

} // namespace detail

/// Null distribution of the two statistics under resampling from the
/// truth: repetition i compares two independent truth draws of size N.
struct StatBenchmark {
    std::vector<double> ks;
    std::vector<double> cvm;
    std::int64_t sample_size = 0;
    int dim = 0;
};

[[nodiscard]] inline StatBenchmark benchmark(const Sampler& truth, int repetitions,
                                             std::int64_t sample_size, std::uint64_t seed,
                                             bool force = false, int threads = 1) {
    if (repetitions < 1) throw data_error("need at least one repetition");
    if (sample_size < 1) throw data_error("sample size must be positive");
    StatBenchmark bench;
    bench.sample_size = sample_size;
    bench.ks.resize(static_cast<std::size_t>(repetitions));
    bench.cvm.resize(static_cast<std::size_t>(repetitions));
    std::vector<int> dims(static_cast<std::size_t>(repetitions), 0);
    const auto run_one = [&](int i) {
        const Eigen::MatrixXd a =
            truth(sample_size, derive_seed(seed, 2 * static_cast<std::uint64_t>(i)));
        const Eigen::MatrixXd b =
            truth(sample_size, derive_seed(seed, 2 * static_cast<std::uint64_t>(i) + 1));
        if (a.rows() != sample_size || b.rows() != sample_size)
            throw data_error("sampler returned the wrong number of rows");
        const auto [ks, cvm] = detail::two_sample_statistics(a, b, force);
        bench.ks[static_cast<std::size_t>(i)] = ks;
        bench.cvm[static_cast<std::size_t>(i)] = cvm;
        dims[static_cast<std::size_t>(i)] = static_cast<int>(a.cols());
    };
    if (threads <= 1 || repetitions == 1) {
        for (int i = 0; i < repetitions; ++i) run_one(i);
    } else {
        const int workers = std::min(threads, repetitions);
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> failures(static_cast<std::size_t>(workers));
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (int i = w; i < repetitions; i += workers) run_one(i);
                } catch (...) {
                    failures[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (const auto& failure : failures)
            if (failure) std::rethrow_exception(failure);
    }
    bench.dim = dims[0];
    return bench;
}

/// Linear-interpolated quantile of an ascending-sorted vector.
[[nodiscard]] inline double quantile_sorted(const std::vector<double>& sorted, double level) {
    if (sorted.empty()) throw data_error("quantile of an empty sample");
    if (!(level >= 0.0 && level <= 1.0)) throw data_error("quantile level outside [0,1]");
    const double h = level * (static_cast<double>(sorted.size()) - 1.0);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double w = h - static_cast<double>(lo);
    return sorted[lo] * (1.0 - w) + sorted[lo + 1] * w;
}

/// Resampled p-values: draws one truth sample and one model sample of
/// size N, computes both statistics, and reports the benchmark fraction
/// at least as extreme.
[[nodiscard]] inline std::pair<double, double> p_values(const Sampler& truth, const Sampler& model,
                                                        const StatBenchmark& bench,
                                                        std::int64_t sample_size, std::uint64_t seed,
                                                        bool force = false) {
    if (bench.ks.empty()) throw data_error("empty benchmark");
    if (sample_size != bench.sample_size)
        throw data_error("sample size differs from the benchmark");
    const Eigen::MatrixXd a = truth(sample_size, derive_seed(seed, 0x74727574ull));
    const Eigen::MatrixXd b = model(sample_size, derive_seed(seed, 0x6d6f64656cull));
    if (a.rows() == 0 || b.rows() == 0) throw data_error("sampler returned zero samples");
    if (a.cols() != bench.dim || b.cols() != bench.dim)
        throw data_error("sample dimension differs from the benchmark");
    if (b.rows() != sample_size) throw data_error("model sampler returned the wrong number of rows");
    const auto [ks, cvm] = detail::two_sample_statistics(a, b, force);
    double ks_tail = 0.0, cvm_tail = 0.0;
    for (double v : bench.ks) ks_tail += v >= ks ? 1.0 : 0.0;
    for (double v : bench.cvm) cvm_tail += v >= cvm ? 1.0 : 0.0;
    const double m = static_cast<double>(bench.ks.size());
    return {ks_tail / m, cvm_tail / m};
}

} // namespace thorinfit
