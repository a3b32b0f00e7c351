#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <future>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "thorinfit/errors.hpp"
#include "thorinfit/projloss.hpp"
#include "thorinfit/rng.hpp"
#include "thorinfit/thorin.hpp"

namespace thorinfit {

struct FitConfig {
    int atom_count = 100;
    int degree = 20;                   // projected cumulant truncation m
    std::int64_t max_iterations = 100000;
    int batch_size = 1;                // directions averaged per update
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double gradient_tolerance = 1e-16; // on the smoothed gradient norm
    double lasso = 0.0;
    double weight_threshold = 1e-5;
    double scale_threshold = 1e-5;
    bool decay_learning_rate = false;  // multiply the step by 1/sqrt(t)
    std::uint64_t seed = 0;
    int trace_stride = 100;
    int threads = 1;
};

struct FitReport {
    ThorinMeasure measure;          // thresholded, in the original data scale
    Eigen::VectorXd column_scale;   // per-column standard deviations divided out
    std::vector<double> loss_trace; // batch loss every trace_stride iterations
    std::int64_t iterations = 0;
    std::string termination;        // "max_iterations" or "gradient_tolerance"
    int rollbacks = 0;
    double wall_seconds = 0.0;
    FitConfig config;
};

/// Divides each column by its sample standard deviation (no centering;
/// the support must stay in the positive orthant).  Returns the scaled
/// matrix and the divisors.
[[nodiscard]] inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> standardize(
    const Eigen::MatrixXd& data) {
    if (data.rows() < 2) throw data_error("need at least two observations");
    Eigen::VectorXd sigma(data.cols());
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        const double mean = data.col(j).mean();
        const double ss = (data.col(j).array() - mean).square().sum();
        sigma[j] = std::sqrt(ss / (static_cast<double>(data.rows()) - 1.0));
        if (!(sigma[j] > 0.0))
            throw data_error("column " + std::to_string(j) + " is constant");
    }
    Eigen::MatrixXd scaled = (data.array().rowwise() / sigma.transpose().array()).matrix();
    return {std::move(scaled), std::move(sigma)};
}

/// Standard normal initialization of the conic parameters.  Draw order
/// (weights first, then scale rows) is part of the reproducibility
/// contract.
[[nodiscard]] inline ConicParams init_params(int n, int d, Rng& rng) {
    if (n < 1) throw data_error("atom count must be positive");
    if (d < 1) throw data_error("dimension must be positive");
    ConicParams params;
    params.p.resize(n);
    params.q.resize(n, d);
    for (int i = 0; i < n; ++i) params.p[i] = rng.normal();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) params.q(i, j) = rng.normal();
    return params;
}

/// Stochastic conic particle descent on random projections.  Each
/// iteration draws batch_size directions uniformly on [0,1]^d, averages
/// the per-direction loss gradients, and applies one Adam step.
/// Deterministic given the seed and batch size, including across thread
/// counts.
[[nodiscard]] inline FitReport fit(const Eigen::MatrixXd& data, const FitConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    if (data.rows() == 0 || data.cols() == 0) throw data_error("no observations");
    if (!data.allFinite()) throw data_error("observations must be finite");
    if (data.minCoeff() < 0.0) {
        Eigen::Index r = 0, c = 0;
        data.minCoeff(&r, &c);
        throw data_error("negative observation at row " + std::to_string(r) + " column " +
                         std::to_string(c));
    }
    if (cfg.max_iterations < 0) throw data_error("iteration count must be nonnegative");
    if (cfg.batch_size < 1) throw data_error("batch size must be positive");
    if (!(cfg.learning_rate > 0.0)) throw data_error("learning rate must be positive");

    const int d = static_cast<int>(data.cols());
    auto [scaled, sigma] = standardize(data);
    Rng rng(cfg.seed);
    ConicParams params = init_params(cfg.atom_count, d, rng);
    const ProjectionWorkspace workspace(cfg.degree);
    const int n = cfg.atom_count;

    Eigen::VectorXd m_p = Eigen::VectorXd::Zero(n), v_p = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd m_q = Eigen::MatrixXd::Zero(n, d), v_q = Eigen::MatrixXd::Zero(n, d);
    Eigen::VectorXd p_next(n), m_p_next(n), v_p_next(n);
    Eigen::MatrixXd q_next(n, d), m_q_next(n, d), v_q_next(n, d);

    FitReport report;
    report.config = cfg;
    report.termination = "max_iterations";
    double lr = cfg.learning_rate;
    double smoothed_grad = -1.0;

    std::vector<Eigen::VectorXd> batch_dirs(static_cast<std::size_t>(cfg.batch_size));
    std::vector<LossGradient> batch_grads(static_cast<std::size_t>(cfg.batch_size));

    for (std::int64_t t = 1; t <= cfg.max_iterations; ++t) {
        // Directions are drawn sequentially from the single stream so the
        // trajectory does not depend on how the batch is evaluated.
        for (int b = 0; b < cfg.batch_size; ++b) {
            Eigen::VectorXd c(d);
            for (int j = 0; j < d; ++j) c[j] = rng.uniform01();
            batch_dirs[static_cast<std::size_t>(b)] = std::move(c);
        }
        const auto evaluate = [&](int b) {
            int redraws = 0;
            for (;;) {
                try {
                    return loss_and_gradient(
                        workspace.build_context(scaled, batch_dirs[static_cast<std::size_t>(b)]),
                        params, cfg.lasso);
                } catch (const degenerate_projection_error&) {
                    if (++redraws > 8)
                        throw degenerate_projection_error(
                            "direction redraw limit hit at iteration " + std::to_string(t) +
                            "; the data scale defeats the damping, rescale the data");
                    // Redraw from a stream derived from (iteration, batch
                    // slot, attempt) so the main stream and the other
                    // batch members are unaffected and the trajectory
                    // stays reproducible across thread counts.
                    Rng redraw_rng(derive_seed(
                        cfg.seed, (static_cast<std::uint64_t>(t) << 16) ^
                                      (static_cast<std::uint64_t>(b) << 8) ^
                                      static_cast<std::uint64_t>(redraws)));
                    Eigen::VectorXd c(d);
                    for (int j = 0; j < d; ++j) c[j] = redraw_rng.uniform01();
                    batch_dirs[static_cast<std::size_t>(b)] = std::move(c);
                }
            }
        };
        try {
            if (cfg.threads > 1 && cfg.batch_size > 1) {
                std::vector<std::future<LossGradient>> futures;
                futures.reserve(static_cast<std::size_t>(cfg.batch_size));
                for (int b = 0; b < cfg.batch_size; ++b)
                    futures.push_back(std::async(std::launch::async, evaluate, b));
                for (int b = 0; b < cfg.batch_size; ++b)
                    batch_grads[static_cast<std::size_t>(b)] = futures[static_cast<std::size_t>(b)].get();
            } else {
                for (int b = 0; b < cfg.batch_size; ++b)
                    batch_grads[static_cast<std::size_t>(b)] = evaluate(b);
            }
        } catch (const numeric_error& e) {
            throw numeric_error("iteration " + std::to_string(t) + ": " + e.what());
        }

        double value = 0.0;
        Eigen::VectorXd g_p = Eigen::VectorXd::Zero(n);
        Eigen::MatrixXd g_q = Eigen::MatrixXd::Zero(n, d);
        for (int b = 0; b < cfg.batch_size; ++b) {
            value += batch_grads[static_cast<std::size_t>(b)].value;
            g_p += batch_grads[static_cast<std::size_t>(b)].grad_p;
            g_q += batch_grads[static_cast<std::size_t>(b)].grad_q;
        }
        const double inv_batch = 1.0 / cfg.batch_size;
        value *= inv_batch;
        g_p *= inv_batch;
        g_q *= inv_batch;

        const double step = lr * (cfg.decay_learning_rate ? 1.0 / std::sqrt(static_cast<double>(t)) : 1.0);
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        m_p_next = cfg.beta1 * m_p + (1.0 - cfg.beta1) * g_p;
        v_p_next = cfg.beta2 * v_p + (1.0 - cfg.beta2) * g_p.array().square().matrix();
        m_q_next = cfg.beta1 * m_q + (1.0 - cfg.beta1) * g_q;
        v_q_next = cfg.beta2 * v_q + (1.0 - cfg.beta2) * g_q.array().square().matrix();
        p_next = (params.p.array() -
                  step * (m_p_next.array() / bc1) /
                      ((v_p_next.array() / bc2).sqrt() + cfg.adam_epsilon))
                     .matrix();
        q_next = (params.q.array() -
                  step * (m_q_next.array() / bc1) /
                      ((v_q_next.array() / bc2).sqrt() + cfg.adam_epsilon))
                     .matrix();

        if (!p_next.allFinite() || !q_next.allFinite()) {
            // Keep the pre-update state, halve the rate, try again.
            lr *= 0.5;
            if (++report.rollbacks > 5)
                throw numeric_error("parameters repeatedly non-finite; aborted after 5 rollbacks");
        } else {
            params.p.swap(p_next);
            params.q.swap(q_next);
            m_p.swap(m_p_next);
            v_p.swap(v_p_next);
            m_q.swap(m_q_next);
            v_q.swap(v_q_next);
        }

        const double grad_norm = std::sqrt(g_p.squaredNorm() + g_q.squaredNorm());
        smoothed_grad = smoothed_grad < 0.0 ? grad_norm : 0.99 * smoothed_grad + 0.01 * grad_norm;
        if (cfg.trace_stride > 0 && t % cfg.trace_stride == 0) report.loss_trace.push_back(value);
        report.iterations = t;
        if (smoothed_grad < cfg.gradient_tolerance) {
            report.termination = "gradient_tolerance";
            break;
        }
    }

    ThorinMeasure raw = conic_to_measure(params);
    raw.scales = (raw.scales.array().rowwise() * sigma.transpose().array()).matrix();
    report.measure = threshold(raw, cfg.weight_threshold, cfg.scale_threshold);
    report.column_scale = std::move(sigma);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

} // namespace thorinfit
