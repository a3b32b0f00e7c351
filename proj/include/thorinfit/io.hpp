#pragma once

#include <algorithm>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "thorinfit/errors.hpp"
#include "thorinfit/sgd.hpp"
#include "thorinfit/thorin.hpp"

namespace thorinfit {

/// Measure file schema: {"d", "n", "alpha", "scales", "meta"} with
/// atoms sorted by descending weight (stable on ties).  Doubles are
/// emitted shortest-round-trip, so parsing restores them exactly.
[[nodiscard]] inline nlohmann::ordered_json measure_to_json(
    const ThorinMeasure& nu, nlohmann::ordered_json meta = nlohmann::ordered_json::object()) {
    validate(nu);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(nu.atom_count()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return nu.alpha[a] > nu.alpha[b]; });
    nlohmann::ordered_json j;
    j["d"] = nu.dim();
    j["n"] = nu.atom_count();
    auto alpha = nlohmann::ordered_json::array();
    auto scales = nlohmann::ordered_json::array();
    for (Eigen::Index i : order) {
        alpha.push_back(nu.alpha[i]);
        auto row = nlohmann::ordered_json::array();
        for (Eigen::Index k = 0; k < nu.scales.cols(); ++k) row.push_back(nu.scales(i, k));
        scales.push_back(std::move(row));
    }
    j["alpha"] = std::move(alpha);
    j["scales"] = std::move(scales);
    j["meta"] = std::move(meta);
    return j;
}

[[nodiscard]] inline ThorinMeasure measure_from_json(const nlohmann::json& j) {
    try {
        const int d = j.at("d").get<int>();
        const Eigen::Index n = j.at("n").get<Eigen::Index>();
        const auto& alpha = j.at("alpha");
        const auto& scales = j.at("scales");
        if (d < 1) throw data_error("measure file: dimension must be positive");
        if (n < 0 || static_cast<Eigen::Index>(alpha.size()) != n ||
            static_cast<Eigen::Index>(scales.size()) != n)
            throw data_error("measure file: atom count mismatch");
        ThorinMeasure nu;
        nu.alpha.resize(n);
        nu.scales.resize(n, d);
        for (Eigen::Index i = 0; i < n; ++i) {
            nu.alpha[i] = alpha.at(static_cast<std::size_t>(i)).get<double>();
            const auto& row = scales.at(static_cast<std::size_t>(i));
            if (static_cast<int>(row.size()) != d)
                throw data_error("measure file: scale row length mismatch");
            for (int k = 0; k < d; ++k) nu.scales(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
        }
        validate(nu);
        return nu;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("measure file: ") + e.what());
    }
}

inline void save_measure(const std::string& path, const ThorinMeasure& nu,
                         nlohmann::ordered_json meta = nlohmann::ordered_json::object()) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << measure_to_json(nu, std::move(meta)).dump(2) << '\n';
    if (!out) throw data_error("write failed for " + path);
}

[[nodiscard]] inline ThorinMeasure load_measure(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw data_error(path + ": " + e.what());
    }
    return measure_from_json(j);
}

[[nodiscard]] inline nlohmann::ordered_json config_to_json(const FitConfig& cfg) {
    nlohmann::ordered_json j;
    j["atom_count"] = cfg.atom_count;
    j["degree"] = cfg.degree;
    j["max_iterations"] = cfg.max_iterations;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["adam_epsilon"] = cfg.adam_epsilon;
    j["gradient_tolerance"] = cfg.gradient_tolerance;
    j["lasso"] = cfg.lasso;
    j["weight_threshold"] = cfg.weight_threshold;
    j["scale_threshold"] = cfg.scale_threshold;
    j["decay_learning_rate"] = cfg.decay_learning_rate;
    j["seed"] = cfg.seed;
    j["trace_stride"] = cfg.trace_stride;
    j["threads"] = cfg.threads;
    return j;
}

/// Fit report as JSON.  Wall time is the only field that differs
/// between reruns with the same seed; leave it out to get byte-stable
/// artifacts.
[[nodiscard]] inline nlohmann::ordered_json report_to_json(const FitReport& report,
                                                           bool include_wall_time = true) {
    nlohmann::ordered_json j;
    j["measure"] = measure_to_json(report.measure);
    j["config"] = config_to_json(report.config);
    auto sigma = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < report.column_scale.size(); ++i)
        sigma.push_back(report.column_scale[i]);
    j["column_scale"] = std::move(sigma);
    j["loss_trace"] = report.loss_trace;
    j["iterations"] = report.iterations;
    j["termination"] = report.termination;
    j["rollbacks"] = report.rollbacks;
    if (include_wall_time) j["wall_seconds"] = report.wall_seconds;
    return j;
}

inline void save_report(const std::string& path, const FitReport& report,
                        bool include_wall_time = true) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << report_to_json(report, include_wall_time).dump(2) << '\n';
    if (!out) throw data_error("write failed for " + path);
}

} // namespace thorinfit
