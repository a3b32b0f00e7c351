#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "thorinfit/errors.hpp"
#include "thorinfit/rng.hpp"

namespace thorinfit {

/// Four-dimensional positive test law with polynomial and power
/// couplings on a shared log-normal factor.  Per row the draw order is
/// Y1..Y4 then U1..U3; it is pinned because it defines the seed
/// contract.  One uniform is drawn and discarded to keep the published
/// stream layout.
[[nodiscard]] inline Eigen::MatrixXd simulate_functional(std::int64_t n_obs, std::uint64_t seed) {
    if (n_obs < 0) throw data_error("sample count must be nonnegative");
    Rng rng(seed);
    Eigen::MatrixXd x(n_obs, 4);
    for (Eigen::Index i = 0; i < n_obs; ++i) {
        double y[4];
        for (double& v : y) v = std::exp(rng.normal());
        const double u1 = rng.uniform01();
        [[maybe_unused]] const double u2 = rng.uniform01();
        const double u3 = rng.uniform01();
        x(i, 0) = y[0];
        x(i, 1) = y[1] + u1 * y[0] * y[0];
        x(i, 2) = y[2] + u3 * y[0];
        x(i, 3) = y[3] + std::pow(y[0], 1.0 + u3 / 3.0);
    }
    return x;
}

struct MultiplicativeSample {
    Eigen::MatrixXd data;      // n_obs x d
    Eigen::VectorXd exponents; // d entries in (0,1), fixed per dataset
};

/// Rows of the multiplicative law for a fixed exponent vector: each
/// observation is X_j = G exp(Z_j) H^(1 + 2 a_j) with shared G ~ Exp(1)
/// and H ~ Gamma(2, 1/2) per row.
[[nodiscard]] inline Eigen::MatrixXd simulate_multiplicative_rows(const Eigen::VectorXd& exponents,
                                                                  std::int64_t n_obs, Rng& rng) {
    if (n_obs < 0) throw data_error("sample count must be nonnegative");
    const auto d = exponents.size();
    if (d < 1) throw data_error("dimension must be positive");
    Eigen::MatrixXd data(n_obs, d);
    for (Eigen::Index i = 0; i < n_obs; ++i) {
        const double g = rng.gamma(1.0);
        const double h = 0.5 * rng.gamma(2.0);
        for (Eigen::Index j = 0; j < d; ++j)
            data(i, j) = g * std::exp(rng.normal()) * std::pow(h, 1.0 + 2.0 * exponents[j]);
    }
    return data;
}

[[nodiscard]] inline Eigen::MatrixXd simulate_multiplicative_rows(const Eigen::VectorXd& exponents,
                                                                  std::int64_t n_obs,
                                                                  std::uint64_t seed) {
    Rng rng(seed);
    return simulate_multiplicative_rows(exponents, n_obs, rng);
}

/// Positive d-dimensional law with per-coordinate exponents a_j ~ U(0,1)
/// drawn once up front, then rows as in simulate_multiplicative_rows on
/// the same stream.
[[nodiscard]] inline MultiplicativeSample simulate_multiplicative(std::int64_t n_obs, int d,
                                                                  std::uint64_t seed) {
    if (n_obs < 0) throw data_error("sample count must be nonnegative");
    if (d < 1) throw data_error("dimension must be positive");
    Rng rng(seed);
    MultiplicativeSample out;
    out.exponents.resize(d);
    for (int j = 0; j < d; ++j) out.exponents[j] = rng.uniform01();
    out.data = simulate_multiplicative_rows(out.exponents, n_obs, rng);
    return out;
}

/// Reads a rectangular CSV of nonnegative finite numbers.  Cells are
/// parsed with from_chars; any failure names the offending row and
/// column (1-based, header excluded from the count).
[[nodiscard]] inline Eigen::MatrixXd load_csv(const std::string& path, bool header) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (header && lineno == 1) continue;
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        for (std::size_t col = 1;; ++col) {
            const std::size_t end = line.find(',', start);
            std::size_t a = start, b = end == std::string::npos ? line.size() : end;
            while (a < b && (line[a] == ' ' || line[a] == '\t')) ++a;
            while (b > a && (line[b - 1] == ' ' || line[b - 1] == '\t')) --b;
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(line.data() + a, line.data() + b, value);
            if (ec != std::errc() || ptr != line.data() + b)
                throw data_error(path + ": cannot parse cell at row " +
                                 std::to_string(rows.size() + 1) + " column " + std::to_string(col));
            if (!std::isfinite(value) || value < 0.0)
                throw data_error(path + ": negative or non-finite value at row " +
                                 std::to_string(rows.size() + 1) + " column " + std::to_string(col));
            row.push_back(value);
            if (end == std::string::npos) break;
            start = end + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw data_error(path + ": row " + std::to_string(rows.size() + 1) + " has " +
                             std::to_string(row.size()) + " cells, expected " +
                             std::to_string(rows.front().size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw data_error(path + ": no data rows");
    Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.front().size(); ++j)
            data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return data;
}

/// Writes a matrix as CSV with round-trippable doubles.  Column names
/// are optional; when given their count must match.
inline void write_csv(const std::string& path, const Eigen::MatrixXd& data,
                      const std::vector<std::string>& columns = {}) {
    if (!columns.empty() && static_cast<Eigen::Index>(columns.size()) != data.cols())
        throw data_error("column name count mismatch");
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    if (!columns.empty()) {
        for (std::size_t j = 0; j < columns.size(); ++j)
            out << (j ? "," : "") << columns[j];
        out << '\n';
    }
    char buf[64];
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            const int len = std::snprintf(buf, sizeof buf, "%.17g", data(i, j));
            if (j) out << ',';
            out.write(buf, len);
        }
        out << '\n';
    }
    if (!out) throw data_error("write failed for " + path);
}

} // namespace thorinfit
