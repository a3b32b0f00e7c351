#pragma once

#include <stdexcept>
#include <string>

namespace thorinfit {

/// Invalid or malformed input data: negative observations, shape
/// mismatches, unparseable files, constant columns.
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

/// Numeric breakdown: integer overflow, ill-conditioned systems,
/// non-finite intermediate values.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/// A projection direction under which every observation damps to zero,
/// so the projected moment estimates carry no information.  Recoverable
/// by redrawing the direction.
class degenerate_projection_error : public numeric_error {
public:
    explicit degenerate_projection_error(const std::string& what) : numeric_error(what) {}
};

/// A requested computation whose cost guard tripped (quadratic sample
/// scans, high-dimensional CDF grids).  Callers may override explicitly.
class cost_guard_error : public data_error {
public:
    explicit cost_guard_error(const std::string& what) : data_error(what) {}
};

} // namespace thorinfit
