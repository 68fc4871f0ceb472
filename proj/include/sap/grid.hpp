#pragma once

#include <cstddef>

#include "sap/errors.hpp"

namespace sap {

// Uniform 1D grid including both endpoints: x_i = x_min + i*h, h = (x_max - x_min)/(n - 1).
struct Grid1D {
    double x_min = -14.5;
    double x_max = 14.5;
    int n = 291;

    double h() const { return (x_max - x_min) / (n - 1); }
    double x(int i) const { return x_min + i * h(); }

    bool operator==(const Grid1D&) const = default;

    void validate() const {
        if (n < 8) throw config_error("grid needs at least 8 points");
        if (!(x_max > x_min)) throw config_error("grid domain is empty");
        if (h() > 0.5) throw config_error("grid spacing above 0.5 oscillator lengths");
    }
};

// Square 2D product grid; both particles share the axis.
struct Grid2D {
    double x_min = -14.5;
    double x_max = 14.5;
    int n = 291;

    double h() const { return (x_max - x_min) / (n - 1); }
    double x(int i) const { return x_min + i * h(); }
    Grid1D axis() const { return {x_min, x_max, n}; }

    std::size_t full_size() const { return static_cast<std::size_t>(n) * static_cast<std::size_t>(n); }
    std::size_t tri_size() const {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(n + 1) / 2;
    }

    std::size_t full_index(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j);
    }
    // packed upper triangle, i <= j, row-major: row i starts at i*n - i(i-1)/2
    std::size_t tri_index(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(n) -
               static_cast<std::size_t>(i) * static_cast<std::size_t>(i - 1) / 2 +
               static_cast<std::size_t>(j - i);
    }

    bool operator==(const Grid2D&) const = default;

    void validate() const { axis().validate(); }

    // trap minima must sit well inside the box
    void validate_covers(double d_left, double d_right, double margin = 4.0) const {
        if (d_left - x_min < margin || x_max - d_right < margin)
            throw config_error("grid domain leaves less than the required margin around the traps");
    }
};

}  // namespace sap
