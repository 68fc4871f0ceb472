#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sap {

// Natural cubic spline through strictly increasing knots.
class CubicSpline {
  public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
        const std::size_t n = x_.size();
        if (n < 2 || y_.size() != n) throw std::invalid_argument("spline needs >= 2 matching knots");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1])) throw std::invalid_argument("spline knots must increase");
        // solve the tridiagonal system for second derivatives, natural ends
        m_.assign(n, 0.0);
        if (n == 2) return;
        std::vector<double> diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
        diag[0] = 1.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double hl = x_[i] - x_[i - 1], hr = x_[i + 1] - x_[i];
            diag[i] = 2.0 * (hl + hr);
            upper[i] = hr;
            rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl);
        }
        diag[n - 1] = 1.0;
        // Thomas sweep (lower coefficient of row i is hl, zero on end rows)
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double hl = x_[i] - x_[i - 1];
            const double w = (i == 1) ? 0.0 : hl / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for (std::size_t i = n - 2; i >= 1; --i) m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
    }

    double operator()(double x) const {
        const std::size_t i = segment(x);
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
        return a * y_[i] + b * y_[i + 1] +
               ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
    }

    double derivative(double x) const {
        const std::size_t i = segment(x);
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
        return (y_[i + 1] - y_[i]) / h +
               ((3.0 * b * b - 1.0) * m_[i + 1] - (3.0 * a * a - 1.0) * m_[i]) * h / 6.0;
    }

    double x_front() const { return x_.front(); }
    double x_back() const { return x_.back(); }

  private:
    std::size_t segment(double x) const {
        if (!(x >= x_.front() && x <= x_.back())) throw std::out_of_range("spline evaluated outside knots");
        std::size_t lo = 0, hi = x_.size() - 1;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            (x_[mid] <= x ? lo : hi) = mid;
        }
        return lo;
    }

    std::vector<double> x_, y_, m_;
};

}  // namespace sap
