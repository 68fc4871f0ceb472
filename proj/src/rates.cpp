#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>

#include "sap/errors.hpp"
#include "sap/hamiltonian.hpp"
#include "sap/hubbard.hpp"

namespace sap::hubbard {

namespace {

// Two 1D wells at x = 0 and x = d; piecewise-harmonic double-well potential.
double v_two_well(double x, double d) {
    const double a = x, b = x - d;
    return 0.5 * std::min(a * a, b * b);
}

struct Orbital {
    // value and H-applied value of a harmonic eigenstate of the well at c,
    // under the two-well potential
    std::function<double(double)> phi, h_phi;
};

Orbital ground_orbital(double c, double d) {
    const double norm = std::pow(std::numbers::pi, -0.25);
    auto phi = [c, norm](double x) { return norm * std::exp(-0.5 * (x - c) * (x - c)); };
    auto h_phi = [c, d, phi](double x) {
        return (0.5 + v_two_well(x, d) - 0.5 * (x - c) * (x - c)) * phi(x);
    };
    return {phi, h_phi};
}

Orbital excited_orbital(double c, double d) {
    const double norm = std::pow(std::numbers::pi, -0.25) * std::sqrt(2.0);
    auto phi = [c, norm](double x) { return norm * (x - c) * std::exp(-0.5 * (x - c) * (x - c)); };
    auto h_phi = [c, d, phi](double x) {
        return (1.5 + v_two_well(x, d) - 0.5 * (x - c) * (x - c)) * phi(x);
    };
    return {phi, h_phi};
}

double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
    if (intervals % 2) ++intervals;
    const double h = (b - a) / intervals;
    double acc = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

// signed off-diagonal element after ordered Gram-Schmidt (left first)
double orbital_rate(const Orbital& left, const Orbital& right, double d) {
    const double a = -8.0, b = d + 8.0;
    const int n = static_cast<int>((b - a) / 0.005);
    const double s = simpson([&](double x) { return left.phi(x) * right.phi(x); }, a, b, n);
    if (std::abs(s) > 0.999) {
        std::ostringstream os;
        os << "well states are not independent at separation " << d << " (overlap " << s << ")";
        throw config_error(os.str());
    }
    const double h_lr = simpson([&](double x) { return left.phi(x) * right.h_phi(x); }, a, b, n);
    const double h_ll = simpson([&](double x) { return left.phi(x) * left.h_phi(x); }, a, b, n);
    return (h_lr - s * h_ll) / std::sqrt(1.0 - s * s);
}

}  // namespace

double single_particle_rate(double d) {
    if (!(d > 0.0)) throw config_error("separation must be positive");
    return orbital_rate(ground_orbital(0.0, d), ground_orbital(d, d), d);
}

double excited_band_rate(double d) {
    if (!(d > 0.0)) throw config_error("separation must be positive");
    return orbital_rate(excited_orbital(0.0, d), excited_orbital(d, d), d);
}

namespace {

// shared fine grid for pair-state elements; wells at 0 and d stay index-aligned
// for d on multiples of 0.05
const Grid2D& rates_grid() {
    static const Grid2D g{-7.5, 16.5, 481};
    return g;
}

double pair_element(const busch::PairState& left, const busch::PairState& right, double d,
                    double g) {
    const Grid2D& grid = rates_grid();
    std::vector<double> v(static_cast<std::size_t>(grid.n));
    for (int i = 0; i < grid.n; ++i) v[static_cast<std::size_t>(i)] = v_two_well(grid.x(i), d);
    exact::TriHamiltonian H(grid, v, g);

    const auto tl = busch::embed(left, grid);
    const auto tr = busch::embed(right, grid);
    double s = 0.0;
    for (std::size_t r = 0; r < tl.size(); ++r) s += tl[r] * tr[r];
    if (std::abs(s) > 0.999) {
        std::ostringstream os;
        os << "pair states are not independent at separation " << d << " (overlap " << s << ")";
        throw config_error(os.str());
    }
    std::vector<double> hr(tl.size()), hl(tl.size());
    H.apply(tr.data(), hr.data());
    H.apply(tl.data(), hl.data());
    double h_lr = 0.0, h_ll = 0.0;
    for (std::size_t r = 0; r < tl.size(); ++r) {
        h_lr += tl[r] * hr[r];
        h_ll += tl[r] * hl[r];
    }
    return (h_lr - s * h_ll) / std::sqrt(1.0 - s * s);
}

}  // namespace

double cotunneling_rate(double d, double g) {
    if (!(d > 0.0)) throw config_error("separation must be positive");
    if (!(g >= 0.0)) throw config_error("interaction strength must be non-negative");
    const Grid2D& grid = rates_grid();
    const double h = grid.h();
    const auto left = busch::pair_ground_state(g, 0.0, grid);
    const long shift = std::lround(d / h);
    busch::PairState right;
    if (std::abs(shift * h - d) < 1e-9) {
        right = left.shifted(static_cast<int>(shift));
    } else {
        right = busch::pair_ground_state(g, d, grid);
    }
    return pair_element(left, right, d, g);
}

double RateTable::clamp(double d) {
    if (d < d_lo - 1e-9 || d > d_hi + 1e-9) {
        std::ostringstream os;
        os << "separation " << d << " outside the tabulated range [" << d_lo << ", " << d_hi << "]";
        throw config_error(os.str());
    }
    return std::min(std::max(d, d_lo), d_hi);
}

RateTable::RateTable(double g) : g_(g) {
    const int count = static_cast<int>(std::lround((d_hi - d_lo) / d_step)) + 1;
    ds_.reserve(count);
    w0_.reserve(count);
    w1_.reserve(count);
    wco_.reserve(count);

    const Grid2D& grid = rates_grid();
    const auto left = busch::pair_ground_state(g, 0.0, grid);
    for (int i = 0; i < count; ++i) {
        const double d = d_lo + i * d_step;
        ds_.push_back(d);
        w0_.push_back(single_particle_rate(d));
        w1_.push_back(excited_band_rate(d));
        const auto right = left.shifted(static_cast<int>(std::lround(d / grid.h())));
        wco_.push_back(pair_element(left, right, d, g));
    }
    s0_ = CubicSpline(ds_, w0_);
    s1_ = CubicSpline(ds_, w1_);
    sco_ = CubicSpline(ds_, wco_);
}

void RateTable::write_csv(std::ostream& os) const {
    os << "d,omega0,omega1,omega_co\n";
    os.precision(17);
    for (std::size_t i = 0; i < ds_.size(); ++i)
        os << ds_[i] << ',' << w0_[i] << ',' << w1_[i] << ',' << wco_[i] << '\n';
}

}  // namespace sap::hubbard
