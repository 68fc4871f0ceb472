#include "sap/busch.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "sap/errors.hpp"
#include "sap/hamiltonian.hpp"

namespace sap::busch {

double g_from_energy(double E_g) {
    if (!(E_g >= 1.0 && E_g < 2.0)) {
        std::ostringstream os;
        os << "pair energy " << E_g << " outside [1, 2)";
        throw config_error(os.str());
    }
    if (E_g == 1.0) return 0.0;
    return -2.0 * std::sqrt(2.0) * std::tgamma(1.0 - E_g / 2.0) / std::tgamma((1.0 - E_g) / 2.0);
}

double energy_from_g(double g) {
    if (!(g >= 0.0)) throw config_error("interaction strength must be non-negative");
    if (g == 0.0) return 1.0;
    double lo = 1.0, hi = 2.0 - 1e-14;
    if (g_from_energy(hi) < g) {
        std::ostringstream os;
        os << "no bracket for g=" << g << " on [" << lo << ", " << hi << "]";
        throw numerical_error(os.str());
    }
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g_from_energy(mid) < g ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

InteractionPoint point_from_energy(double E_g) { return {g_from_energy(E_g), E_g}; }
InteractionPoint point_from_g(double g) { return {g, energy_from_g(g)}; }

PairState PairState::shifted(int di) const {
    PairState out = *this;
    out.i0 += di;
    out.center += di * parent.h();
    if (out.i0 < 0 || out.i0 + out.np > parent.n)
        throw config_error("shifted pair state leaves the grid");
    return out;
}

PairState pair_ground_state(double g, double center, const Grid2D& grid,
                            double margin, double min_margin) {
    const double h = grid.h();
    const double E_target = energy_from_g(g);

    // index-aligned patch around the well, clipped at the walls
    int ic = static_cast<int>(std::lround((center - grid.x_min) / h));
    int half = static_cast<int>(std::ceil(margin / h));
    int lo = std::max(0, ic - half);
    int hi = std::min(grid.n - 1, ic + half);
    const double got_lo = center - grid.x(lo), got_hi = grid.x(hi) - center;
    if (got_lo < min_margin || got_hi < min_margin) {
        std::ostringstream os;
        os << "pair-state patch margin too small at center " << center
           << " (left " << got_lo << ", right " << got_hi << ", need " << min_margin << ")";
        throw config_error(os.str());
    }

    PairState st;
    st.center = center;
    st.g = g;
    st.i0 = lo;
    st.np = hi - lo + 1;
    st.parent = grid;

    Grid2D patch{grid.x(lo), grid.x(hi), st.np};
    std::vector<double> v(static_cast<std::size_t>(st.np));
    for (int i = 0; i < st.np; ++i) {
        const double dx = patch.x(i) - center;
        v[static_cast<std::size_t>(i)] = 0.5 * dx * dx;
    }
    exact::TriHamiltonian H(patch, v, g);
    const auto m = static_cast<Eigen::Index>(H.size());

    // assemble H - mu on the packed triangle for the shifted solves
    const double mu = E_target - 0.3;
    const double k = 1.0 / (2.0 * h * h);
    const double ks = k * std::sqrt(2.0);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(m) * 5);
    const int n = st.np;
    const auto at = [&patch](int i, int j) { return static_cast<Eigen::Index>(patch.tri_index(i, j)); };
    for (int i = 0; i < n; ++i) {
        trip.emplace_back(at(i, i), at(i, i), H.diag(i, i) - mu);
        if (i > 0) trip.emplace_back(at(i, i), at(i - 1, i), -ks);
        if (i < n - 1) trip.emplace_back(at(i, i), at(i, i + 1), -ks);
        for (int j = i + 1; j < n; ++j) {
            const auto r = at(i, j);
            trip.emplace_back(r, r, H.diag(i, j) - mu);
            trip.emplace_back(r, at(i, j - 1), j - 1 == i ? -ks : -k);
            if (j < n - 1) trip.emplace_back(r, at(i, j + 1), -k);
            if (i > 0) trip.emplace_back(r, at(i - 1, j), -k);
            trip.emplace_back(r, at(i + 1, j), j == i + 1 ? -ks : -k);
        }
    }
    Eigen::SparseMatrix<double> A(m, m);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
        throw numerical_error("pair-state factorization failed");

    // Gaussian product seed, then inverse iteration
    Eigen::VectorXd x(m);
    for (int i = 0; i < n; ++i) {
        const double a = patch.x(i) - center;
        for (int j = i; j < n; ++j) {
            const double b = patch.x(j) - center;
            const double w = i == j ? 1.0 : std::sqrt(2.0);
            x[static_cast<Eigen::Index>(patch.tri_index(i, j))] =
                h * w * std::exp(-0.5 * (a * a + b * b));
        }
    }
    x.normalize();
    double e_prev = 0.0;
    for (int it = 0; it < 60; ++it) {
        Eigen::VectorXd y = lu.solve(x);
        y.normalize();
        x = y;
        std::vector<double> cx(x.data(), x.data() + m);
        const double e = H.expectation(cx);
        if (it > 2 && std::abs(e - e_prev) < 1e-13) break;
        e_prev = e;
    }

    st.tri.assign(x.data(), x.data() + m);
    std::vector<double> cx = st.tri;
    st.energy = H.expectation(cx);

    const double tol = std::max(1e-4, h * h);
    if (std::abs(st.energy - E_target) > tol) {
        std::ostringstream os;
        os << "pair-state energy " << st.energy << " misses " << E_target
           << " by " << std::abs(st.energy - E_target) << " (h=" << h << ")";
        throw numerical_error(os.str());
    }
    return st;
}

std::vector<double> embed(const PairState& s, const Grid2D& grid) {
    if (!(grid == s.parent)) throw config_error("pair state belongs to a different grid");
    std::vector<double> out(grid.tri_size(), 0.0);
    Grid2D patch{grid.x(s.i0), grid.x(s.i0 + s.np - 1), s.np};
    for (int i = 0; i < s.np; ++i)
        for (int j = i; j < s.np; ++j)
            out[grid.tri_index(s.i0 + i, s.i0 + j)] = s.tri[patch.tri_index(i, j)];
    return out;
}

template <typename T>
static T overlap_impl(const PairState& s, const std::vector<T>& tri_full) {
    Grid2D patch{s.parent.x(s.i0), s.parent.x(s.i0 + s.np - 1), s.np};
    T acc{};
    for (int i = 0; i < s.np; ++i)
        for (int j = i; j < s.np; ++j)
            acc += s.tri[patch.tri_index(i, j)] * tri_full[s.parent.tri_index(s.i0 + i, s.i0 + j)];
    return acc;
}

double overlap(const PairState& s, const std::vector<double>& tri_full) {
    return overlap_impl(s, tri_full);
}
std::complex<double> overlap(const PairState& s, const std::vector<std::complex<double>>& tri_full) {
    return overlap_impl(s, tri_full);
}

}  // namespace sap::busch
