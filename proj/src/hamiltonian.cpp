#include "sap/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sap/errors.hpp"

namespace sap::exact {

std::vector<double> potential_on_axis(const Grid1D& axis, const traj::TrapLayout& layout) {
    std::vector<double> v(static_cast<std::size_t>(axis.n));
    for (int i = 0; i < axis.n; ++i) v[static_cast<std::size_t>(i)] = traj::potential(axis.x(i), layout);
    return v;
}

TriHamiltonian::TriHamiltonian(const Grid2D& grid, std::vector<double> v_axis, double g)
    : grid_(grid), v_(std::move(v_axis)), g_(g), m_(grid.tri_size()) {
    if (v_.size() != static_cast<std::size_t>(grid_.n))
        throw config_error("potential sample count does not match grid");
    inv2h2_ = 1.0 / (2.0 * grid_.h() * grid_.h());
}

double TriHamiltonian::diag(int i, int j) const {
    double d = 4.0 * inv2h2_ + v_[static_cast<std::size_t>(i)] + v_[static_cast<std::size_t>(j)];
    if (i == j) d += g_ / grid_.h();
    return d;
}

template <typename T>
void TriHamiltonian::apply_impl(const T* in, T* out) const {
    const int n = grid_.n;
    const double k = inv2h2_;
    const double ks = k * std::sqrt(2.0);
    const double kin0 = 4.0 * k;
    const double gh = g_ / grid_.h();
    std::size_t r0 = 0;  // packed index of (i, i)
    for (int i = 0; i < n; ++i) {
        const double vi = v_[static_cast<std::size_t>(i)];
        const std::size_t up0 = r0 - static_cast<std::size_t>(n - i + 1);  // (i-1, i-1), valid for i>0
        {
            T acc = (kin0 + 2.0 * vi + gh) * in[r0];
            if (i > 0) acc -= ks * in[up0 + 1];
            if (i < n - 1) acc -= ks * in[r0 + 1];
            out[r0] = acc;
        }
        for (int j = i + 1; j < n; ++j) {
            const std::size_t r = r0 + static_cast<std::size_t>(j - i);
            T acc = (kin0 + vi + v_[static_cast<std::size_t>(j)]) * in[r];
            acc -= (j == i + 1 ? ks : k) * in[r - 1];
            if (j < n - 1) acc -= k * in[r + 1];
            if (i > 0) acc -= k * in[up0 + static_cast<std::size_t>(j - i + 1)];
            const std::size_t dn = r0 + static_cast<std::size_t>(n - i) + static_cast<std::size_t>(j - i - 1);
            acc -= (j == i + 1 ? ks : k) * in[dn];
            out[r] = acc;
        }
        r0 += static_cast<std::size_t>(n - i);
    }
}

void TriHamiltonian::apply(const double* in, double* out) const { apply_impl(in, out); }
void TriHamiltonian::apply(const cplx* in, cplx* out) const { apply_impl(in, out); }

double TriHamiltonian::upper_bound() const {
    const int n = grid_.n;
    const double k = inv2h2_;
    const double ks = k * std::sqrt(2.0);
    double best = -1e300;
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            double row = diag(i, j);
            if (i == j) {
                if (i > 0) row += ks;
                if (i < n - 1) row += ks;
            } else {
                row += (j == i + 1 ? ks : k);               // (i, j-1)
                if (j < n - 1) row += k;                    // (i, j+1)
                if (i > 0) row += k;                        // (i-1, j)
                row += (j == i + 1 ? ks : k);               // (i+1, j)
            }
            best = std::max(best, row);
        }
    }
    return best;
}

double TriHamiltonian::lower_bound() const {
    const double k = inv2h2_;
    double vmin = *std::min_element(v_.begin(), v_.end());
    double d = 4.0 * k + 2.0 * vmin + std::min(0.0, g_ / grid_.h());
    return d - 4.0 * k * std::sqrt(2.0);
}

template <typename T>
static double expectation_of(const TriHamiltonian& H, const std::vector<T>& c) {
    std::vector<T> hc(c.size());
    H.apply(c.data(), hc.data());
    double num = 0.0, den = 0.0;
    for (std::size_t r = 0; r < c.size(); ++r) {
        if constexpr (std::is_same_v<T, cplx>) {
            num += std::real(std::conj(c[r]) * hc[r]);
            den += std::norm(c[r]);
        } else {
            num += c[r] * hc[r];
            den += c[r] * c[r];
        }
    }
    return num / den;
}

double TriHamiltonian::expectation(const std::vector<cplx>& c) const { return expectation_of(*this, c); }
double TriHamiltonian::expectation(const std::vector<double>& c) const { return expectation_of(*this, c); }

FullHamiltonian::FullHamiltonian(const Grid2D& grid, std::vector<double> v_axis, double g)
    : grid_(grid), v_(std::move(v_axis)), g_(g) {
    if (v_.size() != static_cast<std::size_t>(grid_.n))
        throw config_error("potential sample count does not match grid");
    inv2h2_ = 1.0 / (2.0 * grid_.h() * grid_.h());
}

void FullHamiltonian::apply(const cplx* in, cplx* out) const {
    const int n = grid_.n;
    const double k = inv2h2_;
    const double kin0 = 4.0 * k;
    const double gh = g_ / grid_.h();
    for (int a = 0; a < n; ++a) {
        const double va = v_[static_cast<std::size_t>(a)];
        const std::size_t row = static_cast<std::size_t>(a) * static_cast<std::size_t>(n);
        for (int b = 0; b < n; ++b) {
            const std::size_t r = row + static_cast<std::size_t>(b);
            cplx acc = (kin0 + va + v_[static_cast<std::size_t>(b)] + (a == b ? gh : 0.0)) * in[r];
            if (b > 0) acc -= k * in[r - 1];
            if (b < n - 1) acc -= k * in[r + 1];
            if (a > 0) acc -= k * in[r - static_cast<std::size_t>(n)];
            if (a < n - 1) acc -= k * in[r + static_cast<std::size_t>(n)];
            out[r] = acc;
        }
    }
}

double FullHamiltonian::expectation(const std::vector<cplx>& psi) const {
    std::vector<cplx> hp(psi.size());
    apply(psi.data(), hp.data());
    double num = 0.0, den = 0.0;
    for (std::size_t r = 0; r < psi.size(); ++r) {
        num += std::real(std::conj(psi[r]) * hp[r]);
        den += std::norm(psi[r]);
    }
    return num / den;
}

template <typename T>
static void tri_to_full_impl(const Grid2D& g, const std::vector<T>& tri, std::vector<cplx>& full) {
    const int n = g.n;
    const double s = 1.0 / std::sqrt(2.0);
    full.assign(g.full_size(), cplx(0.0));
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            const T c = tri[g.tri_index(i, j)];
            if (i == j) {
                full[g.full_index(i, i)] = c;
            } else {
                full[g.full_index(i, j)] = s * c;
                full[g.full_index(j, i)] = s * c;
            }
        }
    }
}

void tri_to_full(const Grid2D& g, const std::vector<double>& tri, std::vector<cplx>& full) {
    tri_to_full_impl(g, tri, full);
}
void tri_to_full(const Grid2D& g, const std::vector<cplx>& tri, std::vector<cplx>& full) {
    tri_to_full_impl(g, tri, full);
}

void full_to_tri(const Grid2D& g, const std::vector<cplx>& full, std::vector<cplx>& tri) {
    const int n = g.n;
    const double s = 1.0 / std::sqrt(2.0);
    tri.assign(g.tri_size(), cplx(0.0));
    for (int i = 0; i < n; ++i) {
        tri[g.tri_index(i, i)] = full[g.full_index(i, i)];
        for (int j = i + 1; j < n; ++j)
            tri[g.tri_index(i, j)] = s * (full[g.full_index(i, j)] + full[g.full_index(j, i)]);
    }
}

double symmetry_violation(const Grid2D& g, const std::vector<cplx>& full) {
    const int n = g.n;
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            worst = std::max(worst, std::abs(full[g.full_index(i, j)] - full[g.full_index(j, i)]));
    return worst / g.h();
}

cplx dot(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    cplx s(0.0);
    for (std::size_t r = 0; r < a.size(); ++r) s += std::conj(a[r]) * b[r];
    return s;
}

double norm2(const std::vector<cplx>& a) {
    double s = 0.0;
    for (const auto& z : a) s += std::norm(z);
    return std::sqrt(s);
}

}  // namespace sap::exact
