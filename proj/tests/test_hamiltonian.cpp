#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sap/hamiltonian.hpp"

using namespace sap;
using exact::cplx;

namespace {

std::vector<double> random_tri(const Grid2D& grid, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> n01;
    std::vector<double> v(grid.tri_size());
    for (auto& x : v) x = n01(rng);
    double s = 0.0;
    for (double x : v) s += x * x;
    for (auto& x : v) x /= std::sqrt(s);
    return v;
}

// dense symmetric matrix of the packed operator, column by column
oracle::Matrix dense_of(const exact::TriHamiltonian& H) {
    const std::size_t m = H.size();
    oracle::Matrix a(m, std::vector<double>(m, 0.0));
    std::vector<double> e(m, 0.0), col(m);
    for (std::size_t c = 0; c < m; ++c) {
        e[c] = 1.0;
        H.apply(e.data(), col.data());
        e[c] = 0.0;
        for (std::size_t r = 0; r < m; ++r) a[r][c] = col[r];
    }
    return a;
}

}  // namespace

TEST_CASE("packed operator is symmetric in the plain dot product") {
    const Grid2D grid{-5.0, 5.0, 40};
    std::vector<double> v(static_cast<std::size_t>(grid.n));
    for (int i = 0; i < grid.n; ++i) v[static_cast<std::size_t>(i)] = 0.5 * grid.x(i) * grid.x(i);
    const exact::TriHamiltonian H(grid, v, 1.3);

    const auto a = random_tri(grid, 1);
    const auto b = random_tri(grid, 2);
    std::vector<double> ha(a.size()), hb(b.size());
    H.apply(a.data(), ha.data());
    H.apply(b.data(), hb.data());
    double ab = 0.0, ba = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * hb[i];
        ba += ha[i] * b[i];
    }
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
}

TEST_CASE("real and complex apply agree") {
    const Grid2D grid{-4.0, 4.0, 24};
    std::vector<double> v(static_cast<std::size_t>(grid.n), 0.0);
    const exact::TriHamiltonian H(grid, v, 0.7);
    const auto a = random_tri(grid, 3);
    std::vector<double> hr(a.size());
    H.apply(a.data(), hr.data());
    std::vector<cplx> ac(a.begin(), a.end()), hc(a.size());
    H.apply(ac.data(), hc.data());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(hc[i].real() == doctest::Approx(hr[i]).epsilon(1e-14));
        CHECK(hc[i].imag() == 0.0);
    }
}

TEST_CASE("hard-wall box spectrum equals symmetrized finite-difference sums") {
    const Grid2D grid{0.0, 1.0, 20};
    std::vector<double> v(static_cast<std::size_t>(grid.n), 0.0);
    const exact::TriHamiltonian H(grid, v, 0.0);

    auto dense = dense_of(H);
    auto got = oracle::jacobi_eigenvalues(dense);

    // 1D hard-wall FD levels: (1 - cos(k pi / (n+1))) / h^2
    const int n = grid.n;
    const double h = grid.h();
    std::vector<double> one(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k)
        one[static_cast<std::size_t>(k - 1)] =
            (1.0 - std::cos(k * std::numbers::pi / (n + 1))) / (h * h);
    std::vector<double> sums;
    for (int k = 0; k < n; ++k)
        for (int l = k; l < n; ++l) sums.push_back(one[static_cast<std::size_t>(k)] +
                                                   one[static_cast<std::size_t>(l)]);
    std::sort(sums.begin(), sums.end());

    REQUIRE(got.size() == sums.size());
    for (std::size_t i = 0; i < 8; ++i)
        CHECK(got[i] == doctest::Approx(sums[i]).epsilon(1e-10));
}

TEST_CASE("contact term acts on the diagonal only, with strength g/h") {
    const Grid2D grid{-3.0, 3.0, 16};
    std::vector<double> v(static_cast<std::size_t>(grid.n), 0.0);
    const double g = 1.7;
    const exact::TriHamiltonian H0(grid, v, 0.0), Hg(grid, v, g);

    const std::size_t m = H0.size();
    std::vector<double> e(m, 0.0), out0(m), outg(m);
    for (int i = 0; i < grid.n; ++i) {
        for (int j = i; j < grid.n; ++j) {
            const std::size_t r = grid.tri_index(i, j);
            e[r] = 1.0;
            H0.apply(e.data(), out0.data());
            Hg.apply(e.data(), outg.data());
            e[r] = 0.0;
            for (std::size_t q = 0; q < m; ++q) {
                const double want = (q == r && i == j) ? g / grid.h() : 0.0;
                CHECK(outg[q] - out0[q] == doctest::Approx(want).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("onsite accessor matches the applied diagonal") {
    const Grid2D grid{-3.0, 3.0, 14};
    std::vector<double> v(static_cast<std::size_t>(grid.n));
    for (int i = 0; i < grid.n; ++i) v[static_cast<std::size_t>(i)] = 0.1 * grid.x(i);
    const exact::TriHamiltonian H(grid, v, 0.9);
    const std::size_t m = H.size();
    std::vector<double> e(m, 0.0), out(m);
    for (int i = 0; i < grid.n; i += 3) {
        for (int j = i; j < grid.n; j += 2) {
            const std::size_t r = grid.tri_index(i, j);
            e[r] = 1.0;
            H.apply(e.data(), out.data());
            e[r] = 0.0;
            CHECK(out[r] == doctest::Approx(H.diag(i, j)).epsilon(1e-13));
        }
    }
}

TEST_CASE("spectral bounds bracket every Rayleigh quotient") {
    const Grid2D grid{-5.0, 5.0, 32};
    std::vector<double> v(static_cast<std::size_t>(grid.n));
    for (int i = 0; i < grid.n; ++i) v[static_cast<std::size_t>(i)] = 0.5 * grid.x(i) * grid.x(i);
    const exact::TriHamiltonian H(grid, v, 2.0);
    for (unsigned seed = 0; seed < 5; ++seed) {
        const auto a = random_tri(grid, 10 + seed);
        std::vector<double> ha(a.size());
        H.apply(a.data(), ha.data());
        double q = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) q += a[i] * ha[i];
        CHECK(q <= H.upper_bound());
        CHECK(q >= H.lower_bound());
        CHECK(H.expectation(a) == doctest::Approx(q).epsilon(1e-12));
    }
}

TEST_CASE("repulsion raises the ground state monotonically") {
    const Grid2D grid{0.0, 1.0, 14};
    std::vector<double> v(static_cast<std::size_t>(grid.n), 0.0);
    double prev = -1.0;
    for (double g : {0.0, 1.0, 5.0}) {
        const exact::TriHamiltonian H(grid, v, g);
        auto ev = oracle::jacobi_eigenvalues(dense_of(H));
        CHECK(ev[0] > prev);
        prev = ev[0];
    }
}

TEST_CASE("triangle and full-grid actions agree through the conversions") {
    const Grid2D grid{-4.0, 4.0, 22};
    std::vector<double> v(static_cast<std::size_t>(grid.n));
    for (int i = 0; i < grid.n; ++i) v[static_cast<std::size_t>(i)] = 0.5 * grid.x(i) * grid.x(i);
    const exact::TriHamiltonian Ht(grid, v, 1.1);
    const exact::FullHamiltonian Hf(grid, v, 1.1);

    const auto a = random_tri(grid, 7);
    std::vector<cplx> ac(a.begin(), a.end());

    std::vector<cplx> full, hfull(grid.full_size()), back;
    exact::tri_to_full(grid, ac, full);
    CHECK(exact::norm2(full) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(exact::symmetry_violation(grid, full) < 1e-14);

    Hf.apply(full.data(), hfull.data());
    exact::full_to_tri(grid, hfull, back);

    std::vector<cplx> ht(ac.size());
    Ht.apply(ac.data(), ht.data());
    for (std::size_t i = 0; i < ht.size(); ++i)
        CHECK(std::abs(ht[i] - back[i]) < 1e-12);

    CHECK(Hf.expectation(full) == doctest::Approx(Ht.expectation(ac)).epsilon(1e-12));
}

TEST_CASE("symmetry monitor flags an antisymmetric perturbation") {
    const Grid2D grid{-2.0, 2.0, 12};
    const auto a = random_tri(grid, 9);
    std::vector<cplx> ac(a.begin(), a.end()), full;
    exact::tri_to_full(grid, ac, full);
    full[grid.full_index(2, 7)] += 1e-3;
    full[grid.full_index(7, 2)] -= 1e-3;
    // violation is reported in unscaled units, i.e. amplified by 1/h
    CHECK(exact::symmetry_violation(grid, full) ==
          doctest::Approx(2e-3 / grid.h()).epsilon(1e-9));
}

TEST_CASE("axis potential samples the trap envelope") {
    const Grid1D axis{-12.0, 12.0, 49};
    const traj::TrapLayout lay{-9.0, 0.0, 9.0};
    const auto v = exact::potential_on_axis(axis, lay);
    REQUIRE(v.size() == 49);
    for (int i = 0; i < axis.n; ++i)
        CHECK(v[static_cast<std::size_t>(i)] ==
              doctest::Approx(traj::potential(axis.x(i), lay)).epsilon(1e-14));
}
