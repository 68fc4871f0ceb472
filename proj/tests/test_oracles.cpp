#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"

using namespace oracle;

TEST_CASE("jacobi reproduces hand-diagonalizable matrices") {
    auto ev = jacobi_eigenvalues({{2.0, 1.0}, {1.0, 2.0}});
    CHECK(ev[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ev[1] == doctest::Approx(3.0).epsilon(1e-12));

    // second-difference matrix: eigenvalues 2 - 2 cos(k pi / (n+1))
    const int n = 7;
    Matrix a(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
        a[i][i] = 2.0;
        if (i + 1 < n) a[i][i + 1] = a[i + 1][i] = -1.0;
    }
    auto evn = jacobi_eigenvalues(a);
    for (int k = 1; k <= n; ++k) {
        const double exact = 2.0 - 2.0 * std::cos(k * std::numbers::pi / (n + 1));
        CHECK(evn[k - 1] == doctest::Approx(exact).epsilon(1e-12));
    }
}

TEST_CASE("sturm bisection agrees with jacobi on a random tridiagonal") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = 12;
    std::vector<double> diag(n), off(n - 1);
    for (auto& d : diag) d = u(rng);
    for (auto& o : off) o = u(rng);

    Matrix a(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
        a[i][i] = diag[i];
        if (i + 1 < n) a[i][i + 1] = a[i + 1][i] = off[i];
    }
    auto dense = jacobi_eigenvalues(a);
    for (int k = 0; k < n; ++k)
        CHECK(tridiag_eigenvalue(diag, off, k) == doctest::Approx(dense[k]).epsilon(1e-11));
}

TEST_CASE("fd box levels match the exact finite-difference dispersion") {
    const int n = 40;
    const double h = 1.0 / (n + 1);
    auto m = fd_hamiltonian_1d(h, n * h, n, [](double) { return 0.0; });
    for (int k = 1; k <= 5; ++k) {
        const double exact = (1.0 - std::cos(k * std::numbers::pi / (n + 1))) / (h * h);
        CHECK(tridiag_eigenvalue(m.diag, m.off, k - 1) ==
              doctest::Approx(exact).epsilon(1e-11));
    }
}

TEST_CASE("fd harmonic levels approach n + 1/2") {
    auto m = fd_hamiltonian_1d(-9.0, 9.0, 600, [](double x) { return 0.5 * x * x; });
    const double h = 18.0 / 599;
    for (int k = 0; k < 4; ++k) {
        const double e = tridiag_eigenvalue(m.diag, m.off, k);
        CHECK(std::abs(e - (k + 0.5)) < 0.5 * h * h);
    }
}

TEST_CASE("closed-form well rates match direct quadrature of their integrals") {
    const double norm = std::pow(std::numbers::pi, -0.25);
    auto v2 = [](double x, double d) {
        return 0.5 * std::min(x * x, (x - d) * (x - d));
    };
    for (double d : {3.0, 4.5, 6.0}) {
        auto phi_l = [&](double x) { return norm * std::exp(-0.5 * x * x); };
        auto phi_r = [&](double x) { return norm * std::exp(-0.5 * (x - d) * (x - d)); };
        // H phi for an oscillator eigenstate: eigenvalue plus the potential mismatch
        auto h_phi_r = [&](double x) {
            return (0.5 + v2(x, d) - 0.5 * (x - d) * (x - d)) * phi_r(x);
        };
        auto h_phi_l = [&](double x) { return (0.5 + v2(x, d) - 0.5 * x * x) * phi_l(x); };
        const double s = simpson([&](double x) { return phi_l(x) * phi_r(x); }, -8.0, d + 8.0, 6000);
        const double h_lr =
            simpson([&](double x) { return phi_l(x) * h_phi_r(x); }, -8.0, d + 8.0, 6000);
        const double h_ll =
            simpson([&](double x) { return phi_l(x) * h_phi_l(x); }, -8.0, d + 8.0, 6000);
        const double direct = (h_lr - s * h_ll) / std::sqrt(1.0 - s * s);
        CHECK(ground_band_rate(d) == doctest::Approx(direct).epsilon(1e-9));
    }
    for (double d : {3.0, 4.5, 6.0}) {
        const double nrm1 = norm * std::sqrt(2.0);
        auto phi_l = [&](double x) { return nrm1 * x * std::exp(-0.5 * x * x); };
        auto phi_r = [&](double x) {
            return nrm1 * (x - d) * std::exp(-0.5 * (x - d) * (x - d));
        };
        auto h_phi_r = [&](double x) {
            return (1.5 + v2(x, d) - 0.5 * (x - d) * (x - d)) * phi_r(x);
        };
        auto h_phi_l = [&](double x) { return (1.5 + v2(x, d) - 0.5 * x * x) * phi_l(x); };
        const double s = simpson([&](double x) { return phi_l(x) * phi_r(x); }, -8.0, d + 8.0, 6000);
        const double h_lr =
            simpson([&](double x) { return phi_l(x) * h_phi_r(x); }, -8.0, d + 8.0, 6000);
        const double h_ll =
            simpson([&](double x) { return phi_l(x) * h_phi_l(x); }, -8.0, d + 8.0, 6000);
        const double direct = (h_lr - s * h_ll) / std::sqrt(1.0 - s * s);
        CHECK(excited_band_rate(d) == doctest::Approx(direct).epsilon(1e-9));
    }
}
