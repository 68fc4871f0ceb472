#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "sap/grid.hpp"
#include "sap/trajectory.hpp"

namespace sap::exact {

using cplx = std::complex<double>;

// 1D potential sampled on the grid axis for a trap layout
std::vector<double> potential_on_axis(const Grid1D& axis, const traj::TrapLayout& layout);

// Bose-symmetric sector of the two-particle finite-difference Hamiltonian
//   H = -1/2 (d2/dx1^2 + d2/dx2^2) + V(x1) + V(x2) + (g/h) delta_{x1 x2},
// hard-wall box, 3-point Laplacian. Fields are stored on the packed upper
// triangle (i <= j) in scaled coordinates
//   c(i,j) = h * sqrt(w_ij) * psi(x_i, x_j),   w = 2 for i<j, 1 for i=j,
// so the Euclidean norm of c equals the L2 norm of psi and the operator is
// symmetric in the ordinary dot product.
class TriHamiltonian {
  public:
    TriHamiltonian(const Grid2D& grid, std::vector<double> v_axis, double g);

    const Grid2D& grid() const { return grid_; }
    double g() const { return g_; }
    std::size_t size() const { return m_; }

    void apply(const double* in, double* out) const;
    void apply(const cplx* in, cplx* out) const;

    // onsite term of row (i,j)
    double diag(int i, int j) const;
    // upper bound on the spectrum (Gershgorin over scaled rows)
    double upper_bound() const;
    // crude lower bound (min onsite minus max row off-diagonal mass)
    double lower_bound() const;

    double expectation(const std::vector<cplx>& c) const;
    double expectation(const std::vector<double>& c) const;

  private:
    template <typename T>
    void apply_impl(const T* in, T* out) const;

    Grid2D grid_;
    std::vector<double> v_;   // axis potential
    double g_;
    std::size_t m_;
    double inv2h2_;           // 1/(2 h^2)
};

// Full-grid (n x n) action of the same Hamiltonian, for cross-validation and
// the split-step reference scheme. psi is row-major, scaled by h (unit
// Euclidean norm == unit L2 norm).
class FullHamiltonian {
  public:
    FullHamiltonian(const Grid2D& grid, std::vector<double> v_axis, double g);
    const Grid2D& grid() const { return grid_; }
    void apply(const cplx* in, cplx* out) const;
    double expectation(const std::vector<cplx>& psi) const;

  private:
    Grid2D grid_;
    std::vector<double> v_;
    double g_;
    double inv2h2_;
};

// representation conversions (scaled coordinates on both sides)
void tri_to_full(const Grid2D& g, const std::vector<double>& tri, std::vector<cplx>& full);
void tri_to_full(const Grid2D& g, const std::vector<cplx>& tri, std::vector<cplx>& full);
void full_to_tri(const Grid2D& g, const std::vector<cplx>& full, std::vector<cplx>& tri);

// max |psi(x1,x2) - psi(x2,x1)| of a scaled full-grid field, in unscaled units
double symmetry_violation(const Grid2D& g, const std::vector<cplx>& full);

// complex dot products / norms on packed vectors
cplx dot(const std::vector<cplx>& a, const std::vector<cplx>& b);
double norm2(const std::vector<cplx>& a);

}  // namespace sap::exact
