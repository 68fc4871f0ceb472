#pragma once

#include <complex>
#include <vector>

#include <fftw3.h>

#include "sap/grid.hpp"
#include "sap/hamiltonian.hpp"

namespace sap::exact {

// Crank-Nicolson step on the packed symmetric triangle:
//   (1 + i dt/2 H) phi = psi,   psi <- 2 phi - psi,
// with H sampled at the interval midpoint. The linear solve is a Jacobi-
// preconditioned conjugate-orthogonal CG (the matrix is complex symmetric),
// warm-started by linear extrapolation of the previous half-step solutions.
class CrankNicolson {
  public:
    CrankNicolson(const Grid2D& grid, double g, double dt, double tol = 1e-11, int max_iter = 600);

    const Grid2D& grid() const { return grid_; }
    double dt() const { return dt_; }

    // advance one step; v_mid samples the axis potential at t + dt/2.
    // returns solver iterations spent.
    int step(const std::vector<double>& v_mid, std::vector<cplx>& psi);

    void reset_history();  // drop warm-start history (after loading a checkpoint)

  private:
    Grid2D grid_;
    double g_, dt_, tol_;
    int max_iter_;
    bool have_prev_ = false, have_prev2_ = false;
    std::vector<cplx> phi_, phi2_;                 // previous half-step solutions
    std::vector<cplx> r_, z_, p_, q_, x_, pinv_;   // solver workspaces
};

// Strang-split Fourier step on the full grid (periodic boundaries), kept as a
// cross-validation alternative. The sharp contact term aliases against the
// kinetic phase once dt exceeds 2 h^2 / pi, producing an artificial decay of
// interacting states, so construction refuses interacting runs above 90% of
// that threshold.
class SplitStep {
  public:
    SplitStep(const Grid2D& grid, double g, double dt);
    ~SplitStep();
    SplitStep(const SplitStep&) = delete;
    SplitStep& operator=(const SplitStep&) = delete;

    const Grid2D& grid() const { return grid_; }
    double dt() const { return dt_; }

    // advance one step; psi is the scaled full-grid field, row-major
    void step(const std::vector<double>& v_mid, std::vector<cplx>& psi);

  private:
    Grid2D grid_;
    double g_, dt_;
    std::vector<double> kin_phase_;  // -dt (k1^2 + k2^2)/2 per mode, flattened
    fftw_complex* buf_;
    fftw_plan fwd_, bwd_;
};

}  // namespace sap::exact
