#pragma once

#include <vector>

#include "sap/hamiltonian.hpp"

namespace sap::exact {

struct EigenOptions {
    int k = 12;             // converged pairs to return
    int block = 20;         // filtered subspace dimension (>= k + buffer)
    int cheb_degree = 20;   // filter polynomial degree per cycle
    int max_cycles = 80;
    double tol = 1e-6;      // absolute residual ||H v - lambda v||
    unsigned seed = 0x5eed; // fixed block seed for reproducible runs
};

struct EigenResult {
    std::vector<double> values;                // ascending
    std::vector<std::vector<double>> vectors;  // packed-triangle, orthonormal
    int cycles = 0;
    double max_residual = 0.0;
};

// Lowest eigenpairs of the symmetric-sector Hamiltonian by Chebyshev-filtered
// subspace iteration with Rayleigh-Ritz extraction. `warm` seeds the block
// with eigenvectors of a nearby Hamiltonian (continuation across slices).
EigenResult lowest_eigenpairs(const TriHamiltonian& H, const EigenOptions& opt,
                              const std::vector<std::vector<double>>* warm = nullptr);

}  // namespace sap::exact
