#pragma once

#include <complex>
#include <vector>

#include "sap/grid.hpp"

namespace sap::busch {

// Interaction strength from the two-particle ground-state energy of one
// unit-frequency well: g = -2*sqrt(2) * Gamma(1 - E/2) / Gamma((1 - E)/2).
// Domain [1, 2); E = 1 maps to exactly 0, E -> 2 diverges (TG limit).
double g_from_energy(double E_g);

// Inverse map, bisected on [1, 2). g must be >= 0.
double energy_from_g(double g);

struct InteractionPoint {
    double g;
    double E_g;
};

InteractionPoint point_from_energy(double E_g);
InteractionPoint point_from_g(double g);

// Two-boson ground state of a single harmonic well, relaxed on an
// index-aligned patch of a parent grid. Amplitudes are real, stored on the
// packed symmetric triangle of the patch in the scaled representation used
// throughout (unit Euclidean norm == unit L2 norm).
struct PairState {
    double center = 0.0;
    double g = 0.0;
    double energy = 0.0;
    int i0 = 0;               // first parent axis index covered by the patch
    int np = 0;               // patch points per axis
    Grid2D parent;
    std::vector<double> tri;  // packed patch amplitudes, tri_size(np)

    // same state translated by an integer number of grid steps
    PairState shifted(int di) const;
};

// Relax the pair in an isolated unit well at `center` via shifted inverse
// iteration on the patch Hamiltonian. The patch aims for `margin` oscillator
// lengths on each side and is clipped at domain walls, but never below
// `min_margin`. Throws numerical_error when the measured energy misses the
// Busch value by more than max(1e-4, h^2).
PairState pair_ground_state(double g, double center, const Grid2D& grid,
                            double margin = 7.0, double min_margin = 4.0);

// patch state scattered onto the parent triangle (zeros elsewhere)
std::vector<double> embed(const PairState& s, const Grid2D& grid);

// <s|field> against a packed parent-triangle field, evaluated on the patch
double overlap(const PairState& s, const std::vector<double>& tri_full);
std::complex<double> overlap(const PairState& s, const std::vector<std::complex<double>>& tri_full);

}  // namespace sap::busch
