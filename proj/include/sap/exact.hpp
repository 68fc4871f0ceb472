#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sap/busch.hpp"
#include "sap/grid.hpp"
#include "sap/trajectory.hpp"

namespace sap::exact {

enum class Scheme { crank_nicolson, split_step_fourier };

Scheme scheme_from_name(const std::string& name);
std::string scheme_name(Scheme s);

struct RunConfig {
    Grid2D grid;
    traj::TrajectoryParams traj;
    double g = 0.0;
    double dt = 0.02;
    Scheme scheme = Scheme::crank_nicolson;
    double solver_tol = 1e-11;
    int sample_stride = 100;       // steps between time-series samples
    int checkpoint_stride = 0;     // steps between checkpoint callbacks, 0 = off

    void validate() const;
    long total_steps() const;      // dt is rounded so steps * dt == T exactly
    double step_size() const;
};

struct Sample {
    double t;
    double norm;
    double energy;
    // pair occupancies by instantaneous well region of each particle
    double p_LL, p_MM, p_RR, p_LM, p_LR, p_MR;
};

struct RunResult {
    double fidelity = 0.0;          // |<pair at final right well | psi(T)>|^2
    double norm_drift = 0.0;        // max |norm - 1| over the run
    double symmetry_violation = 0.0;
    std::vector<Sample> series;
    std::vector<std::complex<double>> psi;  // final state, native representation
    long steps = 0;
    double runtime_seconds = 0.0;
};

struct Checkpoint {
    long step = 0;
    std::vector<std::complex<double>> psi;
    double norm_drift = 0.0;
    double symmetry_violation = 0.0;
    std::vector<Sample> series;
};

using CheckpointSink = std::function<void(const Checkpoint&)>;

// Full protocol run: relax the pair in the left well, carry it through the
// counterintuitive sequence, and score against the pair state of the final
// right well. `resume` continues a previous run from its checkpoint.
RunResult run_sap(const RunConfig& cfg, const Checkpoint* resume = nullptr,
                  const CheckpointSink& sink = nullptr);

// Frozen-trap run of `steps` steps from the relaxed pair in the well at
// `center`; reports conservation quality (norm, energy, symmetry).
struct StaticReport {
    double norm_drift = 0.0;
    double energy_drift = 0.0;
    double symmetry_violation = 0.0;
};
StaticReport run_static(const Grid2D& grid, const traj::TrapLayout& layout, double g,
                        double center, double dt, long steps, Scheme scheme);

}  // namespace sap::exact
