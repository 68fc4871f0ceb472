#pragma once

#include <string>
#include <vector>

#include "sap/busch.hpp"
#include "sap/eigensolve.hpp"
#include "sap/exact.hpp"
#include "sap/grid.hpp"
#include "sap/trajectory.hpp"

namespace sap {
inline constexpr const char* kVersion = "0.1.0";
}

namespace sap::scenario {

enum class Mode { trajectory, rates, spectrum, hubbard_run, sweep_fidelity, transitions };
Mode mode_from_name(const std::string& name);
std::string mode_name(Mode m);

enum class Model { exact, bose, fermi };
Model model_from_name(const std::string& name);
std::string model_name(Model m);

// A fully resolved run description. Defaults reproduce the reference protocol;
// load_scenario fills it from a config file plus dotted-path overrides.
struct Scenario {
    Mode mode = Mode::trajectory;
    Model model = Model::exact;

    busch::InteractionPoint ip{0.0, 1.0};  // resolved (g, E_g) pair
    traj::TrajectoryParams traj;           // delay < 0 in config means T/10
    Grid2D grid;

    // exact propagation
    double dt = 0.02;
    exact::Scheme scheme = exact::Scheme::crank_nicolson;
    double solver_tol = 1e-11;

    // spectral analysis
    exact::EigenOptions eig;
    int slices = 81;
    double gap_threshold = 0.02;
    double deg_tol = 1e-6;
    double p_tol = 1e-3;
    int max_refine_rounds = 10;

    // reduced models
    bool cotunneling = true;
    double hubbard_dt = 0.25;
    int hubbard_sample_stride = 8;

    // sweeps: cells are the cross product (E_g values) x (durations)
    std::vector<double> sweep_eg;      // empty = just ip.E_g
    std::vector<double> durations;     // empty = just traj.T
    bool explicit_delay = false;       // delay given in config, do not rescale per cell

    // output
    int sample_stride = 100;
    int checkpoint_stride = 0;         // steps between checkpoints, 0 = off
    int trajectory_samples = 2001;
};

// Parse a JSON config (empty path = built-in defaults) and apply overrides of
// the form "section.key=value" (value parsed as JSON, bare words as strings).
// `mode_override`, when non-empty, wins over the config's mode. The result is
// validated and resolved (exactly one of physics.E_g / physics.g, the other
// derived).
Scenario load_scenario(const std::string& config_path, const std::vector<std::string>& overrides,
                       const std::string& mode_override = "");

// Canonical resolved-parameter echo (stable key order, round-trip numbers).
std::string scenario_echo(const Scenario& sc);

// FNV-1a 64-bit hash of the echo, as 16 hex digits.
std::string scenario_hash(const Scenario& sc);

// Static checks plus cheap probes: rate-table spot values and, when `probe`
// is set, one eigensolver slice at protocol start.
std::string validate_report(const Scenario& sc, bool probe);

struct RunOutcome {
    std::vector<std::string> outputs;  // file names relative to out_dir
    std::string manifest;              // manifest file name
};

// Execute the scenario, writing outputs and a run manifest into out_dir
// (created when missing). Sweep cells are distributed over `workers` threads;
// all other modes are single-threaded. Output bytes are deterministic for a
// given scenario and platform, except the runtime_seconds column and the
// manifest timing block.
RunOutcome run_scenario(const Scenario& sc, const std::string& out_dir, int workers = 1);

}  // namespace sap::scenario
