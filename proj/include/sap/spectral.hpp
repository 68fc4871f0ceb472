#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "sap/eigensolve.hpp"
#include "sap/grid.hpp"
#include "sap/hubbard.hpp"
#include "sap/trajectory.hpp"

namespace sap::spectral {

// One diagonalized snapshot of the protocol at scaled time s = t/T. The
// trajectory shape is invariant under rescaling of T, so a slice set describes
// every protocol duration at once; T enters only through the phase integral of
// the transition estimator.
struct EigenSlice {
    double s = 0.0;
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // orthonormal columns matching values
};

// Produces a slice at scaled time s. `warm`, when non-null, is a nearby solved
// slice usable as an iteration starting point.
using SliceFn = std::function<EigenSlice(double s, const EigenSlice* warm)>;

// lowest-k spectra of the exact two-particle Hamiltonian along the trajectory
SliceFn exact_slice_fn(Grid2D grid, traj::TrajectoryParams traj, double g,
                       exact::EigenOptions opt);

// full spectra of a 6- or 9-state Hubbard model along the trajectory
SliceFn hubbard_slice_fn(hubbard::HubbardModel model, traj::TrajectoryParams traj);

// Analytic two-level avoided crossing: diabatic energies ±slope·(s − 1/2) and
// constant coupling delta. Used to validate the estimator against closed-form
// transition probabilities.
SliceFn landau_zener_slice_fn(double slope, double delta);

// uniformly spaced slices over s in [0, 1]
std::vector<EigenSlice> solve_slices(const SliceFn& fn, int count);

// insert a slice at s keeping the sequence ordered (nearest slice warms the solve)
void insert_slice(std::vector<EigenSlice>& slices, const SliceFn& fn, double s);

struct SpectralFlow {
    std::vector<double> s;
    Eigen::MatrixXd energies;              // row = track, column = slice
    std::vector<Eigen::MatrixXd> vectors;  // per slice; column = track, gauge-aligned
    std::vector<int> band_of;              // anchor index per track, -1 unclassified
    int ambiguous_events = 0;              // continuation overlaps <= 0.5

    int track_count() const { return static_cast<int>(energies.rows()); }
    int slice_count() const { return static_cast<int>(s.size()); }
    int nearest_slice(double s_query) const;
};

// Connects eigenpairs across slices by maximal overlap, fixing each vector's
// sign so the dominant overlap with its predecessor is positive. Tracks are
// numbered by energy order on the first slice. band_anchors, when given,
// classify each track by its first-slice energy (within band_tol).
SpectralFlow track_bands(const std::vector<EigenSlice>& slices,
                         const std::vector<double>& band_anchors = {}, double band_tol = 0.02);

// smallest energy separation between two bands at one slice
double band_gap(const SpectralFlow& flow, int band_a, int band_b, int slice);

// Continuation of `anchor` through the slice sequence. Eigenvalues closer than
// deg_tol form one eigenspace and the continuation is the normalized projection
// of the previous state, which is the physically meaningful (diabatic) limit
// where splittings are unresolvable; elsewhere this is maximal-overlap
// following. min_overlap is the worst weight retained in a single step.
struct FollowedState {
    std::vector<double> s;
    Eigen::MatrixXd states;  // column per slice, in the slice eigenbasis span
    std::vector<double> energy;
    double min_overlap = 1.0;
};
FollowedState follow_state(const std::vector<EigenSlice>& slices, const Eigen::VectorXd& anchor,
                           double deg_tol = 1e-6);

// flow track carrying the followed state where it is purest
int identify_track(const SpectralFlow& flow, const FollowedState& fs);

struct CrossingEvent {
    int track_i = -1;  // followed track
    int track_j = -1;  // partner
    double s_c = 0.0;  // parabolic estimate of the minimum-gap time
    double gap = 0.0;  // minimum |E_i - E_j|
    double s_a = 0.0;  // analysis window
    double s_b = 0.0;
};

// Interior local minima of |E_track - E_other| below gap_threshold, sorted by
// time. Windows extend until the slice-resolution coupling decays to 1e-3 of
// its peak (or a neighbouring event / protocol edge intervenes).
std::vector<CrossingEvent> detect_crossings(const SpectralFlow& flow, int track,
                                            double gap_threshold);

// <j | d/ds | i> by central differences of the gauge-aligned track vectors at
// the slice nearest s. Throws if the tracks are exactly degenerate there.
double nonadiabatic_coupling(const SpectralFlow& flow, int i, int j, double s);

struct TransitionEstimate {
    double p = 0.0;
    double numerator = 0.0;    // |integral of c_ij e^{i T phase}|^2 over the window
    double denominator = 0.0;  // |integral of c_ij|^2 (sudden-limit normalization)
    double s_a = 0.0, s_b = 0.0;
    double T = 0.0;
    bool clamped = false;  // p exceeded 1 by more than quadrature ripple
};

// First-order estimate of the probability of hopping between tracks i and j
// across the window for protocol duration T. Couplings and gaps are splined
// from slice resolution; the oscillatory integral uses trapezoid sums on a
// grid refined until the result is stable.
TransitionEstimate transition_probability(const SpectralFlow& flow, int i, int j, double s_a,
                                          double s_b, double T);

struct AnalysisOptions {
    int base_slices = 41;
    double gap_threshold = 0.02;
    double deg_tol = 1e-6;
    double p_tol = 1e-3;  // refinement stop: change in p between rounds
    int max_refine_rounds = 10;
    int max_slices = 700;    // refinement stops growing the grid past this
    double T_ref = 12000.0;  // duration used for refinement stability checks
};

struct CrossingAnalysis {
    std::vector<EigenSlice> slices;
    SpectralFlow flow;
    FollowedState dark;
    int dark_track = -1;
    std::vector<CrossingEvent> events;
    int refine_rounds = 0;
};

// Full pipeline: base slices, flow, anchored dark track, crossing detection,
// and slice refinement near each event until the estimator is stable at T_ref.
// band_anchors are forwarded to track_bands.
CrossingAnalysis analyze_crossings(const SliceFn& fn, const Eigen::VectorXd& anchor,
                                   const AnalysisOptions& opt = {},
                                   const std::vector<double>& band_anchors = {});

// estimates for one event across protocol durations
std::vector<TransitionEstimate> estimate_over_durations(const CrossingAnalysis& analysis,
                                                        int event_index,
                                                        const std::vector<double>& durations);

}  // namespace sap::spectral
