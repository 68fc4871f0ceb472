#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sap/busch.hpp"
#include "sap/spline.hpp"
#include "sap/trajectory.hpp"

namespace sap::hubbard {

// Signed tunneling element between unit-frequency ground Gaussians at two
// wells a distance d apart, after ordered Gram-Schmidt (left state first).
double single_particle_rate(double d);

// Same construction with first-excited oscillator states.
double excited_band_rate(double d);

// Pair co-tunneling element between two-boson ground states of adjacent
// wells, evaluated on a fine grid. Relaxation accuracy follows the pair-state
// self-consistency check.
double cotunneling_rate(double d, double g);

struct RateSet {
    double omega_LM = 0.0, omega_MR = 0.0;      // ground-band rates
    double omega1_LM = 0.0, omega1_MR = 0.0;    // excited-band rates
    double omega_co_LM = 0.0, omega_co_MR = 0.0;
    double U = 0.0;
    double eps0 = 0.5, eps1 = 1.5;
};

// Rates precomputed on d in [3, 9] (step 0.05) and spline-interpolated.
class RateTable {
  public:
    static constexpr double d_lo = 3.0, d_hi = 9.0, d_step = 0.05;

    explicit RateTable(double g);

    double g() const { return g_; }
    double omega0(double d) const { return s0_(clamp(d)); }
    double omega1(double d) const { return s1_(clamp(d)); }
    double omega_co(double d) const { return sco_(clamp(d)); }

    void write_csv(std::ostream& os) const;

  private:
    static double clamp(double d);
    double g_;
    std::vector<double> ds_, w0_, w1_, wco_;
    CubicSpline s0_, s1_, sco_;
};

enum class Statistics { bose, fermi };

// canonical Fock bases, documented by the label lists below
std::vector<std::string> bose_labels();   // |200>, |020>, |002>, |110>, |101>, |011>
std::vector<std::string> fermi_labels();  // |LL>, |MM>, |RR>, |LM>, |ML>, |LR>, |RL>, |MR>, |RM>

Eigen::MatrixXd build_bose_matrix(const RateSet& r, bool cotunneling);
Eigen::MatrixXd build_fermi_matrix(const RateSet& r, bool cotunneling);

struct HubbardModel {
    Statistics stats = Statistics::bose;
    busch::InteractionPoint ip{0.0, 1.0};
    bool cotunneling = true;
    RateTable table;

    static HubbardModel bose(double E_g, bool cotunneling = true);
    static HubbardModel fermi(double E_g, bool cotunneling = true);

    int dim() const { return stats == Statistics::bose ? 6 : 9; }
    double U() const { return stats == Statistics::bose ? ip.E_g - 1.0 : ip.E_g - 2.0; }
    std::vector<std::string> labels() const;

    RateSet rates_at(double t, const traj::TrajectoryParams& p) const;
    Eigen::MatrixXd matrix(const RateSet& r) const;
};

struct EvolveResult {
    std::vector<double> times;
    Eigen::MatrixXd populations;  // row per sample, column per basis state
    double norm_drift = 0.0;
};

// Piecewise-constant midpoint exponential integration of the model along the
// trajectory. psi0 must be normalized.
EvolveResult evolve_hubbard(const HubbardModel& model, const traj::TrajectoryParams& p,
                            const Eigen::VectorXcd& psi0, double dt, int sample_stride = 8);

struct DarkState {
    Eigen::VectorXd state;  // sign-fixed toward the previous slice
    double energy = 0.0;    // Rayleigh quotient of the returned state
    double overlap = 0.0;   // weight of prev in the selected eigenspace
    bool ambiguous = false; // runner-up eigenspace within 1e-3 or weak continuation
};

// Eigenstate of H continuously connected to `prev`. Eigenvalues closer than
// deg_tol are treated as one eigenspace: within it the continuation is the
// normalized projection of prev, which removes the arbitrary basis rotation a
// solver is free to perform inside a (near-)degenerate cluster. For isolated
// eigenvalues this is plain maximal-overlap continuation.
DarkState dark_state_of(const Eigen::MatrixXd& H, const Eigen::VectorXd& prev,
                        double deg_tol = 1e-6);

struct DarkTrackResult {
    std::vector<double> times;
    Eigen::MatrixXd states;        // column per slice
    std::vector<double> energies;
    double min_overlap = 1.0;      // worst slice-to-slice continuation weight
    bool reaches_target = false;
    int ambiguous_events = 0;
};

// Follow the eigenstate starting at the left pair state across the protocol.
// reaches_target demands an unbroken track: every continuation keeps at least
// 90% of the previous state's weight, and the final state is dominantly the
// right pair state. A discontinuous jump when a degeneracy lifts means the
// initial state splits across branches, i.e. no adiabatic path.
DarkTrackResult dark_state_track(const HubbardModel& model, const traj::TrajectoryParams& p,
                                 int slices);

}  // namespace sap::hubbard
