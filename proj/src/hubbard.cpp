#include "sap/hubbard.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <sstream>

#include "sap/errors.hpp"

namespace sap::hubbard {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

constexpr std::array<std::array<int, 3>, 6> kBoseBasis{{
    {2, 0, 0}, {0, 2, 0}, {0, 0, 2}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1},
}};

int bose_index(const std::array<int, 3>& n) {
    for (std::size_t i = 0; i < kBoseBasis.size(); ++i)
        if (kBoseBasis[i] == n) return static_cast<int>(i);
    throw numerical_error("occupation state outside the two-boson basis");
}

// fermionic modes ordered L0, M0, R0, L1, M1, R1 (band-major, wells inside)
constexpr std::array<std::array<int, 2>, 9> kFermiBasis{{
    {0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 0}, {0, 2}, {2, 0}, {1, 2}, {2, 1},
}};

int fermi_mask(int j0, int j1) { return (1 << j0) | (1 << (3 + j1)); }

int fermi_index(int mask) {
    for (std::size_t i = 0; i < kFermiBasis.size(); ++i)
        if (fermi_mask(kFermiBasis[i][0], kFermiBasis[i][1]) == mask) return static_cast<int>(i);
    throw numerical_error("occupation state outside the two-fermion basis");
}

// Jordan-Wigner ladder operators on a mode bitmask; returns false on vanishing
bool jw_apply(bool create, int mode, int& mask, int& sign) {
    const int bit = 1 << mode;
    if (create == bool(mask & bit)) return false;
    if (std::popcount(static_cast<unsigned>(mask & (bit - 1))) % 2) sign = -sign;
    mask ^= bit;
    return true;
}

}  // namespace

std::vector<std::string> bose_labels() {
    return {"|200>", "|020>", "|002>", "|110>", "|101>", "|011>"};
}

std::vector<std::string> fermi_labels() {
    return {"|LL>", "|MM>", "|RR>", "|LM>", "|ML>", "|LR>", "|RL>", "|MR>", "|RM>"};
}

Eigen::MatrixXd build_bose_matrix(const RateSet& r, bool cotunneling) {
    MatrixXd H = MatrixXd::Zero(6, 6);
    const std::array<std::tuple<int, int, double, double>, 2> bonds{{
        {0, 1, r.omega_LM, r.omega_co_LM},
        {1, 2, r.omega_MR, r.omega_co_MR},
    }};
    for (int col = 0; col < 6; ++col) {
        const auto& n = kBoseBasis[static_cast<std::size_t>(col)];
        for (int j = 0; j < 3; ++j)
            H(col, col) += 0.5 * r.U * n[static_cast<std::size_t>(j)] *
                               (n[static_cast<std::size_t>(j)] - 1) +
                           r.eps0 * n[static_cast<std::size_t>(j)];
        for (const auto& [a, b, w, wco] : bonds) {
            for (const auto& [src, dst] : {std::pair{b, a}, std::pair{a, b}}) {
                // w * b\dagger_dst b_src
                const int ns = n[static_cast<std::size_t>(src)];
                if (ns > 0) {
                    auto n2 = n;
                    --n2[static_cast<std::size_t>(src)];
                    ++n2[static_cast<std::size_t>(dst)];
                    const double amp =
                        std::sqrt(double(ns) * double(n2[static_cast<std::size_t>(dst)]));
                    H(bose_index(n2), col) += w * amp;
                }
                if (cotunneling && ns >= 2) {
                    auto n2 = n;
                    n2[static_cast<std::size_t>(src)] -= 2;
                    n2[static_cast<std::size_t>(dst)] += 2;
                    const int nd = n2[static_cast<std::size_t>(dst)];
                    const double amp = std::sqrt(double(ns) * double(ns - 1)) *
                                       std::sqrt(double(nd) * double(nd - 1));
                    H(bose_index(n2), col) += wco * amp;
                }
            }
        }
    }
    return H;
}

Eigen::MatrixXd build_fermi_matrix(const RateSet& r, bool cotunneling) {
    MatrixXd H = MatrixXd::Zero(9, 9);
    struct Term {
        std::array<std::pair<bool, int>, 4> ops;  // applied right to left
        int count;
        double coeff;
    };
    std::vector<Term> terms;
    const std::array<std::tuple<int, int, double, double, double>, 2> bonds{{
        {0, 1, r.omega_LM, r.omega1_LM, r.omega_co_LM},
        {1, 2, r.omega_MR, r.omega1_MR, r.omega_co_MR},
    }};
    for (const auto& [a, b, w0, w1, wco] : bonds) {
        for (const auto& [src, dst] : {std::pair{b, a}, std::pair{a, b}}) {
            terms.push_back({{{{false, src}, {true, dst}, {false, 0}, {false, 0}}}, 2, w0});
            terms.push_back({{{{false, 3 + src}, {true, 3 + dst}, {false, 0}, {false, 0}}}, 2, w1});
            if (cotunneling)
                terms.push_back(
                    {{{{false, src}, {false, 3 + src}, {true, 3 + dst}, {true, dst}}}, 4, wco});
        }
    }
    for (int col = 0; col < 9; ++col) {
        const auto [j0, j1] = kFermiBasis[static_cast<std::size_t>(col)];
        H(col, col) += r.eps0 + r.eps1 + (j0 == j1 ? r.U : 0.0);
        const int mask0 = fermi_mask(j0, j1);
        for (const auto& term : terms) {
            int mask = mask0, sign = 1;
            bool alive = true;
            for (int q = 0; q < term.count && alive; ++q)
                alive = jw_apply(term.ops[static_cast<std::size_t>(q)].first,
                                 term.ops[static_cast<std::size_t>(q)].second, mask, sign);
            if (alive) H(fermi_index(mask), col) += term.coeff * sign;
        }
    }
    return H;
}

HubbardModel HubbardModel::bose(double E_g, bool cotunneling) {
    auto ip = busch::point_from_energy(E_g);
    return {Statistics::bose, ip, cotunneling, RateTable(ip.g)};
}

HubbardModel HubbardModel::fermi(double E_g, bool cotunneling) {
    auto ip = busch::point_from_energy(E_g);
    return {Statistics::fermi, ip, cotunneling, RateTable(ip.g)};
}

std::vector<std::string> HubbardModel::labels() const {
    return stats == Statistics::bose ? bose_labels() : fermi_labels();
}

// Model assembly works in the canonical gauge: all tunneling amplitudes enter
// non-negative. Single-particle signs are pure gauge on this chain; the
// co-tunneling amplitude's sign relative to the squared single-particle loop
// is physical, and the non-negative choice is the one whose dynamics matches
// the exact two-particle transfer. The raw signed elements remain available
// from the rate functions and the table CSV.
RateSet HubbardModel::rates_at(double t, const traj::TrajectoryParams& p) const {
    RateSet r;
    const double s_lm = traj::separation_left(t, p);
    const double s_mr = traj::separation_right(t, p);
    r.omega_LM = std::abs(table.omega0(s_lm));
    r.omega_MR = std::abs(table.omega0(s_mr));
    r.omega1_LM = std::abs(table.omega1(s_lm));
    r.omega1_MR = std::abs(table.omega1(s_mr));
    r.omega_co_LM = std::abs(table.omega_co(s_lm));
    r.omega_co_MR = std::abs(table.omega_co(s_mr));
    r.U = U();
    return r;
}

Eigen::MatrixXd HubbardModel::matrix(const RateSet& r) const {
    return stats == Statistics::bose ? build_bose_matrix(r, cotunneling)
                                     : build_fermi_matrix(r, cotunneling);
}

EvolveResult evolve_hubbard(const HubbardModel& model, const traj::TrajectoryParams& p,
                            const VectorXcd& psi0, double dt, int sample_stride) {
    if (std::abs(psi0.norm() - 1.0) > 1e-10) throw config_error("initial state must be normalized");
    if (psi0.size() != model.dim()) throw config_error("initial state has the wrong dimension");
    if (!(dt > 0.0)) throw config_error("time step must be positive");
    if (sample_stride < 1) throw config_error("sample stride must be positive");
    const long steps = std::max(1L, std::lround(p.T / dt));
    const double dte = p.T / static_cast<double>(steps);

    EvolveResult out;
    VectorXcd psi = psi0;
    const auto record = [&](double t) {
        out.times.push_back(t);
        out.populations.conservativeResize(static_cast<Eigen::Index>(out.times.size()),
                                           model.dim());
        for (int i = 0; i < model.dim(); ++i)
            out.populations(static_cast<Eigen::Index>(out.times.size()) - 1, i) =
                std::norm(psi[i]);
    };
    record(0.0);
    for (long s = 0; s < steps; ++s) {
        const double t_mid = (static_cast<double>(s) + 0.5) * dte;
        const MatrixXd H = model.matrix(model.rates_at(t_mid, p));
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
        const MatrixXd& V = es.eigenvectors();
        const VectorXd cr = V.transpose() * psi.real().matrix();
        const VectorXd ci = V.transpose() * psi.imag().matrix();
        VectorXcd c(model.dim());
        for (int i = 0; i < model.dim(); ++i)
            c[i] = std::complex<double>(cr[i], ci[i]) * std::polar(1.0, -dte * es.eigenvalues()[i]);
        const VectorXd pr = V * c.real().matrix();
        const VectorXd pi = V * c.imag().matrix();
        for (int i = 0; i < model.dim(); ++i) psi[i] = std::complex<double>(pr[i], pi[i]);
        const double drift = std::abs(psi.norm() - 1.0);
        out.norm_drift = std::max(out.norm_drift, drift);
        if (drift > 1e-8) {
            std::ostringstream os;
            os << "norm drift " << drift << " at step " << s << "; reduce the step size";
            throw numerical_error(os.str());
        }
        if ((s + 1) % sample_stride == 0 || s + 1 == steps)
            record(static_cast<double>(s + 1) * dte);
    }
    return out;
}

DarkState dark_state_of(const Eigen::MatrixXd& H, const Eigen::VectorXd& prev, double deg_tol) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
    const int n = static_cast<int>(H.rows());

    // contiguous eigenvalue clusters separated by gaps >= deg_tol
    std::vector<std::pair<int, int>> groups;  // [lo, hi)
    for (int lo = 0; lo < n;) {
        int hi = lo + 1;
        while (hi < n && es.eigenvalues()[hi] - es.eigenvalues()[hi - 1] < deg_tol) ++hi;
        groups.emplace_back(lo, hi);
        lo = hi;
    }

    DarkState ds;
    int best = 0;
    double o_best = -1.0, o_second = -1.0;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        double w2 = 0.0;
        for (int i = groups[gi].first; i < groups[gi].second; ++i)
            w2 += std::pow(es.eigenvectors().col(i).dot(prev), 2);
        const double o = std::sqrt(w2);
        if (o > o_best) {
            o_second = o_best;
            o_best = o;
            best = static_cast<int>(gi);
        } else if (o > o_second) {
            o_second = o;
        }
    }

    const auto [lo, hi] = groups[static_cast<std::size_t>(best)];
    VectorXd proj = VectorXd::Zero(n);
    for (int i = lo; i < hi; ++i)
        proj += es.eigenvectors().col(i).dot(prev) * es.eigenvectors().col(i);
    const double w = proj.norm();
    if (w > 0.0) {
        ds.state = proj / w;
    } else {
        ds.state = es.eigenvectors().col(lo);  // prev orthogonal to everything selected
        if (ds.state.dot(prev) < 0.0) ds.state = -ds.state;
    }
    ds.energy = ds.state.dot(H * ds.state);
    ds.overlap = o_best;
    ds.ambiguous = (o_best - o_second) < 1e-3 || o_best < 0.5;
    return ds;
}

DarkTrackResult dark_state_track(const HubbardModel& model, const traj::TrajectoryParams& p,
                                 int slices) {
    if (slices < 2) throw config_error("dark-state track needs at least 2 slices");
    DarkTrackResult out;
    out.states.resize(model.dim(), slices);
    VectorXd prev = VectorXd::Zero(model.dim());
    prev[0] = 1.0;  // pair in the left well
    for (int k = 0; k < slices; ++k) {
        const double t = p.T * static_cast<double>(k) / static_cast<double>(slices - 1);
        const auto ds = dark_state_of(model.matrix(model.rates_at(t, p)), prev);
        out.times.push_back(t);
        out.energies.push_back(ds.energy);
        out.states.col(k) = ds.state;
        out.min_overlap = std::min(out.min_overlap, ds.overlap);
        if (ds.ambiguous) ++out.ambiguous_events;
        prev = ds.state;
    }
    // a transferring track stays continuous and ends on the right pair state
    out.reaches_target =
        out.min_overlap > 0.9 && out.states.col(slices - 1).cwiseAbs2()[2] > 0.9;
    return out;
}

}  // namespace sap::hubbard
