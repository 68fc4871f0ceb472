#include "sap/exact.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "sap/errors.hpp"
#include "sap/hamiltonian.hpp"
#include "sap/propagate.hpp"

namespace sap::exact {

Scheme scheme_from_name(const std::string& name) {
    if (name == "crank-nicolson") return Scheme::crank_nicolson;
    if (name == "split-step-fourier") return Scheme::split_step_fourier;
    throw config_error("unknown propagation scheme '" + name + "'");
}

std::string scheme_name(Scheme s) {
    return s == Scheme::crank_nicolson ? "crank-nicolson" : "split-step-fourier";
}

void RunConfig::validate() const {
    grid.validate();
    traj.validate();
    grid.validate_covers(-traj.d_max, traj.d_max);
    if (!(dt > 0.0 && dt <= 0.1)) throw config_error("time step must lie in (0, 0.1]");
    if (sample_stride < 1) throw config_error("sample stride must be positive");
    if (checkpoint_stride < 0) throw config_error("checkpoint stride must be non-negative");
}

long RunConfig::total_steps() const {
    const long s = std::lround(traj.T / dt);
    return s > 0 ? s : 1;
}

double RunConfig::step_size() const { return traj.T / static_cast<double>(total_steps()); }

namespace {

struct RegionSplit {
    double b_lm, b_mr;
    int of(double x) const { return x < b_lm ? 0 : (x < b_mr ? 1 : 2); }
};

RegionSplit regions_at(const traj::TrapLayout& lay) {
    return {0.5 * (lay.d_L + lay.d_M), 0.5 * (lay.d_M + lay.d_R)};
}

Sample sample_tri(const Grid2D& grid, const std::vector<cplx>& psi, double t,
                  const traj::TrapLayout& lay, double g) {
    Sample s{};
    s.t = t;
    const RegionSplit reg = regions_at(lay);
    double p[3][3] = {};
    double nrm2 = 0.0;
    const int n = grid.n;
    std::size_t r = 0;
    for (int i = 0; i < n; ++i) {
        const int ri = reg.of(grid.x(i));
        for (int j = i; j < n; ++j, ++r) {
            const double w = std::norm(psi[r]);
            p[ri][reg.of(grid.x(j))] += w;
            nrm2 += w;
        }
    }
    s.norm = std::sqrt(nrm2);
    TriHamiltonian H(grid, potential_on_axis(grid.axis(), lay), g);
    s.energy = H.expectation(psi);
    s.p_LL = p[0][0];
    s.p_MM = p[1][1];
    s.p_RR = p[2][2];
    s.p_LM = p[0][1] + p[1][0];
    s.p_LR = p[0][2] + p[2][0];
    s.p_MR = p[1][2] + p[2][1];
    return s;
}

Sample sample_full(const Grid2D& grid, const std::vector<cplx>& psi, double t,
                   const traj::TrapLayout& lay, double g) {
    Sample s{};
    s.t = t;
    const RegionSplit reg = regions_at(lay);
    double p[3][3] = {};
    double nrm2 = 0.0;
    const int n = grid.n;
    for (int a = 0; a < n; ++a) {
        const int ra = reg.of(grid.x(a));
        for (int b = 0; b < n; ++b) {
            const double w = std::norm(psi[grid.full_index(a, b)]);
            p[ra][reg.of(grid.x(b))] += w;
            nrm2 += w;
        }
    }
    s.norm = std::sqrt(nrm2);
    FullHamiltonian H(grid, potential_on_axis(grid.axis(), lay), g);
    s.energy = H.expectation(psi);
    s.p_LL = p[0][0];
    s.p_MM = p[1][1];
    s.p_RR = p[2][2];
    s.p_LM = p[0][1] + p[1][0];
    s.p_LR = p[0][2] + p[2][0];
    s.p_MR = p[1][2] + p[2][1];
    return s;
}

}  // namespace

RunResult run_sap(const RunConfig& cfg, const Checkpoint* resume, const CheckpointSink& sink) {
    cfg.validate();
    const auto t_begin = std::chrono::steady_clock::now();
    const long steps = cfg.total_steps();
    const double dt = cfg.step_size();
    const bool tri_rep = cfg.scheme == Scheme::crank_nicolson;
    const std::size_t want = tri_rep ? cfg.grid.tri_size() : cfg.grid.full_size();

    RunResult out;
    long step0 = 0;
    std::vector<cplx> psi;
    if (resume) {
        if (resume->psi.size() != want) throw config_error("checkpoint state does not fit this run");
        if (resume->step < 0 || resume->step > steps) throw config_error("checkpoint step out of range");
        psi = resume->psi;
        step0 = resume->step;
        out.norm_drift = resume->norm_drift;
        out.symmetry_violation = resume->symmetry_violation;
        out.series = resume->series;
    } else {
        const auto lay0 = traj::positions_at(0.0, cfg.traj);
        const auto pair0 = busch::pair_ground_state(cfg.g, lay0.d_L, cfg.grid);
        const auto tri0 = busch::embed(pair0, cfg.grid);
        if (tri_rep) {
            psi.assign(tri0.begin(), tri0.end());
        } else {
            tri_to_full(cfg.grid, tri0, psi);
        }
        out.series.push_back(tri_rep
                                 ? sample_tri(cfg.grid, psi, 0.0, lay0, cfg.g)
                                 : sample_full(cfg.grid, psi, 0.0, lay0, cfg.g));
    }

    CrankNicolson cn(cfg.grid, cfg.g, dt, cfg.solver_tol);
    std::optional<SplitStep> ss;
    if (!tri_rep) ss.emplace(cfg.grid, cfg.g, dt);

    const auto axis = cfg.grid.axis();
    double norm_guard_ref = 1.0;  // norm at the start of the running 1000-step window
    long norm_guard_step = step0;

    for (long s = step0; s < steps; ++s) {
        const double t_mid = (static_cast<double>(s) + 0.5) * dt;
        const auto v_mid = potential_on_axis(axis, traj::positions_at(t_mid, cfg.traj));
        if (tri_rep) {
            cn.step(v_mid, psi);
        } else {
            ss->step(v_mid, psi);
        }
        const long done = s + 1;
        const bool at_sample = done % cfg.sample_stride == 0 || done == steps;
        if (at_sample) {
            const double t_now = static_cast<double>(done) * dt;
            const auto lay = traj::positions_at(t_now, cfg.traj);
            Sample smp = tri_rep ? sample_tri(cfg.grid, psi, t_now, lay, cfg.g)
                                 : sample_full(cfg.grid, psi, t_now, lay, cfg.g);
            out.series.push_back(smp);
            out.norm_drift = std::max(out.norm_drift, std::abs(smp.norm - 1.0));
            if (!tri_rep)
                out.symmetry_violation =
                    std::max(out.symmetry_violation, symmetry_violation(cfg.grid, psi));

            const double rate = std::abs(smp.norm - norm_guard_ref) /
                                static_cast<double>(done - norm_guard_step) * 1000.0;
            if (done - norm_guard_step >= 1000) {
                if (rate > 1e-6) {
                    std::ostringstream os;
                    os << "norm drifts " << rate << " per 1000 steps at t=" << t_now
                       << "; the step size is unstable for this grid";
                    throw numerical_error(os.str());
                }
                norm_guard_ref = smp.norm;
                norm_guard_step = done;
            }
        }
        if (sink && cfg.checkpoint_stride > 0 &&
            (done % cfg.checkpoint_stride == 0 || done == steps)) {
            Checkpoint ck;
            ck.step = done;
            ck.psi = psi;
            ck.norm_drift = out.norm_drift;
            ck.symmetry_violation = out.symmetry_violation;
            ck.series = out.series;
            sink(ck);
        }
    }

    const auto lay_end = traj::positions_at(cfg.traj.T, cfg.traj);
    const auto target = busch::pair_ground_state(cfg.g, lay_end.d_R, cfg.grid);
    cplx ov;
    if (tri_rep) {
        ov = busch::overlap(target, psi);
    } else {
        std::vector<cplx> tri;
        full_to_tri(cfg.grid, psi, tri);
        ov = busch::overlap(target, tri);
    }
    out.fidelity = std::norm(ov);
    out.psi = std::move(psi);
    out.steps = steps;
    out.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    return out;
}

StaticReport run_static(const Grid2D& grid, const traj::TrapLayout& layout, double g,
                        double center, double dt, long steps, Scheme scheme) {
    StaticReport rep;
    const auto pair = busch::pair_ground_state(g, center, grid);
    const auto tri0 = busch::embed(pair, grid);
    const auto v = potential_on_axis(grid.axis(), layout);
    if (scheme == Scheme::crank_nicolson) {
        std::vector<cplx> psi(tri0.begin(), tri0.end());
        TriHamiltonian H(grid, v, g);
        const double e0 = H.expectation(psi);
        CrankNicolson cn(grid, g, dt);
        for (long s = 0; s < steps; ++s) {
            cn.step(v, psi);
            if ((s + 1) % 100 == 0 || s + 1 == steps) {
                rep.norm_drift = std::max(rep.norm_drift, std::abs(norm2(psi) - 1.0));
                rep.energy_drift = std::max(rep.energy_drift, std::abs(H.expectation(psi) - e0));
            }
        }
    } else {
        std::vector<cplx> psi;
        tri_to_full(grid, tri0, psi);
        FullHamiltonian H(grid, v, g);
        const double e0 = H.expectation(psi);
        SplitStep ss(grid, g, dt);
        for (long s = 0; s < steps; ++s) {
            ss.step(v, psi);
            if ((s + 1) % 100 == 0 || s + 1 == steps) {
                double nrm = 0.0;
                for (const auto& z : psi) nrm += std::norm(z);
                rep.norm_drift = std::max(rep.norm_drift, std::abs(std::sqrt(nrm) - 1.0));
                rep.energy_drift = std::max(rep.energy_drift, std::abs(H.expectation(psi) - e0));
                rep.symmetry_violation = std::max(rep.symmetry_violation, symmetry_violation(grid, psi));
            }
        }
    }
    return rep;
}

}  // namespace sap::exact
