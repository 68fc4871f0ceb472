#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "sap/busch.hpp"
#include "sap/exact.hpp"
#include "sap/hamiltonian.hpp"
#include "sap/propagate.hpp"
#include "sap/trajectory.hpp"

using namespace sap;
using exact::cplx;

namespace {

// small protocol that fits a narrow test domain
traj::TrajectoryParams small_protocol(double T) {
    traj::TrajectoryParams p;
    p.T = T;
    p.d_max = 5.0;
    p.d_min = 2.0;
    p.delay = T / 10.0;
    return p;
}

}  // namespace

TEST_CASE("frozen-trap conservation, implicit scheme") {
    const Grid2D grid{-14.5, 14.5, 128};
    const double g = busch::g_from_energy(1.25);
    const auto rep = exact::run_static(grid, {-9.0, 0.0, 9.0}, g, -9.0, 0.05, 200,
                                       exact::Scheme::crank_nicolson);
    CHECK(rep.norm_drift < 1e-10);
    CHECK(rep.energy_drift < 1e-8);
    CHECK(rep.symmetry_violation < 1e-12);
}

TEST_CASE("frozen-trap conservation, split-step scheme") {
    const Grid2D grid{-14.5, 14.5, 128};
    const double g = busch::g_from_energy(1.25);
    // below the contact aliasing threshold 0.9 * 2 h^2 / pi
    const auto rep = exact::run_static(grid, {-9.0, 0.0, 9.0}, g, -9.0, 0.02, 200,
                                       exact::Scheme::split_step_fourier);
    CHECK(rep.norm_drift < 1e-12);
    CHECK(rep.energy_drift < 1e-6);
    CHECK(rep.symmetry_violation < 1e-12);
}

TEST_CASE("split-step refuses aliased interacting steps") {
    const Grid2D grid{-14.5, 14.5, 128};
    const double limit = 0.9 * 2.0 * grid.h() * grid.h() / std::numbers::pi;
    CHECK_THROWS_AS(exact::SplitStep(grid, 1.0, 2.0 * limit), numerical_error);
    CHECK_NOTHROW(exact::SplitStep(grid, 0.0, 2.0 * limit));  // free case is exact
    CHECK_NOTHROW(exact::SplitStep(grid, 1.0, 0.5 * limit));
}

TEST_CASE("implicit and split-step schemes agree on a moving trap") {
    const Grid2D grid{-10.0, 10.0, 96};
    const auto p = small_protocol(20.0);
    const double g = busch::g_from_energy(1.25);
    const double dt = 0.02;
    const long steps = std::lround(p.T / dt);

    const auto pair = busch::pair_ground_state(g, -p.d_max, grid, 5.0, 4.0);
    const auto tri0 = busch::embed(pair, grid);
    std::vector<cplx> psi_cn(tri0.begin(), tri0.end());
    std::vector<cplx> psi_ss;
    exact::tri_to_full(grid, psi_cn, psi_ss);

    exact::CrankNicolson cn(grid, g, dt);
    exact::SplitStep ss(grid, g, dt);
    std::vector<double> v;
    for (long k = 0; k < steps; ++k) {
        const auto lay = traj::positions_at((k + 0.5) * dt, p);
        v = exact::potential_on_axis(grid.axis(), lay);
        cn.step(v, psi_cn);
        ss.step(v, psi_ss);
    }

    std::vector<cplx> ss_tri;
    exact::full_to_tri(grid, psi_ss, ss_tri);
    const double ov = std::abs(exact::dot(psi_cn, ss_tri));
    CHECK(ov * ov > 1.0 - 1e-4);
    CHECK(exact::norm2(psi_cn) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(exact::norm2(psi_ss) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("implicit solve reports a stall instead of silently degrading") {
    const Grid2D grid{-10.0, 10.0, 96};
    exact::CrankNicolson cn(grid, 1.0, 0.05, 1e-13, 1);
    const auto pair = busch::pair_ground_state(0.0, 0.0, grid, 5.0, 4.0);
    const auto tri0 = busch::embed(pair, grid);
    std::vector<cplx> psi(tri0.begin(), tri0.end());
    const auto v = exact::potential_on_axis(grid.axis(), {-5.0, 0.0, 5.0});
    CHECK_THROWS_AS(cn.step(v, psi), numerical_error);
}

TEST_CASE("full protocol run reports sane series and monitors") {
    exact::RunConfig cfg;
    cfg.grid = {-10.0, 10.0, 96};
    cfg.traj = small_protocol(30.0);
    cfg.g = 0.0;
    cfg.dt = 0.03;
    cfg.sample_stride = 100;
    const auto res = exact::run_sap(cfg);

    CHECK(res.steps == 1000);
    CHECK(res.norm_drift < 1e-8);
    CHECK(res.symmetry_violation < 1e-10);
    CHECK(res.fidelity >= 0.0);
    CHECK(res.fidelity <= 1.0);
    REQUIRE(!res.series.empty());
    // initial sample: normalized, all weight in the left region
    CHECK(res.series.front().t == doctest::Approx(0.0));
    CHECK(res.series.front().norm == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(res.series.front().p_LL > 0.99);
    CHECK(res.series.back().t == doctest::Approx(cfg.traj.T).epsilon(1e-12));
    for (const auto& s : res.series) {
        const double tot = s.p_LL + s.p_MM + s.p_RR + s.p_LM + s.p_LR + s.p_MR;
        CHECK(tot == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("a resumed run reproduces the uninterrupted result") {
    exact::RunConfig cfg;
    cfg.grid = {-10.0, 10.0, 96};
    cfg.traj = small_protocol(12.0);
    cfg.g = busch::g_from_energy(1.25);
    cfg.dt = 0.03;
    cfg.checkpoint_stride = 150;

    std::vector<exact::Checkpoint> cks;
    const auto full = exact::run_sap(cfg, nullptr, [&](const exact::Checkpoint& c) {
        cks.push_back(c);
    });
    REQUIRE(!cks.empty());
    CHECK(cks.front().step == 150);

    const auto resumed = exact::run_sap(cfg, &cks.front());
    CHECK(resumed.steps == full.steps);
    CHECK(std::abs(resumed.fidelity - full.fidelity) < 1e-9);
    REQUIRE(resumed.psi.size() == full.psi.size());
    double max_diff = 0.0;
    for (std::size_t i = 0; i < full.psi.size(); ++i)
        max_diff = std::max(max_diff, std::abs(full.psi[i] - resumed.psi[i]));
    CHECK(max_diff < 1e-8);
    // series entries before the checkpoint are carried over verbatim
    CHECK(resumed.series.size() == full.series.size());
}

TEST_CASE("run config validation") {
    exact::RunConfig cfg;
    cfg.grid = {-10.0, 10.0, 96};
    cfg.traj = small_protocol(10.0);
    CHECK_NOTHROW(cfg.validate());
    auto bad = cfg;
    bad.dt = 0.0;
    CHECK_THROWS_AS(bad.validate(), config_error);
    bad = cfg;
    bad.dt = 0.2;  // above the documented 0.1 ceiling
    CHECK_THROWS_AS(bad.validate(), config_error);
    bad = cfg;
    bad.sample_stride = 0;
    CHECK_THROWS_AS(bad.validate(), config_error);
    bad = cfg;
    bad.checkpoint_stride = -1;
    CHECK_THROWS_AS(bad.validate(), config_error);
    bad = cfg;
    bad.grid = {-5.0, 5.0, 64};  // margin around the +-5 traps is zero
    CHECK_THROWS_AS(bad.validate(), config_error);
}

TEST_CASE("scheme names round-trip") {
    using exact::Scheme;
    CHECK(exact::scheme_from_name("crank-nicolson") == Scheme::crank_nicolson);
    CHECK(exact::scheme_from_name("split-step-fourier") == Scheme::split_step_fourier);
    CHECK(exact::scheme_name(Scheme::crank_nicolson) == "crank-nicolson");
    CHECK(exact::scheme_name(Scheme::split_step_fourier) == "split-step-fourier");
    CHECK_THROWS_AS(exact::scheme_from_name("verlet"), config_error);
}
