#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sap/busch.hpp"
#include "sap/errors.hpp"
#include "sap/exact.hpp"
#include "sap/hubbard.hpp"
#include "sap/scenario.hpp"
#include "sap/trajectory.hpp"

namespace py = pybind11;
using namespace sap;

namespace {

traj::TrajectoryParams make_traj(double T, double d_max, double d_min, double delay) {
    traj::TrajectoryParams p;
    p.T = T;
    p.d_max = d_max;
    p.d_min = d_min;
    p.delay = delay > 0.0 ? delay : T / 10.0;
    p.validate();
    return p;
}

py::array_t<double> series_array(const std::vector<exact::Sample>& series) {
    py::array_t<double> arr({static_cast<py::ssize_t>(series.size()), py::ssize_t(9)});
    auto view = arr.mutable_unchecked<2>();
    for (py::ssize_t r = 0; r < view.shape(0); ++r) {
        const auto& s = series[static_cast<std::size_t>(r)];
        view(r, 0) = s.t;
        view(r, 1) = s.norm;
        view(r, 2) = s.energy;
        view(r, 3) = s.p_LL;
        view(r, 4) = s.p_MM;
        view(r, 5) = s.p_RR;
        view(r, 6) = s.p_LM;
        view(r, 7) = s.p_LR;
        view(r, 8) = s.p_MR;
    }
    return arr;
}

}  // namespace

PYBIND11_MODULE(_sapsim, m) {
    m.doc() = "spatial adiabatic passage of an interacting boson pair";
    m.attr("__version__") = scenario::kVersion;
    m.attr("SERIES_COLUMNS") =
        py::make_tuple("t", "norm", "energy", "p_LL", "p_MM", "p_RR", "p_LM", "p_LR", "p_MR");

    py::register_exception<config_error>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<numerical_error>(m, "NumericalError", PyExc_RuntimeError);
    py::register_exception<resource_error>(m, "ResourceError", PyExc_OSError);

    m.def("g_from_energy", &busch::g_from_energy, py::arg("E_g"),
          "contact coupling giving relative pair ground energy E_g");
    m.def("energy_from_g", &busch::energy_from_g, py::arg("g"),
          "relative pair ground energy at contact coupling g");

    m.def(
        "trap_positions",
        [](double t, double T, double d_max, double d_min, double delay) {
            const auto lay = traj::positions_at(t, make_traj(T, d_max, d_min, delay));
            return py::make_tuple(lay.d_L, lay.d_M, lay.d_R);
        },
        py::arg("t"), py::arg("T") = 4000.0, py::arg("d_max") = 9.0, py::arg("d_min") = 3.0,
        py::arg("delay") = 0.0, "well centers (d_L, d_M, d_R) at time t; delay <= 0 means T/10");

    m.def(
        "rate_table",
        [](double g) {
            const hubbard::RateTable table(g);
            const int count = static_cast<int>(std::lround((table.d_hi - table.d_lo) /
                                                           table.d_step)) + 1;
            py::array_t<double> arr({py::ssize_t(count), py::ssize_t(4)});
            auto view = arr.mutable_unchecked<2>();
            for (int r = 0; r < count; ++r) {
                const double d = table.d_lo + table.d_step * r;
                view(r, 0) = d;
                view(r, 1) = table.omega0(d);
                view(r, 2) = table.omega1(d);
                view(r, 3) = table.omega_co(d);
            }
            return arr;
        },
        py::arg("g"),
        "columns (d, omega0, omega1, omega_co): ground, excited-band, and pair co-tunneling rates");

    m.def(
        "hubbard_run",
        [](const std::string& statistics, double E_g, bool cotunneling, double T, double dt,
           int sample_stride) {
            const auto model = statistics == "bose"
                                   ? hubbard::HubbardModel::bose(E_g, cotunneling)
                                   : statistics == "fermi"
                                         ? hubbard::HubbardModel::fermi(E_g, cotunneling)
                                         : throw config_error("statistics must be bose or fermi");
            Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(model.dim());
            psi0[0] = 1.0;
            const auto tp = make_traj(T, 9.0, 3.0, 0.0);
            const auto res = hubbard::evolve_hubbard(model, tp, psi0, dt, sample_stride);

            py::array_t<double> times(static_cast<py::ssize_t>(res.times.size()));
            std::copy(res.times.begin(), res.times.end(), times.mutable_data());
            py::array_t<double> pops({static_cast<py::ssize_t>(res.populations.rows()),
                                      static_cast<py::ssize_t>(res.populations.cols())});
            auto view = pops.mutable_unchecked<2>();
            for (py::ssize_t r = 0; r < view.shape(0); ++r)
                for (py::ssize_t c = 0; c < view.shape(1); ++c)
                    view(r, c) = res.populations(r, c);

            py::dict out;
            out["times"] = std::move(times);
            out["populations"] = std::move(pops);
            out["labels"] = model.labels();
            out["norm_drift"] = res.norm_drift;
            return out;
        },
        py::arg("statistics"), py::arg("E_g"), py::arg("cotunneling") = true,
        py::arg("T") = 4000.0, py::arg("dt") = 0.25, py::arg("sample_stride") = 8,
        "three-site Hubbard evolution from both particles on the left site");

    m.def(
        "run_sap",
        [](double g, double T, int n, double x_min, double x_max, double dt,
           const std::string& scheme, int sample_stride) {
            exact::RunConfig cfg;
            cfg.grid.n = n;
            cfg.grid.x_min = x_min;
            cfg.grid.x_max = x_max;
            cfg.traj = make_traj(T, 9.0, 3.0, 0.0);
            cfg.g = g;
            cfg.dt = dt;
            cfg.scheme = exact::scheme_from_name(scheme);
            cfg.sample_stride = sample_stride;
            const auto res = exact::run_sap(cfg);

            py::dict out;
            out["fidelity"] = res.fidelity;
            out["norm_drift"] = res.norm_drift;
            out["symmetry_violation"] = res.symmetry_violation;
            out["steps"] = res.steps;
            out["runtime_seconds"] = res.runtime_seconds;
            out["series"] = series_array(res.series);
            return out;
        },
        py::arg("g"), py::arg("T"), py::arg("n") = 291, py::arg("x_min") = -14.5,
        py::arg("x_max") = 14.5, py::arg("dt") = 0.02, py::arg("scheme") = "crank-nicolson",
        py::arg("sample_stride") = 100,
        "full SAP run of the exact two-particle dynamics; returns fidelity and the sampled series");

    m.def(
        "scenario_hash",
        [](const std::string& config_path, const std::vector<std::string>& overrides) {
            return scenario::scenario_hash(scenario::load_scenario(config_path, overrides));
        },
        py::arg("config_path") = std::string(), py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "validate_scenario",
        [](const std::string& config_path, const std::vector<std::string>& overrides, bool probe) {
            return scenario::validate_report(scenario::load_scenario(config_path, overrides),
                                             probe);
        },
        py::arg("config_path") = std::string(), py::arg("overrides") = std::vector<std::string>{},
        py::arg("probe") = false);

    m.def(
        "run_scenario",
        [](const std::string& config_path, const std::vector<std::string>& overrides,
           const std::string& mode, const std::string& out_dir, int workers) {
            const auto sc = scenario::load_scenario(config_path, overrides, mode);
            const auto ro = scenario::run_scenario(sc, out_dir, workers);
            return ro.outputs;
        },
        py::arg("config_path") = std::string(), py::arg("overrides") = std::vector<std::string>{},
        py::arg("mode") = std::string(), py::arg("out_dir") = std::string("out"),
        py::arg("workers") = 1, "run a scenario and return the list of files written");
}
