#include "sap/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sap/hubbard.hpp"
#include "sap/spectral.hpp"

namespace sap::scenario {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- utilities

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

class CsvFile {
  public:
    CsvFile(const fs::path& path, const std::string& header) : out_(path) {
        if (!out_) throw resource_error("cannot open " + path.string() + " for writing");
        out_ << header << '\n';
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }
    void close() {
        out_.close();
        if (!out_) throw resource_error("short write while closing a CSV output");
    }

  private:
    std::ofstream out_;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw resource_error("cannot open " + path.string() + " for writing");
    out << text;
    out.close();
    if (!out) throw resource_error("short write to " + path.string());
}

// ------------------------------------------------------------ config schema

json default_config() {
    return json{
        {"mode", "trajectory"},
        {"physics",
         {{"E_g", 1.25},
          {"T", 4000.0},
          {"d_max", 9.0},
          {"d_min", 3.0},
          {"delay", nullptr},
          {"ramp", "raised-cosine"}}},
        {"grid", {{"n", 291}, {"x_min", -14.5}, {"x_max", 14.5}}},
        {"numerics",
         {{"dt", 0.02},
          {"scheme", "crank-nicolson"},
          {"solver_tol", 1e-11},
          {"hubbard_dt", 0.25},
          {"eigensolver",
           {{"k", 12},
            {"block", 20},
            {"cheb_degree", 20},
            {"max_cycles", 80},
            {"tol", 1e-6},
            {"seed", 0x5eed}}},
          {"slices", 81},
          {"gap_threshold", 0.02},
          {"deg_tol", 1e-6},
          {"p_tol", 1e-3},
          {"max_refine_rounds", 10}}},
        {"flags", {{"model", "exact"}, {"cotunneling", true}}},
        {"sweep", {{"E_g", json::array()}, {"durations", json::array()}}},
        {"output",
         {{"sample_stride", 100},
          {"hubbard_sample_stride", 8},
          {"checkpoint_stride", 0},
          {"trajectory_samples", 2001}}},
    };
}

// merge `patch` over `base` recursively, rejecting keys absent from the schema
void merge_checked(json& base, const json& patch, const std::string& path) {
    if (!patch.is_object())
        throw config_error("config: expected an object at '" + (path.empty() ? "." : path) + "'");
    for (const auto& [key, value] : patch.items()) {
        const std::string here = path.empty() ? key : path + "." + key;
        const auto it = base.find(key);
        if (it == base.end()) throw config_error("config: unknown key '" + here + "'");
        if (it->is_object() && !it->empty() && !value.is_null())
            merge_checked(*it, value, here);
        else
            *it = value;
    }
}

void apply_override(json& cfg, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        throw config_error("override '" + spec + "' is not of the form key=value");
    const std::string keypath = spec.substr(0, eq);
    const std::string raw = spec.substr(eq + 1);
    json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded()) value = raw;  // bare words are strings

    json* node = &cfg;
    std::size_t pos = 0;
    std::string walked;
    while (true) {
        const auto dot = keypath.find('.', pos);
        const std::string key = keypath.substr(pos, dot - pos);
        if (key.empty()) throw config_error("override '" + spec + "' has an empty key segment");
        walked = walked.empty() ? key : walked + "." + key;
        const auto it = node->find(key);
        if (it == node->end()) throw config_error("config: unknown key '" + walked + "'");
        if (dot == std::string::npos) {
            if (it->is_object() && !it->empty() && !value.is_null())
                throw config_error("override '" + walked + "' addresses a section, not a value");
            *it = value;
            return;
        }
        if (!it->is_object())
            throw config_error("override '" + walked + "' descends into a plain value");
        node = &*it;
        pos = dot + 1;
    }
}

template <typename T>
T get_as(const json& section, const std::string& key, const std::string& path) {
    try {
        return section.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error("config: bad value for '" + path + "'");
    }
}

std::vector<double> number_list(const json& node, const std::string& path) {
    std::vector<double> out;
    if (node.is_null()) return out;
    if (node.is_array()) {
        for (const auto& v : node) {
            if (!v.is_number()) throw config_error("config: '" + path + "' must hold numbers");
            out.push_back(v.get<double>());
        }
        return out;
    }
    if (node.is_object()) {
        for (const auto& [k, v] : node.items())
            if (k != "from" && k != "to" && k != "step")
                throw config_error("config: unknown key '" + path + "." + k + "'");
        const double from = get_as<double>(node, "from", path + ".from");
        const double to = get_as<double>(node, "to", path + ".to");
        const double step = get_as<double>(node, "step", path + ".step");
        if (!(step > 0.0) || to < from)
            throw config_error("config: '" + path + "' needs step > 0 and to >= from");
        for (double v = from; v <= to + 0.5 * step; v += step) out.push_back(v);
        return out;
    }
    throw config_error("config: '" + path + "' must be an array or {from,to,step}");
}

Scenario scenario_from_json(const json& cfg, const std::string& mode_override) {
    Scenario sc;
    sc.mode = mode_from_name(mode_override.empty() ? get_as<std::string>(cfg, "mode", "mode")
                                                   : mode_override);

    const json& ph = cfg.at("physics");
    const json& eg = ph.at("E_g");
    const json& gj = ph.at("g");
    if (eg.is_null() == gj.is_null())
        throw config_error("config: give exactly one of physics.E_g and physics.g");
    sc.ip = eg.is_null() ? busch::point_from_g(get_as<double>(ph, "g", "physics.g"))
                         : busch::point_from_energy(get_as<double>(ph, "E_g", "physics.E_g"));

    sc.traj.T = get_as<double>(ph, "T", "physics.T");
    sc.traj.d_max = get_as<double>(ph, "d_max", "physics.d_max");
    sc.traj.d_min = get_as<double>(ph, "d_min", "physics.d_min");
    sc.traj.ramp = get_as<std::string>(ph, "ramp", "physics.ramp");
    if (ph.at("delay").is_null()) {
        sc.traj.delay = sc.traj.T / 10.0;
        sc.explicit_delay = false;
    } else {
        sc.traj.delay = get_as<double>(ph, "delay", "physics.delay");
        sc.explicit_delay = true;
    }
    sc.traj.validate();

    const json& gr = cfg.at("grid");
    sc.grid.n = get_as<int>(gr, "n", "grid.n");
    sc.grid.x_min = get_as<double>(gr, "x_min", "grid.x_min");
    sc.grid.x_max = get_as<double>(gr, "x_max", "grid.x_max");
    sc.grid.validate();
    sc.grid.validate_covers(-sc.traj.d_max, sc.traj.d_max);

    const json& nu = cfg.at("numerics");
    sc.dt = get_as<double>(nu, "dt", "numerics.dt");
    sc.scheme = exact::scheme_from_name(get_as<std::string>(nu, "scheme", "numerics.scheme"));
    sc.solver_tol = get_as<double>(nu, "solver_tol", "numerics.solver_tol");
    sc.hubbard_dt = get_as<double>(nu, "hubbard_dt", "numerics.hubbard_dt");
    if (!(sc.dt > 0.0 && sc.hubbard_dt > 0.0))
        throw config_error("config: time steps must be positive");
    if (!(sc.solver_tol > 0.0)) throw config_error("config: numerics.solver_tol must be positive");

    const json& ei = nu.at("eigensolver");
    sc.eig.k = get_as<int>(ei, "k", "numerics.eigensolver.k");
    sc.eig.block = get_as<int>(ei, "block", "numerics.eigensolver.block");
    sc.eig.cheb_degree = get_as<int>(ei, "cheb_degree", "numerics.eigensolver.cheb_degree");
    sc.eig.max_cycles = get_as<int>(ei, "max_cycles", "numerics.eigensolver.max_cycles");
    sc.eig.tol = get_as<double>(ei, "tol", "numerics.eigensolver.tol");
    sc.eig.seed = get_as<unsigned>(ei, "seed", "numerics.eigensolver.seed");
    if (sc.eig.k < 1 || sc.eig.block < sc.eig.k)
        throw config_error("config: eigensolver needs k >= 1 and block >= k");

    sc.slices = get_as<int>(nu, "slices", "numerics.slices");
    sc.gap_threshold = get_as<double>(nu, "gap_threshold", "numerics.gap_threshold");
    sc.deg_tol = get_as<double>(nu, "deg_tol", "numerics.deg_tol");
    sc.p_tol = get_as<double>(nu, "p_tol", "numerics.p_tol");
    sc.max_refine_rounds = get_as<int>(nu, "max_refine_rounds", "numerics.max_refine_rounds");
    if (sc.slices < 2) throw config_error("config: numerics.slices must be at least 2");
    if (!(sc.gap_threshold > 0.0)) throw config_error("config: gap_threshold must be positive");

    const json& fl = cfg.at("flags");
    sc.model = model_from_name(get_as<std::string>(fl, "model", "flags.model"));
    sc.cotunneling = get_as<bool>(fl, "cotunneling", "flags.cotunneling");

    const json& sw = cfg.at("sweep");
    sc.sweep_eg = number_list(sw.at("E_g"), "sweep.E_g");
    sc.durations = number_list(sw.at("durations"), "sweep.durations");
    for (const double e : sc.sweep_eg)
        if (!(e > 0.0 && e < 2.0))
            throw config_error("config: sweep.E_g values must lie in (0, 2)");
    for (const double t : sc.durations)
        if (!(t > 0.0)) throw config_error("config: sweep.durations must be positive");
    if (sc.explicit_delay && sc.durations.size() > 1)
        throw config_error("config: an explicit delay cannot combine with multiple durations");

    const json& ou = cfg.at("output");
    sc.sample_stride = get_as<int>(ou, "sample_stride", "output.sample_stride");
    sc.hubbard_sample_stride =
        get_as<int>(ou, "hubbard_sample_stride", "output.hubbard_sample_stride");
    sc.checkpoint_stride = get_as<int>(ou, "checkpoint_stride", "output.checkpoint_stride");
    sc.trajectory_samples = get_as<int>(ou, "trajectory_samples", "output.trajectory_samples");
    if (sc.sample_stride < 1 || sc.hubbard_sample_stride < 1)
        throw config_error("config: sample strides must be at least 1");
    if (sc.checkpoint_stride < 0) throw config_error("config: checkpoint_stride must be >= 0");
    if (sc.trajectory_samples < 2)
        throw config_error("config: trajectory_samples must be at least 2");

    if (sc.mode == Mode::hubbard_run && sc.model == Model::exact)
        throw config_error("hubbard-run needs flags.model = bose or fermi");

    return sc;
}

json echo_json(const Scenario& sc) {
    return json{
        {"mode", mode_name(sc.mode)},
        {"code_version", kVersion},
        {"physics",
         {{"E_g", sc.ip.E_g},
          {"g", sc.ip.g},
          {"T", sc.traj.T},
          {"d_max", sc.traj.d_max},
          {"d_min", sc.traj.d_min},
          {"delay", sc.traj.delay},
          {"explicit_delay", sc.explicit_delay},
          {"ramp", sc.traj.ramp}}},
        {"grid", {{"n", sc.grid.n}, {"x_min", sc.grid.x_min}, {"x_max", sc.grid.x_max}}},
        {"numerics",
         {{"dt", sc.dt},
          {"scheme", exact::scheme_name(sc.scheme)},
          {"solver_tol", sc.solver_tol},
          {"hubbard_dt", sc.hubbard_dt},
          {"eigensolver",
           {{"k", sc.eig.k},
            {"block", sc.eig.block},
            {"cheb_degree", sc.eig.cheb_degree},
            {"max_cycles", sc.eig.max_cycles},
            {"tol", sc.eig.tol},
            {"seed", sc.eig.seed}}},
          {"slices", sc.slices},
          {"gap_threshold", sc.gap_threshold},
          {"deg_tol", sc.deg_tol},
          {"p_tol", sc.p_tol},
          {"max_refine_rounds", sc.max_refine_rounds}}},
        {"flags", {{"model", model_name(sc.model)}, {"cotunneling", sc.cotunneling}}},
        {"sweep", {{"E_g", sc.sweep_eg}, {"durations", sc.durations}}},
        {"output",
         {{"sample_stride", sc.sample_stride},
          {"hubbard_sample_stride", sc.hubbard_sample_stride},
          {"checkpoint_stride", sc.checkpoint_stride},
          {"trajectory_samples", sc.trajectory_samples}}},
    };
}

// ------------------------------------------------------------- mode helpers

spectral::SliceFn make_slice_fn(const Scenario& sc) {
    switch (sc.model) {
        case Model::exact:
            return spectral::exact_slice_fn(sc.grid, sc.traj, sc.ip.g, sc.eig);
        case Model::bose:
            return spectral::hubbard_slice_fn(hubbard::HubbardModel::bose(sc.ip.E_g, sc.cotunneling),
                                              sc.traj);
        case Model::fermi:
            return spectral::hubbard_slice_fn(
                hubbard::HubbardModel::fermi(sc.ip.E_g, sc.cotunneling), sc.traj);
    }
    throw config_error("unreachable model");
}

std::vector<double> band_anchors(const Scenario& sc) {
    switch (sc.model) {
        case Model::exact:
            return {1.0, sc.ip.E_g, 2.0};
        case Model::bose:
            return {1.0, sc.ip.E_g};
        case Model::fermi:
            return {sc.ip.E_g, 2.0};
    }
    return {};
}

// the state carried through the protocol: both particles in the left well,
// snapped onto the slice-0 eigenspace it overlaps most
Eigen::VectorXd transfer_anchor(const Scenario& sc, const spectral::SliceFn& fn,
                                const spectral::EigenSlice* first) {
    Eigen::VectorXd seed;
    if (sc.model == Model::exact) {
        const auto layout0 = traj::positions_at(0.0, sc.traj);
        const auto pair = busch::pair_ground_state(sc.ip.g, layout0.d_L, sc.grid);
        const auto tri = busch::embed(pair, sc.grid);
        seed = Eigen::Map<const Eigen::VectorXd>(tri.data(), static_cast<Eigen::Index>(tri.size()));
    } else {
        seed = Eigen::VectorXd::Zero(sc.model == Model::bose ? 6 : 9);
        seed[0] = 1.0;
    }
    std::vector<spectral::EigenSlice> one{first != nullptr ? *first : fn(0.0, nullptr)};
    return spectral::follow_state(one, seed, sc.deg_tol).states.col(0);
}

json events_json(const Scenario& sc, const spectral::SpectralFlow& flow,
                 const spectral::FollowedState& dark, int dark_track,
                 const std::vector<spectral::CrossingEvent>& events) {
    json ev_list = json::array();
    for (const auto& ev : events)
        ev_list.push_back(json{{"partner_track", ev.track_j},
                               {"s_c", ev.s_c},
                               {"t_c", ev.s_c * sc.traj.T},
                               {"gap", ev.gap},
                               {"s_a", ev.s_a},
                               {"s_b", ev.s_b}});
    return json{{"dark_track", dark_track},
                {"band_of", flow.band_of},
                {"min_overlap", dark.min_overlap},
                {"ambiguous_events", flow.ambiguous_events},
                {"events", std::move(ev_list)}};
}

void write_flow_csv(const fs::path& path, const Scenario& sc, const spectral::SpectralFlow& flow) {
    std::string header = "t";
    for (int t = 0; t < flow.track_count(); ++t) header += ",E" + std::to_string(t);
    CsvFile csv(path, header);
    std::vector<std::string> cells(static_cast<std::size_t>(flow.track_count()) + 1);
    for (int m = 0; m < flow.slice_count(); ++m) {
        cells[0] = fmt(flow.s[static_cast<std::size_t>(m)] * sc.traj.T);
        for (int t = 0; t < flow.track_count(); ++t)
            cells[static_cast<std::size_t>(t) + 1] = fmt(flow.energies(t, m));
        csv.row(cells);
    }
    csv.close();
}

// ----------------------------------------------------------- checkpointing

constexpr char kCkptMagic[8] = {'S', 'A', 'P', 'C', 'K', 'P', 'T', '1'};

struct CellSpec {
    std::size_t index;
    double E_g, g, T;
};

void write_checkpoint(const fs::path& bin_path, const Scenario& sc, const CellSpec& cell,
                      const std::string& hash, const exact::Checkpoint& ck) {
    const fs::path tmp = bin_path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw resource_error("cannot open " + tmp.string() + " for writing");
        const auto put = [&out](const void* p, std::size_t bytes) {
            out.write(static_cast<const char*>(p), static_cast<std::streamsize>(bytes));
        };
        put(kCkptMagic, sizeof kCkptMagic);
        const std::int32_t n = sc.grid.n;
        put(&n, sizeof n);
        put(&sc.grid.x_min, sizeof(double));
        put(&sc.grid.x_max, sizeof(double));
        put(&cell.g, sizeof(double));
        const std::int64_t step = ck.step;
        put(&step, sizeof step);
        put(&ck.norm_drift, sizeof(double));
        put(&ck.symmetry_violation, sizeof(double));
        const std::uint64_t n_samples = ck.series.size();
        put(&n_samples, sizeof n_samples);
        put(ck.series.data(), n_samples * sizeof(exact::Sample));
        const std::uint64_t n_psi = ck.psi.size();
        put(&n_psi, sizeof n_psi);
        put(ck.psi.data(), n_psi * sizeof(std::complex<double>));
        out.close();
        if (!out) throw resource_error("short write to " + tmp.string());
    }
    fs::rename(tmp, bin_path);

    json sidecar{{"code_version", kVersion},
                 {"scenario_hash", hash},
                 {"cell_index", cell.index},
                 {"E_g", cell.E_g},
                 {"g", cell.g},
                 {"T", cell.T},
                 {"scheme", exact::scheme_name(sc.scheme)},
                 {"dt", sc.dt},
                 {"h", sc.grid.h()},
                 {"step", ck.step},
                 {"trajectory",
                  {{"T", cell.T},
                   {"d_max", sc.traj.d_max},
                   {"d_min", sc.traj.d_min},
                   {"delay", sc.explicit_delay ? sc.traj.delay : cell.T / 10.0},
                   {"ramp", sc.traj.ramp}}},
                 {"data_file", bin_path.filename().string()}};
    write_text(bin_path.string() + ".json", sidecar.dump(2) + "\n");
}

bool read_checkpoint(const fs::path& bin_path, const Scenario& sc, const CellSpec& cell,
                     const std::string& hash, exact::Checkpoint& ck) {
    std::ifstream side(bin_path.string() + ".json");
    if (!side) return false;
    json sidecar = json::parse(side, nullptr, /*allow_exceptions=*/false);
    if (sidecar.is_discarded()) return false;
    if (sidecar.value("scenario_hash", "") != hash ||
        sidecar.value("cell_index", std::size_t(-1)) != cell.index)
        return false;

    std::ifstream in(bin_path, std::ios::binary);
    if (!in) return false;
    const auto get = [&in](void* p, std::size_t bytes) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(bytes));
        return static_cast<bool>(in);
    };
    char magic[8];
    std::int32_t n = 0;
    double x_min = 0, x_max = 0, g = 0;
    if (!get(magic, 8) || std::memcmp(magic, kCkptMagic, 8) != 0) return false;
    if (!get(&n, sizeof n) || !get(&x_min, sizeof x_min) || !get(&x_max, sizeof x_max) ||
        !get(&g, sizeof g))
        return false;
    if (n != sc.grid.n || x_min != sc.grid.x_min || x_max != sc.grid.x_max || g != cell.g)
        return false;
    std::int64_t step = 0;
    std::uint64_t n_samples = 0, n_psi = 0;
    if (!get(&step, sizeof step) || !get(&ck.norm_drift, sizeof(double)) ||
        !get(&ck.symmetry_violation, sizeof(double)) || !get(&n_samples, sizeof n_samples))
        return false;
    ck.series.resize(n_samples);
    if (!get(ck.series.data(), n_samples * sizeof(exact::Sample))) return false;
    if (!get(&n_psi, sizeof n_psi)) return false;
    if (n_psi != sc.grid.tri_size()) return false;
    ck.psi.resize(n_psi);
    if (!get(ck.psi.data(), n_psi * sizeof(std::complex<double>))) return false;
    ck.step = step;
    return true;
}

// ------------------------------------------------------------------- modes

json run_trajectory(const Scenario& sc, const fs::path& dir, RunOutcome& ro) {
    CsvFile csv(dir / "trajectory.csv", "t,d_L,d_M,d_R");
    const int N = sc.trajectory_samples;
    for (int i = 0; i < N; ++i) {
        const double t = sc.traj.T * static_cast<double>(i) / static_cast<double>(N - 1);
        const auto lay = traj::positions_at(t, sc.traj);
        csv.row({fmt(t), fmt(lay.d_L), fmt(lay.d_M), fmt(lay.d_R)});
    }
    csv.close();
    ro.outputs.push_back("trajectory.csv");
    return json{{"samples", N}};
}

json run_rates(const Scenario& sc, const fs::path& dir, RunOutcome& ro) {
    const hubbard::RateTable table(sc.ip.g);
    std::ofstream out(dir / "rates.csv");
    if (!out) throw resource_error("cannot open rates.csv for writing");
    table.write_csv(out);
    out.close();
    if (!out) throw resource_error("short write to rates.csv");
    ro.outputs.push_back("rates.csv");
    return json{{"omega0_at_closest", table.omega0(sc.traj.d_min)},
                {"omega1_at_closest", table.omega1(sc.traj.d_min)},
                {"omega_co_at_closest", table.omega_co(sc.traj.d_min)}};
}

json run_spectrum(const Scenario& sc, const fs::path& dir, RunOutcome& ro) {
    const auto fn = make_slice_fn(sc);
    const auto slices = spectral::solve_slices(fn, sc.slices);
    const auto flow = spectral::track_bands(slices, band_anchors(sc));
    const auto anchor = transfer_anchor(sc, fn, &slices.front());
    const auto dark = spectral::follow_state(slices, anchor, sc.deg_tol);
    const int dark_track = spectral::identify_track(flow, dark);
    const auto events = spectral::detect_crossings(flow, dark_track, sc.gap_threshold);

    write_flow_csv(dir / "spectrum.csv", sc, flow);
    ro.outputs.push_back("spectrum.csv");
    write_text(dir / "crossings.json",
               events_json(sc, flow, dark, dark_track, events).dump(2) + "\n");
    ro.outputs.push_back("crossings.json");
    return json{{"slices", flow.slice_count()},
                {"tracks", flow.track_count()},
                {"ambiguous_events", flow.ambiguous_events},
                {"dark_track", dark_track},
                {"min_overlap", dark.min_overlap},
                {"crossings", events.size()}};
}

json run_hubbard(const Scenario& sc, const fs::path& dir, RunOutcome& ro) {
    const auto model = sc.model == Model::bose
                           ? hubbard::HubbardModel::bose(sc.ip.E_g, sc.cotunneling)
                           : hubbard::HubbardModel::fermi(sc.ip.E_g, sc.cotunneling);
    Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(model.dim());
    psi0[0] = 1.0;  // both particles on the left site
    const auto res =
        hubbard::evolve_hubbard(model, sc.traj, psi0, sc.hubbard_dt, sc.hubbard_sample_stride);

    std::string header = "t";
    for (const auto& label : model.labels()) header += "," + label;
    CsvFile csv(dir / "populations.csv", header);
    std::vector<std::string> cells(static_cast<std::size_t>(model.dim()) + 1);
    for (std::size_t i = 0; i < res.times.size(); ++i) {
        cells[0] = fmt(res.times[i]);
        for (int b = 0; b < model.dim(); ++b)
            cells[static_cast<std::size_t>(b) + 1] =
                fmt(res.populations(static_cast<Eigen::Index>(i), b));
        csv.row(cells);
    }
    csv.close();
    ro.outputs.push_back("populations.csv");

    const auto track = hubbard::dark_state_track(model, sc.traj, sc.slices);
    json final_pops = json::object();
    const auto labels = model.labels();
    for (int b = 0; b < model.dim(); ++b)
        final_pops[labels[static_cast<std::size_t>(b)]] =
            res.populations(static_cast<Eigen::Index>(res.times.size()) - 1, b);
    return json{{"norm_drift", res.norm_drift},
                {"final_populations", std::move(final_pops)},
                {"dark_track",
                 {{"min_overlap", track.min_overlap},
                  {"reaches_target", track.reaches_target},
                  {"ambiguous_events", track.ambiguous_events}}}};
}

json run_sweep(const Scenario& sc, const fs::path& dir, int workers, const std::string& hash,
               RunOutcome& ro) {
    const std::vector<double> egs = sc.sweep_eg.empty() ? std::vector<double>{sc.ip.E_g}
                                                        : sc.sweep_eg;
    const std::vector<double> ts =
        sc.durations.empty() ? std::vector<double>{sc.traj.T} : sc.durations;

    std::vector<CellSpec> cells;
    for (const double e : egs)
        for (const double t : ts)
            cells.push_back({cells.size(), e, busch::point_from_energy(e).g, t});

    struct CellResult {
        exact::RunResult run;
        std::exception_ptr error;
    };
    std::vector<CellResult> results(cells.size());

    const auto run_cell = [&](const CellSpec& cell) {
        exact::RunConfig cfg;
        cfg.grid = sc.grid;
        cfg.traj = sc.traj;
        cfg.traj.T = cell.T;
        if (!sc.explicit_delay) cfg.traj.delay = cell.T / 10.0;
        cfg.g = cell.g;
        cfg.dt = sc.dt;
        cfg.scheme = sc.scheme;
        cfg.solver_tol = sc.solver_tol;
        cfg.sample_stride = sc.sample_stride;
        cfg.checkpoint_stride = sc.checkpoint_stride;

        const fs::path ckpt = dir / ("checkpoint-cell" + std::to_string(cell.index) + ".bin");
        exact::Checkpoint resume;
        const bool resuming = sc.checkpoint_stride > 0 &&
                              read_checkpoint(ckpt, sc, cell, hash, resume);
        exact::CheckpointSink sink;
        if (sc.checkpoint_stride > 0)
            sink = [&, cell](const exact::Checkpoint& ck) {
                write_checkpoint(ckpt, sc, cell, hash, ck);
            };
        auto run = exact::run_sap(cfg, resuming ? &resume : nullptr, sink);
        if (sc.checkpoint_stride > 0) {
            std::error_code ec;
            fs::remove(ckpt, ec);
            fs::remove(ckpt.string() + ".json", ec);
        }
        return run;
    };

    const int pool = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));
    if (pool == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) results[i].run = run_cell(cells[i]);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(pool));
        for (int w = 0; w < pool; ++w)
            threads.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
                    try {
                        results[i].run = run_cell(cells[i]);
                    } catch (...) {
                        results[i].error = std::current_exception();
                    }
                }
            });
        for (auto& th : threads) th.join();
        for (const auto& r : results)
            if (r.error) std::rethrow_exception(r.error);
    }

    CsvFile csv(dir / "fidelity.csv", "E_g,g,T,F,norm_drift,runtime_seconds");
    for (std::size_t i = 0; i < cells.size(); ++i)
        csv.row({fmt(cells[i].E_g), fmt(cells[i].g), fmt(cells[i].T), fmt(results[i].run.fidelity),
                 fmt(results[i].run.norm_drift), fmt(results[i].run.runtime_seconds)});
    csv.close();
    ro.outputs.push_back("fidelity.csv");

    if (cells.size() == 1) {
        CsvFile series(dir / "series.csv", "t,norm,energy,p_LL,p_MM,p_RR,p_LM,p_LR,p_MR");
        for (const auto& s : results[0].run.series)
            series.row({fmt(s.t), fmt(s.norm), fmt(s.energy), fmt(s.p_LL), fmt(s.p_MM),
                        fmt(s.p_RR), fmt(s.p_LM), fmt(s.p_LR), fmt(s.p_MR)});
        series.close();
        ro.outputs.push_back("series.csv");
    }

    double max_norm = 0.0, max_sym = 0.0;
    long steps = 0;
    for (const auto& r : results) {
        max_norm = std::max(max_norm, r.run.norm_drift);
        max_sym = std::max(max_sym, r.run.symmetry_violation);
        steps += r.run.steps;
    }
    return json{{"cells", cells.size()},
                {"workers", pool},
                {"total_steps", steps},
                {"max_norm_drift", max_norm},
                {"max_symmetry_violation", max_sym}};
}

json run_transitions(const Scenario& sc, const fs::path& dir, RunOutcome& ro) {
    const auto fn = make_slice_fn(sc);
    const auto anchor = transfer_anchor(sc, fn, nullptr);
    spectral::AnalysisOptions opt;
    opt.base_slices = sc.slices;
    opt.gap_threshold = sc.gap_threshold;
    opt.deg_tol = sc.deg_tol;
    opt.p_tol = sc.p_tol;
    opt.max_refine_rounds = sc.max_refine_rounds;
    const std::vector<double> ts =
        sc.durations.empty() ? std::vector<double>{sc.traj.T} : sc.durations;
    opt.T_ref = *std::max_element(ts.begin(), ts.end());

    const auto analysis = spectral::analyze_crossings(fn, anchor, opt, band_anchors(sc));

    write_flow_csv(dir / "flow.csv", sc, analysis.flow);
    ro.outputs.push_back("flow.csv");
    json ev = events_json(sc, analysis.flow, analysis.dark, analysis.dark_track, analysis.events);
    ev["refine_rounds"] = analysis.refine_rounds;
    write_text(dir / "crossings.json", ev.dump(2) + "\n");
    ro.outputs.push_back("crossings.json");

    CsvFile csv(dir / "transitions.csv", "E_g,T,p,numerator,denominator,event,s_c");
    for (std::size_t e = 0; e < analysis.events.size(); ++e)
        for (const double T : ts) {
            const auto est = spectral::estimate_over_durations(analysis, static_cast<int>(e), {T});
            csv.row({fmt(sc.ip.E_g), fmt(T), fmt(est[0].p), fmt(est[0].numerator),
                     fmt(est[0].denominator), std::to_string(e), fmt(analysis.events[e].s_c)});
        }
    csv.close();
    ro.outputs.push_back("transitions.csv");

    return json{{"slices", analysis.slices.size()},
                {"refine_rounds", analysis.refine_rounds},
                {"crossings", analysis.events.size()},
                {"dark_track", analysis.dark_track},
                {"min_overlap", analysis.dark.min_overlap}};
}

}  // namespace

// ------------------------------------------------------------- public API

Mode mode_from_name(const std::string& name) {
    if (name == "trajectory") return Mode::trajectory;
    if (name == "rates") return Mode::rates;
    if (name == "spectrum") return Mode::spectrum;
    if (name == "hubbard-run") return Mode::hubbard_run;
    if (name == "sweep-fidelity") return Mode::sweep_fidelity;
    if (name == "transitions") return Mode::transitions;
    throw config_error("unknown mode '" + name + "'");
}

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::trajectory: return "trajectory";
        case Mode::rates: return "rates";
        case Mode::spectrum: return "spectrum";
        case Mode::hubbard_run: return "hubbard-run";
        case Mode::sweep_fidelity: return "sweep-fidelity";
        case Mode::transitions: return "transitions";
    }
    return "?";
}

Model model_from_name(const std::string& name) {
    if (name == "exact") return Model::exact;
    if (name == "bose") return Model::bose;
    if (name == "fermi") return Model::fermi;
    throw config_error("unknown model '" + name + "' (want exact, bose, or fermi)");
}

std::string model_name(Model m) {
    switch (m) {
        case Model::exact: return "exact";
        case Model::bose: return "bose";
        case Model::fermi: return "fermi";
    }
    return "?";
}

Scenario load_scenario(const std::string& config_path, const std::vector<std::string>& overrides,
                       const std::string& mode_override) {
    json cfg = default_config();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw resource_error("cannot read config file " + config_path);
        json file_cfg = json::parse(in, nullptr, /*allow_exceptions=*/false);
        if (file_cfg.is_discarded())
            throw config_error("config file " + config_path + " is not valid JSON");
        // a config may name E_g or g; drop the default E_g when the file
        // provides either so the exactly-one rule applies to the file's choice
        cfg["physics"]["g"] = nullptr;
        if (file_cfg.is_object() && file_cfg.contains("physics") &&
            file_cfg["physics"].is_object() &&
            (file_cfg["physics"].contains("g") || file_cfg["physics"].contains("E_g")))
            cfg["physics"]["E_g"] = nullptr;
        merge_checked(cfg, file_cfg, "");
    } else {
        cfg["physics"]["g"] = nullptr;
    }
    // overrides follow the same rule: naming one member of the E_g / g pair
    // clears the other, so "--set physics.g=..." works against the defaults
    const auto names = [&](const char* key) {
        const std::string prefix = std::string("physics.") + key + "=";
        for (const auto& o : overrides)
            if (o.rfind(prefix, 0) == 0) return true;
        return false;
    };
    const bool set_g = names("g"), set_eg = names("E_g");
    if (set_g && !set_eg) cfg["physics"]["E_g"] = nullptr;
    if (set_eg && !set_g) cfg["physics"]["g"] = nullptr;
    for (const auto& o : overrides) apply_override(cfg, o);
    return scenario_from_json(cfg, mode_override);
}

std::string scenario_echo(const Scenario& sc) { return echo_json(sc).dump(2) + "\n"; }

std::string scenario_hash(const Scenario& sc) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(echo_json(sc).dump())));
    return buf;
}

std::string validate_report(const Scenario& sc, bool probe) {
    std::ostringstream os;
    os << "scenario " << scenario_hash(sc) << " (" << mode_name(sc.mode) << ") valid\n";
    os << scenario_echo(sc);
    if (probe) {
        const hubbard::RateTable table(sc.ip.g);
        os << "probe: rates at closest approach d=" << fmt(sc.traj.d_min) << ": omega0="
           << fmt(table.omega0(sc.traj.d_min)) << " omega1=" << fmt(table.omega1(sc.traj.d_min))
           << " omega_co=" << fmt(table.omega_co(sc.traj.d_min)) << "\n";
        const auto fn = make_slice_fn(sc);
        const auto slice = fn(0.0, nullptr);
        os << "probe: slice at t=0 solved, " << slice.values.size() << " states, E0="
           << fmt(slice.values[0]) << " E" << slice.values.size() - 1 << "="
           << fmt(slice.values[slice.values.size() - 1]) << "\n";
    }
    return os.str();
}

RunOutcome run_scenario(const Scenario& sc, const std::string& out_dir, int workers) {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir(out_dir.empty() ? "out" : out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw resource_error("cannot create output directory " + dir.string());

    if (workers < 1) throw config_error("--workers must be at least 1");
    const std::string hash = scenario_hash(sc);

    RunOutcome ro;
    json diagnostics;
    switch (sc.mode) {
        case Mode::trajectory: diagnostics = run_trajectory(sc, dir, ro); break;
        case Mode::rates: diagnostics = run_rates(sc, dir, ro); break;
        case Mode::spectrum: diagnostics = run_spectrum(sc, dir, ro); break;
        case Mode::hubbard_run: diagnostics = run_hubbard(sc, dir, ro); break;
        case Mode::sweep_fidelity: diagnostics = run_sweep(sc, dir, workers, hash, ro); break;
        case Mode::transitions: diagnostics = run_transitions(sc, dir, ro); break;
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest{{"scenario_hash", hash},
                  {"code_version", kVersion},
                  {"mode", mode_name(sc.mode)},
                  {"resolved", echo_json(sc)},
                  {"outputs", ro.outputs},
                  {"diagnostics", std::move(diagnostics)},
                  {"timing", {{"wall_seconds", wall}}}};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
    ro.manifest = "manifest.json";
    return ro;
}

}  // namespace sap::scenario
