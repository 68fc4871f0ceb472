#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sap/scenario.hpp"
#include "test_util.hpp"

using namespace sap;
using nlohmann::json;
using testutil::TempDir;

TEST_CASE("defaults resolve to the reference protocol") {
    const auto sc = scenario::load_scenario("", {});
    CHECK(sc.mode == scenario::Mode::trajectory);
    CHECK(sc.model == scenario::Model::exact);
    CHECK(sc.ip.E_g == doctest::Approx(1.25));
    CHECK(sc.ip.g == doctest::Approx(0.76912213741966201).epsilon(1e-12));
    CHECK(sc.traj.T == 4000.0);
    CHECK(sc.traj.delay == 400.0);
    CHECK(sc.traj.d_max == 9.0);
    CHECK(sc.traj.d_min == 3.0);
    CHECK(sc.grid.n == 291);
    CHECK(sc.grid.x_min == -14.5);
    CHECK(sc.dt == 0.02);
    CHECK(sc.scheme == exact::Scheme::crank_nicolson);
    CHECK(sc.eig.k == 12);
    CHECK(sc.eig.block == 20);
    CHECK(sc.slices == 81);
    CHECK(sc.cotunneling);
    CHECK(sc.sweep_eg.empty());
    CHECK(sc.durations.empty());
    CHECK_FALSE(sc.explicit_delay);
    CHECK(sc.trajectory_samples == 2001);
}

TEST_CASE("overrides re-derive dependent quantities") {
    auto sc = scenario::load_scenario("", {"physics.T=1000"});
    CHECK(sc.traj.T == 1000.0);
    CHECK(sc.traj.delay == 100.0);  // delay tracks T/10 unless given

    sc = scenario::load_scenario("", {"physics.T=1000", "physics.delay=30"});
    CHECK(sc.traj.delay == 30.0);
    CHECK(sc.explicit_delay);

    sc = scenario::load_scenario("", {"physics.g=1.0"});
    CHECK(sc.ip.g == 1.0);
    CHECK(sc.ip.E_g == doctest::Approx(1.3067455412310827).epsilon(1e-12));

    sc = scenario::load_scenario("", {"physics.E_g=1.6"});
    CHECK(sc.ip.g == doctest::Approx(3.0009969268421382).epsilon(1e-12));

    sc = scenario::load_scenario("", {"grid.n=161", "numerics.eigensolver.k=6",
                                      "flags.model=bose", "flags.cotunneling=false"});
    CHECK(sc.grid.n == 161);
    CHECK(sc.eig.k == 6);
    CHECK(sc.model == scenario::Model::bose);
    CHECK_FALSE(sc.cotunneling);

    // mode override wins
    sc = scenario::load_scenario("", {}, "rates");
    CHECK(sc.mode == scenario::Mode::rates);
}

TEST_CASE("sweep lists accept explicit arrays and ranges") {
    auto sc = scenario::load_scenario("", {"sweep.durations=[100,200]", "flags.model=bose"});
    CHECK(sc.durations == std::vector<double>{100.0, 200.0});

    sc = scenario::load_scenario(
        "", {R"(sweep.durations={"from":100,"to":300,"step":100})"});
    CHECK(sc.durations == std::vector<double>{100.0, 200.0, 300.0});

    sc = scenario::load_scenario("", {"sweep.E_g=[1.05,1.25,1.6]"});
    CHECK(sc.sweep_eg.size() == 3);
}

TEST_CASE("malformed configurations are rejected with config errors") {
    using scenario::load_scenario;
    CHECK_THROWS_AS(load_scenario("", {"physics.nope=1"}), config_error);
    CHECK_THROWS_AS(load_scenario("", {"nonsense.key=1"}), config_error);
    CHECK_THROWS_AS(load_scenario("", {"physics.E_g=1.6", "physics.g=3.0"}), config_error);
    CHECK_THROWS_AS(load_scenario("", {"physics.E_g=2.5"}), config_error);
    CHECK_THROWS_AS(load_scenario("", {"sweep.E_g=[2.5]"}), config_error);
    CHECK_THROWS_AS(load_scenario("", {"sweep.durations=[-5]"}), config_error);
    CHECK_THROWS_AS(load_scenario("", {"physics.delay=30", "sweep.durations=[100,200]"}),
                    config_error);
    CHECK_THROWS_AS(load_scenario("", {"physics.T"}), config_error);      // no '='
    CHECK_THROWS_AS(load_scenario("", {"physics=3"}), config_error);      // section
    CHECK_THROWS_AS(load_scenario("", {"physics.T.x=1"}), config_error);  // into scalar
    CHECK_THROWS_AS(load_scenario("", {"flags.model=classical"}), config_error);
    CHECK_THROWS_AS(load_scenario("", {}, "teleport"), config_error);
    CHECK_THROWS_AS(load_scenario("", {"flags.model=exact"}, "hubbard-run"), config_error);
    CHECK_THROWS_AS(load_scenario("/no/such/config.json", {}), resource_error);
}

TEST_CASE("config files merge over the defaults") {
    TempDir dir("config");
    testutil::write_file(dir.file("a.json"),
                         R"({"physics": {"E_g": 1.6}, "flags": {"model": "fermi"}})");
    const auto sc = scenario::load_scenario(dir.file("a.json"), {});
    CHECK(sc.model == scenario::Model::fermi);
    CHECK(sc.ip.E_g == 1.6);
    CHECK(sc.traj.T == 4000.0);  // untouched default

    testutil::write_file(dir.file("g.json"), R"({"physics": {"g": 2.0}})");
    CHECK(scenario::load_scenario(dir.file("g.json"), {}).ip.E_g ==
          doctest::Approx(1.4874023541608632).epsilon(1e-12));

    testutil::write_file(dir.file("bad.json"), R"({"physics": {"mass": 2}})");
    CHECK_THROWS_AS(scenario::load_scenario(dir.file("bad.json"), {}), config_error);
    testutil::write_file(dir.file("syntax.json"), "{not json");
    CHECK_THROWS_AS(scenario::load_scenario(dir.file("syntax.json"), {}), config_error);
}

TEST_CASE("scenario hash is stable, sensitive and well-formed") {
    const auto a = scenario::load_scenario("", {});
    const auto b = scenario::load_scenario("", {});
    const auto c = scenario::load_scenario("", {"physics.T=3999"});
    const auto ha = scenario::scenario_hash(a);
    CHECK(ha.size() == 16);
    CHECK(ha.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(ha == scenario::scenario_hash(b));
    CHECK(ha != scenario::scenario_hash(c));

    const auto report = scenario::validate_report(a, false);
    CHECK(report.find("valid") != std::string::npos);
    CHECK(report.find(ha) != std::string::npos);

    // echo is machine-readable and round-trips the resolved values
    const auto echo = json::parse(scenario::scenario_echo(a));
    CHECK(echo.at("physics").at("E_g").get<double>() == 1.25);
    CHECK(echo.at("physics").at("g").get<double>() == a.ip.g);
}

TEST_CASE("mode and model names round-trip") {
    using scenario::Mode;
    for (auto m : {Mode::trajectory, Mode::rates, Mode::spectrum, Mode::hubbard_run,
                   Mode::sweep_fidelity, Mode::transitions})
        CHECK(scenario::mode_from_name(scenario::mode_name(m)) == m);
    using scenario::Model;
    for (auto m : {Model::exact, Model::bose, Model::fermi})
        CHECK(scenario::model_from_name(scenario::model_name(m)) == m);
    CHECK_THROWS_AS(scenario::mode_from_name("bogus"), config_error);
    CHECK_THROWS_AS(scenario::model_from_name("bogus"), config_error);
}

TEST_CASE("trajectory runs write deterministic outputs and a manifest") {
    const auto sc = scenario::load_scenario("", {"output.trajectory_samples=11"});
    TempDir d1("traj1"), d2("traj2");
    const auto r1 = scenario::run_scenario(sc, d1.str());
    const auto r2 = scenario::run_scenario(sc, d2.str());

    REQUIRE(r1.outputs == std::vector<std::string>{"trajectory.csv"});
    CHECK(r1.manifest == "manifest.json");
    const auto csv1 = testutil::read_file(d1.file("trajectory.csv"));
    const auto csv2 = testutil::read_file(d2.file("trajectory.csv"));
    CHECK(csv1 == csv2);  // byte determinism

    const auto lines = testutil::split_lines(csv1);
    REQUIRE(lines.size() == 12);  // header + samples
    CHECK(lines[0] == "t,d_L,d_M,d_R");

    const auto manifest = json::parse(testutil::read_file(d1.file("manifest.json")));
    CHECK(manifest.at("scenario_hash").get<std::string>() == scenario::scenario_hash(sc));
    CHECK(manifest.at("mode").get<std::string>() == "trajectory");
    CHECK(manifest.at("code_version").get<std::string>() == std::string(sap::kVersion));
    CHECK(manifest.at("outputs").size() == 1);
    CHECK(manifest.contains("resolved"));
    CHECK(manifest.at("timing").contains("wall_seconds"));
}

TEST_CASE("rates mode writes the signed rate table") {
    const auto sc = scenario::load_scenario("", {}, "rates");
    TempDir dir("rates");
    const auto r = scenario::run_scenario(sc, dir.str());
    REQUIRE(r.outputs == std::vector<std::string>{"rates.csv"});
    const auto lines = testutil::split_lines(testutil::read_file(dir.file("rates.csv")));
    REQUIRE(lines.size() == 122);  // header + d in [3, 9] step 0.05
    CHECK(lines[0] == "d,omega0,omega1,omega_co");
    // signed raw elements at closest approach
    CHECK(lines[1].substr(0, 2) == "3,");
    CHECK(lines[1].find(",-0.0883") != std::string::npos);
}

TEST_CASE("hubbard run transfers the pair and records populations") {
    const auto sc = scenario::load_scenario("", {"flags.model=bose"}, "hubbard-run");
    TempDir dir("hub");
    const auto r = scenario::run_scenario(sc, dir.str());
    REQUIRE(r.outputs == std::vector<std::string>{"populations.csv"});
    const auto lines = testutil::split_lines(testutil::read_file(dir.file("populations.csv")));
    CHECK(lines[0] == "t,|200>,|020>,|002>,|110>,|101>,|011>");
    REQUIRE(lines.size() > 10);

    const auto manifest = json::parse(testutil::read_file(dir.file("manifest.json")));
    const auto& diag = manifest.at("diagnostics");
    CHECK(diag.at("final_populations").at("|002>").get<double>() > 0.99);
    CHECK(diag.at("dark_state_reaches_target").get<bool>());
}

TEST_CASE("spectrum mode writes band flow and crossing summary") {
    const auto sc = scenario::load_scenario(
        "", {"flags.model=bose", "numerics.slices=21"}, "spectrum");
    TempDir dir("spec");
    const auto r = scenario::run_scenario(sc, dir.str());
    REQUIRE(r.outputs.size() == 2);
    CHECK(r.outputs[0] == "spectrum.csv");
    CHECK(r.outputs[1] == "crossings.json");

    const auto lines = testutil::split_lines(testutil::read_file(dir.file("spectrum.csv")));
    REQUIRE(lines.size() == 22);
    CHECK(lines[0] == "t,E0,E1,E2,E3,E4,E5");

    const auto cr = json::parse(testutil::read_file(dir.file("crossings.json")));
    CHECK(cr.at("events").is_array());
    CHECK(cr.at("events").empty());  // adiabatic bosonic protocol
}

TEST_CASE("transitions mode estimates hops per event and duration") {
    const auto sc = scenario::load_scenario(
        "", {"flags.model=bose", "sweep.durations=[4000,12000]"}, "transitions");
    TempDir dir("trans");
    const auto r = scenario::run_scenario(sc, dir.str());
    REQUIRE(r.outputs.size() == 3);
    CHECK(r.outputs[0] == "flow.csv");
    CHECK(r.outputs[1] == "crossings.json");
    CHECK(r.outputs[2] == "transitions.csv");
    const auto lines = testutil::split_lines(testutil::read_file(dir.file("transitions.csv")));
    CHECK(lines[0] == "E_g,T,p,numerator,denominator,event,s_c");
    CHECK(lines.size() == 1);  // no crossings at E_g = 1.25: header only
}

TEST_CASE("sweep mode writes fidelities and cleans its checkpoints") {
    const auto sc = scenario::load_scenario(
        "", {"grid.n=64", "physics.T=20", "numerics.dt=0.05",
             "output.checkpoint_stride=100", "physics.E_g=1.25"},
        "sweep-fidelity");
    TempDir dir("sweep");
    const auto r = scenario::run_scenario(sc, dir.str(), 1);
    REQUIRE(r.outputs.size() == 2);
    CHECK(r.outputs[0] == "fidelity.csv");
    CHECK(r.outputs[1] == "series.csv");

    const auto fl = testutil::split_lines(testutil::read_file(dir.file("fidelity.csv")));
    REQUIRE(fl.size() == 2);
    CHECK(fl[0] == "E_g,g,T,F,norm_drift,runtime_seconds");
    CHECK(fl[1].substr(0, 5) == "1.25,");

    const auto sl = testutil::split_lines(testutil::read_file(dir.file("series.csv")));
    CHECK(sl[0] == "t,norm,energy,p_LL,p_MM,p_RR,p_LM,p_LR,p_MR");

    // successful cells leave no checkpoint files behind
    for (const auto& e : std::filesystem::directory_iterator(dir.path()))
        CHECK(e.path().extension() != ".ckpt");

    const auto manifest = json::parse(testutil::read_file(dir.file("manifest.json")));
    CHECK(manifest.at("diagnostics").at("cells").get<int>() == 1);
    CHECK(manifest.at("diagnostics").at("max_norm_drift").get<double>() < 1e-8);
}

TEST_CASE("multi-cell sweeps agree across worker counts") {
    const auto sc = scenario::load_scenario(
        "", {"grid.n=64", "numerics.dt=0.05", "sweep.durations=[16,24]"}, "sweep-fidelity");
    TempDir d1("w1"), d2("w2");
    scenario::run_scenario(sc, d1.str(), 1);
    scenario::run_scenario(sc, d2.str(), 2);

    auto strip_runtime = [](const std::string& text) {
        std::string out;
        for (const auto& line : testutil::split_lines(text)) {
            const auto pos = line.rfind(',');
            out += line.substr(0, pos);
            out += '\n';
        }
        return out;
    };
    const auto a = testutil::read_file(d1.file("fidelity.csv"));
    const auto b = testutil::read_file(d2.file("fidelity.csv"));
    CHECK(strip_runtime(a) == strip_runtime(b));
    CHECK(testutil::split_lines(a).size() == 3);  // header + 2 cells
}

TEST_SUITE("cli") {

static std::string bin() { return g_cli_binary; }

TEST_CASE("validate: default scenario passes, probes report rates") {
    auto r = testutil::run_command(bin() + " validate");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("valid") != std::string::npos);

    r = testutil::run_command(bin() + " validate --probe");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("omega0") != std::string::npos);
}

TEST_CASE("echo prints the resolved scenario as json") {
    const auto r = testutil::run_command(bin() + " trajectory --echo");
    CHECK(r.exit_code == 0);
    const auto echo = json::parse(r.output);
    CHECK(echo.at("physics").at("E_g").get<double>() == 1.25);
    CHECK(echo.at("mode").get<std::string>() == "trajectory");
}

TEST_CASE("configuration errors exit with status 2") {
    CHECK(testutil::run_command(bin() + " validate --set physics.nope=1").exit_code == 2);
    CHECK(testutil::run_command(bin() +
                                " validate --set physics.E_g=1.6 --set physics.g=3.0")
              .exit_code == 2);
    CHECK(testutil::run_command(bin() + " teleport").exit_code == 2);
    CHECK(testutil::run_command(bin() + " hubbard-run --set flags.model=exact --echo")
              .exit_code == 2);
    CHECK(testutil::run_command(bin() + " validate --config /no/such/file.json").exit_code ==
          2);
    CHECK(testutil::run_command(bin() + " validate --set physics.delay=-3").exit_code == 2);
}

TEST_CASE("trajectory run is reproducible byte for byte") {
    TempDir d1("cli1"), d2("cli2");
    const auto cmd = " trajectory --set output.trajectory_samples=11 --out ";
    const auto r1 = testutil::run_command(bin() + cmd + d1.str());
    const auto r2 = testutil::run_command(bin() + cmd + d2.str());
    CHECK(r1.exit_code == 0);
    CHECK(r2.exit_code == 0);
    CHECK(r1.output.find("wrote") != std::string::npos);
    CHECK(testutil::read_file(d1.file("trajectory.csv")) ==
          testutil::read_file(d2.file("trajectory.csv")));
    CHECK(testutil::read_file(d1.file("trajectory.csv")).find("t,d_L,d_M,d_R") == 0);
}

TEST_CASE("hubbard run through the cli") {
    TempDir dir("clihub");
    const auto r = testutil::run_command(
        bin() + " hubbard-run --set flags.model=bose --out " + dir.str());
    CHECK(r.exit_code == 0);
    CHECK(std::filesystem::exists(dir.file("populations.csv")));
    CHECK(std::filesystem::exists(dir.file("manifest.json")));
}

TEST_CASE("sweep through the cli honors workers and overrides") {
    TempDir dir("clisweep");
    const auto r = testutil::run_command(
        bin() + " sweep-fidelity --workers 2 --set grid.n=64 --set numerics.dt=0.05" +
        " --set sweep.durations=[16,24] --out " + dir.str());
    CHECK(r.exit_code == 0);
    const auto lines = testutil::split_lines(testutil::read_file(dir.file("fidelity.csv")));
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "E_g,g,T,F,norm_drift,runtime_seconds");
}

}  // TEST_SUITE("cli")
