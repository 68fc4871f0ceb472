#include <cstdio>
#include <exception>
#include <iostream>
#include <new>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sap/errors.hpp"
#include "sap/scenario.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kNumericalExit = 3;
constexpr int kResourceExit = 4;

int dispatch(const std::string& verb, const std::string& config, const std::vector<std::string>& sets,
             const std::string& out_dir, int workers, bool probe, bool echo) {
    using namespace sap::scenario;
    if (verb == "validate") {
        const Scenario sc = load_scenario(config, sets);
        std::cout << validate_report(sc, probe);
        return 0;
    }
    const Scenario sc = load_scenario(config, sets, verb);
    if (echo) {
        std::cout << scenario_echo(sc);
        return 0;
    }
    const RunOutcome ro = run_scenario(sc, out_dir, workers);
    std::cout << "scenario " << scenario_hash(sc) << " done; wrote";
    for (const auto& f : ro.outputs) std::cout << ' ' << f;
    std::cout << " and " << ro.manifest << " in " << (out_dir.empty() ? "out" : out_dir) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sap-sim: spatial adiabatic passage of an interacting boson pair"};
    app.require_subcommand(1);

    std::string config, out_dir;
    std::vector<std::string> sets;
    int workers = 1;
    bool probe = false, echo = false;

    app.add_option("--config", config, "scenario file (JSON)")->check(CLI::ExistingFile);
    app.add_option("--set", sets, "override a config key, e.g. --set physics.T=12000");
    app.add_option("--workers", workers, "worker threads for sweep cells")->default_val(1);
    app.add_option("--out", out_dir, "output directory (default: out)");
    app.add_flag("--echo", echo, "print the resolved scenario and exit");

    static const std::vector<std::string> verbs = {"trajectory", "rates",           "spectrum",
                                                   "hubbard-run", "sweep-fidelity", "transitions"};
    for (const auto& v : verbs)
        app.add_subcommand(v, "run the " + v + " mode")->fallthrough();
    auto* validate = app.add_subcommand("validate", "check a scenario without running it");
    validate->fallthrough();
    validate->add_flag("--probe", probe, "also solve one spectral slice and the rate table");

    try {
        app.parse(argc, argv);
        const std::string verb = app.get_subcommands().front()->get_name();
        return dispatch(verb, config, sets, out_dir, workers, probe, echo);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigExit;
    } catch (const sap::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigExit;
    } catch (const sap::numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumericalExit;
    } catch (const sap::resource_error& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return kResourceExit;
    } catch (const std::bad_alloc&) {
        std::cerr << "resource error: out of memory\n";
        return kResourceExit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
