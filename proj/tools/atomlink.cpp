#include "atomlink/harness.hpp"
#include "atomlink/scenario.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace {

int run_mode(const std::string& mode, const std::string& scenario_path, std::string out_dir,
             std::optional<std::uint64_t> seed, int threads) {
    using namespace atomlink::harness;
    try {
        if (out_dir.empty()) {
            if (const char* env = std::getenv("ATOMLINK_OUT"))
                out_dir = env;
            else
                out_dir = "out";
        }
        Scenario sc = Scenario::parse_file(scenario_path);
        if (sc.mode().empty()) sc.set_mode(mode);
        if (sc.mode() != mode)
            throw ScenarioError("mode: scenario declares '" + sc.mode() +
                                "' but the subcommand is '" + mode + "'");
        const auto manifest = run(sc, out_dir, seed, threads);
        std::cout << mode << ": " << manifest.outputs.size() << " output file(s) in " << out_dir
                  << " (scenario digest " << manifest.scenario_digest << ")\n";
        return 0;
    } catch (const ScenarioError& e) {
        std::cerr << "scenario error: " << e.what() << "\n";
        return 2;
    } catch (const NonConvergenceError& e) {
        std::cerr << "non-convergence: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"atomlink: desk-scale simulator for a waveguide-array photonic interface"};
    app.require_subcommand(1);

    const std::vector<std::string> modes = {"scan",      "fluorescence", "entanglement",
                                            "fit-bloch", "fit-fringe",   "wgs",
                                            "plan"};

    struct Args {
        std::string scenario;
        std::string out;
        std::optional<std::uint64_t> seed;
        int threads = 1;
    };
    std::vector<Args> args(modes.size());

    for (std::size_t i = 0; i < modes.size(); ++i) {
        auto* cmd = app.add_subcommand(modes[i], "run the " + modes[i] + " pipeline");
        cmd->add_option("--scenario", args[i].scenario, "scenario file")->required();
        cmd->add_option("--out", args[i].out, "output directory (default $ATOMLINK_OUT or ./out)");
        cmd->add_option("--seed", args[i].seed, "master seed override");
        cmd->add_option("--threads", args[i].threads, "worker threads")->check(CLI::Range(1, 64));
    }

    CLI11_PARSE(app, argc, argv);

    for (std::size_t i = 0; i < modes.size(); ++i) {
        if (app.got_subcommand(modes[i]))
            return run_mode(modes[i], args[i].scenario, args[i].out, args[i].seed,
                            args[i].threads);
    }
    return 1;
}
