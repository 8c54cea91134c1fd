#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "conserva/commands.hpp"
#include "conserva/errors.hpp"

namespace conserva {

int run_cli(int argc, char** argv) {
    CLI::App app{"conserva: simulation and numerical verification of conservative "
                 "interacting particle systems with position-dependent rates"};
    app.require_subcommand(1);

    struct SubSpec {
        const char* name;
        const char* help;
        bool (*fn)(const ExperimentConfig&, const CommandOptions&);
    };
    const SubSpec specs[] = {
        {"simulate", "run a replica ensemble of the particle system", &cmd_simulate},
        {"meanfield", "integrate the mean-field density evolution", &cmd_meanfield},
        {"hydro", "compare empirical densities against the mean-field limit", &cmd_hydro},
        {"fluct", "compare fluctuation variances against the O-U limit", &cmd_fluct},
        {"indep", "covariance decay and influence-set overlap studies", &cmd_indep},
    };

    struct SubState {
        CLI::App* sub = nullptr;
        std::string config_path;
        bool check = false;
        std::string out_dir;
        std::uint64_t seed = 0;
        bool seed_set = false;
        bool serial = false;
    };
    SubState states[std::size(specs)];

    for (std::size_t i = 0; i < std::size(specs); ++i) {
        CLI::App* sub = app.add_subcommand(specs[i].name, specs[i].help);
        sub->add_option("--config", states[i].config_path, "experiment config file")
            ->required();
        sub->add_flag("--check", states[i].check, "gate the run on the acceptance thresholds");
        sub->add_option("--out", states[i].out_dir, "output directory override");
        sub->add_option("--seed", states[i].seed, "seed override")
            ->each([&states, i](const std::string&) { states[i].seed_set = true; });
        sub->add_flag("--serial", states[i].serial, "run the serial reference kernels");
        states[i].sub = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        for (std::size_t i = 0; i < std::size(specs); ++i) {
            if (!states[i].sub->parsed()) continue;
            ExperimentConfig config = load_experiment(states[i].config_path);
            CommandOptions options;
            options.check = states[i].check;
            if (!states[i].out_dir.empty()) options.out_dir = states[i].out_dir;
            if (states[i].seed_set) options.seed = states[i].seed;
            options.mode = states[i].serial ? ExecMode::serial : ExecMode::parallel;
            const bool ok = specs[i].fn(config, options);
            if (!ok) return 4;
            return 0;
        }
    } catch (const validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}

} // namespace conserva
