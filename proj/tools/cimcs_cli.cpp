#include "cimcs/error.hpp"
#include "cimcs/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

using namespace cimcs;

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    int workers = 0;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "Override the master seed");
    sub->add_option("--out", f.out, "Override the output directory");
    sub->add_option("--workers", f.workers, "Worker threads (overrides " + std::string(kWorkersEnv) + ")")
        ->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coherent Ising machine compressed sensing experiments"};
    app.require_subcommand(1);
    Flags flags;
    struct Sub {
        const char* name;
        const char* help;
        CommandResult (*fn)(const ExperimentConfig&, const RunOptions&);
    };
    const Sub subs[] = {
        {"gen", "Generate seeded instance files and a manifest", cmd_gen},
        {"run", "Run the configured experiment", cmd_run},
        {"sweep", "Cartesian parameter sweep with box-plot summaries", cmd_sweep},
        {"mri", "MRI reconstruction comparison", cmd_mri},
        {"oracle", "Brute-force ground states against SA and the CIM", cmd_oracle},
    };
    for (const auto& s : subs) add_flags(app.add_subcommand(s.name, s.help), flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfigError;
    }

    ExperimentConfig cfg;
    try {
        cfg = load_config(flags.config);
        if (flags.seed) cfg.seed = *flags.seed;
        if (flags.out) cfg.output = *flags.out;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    }

    RunOptions opt;
    opt.workers = resolve_workers(flags.workers, std::getenv(kWorkersEnv), cfg.workers);
    opt.log = &std::cerr;
    for (const auto& s : subs) {
        if (!app.got_subcommand(s.name)) continue;
        try {
            const CommandResult res = s.fn(cfg, opt);
            std::cout << res.summary << '\n';
            return res.exit_code;
        } catch (const ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kExitConfigError;
        } catch (const std::exception& e) {
            std::cerr << "run failed: " << e.what() << '\n';
            return kExitRunFailure;
        }
    }
    return kExitConfigError;
}
