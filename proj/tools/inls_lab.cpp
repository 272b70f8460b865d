// inls_lab: command-line front end of the radial INLS laboratory.
//
//   inls_lab ground|evolve|sweep|check|decay [--config FILE] [--out DIR] [--threads K]
//   inls_lab check exponents [--config FILE]
//
// Exit status: 0 success, 1 computation error, 2 configuration error.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "inls/cli.hpp"
#include "inls/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Radial focusing INLS laboratory"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    unsigned threads = 1;
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory (overrides output.directory)");
    app.add_option("--threads", threads, "worker threads for sweep rows")->check(CLI::PositiveNumber);

    std::string topic;
    for (const auto& name : inls::subcommands()) {
        auto* sub = app.add_subcommand(name);
        if (name == "check") sub->add_option("topic", topic, "\"exponents\" prints the exponent table");
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : inls::kExitConfig;
    }

    inls::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = inls::parse_config(config_path);
        else inls::validate(cfg);
    } catch (const inls::ParseError& e) {
        std::cerr << "config error (line " << e.line() << "): " << e.what() << '\n';
        return inls::kExitConfig;
    } catch (const inls::Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return inls::kExitConfig;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "check" && !topic.empty()) {
        if (topic != "exponents") {
            std::cerr << "unknown check topic: " << topic << '\n';
            return inls::kExitConfig;
        }
        try {
            std::cout << inls::exponent_table(cfg.params());
            return inls::kExitOk;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return inls::kExitComputation;
        }
    }
    inls::DispatchOptions opt;
    opt.out_dir = out_dir;
    opt.threads = threads;
    return inls::dispatch(cmd, cfg, opt, std::cerr);
}
