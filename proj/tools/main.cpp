// vptrap: run, oracle, scatter and report.
#include "layout.hpp"

#include "vptrap/parallel.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace vptrap;

int main(int argc, char** argv) {
    CLI::App app{"Particle simulator for the 2D Vlasov-Poisson system in the trap -|x|^2/2"};
    app.require_subcommand(1);
    cli::GlobalOptions opt;
    app.add_option("--out", opt.out, std::string("output directory (default $") + cli::kOutputRootEnv + "/<name>)");
    app.add_flag("--reproducible", opt.reproducible, "omit wall-clock data so reruns are byte-identical");
    app.add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);

    std::string input;
    auto* run = app.add_subcommand("run", "integrate a config to t_final and write diagnostics");
    run->add_option("config", input, "config file")->required();
    auto* oracle = app.add_subcommand("oracle", "compare grid forces and trajectories with direct N-body (N <= 2000)");
    oracle->add_option("config", input, "config file")->required();
    auto* scatter = app.add_subcommand("scatter", "extract the scattering state of a completed run");
    scatter->add_option("run_dir", input, "run directory")->required();
    auto* report = app.add_subcommand("report", "plots and a pass/fail summary for a run directory");
    report->add_option("run_dir", input, "run directory")->required();
    for (auto* sub : {run, oracle, scatter, report}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    set_num_threads(opt.threads);
    try {
        if (*run) return cli::cmd_run(input, opt);
        if (*oracle) return cli::cmd_oracle(input, opt);
        if (*scatter) return cli::cmd_scatter(input, opt);
        return cli::cmd_report(input, opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const cli::MissingInput& e) {
        std::cerr << e.what() << "\n";
        return 4;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const OutOfDomainError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const RangeError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
