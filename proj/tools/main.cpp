// Command-line experiment runner.  Each subcommand reads a JSON config,
// writes CSV/JSON outputs stamped with the manifest hash, and exits with
// 0 on success, 2 on invalid config, 3 on solver non-convergence.

#include <stairwind/experiments.hpp>

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"stairwind: staircase / wind-tree dynamics experiments"};
    app.require_subcommand(1);

    static const std::vector<std::string> kinds = {
        "orbit",   "boxes",         "sigma",   "partition",      "hopf",
        "uniform", "generic-check", "maharam", "windtree-orbit", "theta-scan"};

    std::string config_path, out_dir = ".", backend;
    int threads = 1;
    for (const std::string& kind : kinds) {
        CLI::App* sub = app.add_subcommand(kind);
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--threads", threads, "worker threads");
        sub->add_option("--backend", backend, "rational | float64 (overrides config)")
            ->check(CLI::IsMember({"rational", "float64"}));
    }

    CLI11_PARSE(app, argc, argv);

    stairwind::lab::RunContext ctx;
    ctx.out = out_dir;
    ctx.threads = threads;
    if (backend == "rational") ctx.backend = stairwind::SumBackend::Rational;
    else if (backend == "float64") ctx.backend = stairwind::SumBackend::Float64;

    const std::string sub = app.get_subcommands().front()->get_name();
    stairwind::lab::RunResult res = stairwind::lab::run_file(sub, config_path, ctx);
    if (res.exit_code != 0) std::cerr << "error: " << res.error << "\n";
    else for (const std::string& f : res.files) std::cout << f << "\n";
    return res.exit_code;
}
