#include "rootlab/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Multi-marginal Root embedding: solver, simulator and verifier"};
    app.require_subcommand(1, 1);
    rootlab::RunOptions opts;
    std::uint64_t seed = 0;
    std::string out;
    unsigned threads = 0;
    for (const char* name : {"solve", "simulate", "verify", "certify", "compare", "all"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opts.config_path, "run configuration (JSON)")->required();
        sub->add_option("--seed", seed, "override the configured seed");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--threads", threads, "worker threads (fallback: ROOT_LAB_THREADS)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : rootlab::kExitUsage;
    }
    CLI::App* sub = app.get_subcommands().front();
    opts.subcommand = sub->get_name();
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--out")) opts.out = out;
    if (sub->count("--threads")) opts.threads = threads;
    return rootlab::run(opts);
}
