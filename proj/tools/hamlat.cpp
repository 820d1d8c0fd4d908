// hamlat command-line driver. Exit codes: 0 success, 1 config error,
// 2 runtime failure.
#include <CLI11.hpp>

#include "hamlat/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Hamiltonian lattice learning toolkit"};
    app.require_subcommand(1);

    hamlat::cli::Options opt;
    std::string out_dir;
    std::uint64_t seed = 0;
    int budget = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "experiment config (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "override all config seeds");
        sub->add_option("--budget", budget, "override training epochs");
        return sub;
    };

    CLI::App* c_generate = add_common(app.add_subcommand("generate", "write the training dataset"));
    CLI::App* c_train = add_common(app.add_subcommand("train", "train the configured model"));
    CLI::App* c_eval = add_common(app.add_subcommand("eval", "score the checkpoint on test rollouts"));
    CLI::App* c_links = add_common(app.add_subcommand("links", "extract the interaction graph"));
    CLI::App* c_sweep = add_common(app.add_subcommand("sweep", "run the mu sweep"));
    CLI::App* c_report = add_common(app.add_subcommand("report", "aggregate artifacts into Markdown"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        for (CLI::App* sub : {c_generate, c_train, c_eval, c_links, c_sweep, c_report}) {
            if (!sub->parsed()) continue;
            if (sub->count("--out")) opt.out_dir = out_dir;
            if (sub->count("--seed")) opt.seed = seed;
            if (sub->count("--budget")) opt.budget = budget;
        }
        const hamlat::ExperimentConfig cfg = hamlat::cli::resolve(opt);
        if (c_generate->parsed()) return hamlat::cli::cmd_generate(cfg);
        if (c_train->parsed()) return hamlat::cli::cmd_train(cfg);
        if (c_eval->parsed()) return hamlat::cli::cmd_eval(cfg);
        if (c_links->parsed()) return hamlat::cli::cmd_links(cfg);
        if (c_sweep->parsed()) return hamlat::cli::cmd_sweep(cfg);
        if (c_report->parsed()) return hamlat::cli::cmd_report(cfg);
    } catch (const hamlat::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
