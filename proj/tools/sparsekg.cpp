#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <string>

#include "sparsekg/commands.hpp"

namespace {

int env_threads() {
    const char* env = std::getenv("SPARSEKG_THREADS");
    if (!env) return 0;
    const int v = std::atoi(env);
    return v >= 1 ? v : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential learning benchmark: knowledge-gradient policies with group-sparse "
                 "belief models"};
    app.require_subcommand(1);

    // Shared locals; presence is checked per subcommand after parsing.
    std::string config_path, out_dir, function = "matyas";
    std::uint64_t seed = 42;
    int reps = 0, budget = 0, threads = 0, sweep_reps = 0, alternatives = 400;
    double noise = 0.0;
    bool skip_sweep = false;

    CLI::App* run = app.add_subcommand("run", "Run an experiment described by a config file");
    run->add_option("--config", config_path, "TOML experiment config")->required();
    run->add_option("--seed", seed, "Master seed override");
    run->add_option("--reps", reps, "Replication count override");
    run->add_option("--noise", noise, "Noise override (fraction or sd, per the truth)");
    run->add_option("--out", out_dir, "Output directory override");
    run->add_option("--threads", threads, "Worker thread count");

    CLI::App* fig1 = app.add_subcommand(
        "fig1", "Sparse-linear benchmark: KGSpLin vs KGLin vs exploration, plus a lambda sweep");
    fig1->add_option("--noise", noise, "Noise as a fraction of the value range (default 0.05)");
    fig1->add_option("--reps", reps, "Replications (default 100)");
    fig1->add_option("--budget", budget, "Measurement budget (default 200)");
    fig1->add_option("--seed", seed, "Master seed (default 42)");
    fig1->add_option("--out", out_dir, "Output directory (default results/fig1)");
    fig1->add_option("--threads", threads, "Worker thread count");
    fig1->add_option("--sweep-reps", sweep_reps, "Replications per lambda grid point");
    fig1->add_flag("--skip-sweep", skip_sweep, "Skip the lambda sweep");

    CLI::App* table2 = app.add_subcommand(
        "table2", "Benchmark functions hidden in 200 dimensions: KGSpLin vs KGLin");
    table2->add_option("--function", function, "matyas | trid | bohachevsky | sixhump")
        ->check(CLI::IsMember({"matyas", "trid", "bohachevsky", "sixhump"}));
    table2->add_option("--noise", noise, "Single noise sd (default: all of 1, 10, 20)");
    table2->add_option("--reps", reps, "Replications (default 100)");
    table2->add_option("--budget", budget, "Measurement budget (default 50)");
    table2->add_option("--seed", seed, "Master seed (default 42)");
    table2->add_option("--out", out_dir, "Output directory (default results/table2)");
    table2->add_option("--threads", threads, "Worker thread count");

    CLI::App* spam = app.add_subcommand(
        "spam", "Additive-plus-interaction model: KGSpAM vs KGLin with component reconstructions");
    spam->add_option("--reps", reps, "Replications (default 20)");
    spam->add_option("--budget", budget, "Measurement budget (default 30)");
    spam->add_option("--alternatives", alternatives, "Number of alternatives (default 400)");
    spam->add_option("--seed", seed, "Master seed (default 42)");
    spam->add_option("--out", out_dir, "Output directory (default results/spam)");
    spam->add_option("--threads", threads, "Worker thread count");

    CLI11_PARSE(app, argc, argv);

    // Thread precedence: --threads flag, then SPARSEKG_THREADS, then 1
    // (or the config file's value for `run`).
    const int fallback_threads = env_threads();

    if (run->parsed()) {
        sparsekg::RunOptions opt;
        opt.config_path = config_path;
        if (run->count("--seed")) opt.seed = seed;
        if (run->count("--reps")) opt.reps = reps;
        if (run->count("--noise")) opt.noise = noise;
        if (run->count("--out")) opt.out_dir = out_dir;
        if (run->count("--threads"))
            opt.threads = threads;
        else if (fallback_threads > 0)
            opt.threads = fallback_threads;
        return sparsekg::cmd_run(opt);
    }
    if (fig1->parsed()) {
        sparsekg::Fig1Options opt;
        if (fig1->count("--noise")) opt.noise_fraction = noise;
        if (fig1->count("--reps")) opt.reps = reps;
        if (fig1->count("--budget")) opt.budget = budget;
        if (fig1->count("--seed")) opt.seed = seed;
        if (fig1->count("--out")) opt.out_dir = out_dir;
        opt.threads = fig1->count("--threads") ? threads
                                               : (fallback_threads > 0 ? fallback_threads : 1);
        if (fig1->count("--sweep-reps")) opt.sweep_reps = sweep_reps;
        opt.skip_sweep = skip_sweep;
        return sparsekg::cmd_fig1(opt);
    }
    if (table2->parsed()) {
        sparsekg::Table2Options opt;
        opt.function = function;
        if (table2->count("--noise")) opt.noise_sds = {noise};
        if (table2->count("--reps")) opt.reps = reps;
        if (table2->count("--budget")) opt.budget = budget;
        if (table2->count("--seed")) opt.seed = seed;
        if (table2->count("--out")) opt.out_dir = out_dir;
        opt.threads = table2->count("--threads") ? threads
                                                 : (fallback_threads > 0 ? fallback_threads : 1);
        return sparsekg::cmd_table2(opt);
    }
    if (spam->parsed()) {
        sparsekg::SpamOptions opt;
        if (spam->count("--reps")) opt.reps = reps;
        if (spam->count("--budget")) opt.budget = budget;
        if (spam->count("--alternatives")) opt.alternatives = alternatives;
        if (spam->count("--seed")) opt.seed = seed;
        if (spam->count("--out")) opt.out_dir = out_dir;
        opt.threads = spam->count("--threads") ? threads
                                               : (fallback_threads > 0 ? fallback_threads : 1);
        return sparsekg::cmd_spam(opt);
    }
    return 2;
}
