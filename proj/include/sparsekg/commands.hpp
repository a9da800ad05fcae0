#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sparsekg/sim.hpp"

namespace sparsekg {

// Library-level entry points behind the CLI subcommands. Each computes every
// output in memory first and only then writes files, so a failing run leaves
// no partial output behind. Errors go to stderr; the return value is the
// process exit code (0 success, 2 usage/config errors, 1 runtime errors).

struct RenderedRun {
    ExperimentResult result;
    std::string oc_csv;
    std::string summary_json;
    std::string trace_ndjson;
};

RenderedRun run_and_render(const TruthFactory& factory, const RunConfig& cfg);

struct RunOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> reps;
    std::optional<double> noise;  // noise_fraction or noise_sd, depending on the truth
    std::optional<std::string> out_dir;
    std::optional<int> threads;
};
int cmd_run(const RunOptions& opt);

struct Fig1Options {
    double noise_fraction = 0.05;
    int reps = 100;
    int budget = 200;
    std::uint64_t seed = 42;
    std::string out_dir = "results/fig1";
    int threads = 1;
    int sweep_reps = 0;  // 0 -> max(5, reps / 5)
    bool skip_sweep = false;
};
int cmd_fig1(const Fig1Options& opt);

struct Table2Options {
    std::string function = "matyas";
    std::vector<double> noise_sds = {1.0, 10.0, 20.0};
    int reps = 100;
    int budget = 50;
    std::uint64_t seed = 42;
    std::string out_dir = "results/table2";
    int threads = 1;
};
int cmd_table2(const Table2Options& opt);

struct SpamOptions {
    int reps = 20;
    int budget = 30;
    int alternatives = 400;
    std::uint64_t seed = 42;
    std::string out_dir = "results/spam";
    int threads = 1;
};
int cmd_spam(const SpamOptions& opt);

}  // namespace sparsekg
