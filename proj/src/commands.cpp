#include "sparsekg/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "sparsekg/config.hpp"

namespace sparsekg {

namespace {

std::string fmt17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string fmt_short(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

// Relative path -> content, written only after every command output exists.
using FileSet = std::vector<std::pair<std::string, std::string>>;

void write_files(const std::string& out_dir, const FileSet& files) {
    namespace fs = std::filesystem;
    for (const auto& [rel, content] : files) {
        const fs::path path = fs::path(out_dir) / rel;
        fs::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
        out << content;
        if (!out) throw std::runtime_error("write failed: " + path.string());
    }
}

constexpr double kSweepGrid[] = {0.0125, 0.025, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2};

}  // namespace

RenderedRun run_and_render(const TruthFactory& factory, const RunConfig& cfg) {
    RenderedRun run;
    run.result = run_replications(factory, cfg);
    run.oc_csv = to_csv(run.result);
    run.summary_json = to_summary_json(run.result);
    run.trace_ndjson = to_trace_ndjson(run.result);
    return run;
}

int cmd_run(const RunOptions& opt) {
    try {
        std::ifstream in(opt.config_path, std::ios::binary);
        if (!in) {
            std::cerr << "error: cannot open config: " << opt.config_path << "\n";
            return 2;
        }
        std::ostringstream buf;
        buf << in.rdbuf();

        ExperimentConfig cfg;
        try {
            cfg = parse_experiment_config(buf.str());
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
        if (opt.seed) cfg.seed = *opt.seed;
        if (opt.reps) cfg.reps = *opt.reps;
        if (opt.threads) cfg.threads = *opt.threads;
        if (opt.out_dir) cfg.out_dir = *opt.out_dir;
        if (opt.noise) {
            if (cfg.truth == "sparse-linear") {
                cfg.noise_fraction = *opt.noise;
            } else if (cfg.truth == "ss-anova") {
                std::cerr << "error: the ss-anova truth has a fixed noise level\n";
                return 2;
            } else {
                cfg.noise_sd = *opt.noise;
            }
        }
        if (cfg.reps < 1 || cfg.threads < 1 || cfg.noise_fraction < 0.0 || cfg.noise_sd < 0.0) {
            std::cerr << "error: invalid override values\n";
            return 2;
        }

        const RenderedRun run = run_and_render(make_truth_factory(cfg), make_run_config(cfg));
        write_files(cfg.out_dir, {{"oc.csv", run.oc_csv},
                                  {"summary.json", run.summary_json},
                                  {"trace.ndjson", run.trace_ndjson}});
        for (const PolicyResult& pr : run.result.policies) {
            std::cout << policy_name(pr.kind) << ": mean OC " << pr.mean_oc << " (sd "
                      << pr.sd_oc << ", median " << pr.median_oc << ", failures " << pr.failures
                      << "/" << pr.reps.size() << ")\n";
        }
        std::cout << "wrote " << cfg.out_dir << "/{oc.csv,summary.json,trace.ndjson}\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_fig1(const Fig1Options& opt) {
    try {
        RunConfig rc;
        rc.name = "fig1";
        rc.policies = {PolicyKind::KgSpLin, PolicyKind::KgLin, PolicyKind::Explore};
        rc.budget = opt.budget;
        rc.reps = opt.reps;
        rc.seed = opt.seed;
        rc.threads = opt.threads;
        const int alternatives = 100;
        const double noise = opt.noise_fraction;
        const TruthFactory factory = [alternatives, noise](std::uint64_t seed) {
            return gen_sparse_linear_truth(alternatives, noise, seed);
        };

        const RenderedRun run = run_and_render(factory, rc);

        std::ostringstream log_csv;
        log_csv << "policy,round,mean_oc,log10_mean_oc\n";
        for (const PolicyResult& pr : run.result.policies) {
            for (size_t i = 0; i < pr.mean_oc_by_round.size(); ++i) {
                const double m = pr.mean_oc_by_round[i];
                log_csv << policy_name(pr.kind) << ',' << (i + 1) << ',' << fmt17(m) << ','
                        << fmt17(std::log10(std::max(m, 1e-300))) << '\n';
            }
        }

        FileSet files = {{"oc.csv", run.oc_csv},
                         {"summary.json", run.summary_json},
                         {"trace.ndjson", run.trace_ndjson},
                         {"mean_log_oc.csv", log_csv.str()}};

        if (!opt.skip_sweep) {
            const int sweep_reps = opt.sweep_reps > 0 ? opt.sweep_reps : std::max(5, opt.reps / 5);
            std::ostringstream sweep_csv;
            sweep_csv << "lambda_multiplier,policy,mean_final_misclassified,mean_final_oc\n";
            for (double mult : kSweepGrid) {
                RunConfig sc = rc;
                sc.name = "fig1-sweep";
                sc.reps = sweep_reps;
                sc.policies = {PolicyKind::KgSpLin, PolicyKind::KgLin};
                sc.policy.lambda_multiplier = mult;
                const ExperimentResult res = run_replications(factory, sc);
                for (const PolicyResult& pr : res.policies) {
                    sweep_csv << fmt_short(mult) << ',' << policy_name(pr.kind) << ','
                              << fmt17(pr.mean_misclassified) << ',' << fmt17(pr.mean_oc) << '\n';
                }
            }
            files.emplace_back("lambda_sweep.csv", sweep_csv.str());
        }

        write_files(opt.out_dir, files);
        for (const PolicyResult& pr : run.result.policies) {
            std::cout << policy_name(pr.kind) << ": mean final OC " << pr.mean_oc
                      << ", mean misclassified " << pr.mean_misclassified << ", failures "
                      << pr.failures << "/" << pr.reps.size() << "\n";
        }
        std::cout << "wrote " << opt.out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_table2(const Table2Options& opt) {
    try {
        TestFunction fn;
        try {
            fn = test_function_from_name(opt.function);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }

        FileSet files;
        std::ostringstream table_csv;
        table_csv << "function,noise_sd,policy,e_oc,sd_oc,med_oc\n";
        std::ostringstream table_txt;

        for (double sd : opt.noise_sds) {
            RunConfig rc;
            rc.name = "table2-" + opt.function + "-sd" + fmt_short(sd);
            rc.policies = {PolicyKind::KgSpLin, PolicyKind::KgLin};
            rc.budget = opt.budget;
            rc.reps = opt.reps;
            rc.seed = opt.seed;
            rc.threads = opt.threads;
            const int alternatives = 100;
            const int ambient = 200;
            const TruthFactory factory = [fn, alternatives, sd, ambient](std::uint64_t seed) {
                return gen_test_function_truth(fn, alternatives, sd, ambient, seed);
            };
            const RenderedRun run = run_and_render(factory, rc);

            const std::string sub = "sd" + fmt_short(sd);
            files.emplace_back(sub + "/oc.csv", run.oc_csv);
            files.emplace_back(sub + "/summary.json", run.summary_json);
            files.emplace_back(sub + "/trace.ndjson", run.trace_ndjson);
            for (const PolicyResult& pr : run.result.policies) {
                table_csv << opt.function << ',' << fmt_short(sd) << ',' << policy_name(pr.kind)
                          << ',' << fmt17(pr.mean_oc) << ',' << fmt17(pr.sd_oc) << ','
                          << fmt17(pr.median_oc) << '\n';
                table_txt << opt.function << " sd=" << fmt_short(sd) << " "
                          << policy_name(pr.kind) << ": E(OC)=" << pr.mean_oc
                          << " sd(OC)=" << pr.sd_oc << " Med=" << pr.median_oc << " failures "
                          << pr.failures << "/" << pr.reps.size() << "\n";
            }
        }
        files.emplace_back("table.csv", table_csv.str());

        write_files(opt.out_dir, files);
        std::cout << table_txt.str() << "wrote " << opt.out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

namespace {

// Component reconstructions from the first successful replication of each
// policy, for plotting the fitted interaction surface and main effects.
void append_spam_reconstructions(const ExperimentResult& res, const TruthFactory& factory,
                                 FileSet& files) {
    std::ostringstream pair_csv, mains_csv;
    pair_csv << "policy,x1,x2,estimate\n";
    mains_csv << "policy,var,x,estimate,truth\n";
    const Eigen::VectorXd grid2 = Eigen::VectorXd::LinSpaced(51, -5.0, 5.0);
    const Eigen::VectorXd grid1 = Eigen::VectorXd::LinSpaced(101, 0.0, 1.0);

    bool any = false;
    for (const PolicyResult& pr : res.policies) {
        const RepRecord* rep = nullptr;
        for (const RepRecord& r : pr.reps) {
            if (!r.failed && !r.checkpoints.empty() && r.checkpoints.back().second.size() > 0) {
                rep = &r;
                break;
            }
        }
        if (!rep) continue;
        any = true;
        const TruthInstance truth = factory(rep->truth_seed);
        const Eigen::VectorXd& coef = rep->checkpoints.back().second;
        const auto& comps = truth.map->components();

        for (int c = 0; c < static_cast<int>(comps.size()); ++c) {
            if (comps[c].is_pair()) {
                const Eigen::MatrixXd surf = truth.map->reconstruct_pair(coef, c, grid2, grid2);
                for (Eigen::Index i = 0; i < grid2.size(); ++i)
                    for (Eigen::Index j = 0; j < grid2.size(); ++j)
                        pair_csv << policy_name(pr.kind) << ',' << fmt17(grid2[i]) << ','
                                 << fmt17(grid2[j]) << ',' << fmt17(surf(i, j)) << '\n';
            } else if (comps[c].var1 >= 2 && comps[c].var1 <= 4) {
                const Eigen::VectorXd est = truth.map->reconstruct_main(coef, c, grid1);
                for (Eigen::Index i = 0; i < grid1.size(); ++i) {
                    const double x = grid1[i];
                    const int var = comps[c].var1;
                    const double tru = var == 2 ? ssanova_f3(x)
                                               : (var == 3 ? ssanova_f4(x) : ssanova_f5(x));
                    mains_csv << policy_name(pr.kind) << ',' << var << ',' << fmt17(x) << ','
                              << fmt17(est[i]) << ',' << fmt17(tru) << '\n';
                }
            }
        }
    }
    if (any) {
        files.emplace_back("pair_surface.csv", pair_csv.str());
        files.emplace_back("mains.csv", mains_csv.str());
    }
}

}  // namespace

int cmd_spam(const SpamOptions& opt) {
    try {
        RunConfig rc;
        rc.name = "spam";
        rc.policies = {PolicyKind::KgSpAm, PolicyKind::KgLin};
        rc.budget = opt.budget;
        rc.reps = opt.reps;
        rc.seed = opt.seed;
        rc.threads = opt.threads;
        const int alternatives = opt.alternatives;
        const TruthFactory factory = [alternatives](std::uint64_t seed) {
            return gen_ssanova_truth(alternatives, seed);
        };

        const RenderedRun run = run_and_render(factory, rc);
        FileSet files = {{"oc.csv", run.oc_csv},
                         {"summary.json", run.summary_json},
                         {"trace.ndjson", run.trace_ndjson}};
        append_spam_reconstructions(run.result, factory, files);

        write_files(opt.out_dir, files);
        for (const PolicyResult& pr : run.result.policies) {
            std::cout << policy_name(pr.kind) << ": mean final OC " << pr.mean_oc
                      << ", failures " << pr.failures << "/" << pr.reps.size() << "\n";
        }
        std::cout << "wrote " << opt.out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace sparsekg
