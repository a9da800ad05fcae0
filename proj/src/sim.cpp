#include "sparsekg/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "sparsekg/errors.hpp"
#include "sparsekg/rng.hpp"

namespace sparsekg {

namespace {

constexpr std::uint64_t kTruthStream = 0x7472;
constexpr std::uint64_t kNoiseStream = 0x6e6f;
constexpr std::uint64_t kEngineStream = 0x656e;

constexpr double kPi = 3.14159265358979323846;

}  // namespace

TruthInstance gen_sparse_linear_truth(int num_alternatives, double noise_fraction,
                                      std::uint64_t seed) {
    if (num_alternatives < 2) throw std::invalid_argument("truth: need at least 2 alternatives");
    const int p = 100;
    const int group_size = 10;
    const int signal_coefs = 20;

    Rng rng = make_rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);
    for (int k = 0; k < signal_coefs; ++k) {
        const double mean = 11.0 + k;
        coef[k] = mean + 0.3 * mean * unit(rng);
    }

    Eigen::MatrixXd X(num_alternatives, p);
    for (int i = 0; i < num_alternatives; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = unit(rng);

    TruthInstance truth;
    truth.name = "sparse-linear";
    truth.raw = X;
    truth.features = X;
    truth.mu = X * coef;
    truth.groups = GroupStructure::contiguous(std::vector<Eigen::Index>(10, group_size));
    truth.true_groups = {0, 1};
    truth.noise_sd = noise_fraction * (truth.mu.maxCoeff() - truth.mu.minCoeff());
    truth.true_coefficients = coef;
    return truth;
}

double test_function_value(TestFunction fn, const Eigen::VectorXd& x) {
    switch (fn) {
        case TestFunction::Matyas:
            return 0.26 * (x[0] * x[0] + x[1] * x[1]) - 0.48 * x[0] * x[1];
        case TestFunction::Trid: {
            double v = 0.0;
            for (Eigen::Index i = 0; i < 6; ++i) v += (x[i] - 1.0) * (x[i] - 1.0);
            for (Eigen::Index i = 1; i < 6; ++i) v -= x[i] * x[i - 1];
            return v;
        }
        case TestFunction::Bohachevsky:
            return x[0] * x[0] + 2.0 * x[1] * x[1] - 0.3 * std::cos(3.0 * kPi * x[0]) -
                   0.4 * std::cos(4.0 * kPi * x[1]) + 0.7;
        case TestFunction::SixHumpCamel: {
            const double x2 = x[0] * x[0], y2 = x[1] * x[1];
            return (4.0 - 2.1 * x2 + x2 * x2 / 3.0) * x2 + x[0] * x[1] + (-4.0 + 4.0 * y2) * y2;
        }
        case TestFunction::ThreeHumpCamel: {
            const double x2 = x[0] * x[0];
            return 2.0 * x2 - 1.05 * x2 * x2 + x2 * x2 * x2 / 6.0 + x[0] * x[1] + x[1] * x[1];
        }
    }
    throw std::invalid_argument("test_function_value: bad function");
}

TestFunctionInfo test_function_info(TestFunction fn) {
    TestFunctionInfo info;
    switch (fn) {
        case TestFunction::Matyas: {
            info.name = "matyas";
            info.dim = 2;
            info.domain = {{-10.0, 10.0}, {-10.0, 10.0}};
            info.pairs = {{0, 1}};
            info.min_value = 0.0;
            info.minimizers = {Eigen::Vector2d(0.0, 0.0)};
            return info;
        }
        case TestFunction::Trid: {
            info.name = "trid";
            info.dim = 6;
            info.domain.assign(6, {-36.0, 36.0});
            info.pairs = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}};
            info.min_value = -50.0;
            Eigen::VectorXd m(6);
            for (int i = 1; i <= 6; ++i) m[i - 1] = static_cast<double>(i * (7 - i));
            info.minimizers = {m};
            return info;
        }
        case TestFunction::Bohachevsky: {
            info.name = "bohachevsky";
            info.dim = 2;
            info.domain = {{-100.0, 100.0}, {-100.0, 100.0}};
            info.pairs = {};
            info.min_value = 0.0;
            info.minimizers = {Eigen::Vector2d(0.0, 0.0)};
            return info;
        }
        case TestFunction::SixHumpCamel: {
            info.name = "sixhump";
            info.dim = 2;
            info.domain = {{-3.0, 3.0}, {-2.0, 2.0}};
            info.pairs = {{0, 1}};
            info.min_value = -1.031628453489877;
            info.minimizers = {Eigen::Vector2d(0.08984201368301331, -0.7126564032704135),
                               Eigen::Vector2d(-0.08984201368301331, 0.7126564032704135)};
            return info;
        }
        case TestFunction::ThreeHumpCamel: {
            info.name = "threehump";
            info.dim = 2;
            info.domain = {{-5.0, 5.0}, {-5.0, 5.0}};
            info.pairs = {{0, 1}};
            info.min_value = 0.0;
            info.minimizers = {Eigen::Vector2d(0.0, 0.0)};
            return info;
        }
    }
    throw std::invalid_argument("test_function_info: bad function");
}

TestFunction test_function_from_name(const std::string& name) {
    if (name == "matyas") return TestFunction::Matyas;
    if (name == "trid") return TestFunction::Trid;
    if (name == "bohachevsky") return TestFunction::Bohachevsky;
    if (name == "sixhump") return TestFunction::SixHumpCamel;
    if (name == "threehump") return TestFunction::ThreeHumpCamel;
    throw std::invalid_argument("unknown test function: " + name);
}

namespace {

// Spline feature plumbing shared by the benchmark and additive-model truths.
TruthInstance spline_truth(std::string name, Eigen::MatrixXd raw,
                           std::vector<SplineBasis> bases,
                           const std::vector<std::pair<int, int>>& pairs, int relevant_vars,
                           Eigen::VectorXd mu, double noise_sd) {
    TruthInstance truth;
    truth.name = std::move(name);
    truth.map = std::make_shared<const AdditiveFeatureMap>(std::move(bases), pairs);
    truth.features = truth.map->map_all(raw);
    truth.raw = std::move(raw);
    truth.mu = std::move(mu);
    truth.groups = truth.map->groups();
    truth.noise_sd = noise_sd;
    const auto& comps = truth.map->components();
    for (int c = 0; c < static_cast<int>(comps.size()); ++c) {
        const bool relevant = comps[c].is_pair()
                                  ? (comps[c].var1 < relevant_vars && comps[c].var2 < relevant_vars)
                                  : (comps[c].var1 < relevant_vars);
        if (relevant) truth.true_groups.push_back(c);
    }
    return truth;
}

}  // namespace

TruthInstance gen_test_function_truth(TestFunction fn, int num_alternatives, double noise_sd,
                                      int ambient_dim, std::uint64_t seed) {
    const TestFunctionInfo info = test_function_info(fn);
    if (num_alternatives < 2) throw std::invalid_argument("truth: need at least 2 alternatives");
    if (ambient_dim < info.dim)
        throw std::invalid_argument("truth: ambient dimension below the function's own");

    std::vector<std::pair<double, double>> domain(static_cast<size_t>(ambient_dim),
                                                  info.domain[0]);
    for (int j = 0; j < info.dim; ++j) domain[static_cast<size_t>(j)] = info.domain[j];

    Rng rng = make_rng(seed);
    Eigen::MatrixXd raw(num_alternatives, ambient_dim);
    for (int i = 0; i < num_alternatives; ++i)
        for (int j = 0; j < ambient_dim; ++j) {
            std::uniform_real_distribution<double> u(domain[static_cast<size_t>(j)].first,
                                                     domain[static_cast<size_t>(j)].second);
            raw(i, j) = u(rng);
        }

    Eigen::VectorXd mu(num_alternatives);
    for (int i = 0; i < num_alternatives; ++i)
        mu[i] = -test_function_value(fn, raw.row(i).head(info.dim).transpose());
    const double lo = mu.minCoeff(), hi = mu.maxCoeff();
    if (!(hi > lo)) throw std::runtime_error("truth: degenerate value range");
    mu = (mu.array() - lo) * (100.0 / (hi - lo));

    std::vector<SplineBasis> bases;
    bases.reserve(static_cast<size_t>(ambient_dim));
    for (int j = 0; j < ambient_dim; ++j)
        bases.emplace_back(domain[static_cast<size_t>(j)].first,
                           domain[static_cast<size_t>(j)].second, 4, 4);

    return spline_truth(info.name, std::move(raw), std::move(bases), info.pairs, info.dim,
                        std::move(mu), noise_sd);
}

double ssanova_f3(double x) { return 2.0 * std::sin(2.0 * kPi * x); }
double ssanova_f4(double x) { return 8.0 * (x - 0.5) * (x - 0.5); }
double ssanova_f5(double x) { return 2.0 * std::exp(-3.0 * x); }

TruthInstance gen_ssanova_truth(int num_alternatives, std::uint64_t seed) {
    if (num_alternatives < 2) throw std::invalid_argument("truth: need at least 2 alternatives");
    const int p = 100;

    Rng rng = make_rng(seed);
    Eigen::MatrixXd raw(num_alternatives, p);
    for (int i = 0; i < num_alternatives; ++i)
        for (int j = 0; j < p; ++j) {
            std::uniform_real_distribution<double> u(j < 2 ? -5.0 : 0.0, j < 2 ? 5.0 : 1.0);
            raw(i, j) = u(rng);
        }

    Eigen::VectorXd mu(num_alternatives);
    for (int i = 0; i < num_alternatives; ++i) {
        mu[i] = test_function_value(TestFunction::ThreeHumpCamel, raw.row(i).head(2).transpose()) +
                ssanova_f3(raw(i, 2)) + ssanova_f4(raw(i, 3)) + ssanova_f5(raw(i, 4));
    }

    std::vector<SplineBasis> bases;
    bases.reserve(p);
    for (int j = 0; j < p; ++j)
        bases.emplace_back(j < 2 ? -5.0 : 0.0, j < 2 ? 5.0 : 1.0, 4, 4);

    // 20% of the expected range of the univariate pieces (a fixed constant,
    // so instances are comparable across replications).
    const double noise_sd = 1.0;
    return spline_truth("ss-anova", std::move(raw), std::move(bases), {{0, 1}}, 5, std::move(mu),
                        noise_sd);
}

double opportunity_cost(const Eigen::VectorXd& mu, Eigen::Index chosen) {
    if (chosen < 0 || chosen >= mu.size())
        throw std::out_of_range("opportunity_cost: bad alternative");
    return mu.maxCoeff() - mu[chosen];
}

int count_misclassified_groups(const std::vector<int>& estimated, const std::vector<int>& tru,
                               int num_groups) {
    auto check = [num_groups](const std::vector<int>& v) {
        for (int g : v)
            if (g < 0 || g >= num_groups)
                throw std::out_of_range("count_misclassified_groups: group out of range");
    };
    check(estimated);
    check(tru);
    std::vector<int> a = estimated, b = tru;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<int> diff;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(),
                                  std::back_inserter(diff));
    return static_cast<int>(diff.size());
}

namespace {

std::vector<int> all_groups(int num_groups) {
    std::vector<int> v(static_cast<size_t>(num_groups));
    for (int i = 0; i < num_groups; ++i) v[static_cast<size_t>(i)] = i;
    return v;
}

RepRecord run_one_rep(const TruthInstance& truth, PolicyKind kind, const RunConfig& cfg, int rep,
                      std::uint64_t truth_seed) {
    RepRecord rec;
    rec.rep = rep;
    rec.truth_seed = truth_seed;

    PolicyConfig pc = cfg.policy;
    pc.budget = cfg.budget;
    pc.noise_sd = truth.noise_sd;
    pc.seed = mix_seed(cfg.seed, kEngineStream, static_cast<std::uint64_t>(rep),
                       static_cast<std::uint64_t>(kind));

    // Common noise sequence across policies within a replication: draw z_n
    // once per round, whatever alternative the policy picks.
    Rng noise_rng = make_rng(cfg.seed, kNoiseStream, static_cast<std::uint64_t>(rep));
    std::normal_distribution<double> unit(0.0, 1.0);

    const int num_groups = static_cast<int>(truth.groups.num_groups());
    const std::vector<int> dense_support = all_groups(num_groups);
    const int dense_misclassified =
        count_misclassified_groups(dense_support, truth.true_groups, num_groups);

    std::vector<int> want_checkpoint(cfg.checkpoint_rounds.begin(), cfg.checkpoint_rounds.end());
    std::sort(want_checkpoint.begin(), want_checkpoint.end());

    const bool sparse_engine = kind != PolicyKind::KgLin;
    std::optional<SparsePolicyEngine> sparse;
    std::optional<LinearPolicyEngine> linear;
    if (sparse_engine)
        sparse.emplace(truth.features, truth.groups, pc, kind == PolicyKind::Explore);
    else
        linear.emplace(truth.features, pc);

    try {
        for (int n = 1; n <= cfg.budget; ++n) {
            double z = unit(noise_rng);
            auto observe = [&](Eigen::Index x) { return truth.mu[x] + truth.noise_sd * z; };

            PolicyStep step =
                sparse_engine ? sparse->step(observe) : linear->step(observe);
            const Eigen::Index chosen = sparse_engine ? sparse->recommend() : linear->recommend();

            RoundRecord round;
            round.round = n;
            round.choice = step.chosen_alternative;
            round.observed_y = step.observed_y;
            round.kg_value = step.kg_value;
            round.oc = opportunity_cost(truth.mu, chosen);
            if (sparse_engine) {
                round.misclassified =
                    count_misclassified_groups(step.lasso_support, truth.true_groups, num_groups);
                int active_features = 0;
                for (int g : step.lasso_support)
                    active_features += static_cast<int>(truth.groups.group(g).size());
                round.support_size = active_features;
            } else {
                round.misclassified = dense_misclassified;
                round.support_size = static_cast<int>(truth.features.cols());
            }
            rec.rounds.push_back(std::move(round));

            const bool want = std::binary_search(want_checkpoint.begin(), want_checkpoint.end(), n);
            if (want || n == cfg.budget) {
                Eigen::VectorXd snap;
                if (sparse_engine)
                    snap = step.belief_after->vartheta;
                else if (linear->has_coefficient_belief())
                    snap = linear->coefficient_belief().vartheta;
                rec.checkpoints.emplace_back(n, std::move(snap));
            }
        }
        rec.final_oc = rec.rounds.back().oc;
        rec.final_misclassified = rec.rounds.back().misclassified;
    } catch (const SingularPrecisionError& e) {
        rec.failed = true;
        rec.error = e.what();
    } catch (const ConvergenceError& e) {
        rec.failed = true;
        rec.error = e.what();
    }
    return rec;
}

double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void aggregate(PolicyResult& pr, int budget) {
    std::vector<double> finals;
    double mis_sum = 0.0;
    pr.failures = 0;
    for (const RepRecord& r : pr.reps) {
        if (r.failed) {
            ++pr.failures;
            continue;
        }
        finals.push_back(r.final_oc);
        mis_sum += r.final_misclassified;
    }
    const size_t n = finals.size();
    if (n == 0) {
        pr.mean_oc = pr.sd_oc = pr.median_oc = pr.mean_misclassified =
            std::numeric_limits<double>::quiet_NaN();
        return;
    }
    double sum = 0.0;
    for (double v : finals) sum += v;
    pr.mean_oc = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : finals) ss += (v - pr.mean_oc) * (v - pr.mean_oc);
    pr.sd_oc = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    pr.median_oc = median_of(finals);
    pr.mean_misclassified = mis_sum / static_cast<double>(n);

    pr.mean_oc_by_round.assign(static_cast<size_t>(budget), 0.0);
    for (const RepRecord& r : pr.reps) {
        if (r.failed) continue;
        for (size_t i = 0; i < r.rounds.size(); ++i)
            pr.mean_oc_by_round[i] += r.rounds[i].oc / static_cast<double>(n);
    }
}

}  // namespace

ExperimentResult run_replications(const TruthFactory& factory, const RunConfig& cfg) {
    if (cfg.reps < 1) throw std::invalid_argument("run_replications: reps must be >= 1");
    if (cfg.budget < 1) throw std::invalid_argument("run_replications: budget must be >= 1");
    if (cfg.policies.empty()) throw std::invalid_argument("run_replications: no policies");

    ExperimentResult result;
    result.name = cfg.name;
    result.budget = cfg.budget;
    result.seed = cfg.seed;
    result.policies.resize(cfg.policies.size());
    for (size_t ip = 0; ip < cfg.policies.size(); ++ip) {
        result.policies[ip].kind = cfg.policies[ip];
        result.policies[ip].reps.resize(static_cast<size_t>(cfg.reps));
    }

    std::atomic<int> next_rep{0};
    auto worker = [&]() {
        for (;;) {
            const int rep = next_rep.fetch_add(1);
            if (rep >= cfg.reps) return;
            const std::uint64_t truth_seed =
                mix_seed(cfg.seed, kTruthStream, static_cast<std::uint64_t>(rep));
            const TruthInstance truth = factory(truth_seed);
            for (size_t ip = 0; ip < cfg.policies.size(); ++ip) {
                result.policies[ip].reps[static_cast<size_t>(rep)] =
                    run_one_rep(truth, cfg.policies[ip], cfg, rep, truth_seed);
            }
        }
    };

    const int threads = std::max(1, cfg.threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (auto& pr : result.policies) aggregate(pr, cfg.budget);
    return result;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

std::string to_csv(const ExperimentResult& result) {
    std::ostringstream os;
    os << "policy,rep,round,oc,misclassified,support_size\n";
    for (const PolicyResult& pr : result.policies) {
        for (const RepRecord& rep : pr.reps) {
            if (rep.failed) continue;
            for (const RoundRecord& r : rep.rounds) {
                os << policy_name(pr.kind) << ',' << rep.rep << ',' << r.round << ',' << fmt(r.oc)
                   << ',' << r.misclassified << ',' << r.support_size << '\n';
            }
        }
    }
    return os.str();
}

std::string to_summary_json(const ExperimentResult& result) {
    nlohmann::json root;
    root["schema_version"] = 1;
    root["experiment"] = result.name;
    root["budget"] = result.budget;
    root["seed"] = result.seed;
    nlohmann::json policies = nlohmann::json::array();
    for (const PolicyResult& pr : result.policies) {
        nlohmann::json p;
        p["policy"] = policy_name(pr.kind);
        p["reps"] = pr.reps.size();
        p["failures"] = pr.failures;
        nlohmann::json failed = nlohmann::json::array();
        for (const RepRecord& rep : pr.reps)
            if (rep.failed) failed.push_back({{"rep", rep.rep}, {"error", rep.error}});
        p["failed_reps"] = std::move(failed);
        p["e_oc"] = pr.mean_oc;
        p["sd_oc"] = pr.sd_oc;
        p["med_oc"] = pr.median_oc;
        p["mean_misclassified"] = pr.mean_misclassified;
        p["mean_oc_by_round"] = pr.mean_oc_by_round;
        policies.push_back(std::move(p));
    }
    root["policies"] = std::move(policies);
    return root.dump(2) + "\n";
}

std::string to_trace_ndjson(const ExperimentResult& result) {
    std::ostringstream os;
    for (const PolicyResult& pr : result.policies) {
        for (const RepRecord& rep : pr.reps) {
            for (const RoundRecord& r : rep.rounds) {
                nlohmann::json line;
                line["policy"] = policy_name(pr.kind);
                line["rep"] = rep.rep;
                line["failed_rep"] = rep.failed;
                line["round"] = r.round;
                line["choice"] = r.choice;
                line["y"] = r.observed_y;
                if (r.kg_value)
                    line["kg"] = *r.kg_value;
                else
                    line["kg"] = nullptr;
                line["oc"] = r.oc;
                line["misclassified"] = r.misclassified;
                line["support_size"] = r.support_size;
                os << line.dump() << '\n';
            }
        }
    }
    return os.str();
}

}  // namespace sparsekg
