#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sparsekg/groups.hpp"
#include "sparsekg/policy.hpp"
#include "sparsekg/splines.hpp"

namespace sparsekg {

// A fully materialized problem instance: the alternatives, their true values,
// the belief-model features, and which feature groups actually matter.
struct TruthInstance {
    std::string name;
    Eigen::MatrixXd raw;       // alternatives in problem coordinates (may equal features)
    Eigen::MatrixXd features;  // one row per alternative, belief-model features
    Eigen::VectorXd mu;        // true alternative values
    GroupStructure groups;
    std::vector<int> true_groups;        // sorted group indices with real signal
    double noise_sd = 0.0;               // observation noise level for this instance
    std::shared_ptr<const AdditiveFeatureMap> map;  // set for spline-feature truths
    Eigen::VectorXd true_coefficients;   // set for linear truths
};

// Random sparse linear problem: 100 features in ten groups of ten, only the
// first two groups carry signal (coefficient k drawn around 11 + k with 30%
// relative spread), Gaussian alternatives. Noise is the given fraction of the
// realized value range. Draw order (single stream): 20 coefficients, then the
// alternative matrix row by row.
TruthInstance gen_sparse_linear_truth(int num_alternatives, double noise_fraction,
                                      std::uint64_t seed);

enum class TestFunction { Matyas, Trid, Bohachevsky, SixHumpCamel, ThreeHumpCamel };

struct TestFunctionInfo {
    const char* name;
    int dim;
    std::vector<std::pair<double, double>> domain;   // per-coordinate box
    std::vector<std::pair<int, int>> pairs;          // interacting coordinate pairs
    double min_value;
    std::vector<Eigen::VectorXd> minimizers;         // global minimizers
};

double test_function_value(TestFunction fn, const Eigen::VectorXd& x);
TestFunctionInfo test_function_info(TestFunction fn);
TestFunction test_function_from_name(const std::string& name);

// Benchmark instance: the named function on its first dim coordinates, hidden
// among ambient_dim uniformly drawn variables (extras reuse the first
// coordinate's domain). Values are negated (benchmarks are minimization
// problems, the policies maximize) and affinely rescaled onto [0, 100].
// Features are cubic spline blocks per variable plus tensor blocks for the
// function's interacting pairs. Draw order: alternatives row by row.
TruthInstance gen_test_function_truth(TestFunction fn, int num_alternatives, double noise_sd,
                                      int ambient_dim, std::uint64_t seed);

// Additive-plus-interaction instance on 100 variables: a two-variable
// three-hump camel component on [-5,5]^2 and three univariate components on
// [0,1], everything else noise variables. Values are kept in natural units;
// noise_sd = 1 (20% of the univariate components' expected range).
TruthInstance gen_ssanova_truth(int num_alternatives, std::uint64_t seed);

// The univariate components of the instance above.
double ssanova_f3(double x);  // 2 sin(2 pi x)
double ssanova_f4(double x);  // 8 (x - 1/2)^2
double ssanova_f5(double x);  // 2 exp(-3x)

double opportunity_cost(const Eigen::VectorXd& mu, Eigen::Index chosen);

// Size of the symmetric difference between estimated and true group support.
int count_misclassified_groups(const std::vector<int>& estimated, const std::vector<int>& tru,
                               int num_groups);

struct RoundRecord {
    int round = 0;
    Eigen::Index choice = 0;
    double observed_y = 0.0;
    std::optional<double> kg_value;
    double oc = 0.0;         // opportunity cost of the current recommendation
    int misclassified = 0;   // group-support errors (dense policies count every idle group)
    int support_size = 0;    // active feature count
};

struct RepRecord {
    int rep = 0;
    std::uint64_t truth_seed = 0;
    bool failed = false;
    std::string error;
    std::vector<RoundRecord> rounds;
    double final_oc = 0.0;
    int final_misclassified = 0;
    // Coefficient snapshots at the requested checkpoint rounds (and always at
    // the final round), when the policy carries a coefficient belief.
    std::vector<std::pair<int, Eigen::VectorXd>> checkpoints;
};

struct PolicyResult {
    PolicyKind kind{};
    std::vector<RepRecord> reps;
    int failures = 0;
    double mean_oc = 0.0;
    double sd_oc = 0.0;
    double median_oc = 0.0;
    double mean_misclassified = 0.0;
    std::vector<double> mean_oc_by_round;  // over successful reps
};

struct ExperimentResult {
    std::string name;
    int budget = 0;
    std::uint64_t seed = 0;
    std::vector<PolicyResult> policies;
};

using TruthFactory = std::function<TruthInstance(std::uint64_t)>;

struct RunConfig {
    std::string name = "experiment";
    std::vector<PolicyKind> policies;
    int budget = 50;
    int reps = 1;
    std::uint64_t seed = 1;
    PolicyConfig policy;                // noise_sd is taken from the truth instance
    std::vector<int> checkpoint_rounds; // extra coefficient snapshots
    int threads = 1;
};

// Runs every policy on `reps` independently drawn instances (the same
// instance is shared by all policies within a replication) and aggregates
// final-round opportunity cost over the successful replications. Failed
// replications keep their partial round records and are excluded from the
// aggregates. Deterministic for a given config, independent of thread count.
ExperimentResult run_replications(const TruthFactory& factory, const RunConfig& cfg);

// Emission. CSV rows cover successful replications; the summary JSON carries
// the aggregate table, per-round mean OC, and the failure report.
std::string to_csv(const ExperimentResult& result);
std::string to_summary_json(const ExperimentResult& result);
std::string to_trace_ndjson(const ExperimentResult& result);

}  // namespace sparsekg
