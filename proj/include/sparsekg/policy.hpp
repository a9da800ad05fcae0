#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sparsekg/belief.hpp"
#include "sparsekg/group_lasso.hpp"
#include "sparsekg/groups.hpp"
#include "sparsekg/rng.hpp"

namespace sparsekg {

enum class PolicyKind { KgSpLin, KgSpAm, KgLin, Explore };

const char* policy_name(PolicyKind kind);
PolicyKind policy_from_name(const std::string& name);

struct PolicyConfig {
    int budget = 50;
    int warmup_rounds = 10;     // uniform-random rounds before value-guided choices
    double noise_sd = 1.0;      // known observation noise (standard deviation)
    double lambda_multiplier = 0.1;  // schedule constant c0 = multiplier * noise_sd
    int max_terms = 16;
    int mc_samples = 500;
    double c_min = 0.01;
    double c_max = 100.0;
    double var_cap = 1e9;
    double prior_variance = 10000.0 / 12.0;  // variance of a U(0,100) value
    double xi0 = 1.0, eta0 = 1.0;
    double solver_rel_tol = 1e-8;  // scaled by the running statistics into an absolute tol
    std::uint64_t seed = 1;

    double noise_var() const { return noise_sd * noise_sd; }
};

// Regularization weight after n observations: c0 * dbar * sqrt(n log p).
double lambda_schedule(const PolicyConfig& cfg, const GroupStructure& groups, long long n);

// Per-round trace record. Belief snapshots are shared immutable states, not
// copies; kg_value is absent on exploration / warmup / fallback rounds.
struct PolicyStep {
    int round = 0;
    Eigen::Index chosen_alternative = 0;
    double observed_y = 0.0;
    std::optional<double> kg_value;
    std::vector<int> lasso_support;  // active groups after this round's update
    std::shared_ptr<const SparseBeliefState> belief_after;
    std::shared_ptr<const LinearBelief> belief_after_linear;
};

using ObserveFn = std::function<double(Eigen::Index)>;

// Measurement loop for the group-sparse belief: choose (value-guided or
// uniform), observe, re-solve the penalized estimate recursively, sample the
// estimator covariance, fuse, and update inclusion counts. All stage results
// are committed together at the end of the round, so a thrown error leaves
// the engine exactly as before the round.
class SparsePolicyEngine {
public:
    SparsePolicyEngine(Eigen::MatrixXd features, GroupStructure groups, PolicyConfig cfg,
                       bool explore_choices);

    PolicyStep step(const ObserveFn& observe);
    // Same update path with the choice pinned; used by tests and by callers
    // replaying recorded decisions.
    PolicyStep step_forced(Eigen::Index choice, const ObserveFn& observe);

    int round() const { return round_; }
    const SparseBeliefState& belief() const { return *belief_; }
    const LassoState& lasso() const { return lasso_; }
    const Eigen::MatrixXd& features() const { return X_; }
    Eigen::VectorXd posterior_means() const { return X_ * belief_->vartheta; }
    Eigen::Index recommend() const;  // argmax of posterior means, lowest index on ties

private:
    PolicyStep run_round(std::optional<Eigen::Index> forced, const ObserveFn& observe);

    Eigen::MatrixXd X_;
    PolicyConfig cfg_;
    bool explore_choices_;
    std::shared_ptr<const SparseBeliefState> belief_;
    // Gaussian prior the per-round fusion re-anchors on; the penalized
    // estimate already carries the full history, so conditioning the prior
    // on it once per round is the whole posterior.
    Eigen::VectorXd prior_theta_;
    Eigen::MatrixXd prior_sigma_;
    LassoState lasso_;
    int round_ = 0;
    Rng choice_rng_;
};

// Measurement loop for the dense coefficient belief. The decision quantities
// live in alternative space (induced means and covariance, updated by rank
// one steps); the coefficient-space belief is materialized only for feature
// dimensions small enough that carrying the m x m covariance is sensible,
// and the two updates are algebraically the same step.
class LinearPolicyEngine {
public:
    static constexpr Eigen::Index kMaxTrackedDim = 1024;

    LinearPolicyEngine(Eigen::MatrixXd features, PolicyConfig cfg, bool explore_choices = false);

    PolicyStep step(const ObserveFn& observe);
    PolicyStep step_forced(Eigen::Index choice, const ObserveFn& observe);

    int round() const { return round_; }
    const Eigen::VectorXd& posterior_means() const { return theta_mu_; }
    const Eigen::MatrixXd& induced_covariance() const { return C_; }
    bool has_coefficient_belief() const { return belief_ != nullptr; }
    const LinearBelief& coefficient_belief() const { return *belief_; }
    Eigen::Index recommend() const;

private:
    PolicyStep run_round(std::optional<Eigen::Index> forced, const ObserveFn& observe);

    Eigen::MatrixXd X_;
    PolicyConfig cfg_;
    bool explore_choices_;
    Eigen::VectorXd theta_mu_;
    Eigen::MatrixXd C_;
    std::shared_ptr<const LinearBelief> belief_;  // null when m > kMaxTrackedDim
    int round_ = 0;
    Rng choice_rng_;
};

}  // namespace sparsekg
