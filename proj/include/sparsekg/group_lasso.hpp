#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "sparsekg/belief.hpp"
#include "sparsekg/errors.hpp"
#include "sparsekg/groups.hpp"

namespace sparsekg {

// Proximal operator of weight * ||.||_inf, via the Moreau identity:
// v minus the l1-ball projection of v. Clamps the largest magnitudes to a
// common level, leaves the rest alone.
Eigen::VectorXd prox_linf(const Eigen::VectorXd& v, double weight);

struct SolveOptions {
    double tol = 1e-8;        // absolute optimality-residual target
    long max_passes = 200000; // sweep budget before ConvergenceError
};

// Quadratic-statistics form of the group-penalized least squares problem
//   min 0.5 b'Rb - b'r + lambda * sum_j ||b_Gj||_inf
// together with its current minimizer.
struct LassoState {
    Eigen::MatrixXd R;  // sum of x x'
    Eigen::VectorXd r;  // sum of x y
    Eigen::VectorXd beta;
    double lambda = 0.0;
    GroupStructure groups;
    double tol = 1e-8;      // accuracy the minimizer was (re)solved to
    long long n_obs = 0;

    // Solver workspace: cached per-group curvature bounds (upper bounds on
    // the largest eigenvalue of the group's diagonal block of R). Kept valid
    // across recursive updates; empty means "recompute on demand".
    Eigen::VectorXd block_curvature;

    std::vector<int> active_groups() const;              // groups with a nonzero block
    std::vector<Eigen::Index> support_features() const;  // sorted union of active groups
};

LassoState solve_batch(const Eigen::MatrixXd& R, const Eigen::VectorXd& r, double lambda,
                       const GroupStructure& groups, const SolveOptions& opts = {});

// Exact re-solve at the augmented statistics (R + x x', r + x y, lambda_next),
// warm-started from the current minimizer; agrees with solve_batch on the
// same statistics to within the state's tolerance.
LassoState recursive_update(const LassoState& state, const Eigen::VectorXd& x_new, double y_new,
                            double lambda_next);

// Optimality residual of the state's minimizer, in gradient units.
// Zero groups contribute max(0, ||g_G||_1 - lambda); nonzero groups check the
// exposed-face subgradient conditions through z* = -(g_G)/lambda. Returns the
// plain gradient norm when lambda == 0.
double kkt_residual(const LassoState& state);

// Canonical subgradient of sum_j ||.||_inf at beta: per nonzero group, unit
// l1 mass on the max-magnitude coordinates (split equally across exact ties,
// signs matching beta); zero elsewhere and on zero groups.
Eigen::VectorXd extract_subgradient(const Eigen::VectorXd& beta, const GroupStructure& groups);

// Same eigenvectors, eigenvalues clamped into [c_min, c_max].
Eigen::MatrixXd eigen_truncate(const Eigen::MatrixXd& sym, double c_min, double c_max);

struct CovarianceEstimate {
    Eigen::MatrixXd sigma;  // |S| x |S|, coordinates ordered like `support`
    std::vector<Eigen::Index> support;
    int sample_count = 0;
};

// Sampled frequentist covariance of the penalized estimator on the current
// support: sigma = noise_var * M + lambda^2 * M * TruncCov(z) * M with
// M = (R_S)^-1. Subgradient draws come from the belief restricted to S.
// Directions R_S cannot see get their variance capped at var_cap instead of
// diverging (the spectral floor on R_S is chosen so the lambda^2 term cannot
// exceed the cap along them).
CovarianceEstimate estimate_covariance(const LassoState& state, const SparseBeliefState& belief,
                                       double noise_var, double lambda_next, int n_samples,
                                       double c_min, double c_max, std::uint64_t rng_seed,
                                       double var_cap = 1e9);

}  // namespace sparsekg
