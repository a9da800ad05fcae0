#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "sparsekg/errors.hpp"
#include "sparsekg/groups.hpp"
#include "sparsekg/sparsity.hpp"

namespace sparsekg {

// Correlated-normal belief over a finite set of alternative values.
struct LookupBelief {
    Eigen::VectorXd theta;  // posterior means, one per alternative
    Eigen::MatrixXd sigma;  // posterior covariance, symmetric PSD
};

// Normal belief over regression coefficients of y = x' alpha + noise.
struct LinearBelief {
    Eigen::VectorXd vartheta;
    Eigen::MatrixXd sigma;  // coefficient covariance
};

// Coefficient belief conditional on group inclusion, plus per-group
// Beta-Bernoulli inclusion counts. Mean/covariance entries for groups that
// are "out" under a given realization are simply ignored by consumers.
struct SparseBeliefState {
    Eigen::VectorXd vartheta;        // mean given inclusion
    Eigen::MatrixXd sigma_vartheta;  // covariance given inclusion
    std::vector<BetaCounts> beta_counts;
    GroupStructure groups;
};

// Conjugate update of a lookup belief after observing alternative x with
// value y and known observation noise variance.
LookupBelief lookup_update(const LookupBelief& belief, Eigen::Index x, double y, double noise_var);

// Recursive least squares step for the linear coefficient belief.
LinearBelief rls_update(const LinearBelief& belief, const Eigen::VectorXd& x, double y,
                        double noise_var);

// Zero-mean, scaled-identity-covariance prior with uniform inclusion counts.
SparseBeliefState make_sparse_prior(GroupStructure groups, double prior_variance, double xi0 = 1.0,
                                    double eta0 = 1.0);

// Fuse an external estimate (est_mean, est_cov) of the `support` coordinates
// into the belief by conditioning the joint Gaussian on it. On the support
// block this equals precision-weighted fusion; coordinates correlated with
// the support update through their covariances, uncorrelated ones are
// untouched. Throws SingularPrecisionError if the innovation factorization
// fails even after a scale-relative 1e-10 diagonal jitter.
SparseBeliefState fuse_posterior(const SparseBeliefState& belief, const Eigen::VectorXd& est_mean,
                                 const Eigen::MatrixXd& est_cov,
                                 const std::vector<Eigen::Index>& support);

// Increment xi for groups in `selected`, eta for the rest.
SparseBeliefState beta_bernoulli_update(const SparseBeliefState& belief,
                                        const std::vector<int>& selected);

// Checkpoint serialization (fields: vartheta, sigma_vartheta, beta_counts,
// groups). Round-trips bit-exactly.
std::string to_json(const SparseBeliefState& state);
SparseBeliefState sparse_state_from_json(const std::string& text);

}  // namespace sparsekg
