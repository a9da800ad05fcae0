#pragma once

#include <Eigen/Dense>

#include "sparsekg/belief.hpp"
#include "sparsekg/envelope.hpp"
#include "sparsekg/sparsity.hpp"

namespace sparsekg {

// Index of the largest entry; earliest index wins ties.
Eigen::Index argmax_lowest(const Eigen::VectorXd& v);

// One-step value of measuring each alternative under a finite-alternative
// normal belief (means theta, covariance C): h(theta, C e_x / sqrt(noise_var + C_xx)).
Eigen::VectorXd kg_values_lookup(const Eigen::VectorXd& theta, const Eigen::MatrixXd& C,
                                 double noise_var);

// Same for a coefficient belief, through the induced alternative-space belief
// (X vartheta, X Sigma X').
Eigen::VectorXd kg_values_linear(const LinearBelief& belief, const Eigen::MatrixXd& X,
                                 double noise_var);

// Model-averaged values under group-sparsity uncertainty: a weighted sum of
// restricted-model values over the top realizations of the inclusion
// indicators (at most max_terms, weights not renormalized).
Eigen::VectorXd kg_values_sparse(const SparseBeliefState& state, const Eigen::MatrixXd& X,
                                 double noise_var, int max_terms);

// Single-alternative variant of the above.
double kg_value_sparse(const SparseBeliefState& state, const Eigen::MatrixXd& X, Eigen::Index x,
                       double noise_var, int max_terms);

}  // namespace sparsekg
