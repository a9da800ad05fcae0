#pragma once

#include <Eigen/Core>

namespace sparsekg {

// f(z) = phi(z) + z * Phi(z): expected value of max(z + Z, 0) for Z ~ N(0,1).
double f_scalar(double z);

// h(a, b) = E[ max_i (a_i + b_i Z) ] - max_i a_i, Z ~ N(0,1).
//
// Computed by the upper-envelope sweep: sort by slope, collapse (numerically)
// equal slopes onto the highest intercept, drop lines that never attain the
// envelope, then sum slope increments times f at the crossing points.
// Always >= 0; exactly 0 when one line dominates everywhere.
double compute_h(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Conditional-change-of-mean row: cov_row / sqrt(noise_var + cov_diag_xx).
// cov_row is the covariance of every quantity of interest with the measured
// one; cov_diag_xx is the measured quantity's own variance.
Eigen::VectorXd sigma_tilde(const Eigen::VectorXd& cov_row, double cov_diag_xx, double noise_var);

}  // namespace sparsekg
