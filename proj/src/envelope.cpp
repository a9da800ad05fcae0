#include "sparsekg/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace sparsekg {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kSlopeTie = 1e-12;  // |b_i - b_j| below this is one slope

double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double norm_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

}  // namespace

double f_scalar(double z) {
    // For very negative z both terms underflow together; the limit is 0.
    return norm_pdf(z) + z * norm_cdf(z);
}

double compute_h(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::Index n = a.size();
    if (n == 0 || b.size() != n) throw std::invalid_argument("compute_h: empty or mismatched inputs");
    if (!a.allFinite() || !b.allFinite()) throw std::invalid_argument("compute_h: non-finite input");

    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
        if (b[i] != b[j]) return b[i] < b[j];
        return a[i] < a[j];
    });

    // Collapse slope ties: within a run of equal b keep only the largest a.
    // After this, slopes are strictly increasing by at least kSlopeTie.
    std::vector<double> as, bs;
    as.reserve(static_cast<size_t>(n));
    bs.reserve(static_cast<size_t>(n));
    for (Eigen::Index idx : order) {
        if (!bs.empty() && b[idx] - bs.back() < kSlopeTie) {
            if (a[idx] > as.back()) as.back() = a[idx];
            if (b[idx] > bs.back()) bs.back() = b[idx];
        } else {
            as.push_back(a[idx]);
            bs.push_back(b[idx]);
        }
    }

    const size_t k = as.size();
    if (k == 1) return 0.0;

    // Upper-envelope stack sweep. keep[i] holds a retained line; cross[i] is
    // the z at which it overtakes the line below it on the stack.
    std::vector<size_t> keep;
    std::vector<double> cross;
    keep.reserve(k);
    cross.reserve(k);
    for (size_t i = 0; i < k; ++i) {
        double z = -std::numeric_limits<double>::infinity();
        while (!keep.empty()) {
            const size_t t = keep.back();
            z = (as[t] - as[i]) / (bs[i] - bs[t]);
            if (z <= cross.back()) {
                keep.pop_back();
                cross.pop_back();
            } else {
                break;
            }
        }
        if (keep.empty()) z = -std::numeric_limits<double>::infinity();
        keep.push_back(i);
        cross.push_back(z);
    }

    double h = 0.0;
    for (size_t j = 1; j < keep.size(); ++j) {
        h += (bs[keep[j]] - bs[keep[j - 1]]) * f_scalar(-std::abs(cross[j]));
    }
    return std::max(h, 0.0);
}

Eigen::VectorXd sigma_tilde(const Eigen::VectorXd& cov_row, double cov_diag_xx, double noise_var) {
    const double denom2 = noise_var + cov_diag_xx;
    if (!(denom2 > 0.0)) throw std::invalid_argument("sigma_tilde: nonpositive denominator");
    return cov_row / std::sqrt(denom2);
}

}  // namespace sparsekg
