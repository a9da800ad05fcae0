#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sparsekg/envelope.hpp>
#include <sparsekg/rng.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace sparsekg;

namespace {

// Quadrature oracle for E[max_i(a_i + b_i Z)]: trapezoid over z in [-10, 10].
// The integrand is piecewise linear in z times the normal density, so a fine
// uniform grid nails it far below the tolerances used here.
double emax_quadrature(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const int n = 200001;
    const double lo = -10.0, hi = 10.0;
    const double h = (hi - lo) / (n - 1);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = lo + h * i;
        const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
        const double m = (a + b * z).maxCoeff();
        const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        acc += w * m * pdf;
    }
    return acc * h;
}

}  // namespace

TEST_CASE("f_scalar pinned values") {
    CHECK(f_scalar(0.0) == doctest::Approx(0.3989423).epsilon(1e-6));
    CHECK(f_scalar(-1.0) == doctest::Approx(0.0833155).epsilon(1e-5));
    // Far in the right tail the max is attained by z itself.
    CHECK(f_scalar(8.0) == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(f_scalar(10.0) == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("f_scalar shape") {
    double prev = f_scalar(-9.0);
    CHECK(prev >= 0.0);
    for (double z = -8.75; z <= 9.0; z += 0.25) {
        const double cur = f_scalar(z);
        CHECK(cur >= prev);  // monotone nondecreasing
        CHECK(cur >= 0.0);
        prev = cur;
    }
}

TEST_CASE("compute_h pinned values") {
    Eigen::VectorXd a(2), b(2);
    a << 1, 2;
    b << 0, 0;
    CHECK(compute_h(a, b) == doctest::Approx(0.0).epsilon(1e-15));

    a << 0, 0;
    b << 0, 1;
    CHECK(compute_h(a, b) == doctest::Approx(0.3989423).epsilon(1e-6));

    a << 1, 0;
    b << 0, 1;
    CHECK(compute_h(a, b) == doctest::Approx(0.0833155).epsilon(1e-5));
}

TEST_CASE("compute_h dominance and degeneracy") {
    Eigen::VectorXd a(2), b(2);
    // One line dominates everywhere: envelope is that line, h = 0.
    a << 5, 0;
    b << 1, 1;
    CHECK(compute_h(a, b) == doctest::Approx(0.0).epsilon(1e-15));
    // Equal slopes collapse to the higher intercept.
    Eigen::VectorXd a3(3), b3(3);
    a3 << 1, 2, 0;
    b3 << 1, 1, 2;
    Eigen::VectorXd a2(2), b2(2);
    a2 << 2, 0;
    b2 << 1, 2;
    CHECK(compute_h(a3, b3) == doctest::Approx(compute_h(a2, b2)).epsilon(1e-12));
}

TEST_CASE("compute_h against quadrature oracle on random instances") {
    Rng rng = make_rng(20260817, 1);
    std::normal_distribution<double> na(0.0, 2.0);
    std::uniform_real_distribution<double> nb(0.0, 3.0);
    std::uniform_int_distribution<int> nm(1, 10);
    for (int t = 0; t < 40; ++t) {
        const int m = nm(rng);
        Eigen::VectorXd a(m), b(m);
        for (int i = 0; i < m; ++i) {
            a[i] = na(rng);
            b[i] = nb(rng);
        }
        const double h = compute_h(a, b);
        const double want = emax_quadrature(a, b) - a.maxCoeff();
        CHECK(h >= 0.0);
        CHECK(h == doctest::Approx(want).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("compute_h invariances") {
    Rng rng = make_rng(20260817, 2);
    std::normal_distribution<double> na(0.0, 1.0);
    std::uniform_real_distribution<double> nb(0.0, 2.0);
    for (int t = 0; t < 20; ++t) {
        Eigen::VectorXd a(6), b(6);
        for (int i = 0; i < 6; ++i) {
            a[i] = na(rng);
            b[i] = nb(rng);
        }
        const double base = compute_h(a, b);
        // Shifting every intercept by a constant cancels in both terms.
        CHECK(compute_h(a.array() + 7.5, b) == doctest::Approx(base).epsilon(1e-10));
        // Permutation invariance.
        Eigen::VectorXd ap(6), bp(6);
        for (int i = 0; i < 6; ++i) {
            ap[i] = a[(i + 3) % 6];
            bp[i] = b[(i + 3) % 6];
        }
        CHECK(compute_h(ap, bp) == doctest::Approx(base).epsilon(1e-10));
        // Equal slopes everywhere: no information, h = 0.
        CHECK(compute_h(a, Eigen::VectorXd::Constant(6, b[0])) ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("sigma_tilde") {
    Eigen::VectorXd row(2);
    row << 1, 0;
    Eigen::VectorXd st = sigma_tilde(row, 1.0, 1.0);
    CHECK(st[0] == doctest::Approx(0.70711).epsilon(1e-5));
    CHECK(st[1] == doctest::Approx(0.0));

    row << 2, 1;
    st = sigma_tilde(row, 2.0, 2.0);
    CHECK(st[0] == doctest::Approx(1.0));
    CHECK(st[1] == doctest::Approx(0.5));

    Eigen::VectorXd zero = Eigen::VectorXd::Zero(5);
    CHECK(sigma_tilde(zero, 3.0, 1.0).isZero(0.0));
}
