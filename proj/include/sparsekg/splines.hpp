#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "sparsekg/groups.hpp"

namespace sparsekg {

// Normalized B-spline basis of the given order on [lo, hi] with K equally
// spaced interior knots; dimension K + order. Boundary knots are repeated to
// full multiplicity, so the basis is a partition of unity on the whole domain.
class SplineBasis {
public:
    SplineBasis() = default;
    SplineBasis(double lo, double hi, int interior_knots, int order);

    int order() const { return l_; }
    int interior_knots() const { return K_; }
    Eigen::Index dimension() const { return K_ + l_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }

    // Basis values at x. Inputs outside [lo, hi] clamp to the boundary and
    // log a warning once per process.
    Eigen::VectorXd eval(double x) const;

private:
    double lo_ = 0.0, hi_ = 1.0;
    int K_ = 0, l_ = 1;
    std::vector<double> knots_;  // extended knot vector, length K + 2*order
};

// Flattened tensor-product basis: outer product of the two evaluations,
// row-major (index of (i, j) is i * b2.dimension() + j).
Eigen::VectorXd tensor_eval(const SplineBasis& b1, const SplineBasis& b2, double x1, double x2);

// One additive component: a per-variable main effect, or a two-variable
// tensor interaction when var2 >= 0.
struct FeatureComponent {
    int var1 = -1;
    int var2 = -1;
    bool is_pair() const { return var2 >= 0; }
};

// Maps raw alternatives to concatenated spline features, one block (= one
// group) per additive component. Components are the main effects of every
// variable not covered by a declared pair, in ascending variable order,
// followed by the pairs in declaration order; pair variables get no separate
// main block (the tensor space already contains those directions).
class AdditiveFeatureMap {
public:
    AdditiveFeatureMap() = default;
    AdditiveFeatureMap(std::vector<SplineBasis> per_variable,
                       std::vector<std::pair<int, int>> pairs);

    int num_variables() const { return static_cast<int>(bases_.size()); }
    Eigen::Index dimension() const { return dim_; }
    const GroupStructure& groups() const { return groups_; }
    const std::vector<FeatureComponent>& components() const { return components_; }
    Eigen::Index component_offset(int component) const;
    const SplineBasis& variable_basis(int var) const { return bases_.at(static_cast<size_t>(var)); }

    Eigen::VectorXd map_alternative(const Eigen::VectorXd& x_raw) const;
    Eigen::MatrixXd map_all(const Eigen::MatrixXd& X_raw) const;  // one row per alternative

    // Component-function estimates from a full coefficient vector. Estimates
    // are identified only up to additive constants; center before comparing.
    Eigen::VectorXd reconstruct_main(const Eigen::VectorXd& coef, int component,
                                     const Eigen::VectorXd& xs) const;
    Eigen::MatrixXd reconstruct_pair(const Eigen::VectorXd& coef, int component,
                                     const Eigen::VectorXd& xs1, const Eigen::VectorXd& xs2) const;

private:
    std::vector<SplineBasis> bases_;
    std::vector<FeatureComponent> components_;
    std::vector<Eigen::Index> offsets_;
    Eigen::Index dim_ = 0;
    GroupStructure groups_;
};

}  // namespace sparsekg
