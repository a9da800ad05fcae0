#include "sparsekg/splines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <stdexcept>

namespace sparsekg {

namespace {
std::once_flag clamp_warned;
}

SplineBasis::SplineBasis(double lo, double hi, int interior_knots, int order)
    : lo_(lo), hi_(hi), K_(interior_knots), l_(order) {
    if (!(hi > lo)) throw std::invalid_argument("SplineBasis: empty domain");
    if (K_ < 0) throw std::invalid_argument("SplineBasis: negative interior knot count");
    if (l_ < 1) throw std::invalid_argument("SplineBasis: order must be >= 1");
    knots_.reserve(static_cast<size_t>(K_ + 2 * l_));
    for (int i = 0; i < l_; ++i) knots_.push_back(lo);
    const double step = (hi - lo) / static_cast<double>(K_ + 1);
    for (int i = 1; i <= K_; ++i) knots_.push_back(lo + step * static_cast<double>(i));
    for (int i = 0; i < l_; ++i) knots_.push_back(hi);
}

Eigen::VectorXd SplineBasis::eval(double x) const {
    if (x < lo_ || x > hi_) {
        std::call_once(clamp_warned, [] {
            std::fprintf(stderr, "warning: spline input outside its domain; clamping to the boundary\n");
        });
        x = std::clamp(x, lo_, hi_);
    }
    const int n = K_ + l_;  // number of basis functions
    // Knot span: largest s in [l-1, n-1] with knots_[s] <= x.
    int s;
    if (x >= hi_) {
        s = n - 1;
    } else {
        s = static_cast<int>(std::upper_bound(knots_.begin() + l_ - 1, knots_.begin() + n, x) -
                             knots_.begin()) - 1;
        s = std::clamp(s, l_ - 1, n - 1);
    }

    // Triangular recurrence for the l nonzero values on the span.
    std::vector<double> N(static_cast<size_t>(l_), 0.0), left(static_cast<size_t>(l_)),
        right(static_cast<size_t>(l_));
    N[0] = 1.0;
    for (int j = 1; j < l_; ++j) {
        left[static_cast<size_t>(j)] = x - knots_[static_cast<size_t>(s + 1 - j)];
        right[static_cast<size_t>(j)] = knots_[static_cast<size_t>(s + j)] - x;
        double saved = 0.0;
        for (int rr = 0; rr < j; ++rr) {
            const double denom = right[static_cast<size_t>(rr + 1)] + left[static_cast<size_t>(j - rr)];
            const double temp = N[static_cast<size_t>(rr)] / denom;
            N[static_cast<size_t>(rr)] = saved + right[static_cast<size_t>(rr + 1)] * temp;
            saved = left[static_cast<size_t>(j - rr)] * temp;
        }
        N[static_cast<size_t>(j)] = saved;
    }

    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < l_; ++i) out[s - l_ + 1 + i] = N[static_cast<size_t>(i)];
    return out;
}

Eigen::VectorXd tensor_eval(const SplineBasis& b1, const SplineBasis& b2, double x1, double x2) {
    const Eigen::VectorXd v1 = b1.eval(x1);
    const Eigen::VectorXd v2 = b2.eval(x2);
    Eigen::VectorXd out(v1.size() * v2.size());
    for (Eigen::Index i = 0; i < v1.size(); ++i)
        out.segment(i * v2.size(), v2.size()) = v1[i] * v2;
    return out;
}

AdditiveFeatureMap::AdditiveFeatureMap(std::vector<SplineBasis> per_variable,
                                       std::vector<std::pair<int, int>> pairs)
    : bases_(std::move(per_variable)) {
    const int nv = num_variables();
    if (nv == 0) throw std::invalid_argument("AdditiveFeatureMap: no variables");
    std::vector<char> in_pair(static_cast<size_t>(nv), 0);
    for (auto [a, b] : pairs) {
        if (a < 0 || b < 0 || a >= nv || b >= nv || a == b)
            throw std::invalid_argument("AdditiveFeatureMap: bad interaction pair");
        in_pair[static_cast<size_t>(a)] = in_pair[static_cast<size_t>(b)] = 1;
    }
    for (int v = 0; v < nv; ++v)
        if (!in_pair[static_cast<size_t>(v)]) components_.push_back(FeatureComponent{v, -1});
    for (auto [a, b] : pairs) components_.push_back(FeatureComponent{a, b});

    std::vector<Eigen::Index> sizes;
    for (const FeatureComponent& c : components_) {
        offsets_.push_back(dim_);
        const Eigen::Index d = c.is_pair() ? bases_[static_cast<size_t>(c.var1)].dimension() *
                                                 bases_[static_cast<size_t>(c.var2)].dimension()
                                           : bases_[static_cast<size_t>(c.var1)].dimension();
        sizes.push_back(d);
        dim_ += d;
    }
    groups_ = GroupStructure::contiguous(sizes);
}

Eigen::Index AdditiveFeatureMap::component_offset(int component) const {
    return offsets_.at(static_cast<size_t>(component));
}

Eigen::VectorXd AdditiveFeatureMap::map_alternative(const Eigen::VectorXd& x_raw) const {
    if (x_raw.size() != num_variables())
        throw std::invalid_argument("map_alternative: wrong variable count");
    Eigen::VectorXd out(dim_);
    for (size_t c = 0; c < components_.size(); ++c) {
        const FeatureComponent& fc = components_[c];
        if (fc.is_pair()) {
            out.segment(offsets_[c], groups_.group(static_cast<int>(c)).size()) =
                tensor_eval(bases_[static_cast<size_t>(fc.var1)], bases_[static_cast<size_t>(fc.var2)],
                            x_raw[fc.var1], x_raw[fc.var2]);
        } else {
            out.segment(offsets_[c], groups_.group(static_cast<int>(c)).size()) =
                bases_[static_cast<size_t>(fc.var1)].eval(x_raw[fc.var1]);
        }
    }
    return out;
}

Eigen::MatrixXd AdditiveFeatureMap::map_all(const Eigen::MatrixXd& X_raw) const {
    Eigen::MatrixXd out(X_raw.rows(), dim_);
    for (Eigen::Index i = 0; i < X_raw.rows(); ++i)
        out.row(i) = map_alternative(X_raw.row(i).transpose()).transpose();
    return out;
}

Eigen::VectorXd AdditiveFeatureMap::reconstruct_main(const Eigen::VectorXd& coef, int component,
                                                     const Eigen::VectorXd& xs) const {
    if (coef.size() != dim_) throw std::invalid_argument("reconstruct_main: wrong coefficient length");
    const FeatureComponent& fc = components_.at(static_cast<size_t>(component));
    if (fc.is_pair()) throw std::invalid_argument("reconstruct_main: component is an interaction");
    const SplineBasis& basis = bases_[static_cast<size_t>(fc.var1)];
    const Eigen::VectorXd block = coef.segment(component_offset(component), basis.dimension());
    Eigen::VectorXd out(xs.size());
    for (Eigen::Index i = 0; i < xs.size(); ++i) out[i] = basis.eval(xs[i]).dot(block);
    return out;
}

Eigen::MatrixXd AdditiveFeatureMap::reconstruct_pair(const Eigen::VectorXd& coef, int component,
                                                     const Eigen::VectorXd& xs1,
                                                     const Eigen::VectorXd& xs2) const {
    if (coef.size() != dim_) throw std::invalid_argument("reconstruct_pair: wrong coefficient length");
    const FeatureComponent& fc = components_.at(static_cast<size_t>(component));
    if (!fc.is_pair()) throw std::invalid_argument("reconstruct_pair: component is a main effect");
    const SplineBasis& b1 = bases_[static_cast<size_t>(fc.var1)];
    const SplineBasis& b2 = bases_[static_cast<size_t>(fc.var2)];
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> C(
        coef.data() + component_offset(component), b1.dimension(), b2.dimension());
    Eigen::MatrixXd v2(b2.dimension(), xs2.size());
    for (Eigen::Index j = 0; j < xs2.size(); ++j) v2.col(j) = b2.eval(xs2[j]);
    Eigen::MatrixXd out(xs1.size(), xs2.size());
    for (Eigen::Index i = 0; i < xs1.size(); ++i)
        out.row(i) = (b1.eval(xs1[i]).transpose() * C) * v2;
    return out;
}

}  // namespace sparsekg
