#include "sparsekg/kg.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace sparsekg {

namespace {

// Features of the groups switched on by a realization, in ascending order
// (groups store ascending indices and realizations follow group order).
std::vector<Eigen::Index> realization_features(const GroupStructure& groups,
                                               const std::vector<std::uint8_t>& zeta) {
    std::vector<Eigen::Index> S;
    for (int j = 0; j < groups.num_groups(); ++j)
        if (zeta[static_cast<size_t>(j)])
            for (Eigen::Index k : groups.group(j)) S.push_back(k);
    return S;
}

void check_sparse_inputs(const SparseBeliefState& state, const Eigen::MatrixXd& X,
                         double noise_var, int max_terms) {
    if (X.cols() != state.vartheta.size())
        throw std::invalid_argument("kg_values_sparse: feature dimension mismatch");
    if (X.rows() == 0) throw std::invalid_argument("kg_values_sparse: no alternatives");
    if (!(noise_var > 0.0)) throw std::invalid_argument("kg_values_sparse: noise_var must be positive");
    if (max_terms < 1) throw std::invalid_argument("kg_values_sparse: max_terms < 1");
    if (static_cast<int>(state.beta_counts.size()) != state.groups.num_groups())
        throw std::invalid_argument("kg_values_sparse: counts/groups mismatch");
}

}  // namespace

Eigen::Index argmax_lowest(const Eigen::VectorXd& v) {
    if (v.size() == 0) throw std::invalid_argument("argmax_lowest: empty input");
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

Eigen::VectorXd kg_values_lookup(const Eigen::VectorXd& theta, const Eigen::MatrixXd& C,
                                 double noise_var) {
    const Eigen::Index M = theta.size();
    if (C.rows() != M || C.cols() != M)
        throw std::invalid_argument("kg_values_lookup: dimension mismatch");
    if (!(noise_var > 0.0)) throw std::invalid_argument("kg_values_lookup: noise_var must be positive");
    Eigen::VectorXd out(M);
    for (Eigen::Index x = 0; x < M; ++x) {
        const double denom = noise_var + C(x, x);
        if (!(denom > 0.0)) throw std::invalid_argument("kg_values_lookup: nonpositive variance");
        out[x] = compute_h(theta, C.col(x) / std::sqrt(denom));
    }
    return out;
}

Eigen::VectorXd kg_values_linear(const LinearBelief& belief, const Eigen::MatrixXd& X,
                                 double noise_var) {
    const Eigen::MatrixXd W = X * belief.sigma;
    const Eigen::MatrixXd C = W * X.transpose();
    return kg_values_lookup(X * belief.vartheta, C, noise_var);
}

Eigen::VectorXd kg_values_sparse(const SparseBeliefState& state, const Eigen::MatrixXd& X,
                                 double noise_var, int max_terms) {
    check_sparse_inputs(state, X, noise_var, max_terms);
    const Eigen::Index M = X.rows();
    Eigen::VectorXd vals = Eigen::VectorXd::Zero(M);
    for (const SparsityRealization& rl : enumerate_realizations(state.beta_counts, max_terms)) {
        if (rl.weight == 0.0) continue;
        const std::vector<Eigen::Index> S = realization_features(state.groups, rl.zeta);
        if (S.empty()) continue;  // constant-zero model, no value of measuring
        const Eigen::Index s = static_cast<Eigen::Index>(S.size());
        Eigen::MatrixXd Xs(M, s);
        Eigen::MatrixXd Sig(s, s);
        Eigen::VectorXd th(s);
        for (Eigen::Index i = 0; i < s; ++i) {
            Xs.col(i) = X.col(S[static_cast<size_t>(i)]);
            th[i] = state.vartheta[S[static_cast<size_t>(i)]];
            for (Eigen::Index k = 0; k < s; ++k)
                Sig(i, k) = state.sigma_vartheta(S[static_cast<size_t>(i)], S[static_cast<size_t>(k)]);
        }
        const Eigen::VectorXd a = Xs * th;
        const Eigen::MatrixXd W = Xs * Sig;
        const Eigen::MatrixXd C = W * Xs.transpose();
        for (Eigen::Index x = 0; x < M; ++x) {
            const double denom = noise_var + C(x, x);
            if (!(denom > 0.0))
                throw std::invalid_argument("kg_values_sparse: nonpositive conditional variance");
            vals[x] += rl.weight * compute_h(a, C.col(x) / std::sqrt(denom));
        }
    }
    return vals;
}

double kg_value_sparse(const SparseBeliefState& state, const Eigen::MatrixXd& X, Eigen::Index x,
                       double noise_var, int max_terms) {
    check_sparse_inputs(state, X, noise_var, max_terms);
    if (x < 0 || x >= X.rows()) throw std::invalid_argument("kg_value_sparse: alternative out of range");
    double val = 0.0;
    for (const SparsityRealization& rl : enumerate_realizations(state.beta_counts, max_terms)) {
        if (rl.weight == 0.0) continue;
        const std::vector<Eigen::Index> S = realization_features(state.groups, rl.zeta);
        if (S.empty()) continue;
        const Eigen::Index s = static_cast<Eigen::Index>(S.size());
        Eigen::MatrixXd Xs(X.rows(), s);
        Eigen::MatrixXd Sig(s, s);
        Eigen::VectorXd th(s);
        for (Eigen::Index i = 0; i < s; ++i) {
            Xs.col(i) = X.col(S[static_cast<size_t>(i)]);
            th[i] = state.vartheta[S[static_cast<size_t>(i)]];
            for (Eigen::Index k = 0; k < s; ++k)
                Sig(i, k) = state.sigma_vartheta(S[static_cast<size_t>(i)], S[static_cast<size_t>(k)]);
        }
        const Eigen::VectorXd xrow = Xs.row(x).transpose();
        const Eigen::VectorXd cw = Xs * (Sig * xrow);
        const double denom = noise_var + cw[x];
        if (!(denom > 0.0))
            throw std::invalid_argument("kg_value_sparse: nonpositive conditional variance");
        val += rl.weight * compute_h(Xs * th, cw / std::sqrt(denom));
    }
    return val;
}

}  // namespace sparsekg
