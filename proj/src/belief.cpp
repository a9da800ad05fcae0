#include "sparsekg/belief.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace sparsekg {

namespace {

void check_noise(double noise_var) {
    if (!(noise_var > 0.0)) throw std::invalid_argument("noise_var must be positive");
}

// Solve A X = B for symmetric positive (semi)definite A, retrying once with
// the documented 1e-10 diagonal jitter before giving up.
Eigen::MatrixXd spd_solve(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const char* who) {
    auto attempt = [&](const Eigen::MatrixXd& M) -> std::pair<bool, Eigen::MatrixXd> {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
        if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
            return {false, {}};
        Eigen::MatrixXd X = ldlt.solve(B);
        return {X.allFinite(), std::move(X)};
    };
    auto [ok, X] = attempt(A);
    if (ok) return X;
    // Jitter must be meaningful relative to the matrix scale; est covariances can
    // carry eigenvalues anywhere from ~1 up to the variance cap.
    const double scale = A.rows() > 0 ? A.diagonal().cwiseAbs().maxCoeff() : 0.0;
    Eigen::MatrixXd Aj = A;
    Aj.diagonal().array() += 1e-10 * std::max(1.0, scale);
    std::tie(ok, X) = attempt(Aj);
    if (ok) return X;
    throw SingularPrecisionError(std::string(who) + ": singular precision matrix");
}

}  // namespace

LookupBelief lookup_update(const LookupBelief& belief, Eigen::Index x, double y, double noise_var) {
    check_noise(noise_var);
    const Eigen::Index M = belief.theta.size();
    if (x < 0 || x >= M) throw std::invalid_argument("lookup_update: alternative index out of range");
    if (belief.sigma.rows() != M || belief.sigma.cols() != M)
        throw std::invalid_argument("lookup_update: dimension mismatch");

    const double gamma = noise_var + belief.sigma(x, x);
    const Eigen::VectorXd col = belief.sigma.col(x);
    LookupBelief out;
    out.theta = belief.theta + ((y - belief.theta[x]) / gamma) * col;
    out.sigma = belief.sigma - (col * col.transpose()) / gamma;
    out.sigma = ((out.sigma + out.sigma.transpose()) * 0.5).eval();
    return out;
}

LinearBelief rls_update(const LinearBelief& belief, const Eigen::VectorXd& x, double y,
                        double noise_var) {
    check_noise(noise_var);
    const Eigen::Index m = belief.vartheta.size();
    if (x.size() != m || belief.sigma.rows() != m || belief.sigma.cols() != m)
        throw std::invalid_argument("rls_update: dimension mismatch");

    const Eigen::VectorXd sx = belief.sigma * x;
    const double gamma = noise_var + x.dot(sx);
    const double resid = y - belief.vartheta.dot(x);
    LinearBelief out;
    out.vartheta = belief.vartheta + (resid / gamma) * sx;
    out.sigma = belief.sigma - (sx * sx.transpose()) / gamma;
    out.sigma = ((out.sigma + out.sigma.transpose()) * 0.5).eval();
    return out;
}

SparseBeliefState make_sparse_prior(GroupStructure groups, double prior_variance, double xi0,
                                    double eta0) {
    if (!(prior_variance > 0.0)) throw std::invalid_argument("make_sparse_prior: prior_variance must be positive");
    const Eigen::Index m = groups.num_features();
    SparseBeliefState s;
    s.vartheta = Eigen::VectorXd::Zero(m);
    s.sigma_vartheta = prior_variance * Eigen::MatrixXd::Identity(m, m);
    s.beta_counts.assign(static_cast<size_t>(groups.num_groups()), BetaCounts{xi0, eta0});
    s.groups = std::move(groups);
    return s;
}

SparseBeliefState fuse_posterior(const SparseBeliefState& belief, const Eigen::VectorXd& est_mean,
                                 const Eigen::MatrixXd& est_cov,
                                 const std::vector<Eigen::Index>& support) {
    const Eigen::Index s = static_cast<Eigen::Index>(support.size());
    if (s == 0) throw std::invalid_argument("fuse_posterior: empty support");
    if (est_mean.size() != s || est_cov.rows() != s || est_cov.cols() != s)
        throw std::invalid_argument("fuse_posterior: dimension mismatch");
    const Eigen::Index m = belief.vartheta.size();
    for (Eigen::Index k : support)
        if (k < 0 || k >= m) throw std::invalid_argument("fuse_posterior: support index out of range");

    // Condition the joint belief on the estimate, treated as an observation of
    // the support coordinates with noise est_cov. On the support block this is
    // exactly precision-weighted fusion; coordinates correlated with the
    // support move through their covariances, uncorrelated ones are untouched.
    // The innovation form keeps the full matrix positive semidefinite, which
    // patching the block alone does not once supports shift between rounds.
    Eigen::MatrixXd cross(m, s);  // Sigma columns at the support
    Eigen::MatrixXd gain_den(s, s);
    Eigen::VectorXd innovation(s);
    for (Eigen::Index i = 0; i < s; ++i) {
        const Eigen::Index k = support[static_cast<size_t>(i)];
        cross.col(i) = belief.sigma_vartheta.col(k);
        innovation[i] = est_mean[i] - belief.vartheta[k];
        for (Eigen::Index j = 0; j < s; ++j)
            gain_den(i, j) = belief.sigma_vartheta(k, support[static_cast<size_t>(j)]) + est_cov(i, j);
    }
    const Eigen::MatrixXd solved = spd_solve(gain_den, cross.transpose(), "fuse_posterior");

    SparseBeliefState out = belief;
    out.vartheta.noalias() += solved.transpose() * innovation;
    out.sigma_vartheta.noalias() -= cross * solved;
    out.sigma_vartheta = ((out.sigma_vartheta + out.sigma_vartheta.transpose()) * 0.5).eval();
    return out;
}

SparseBeliefState beta_bernoulli_update(const SparseBeliefState& belief,
                                        const std::vector<int>& selected) {
    SparseBeliefState out = belief;
    std::vector<char> in(out.beta_counts.size(), 0);
    for (int j : selected) {
        if (j < 0 || j >= static_cast<int>(out.beta_counts.size()))
            throw std::invalid_argument("beta_bernoulli_update: group index out of range");
        in[static_cast<size_t>(j)] = 1;
    }
    for (size_t j = 0; j < out.beta_counts.size(); ++j) {
        if (in[j])
            out.beta_counts[j].xi += 1.0;
        else
            out.beta_counts[j].eta += 1.0;
    }
    return out;
}

std::string to_json(const SparseBeliefState& state) {
    nlohmann::json j;
    j["vartheta"] = std::vector<double>(state.vartheta.data(),
                                        state.vartheta.data() + state.vartheta.size());
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < state.sigma_vartheta.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < state.sigma_vartheta.cols(); ++k)
            row.push_back(state.sigma_vartheta(i, k));
        rows.push_back(std::move(row));
    }
    j["sigma_vartheta"] = std::move(rows);
    nlohmann::json counts = nlohmann::json::array();
    for (const BetaCounts& c : state.beta_counts) counts.push_back({c.xi, c.eta});
    j["beta_counts"] = std::move(counts);
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : state.groups.all()) {
        nlohmann::json idx = nlohmann::json::array();
        for (Eigen::Index k : g) idx.push_back(static_cast<long long>(k));
        groups.push_back(std::move(idx));
    }
    j["groups"] = std::move(groups);
    return j.dump();
}

SparseBeliefState sparse_state_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    SparseBeliefState s;
    const auto& vt = j.at("vartheta");
    s.vartheta.resize(static_cast<Eigen::Index>(vt.size()));
    for (size_t i = 0; i < vt.size(); ++i) s.vartheta[static_cast<Eigen::Index>(i)] = vt[i].get<double>();
    const auto& sv = j.at("sigma_vartheta");
    const Eigen::Index m = static_cast<Eigen::Index>(sv.size());
    s.sigma_vartheta.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& row = sv[static_cast<size_t>(i)];
        if (static_cast<Eigen::Index>(row.size()) != m)
            throw std::invalid_argument("sparse_state_from_json: ragged covariance");
        for (Eigen::Index k = 0; k < m; ++k) s.sigma_vartheta(i, k) = row[static_cast<size_t>(k)].get<double>();
    }
    for (const auto& c : j.at("beta_counts"))
        s.beta_counts.push_back(BetaCounts{c.at(0).get<double>(), c.at(1).get<double>()});
    std::vector<std::vector<Eigen::Index>> groups;
    for (const auto& g : j.at("groups")) {
        std::vector<Eigen::Index> idx;
        for (const auto& k : g) idx.push_back(k.get<Eigen::Index>());
        groups.push_back(std::move(idx));
    }
    s.groups = GroupStructure(std::move(groups));
    return s;
}

}  // namespace sparsekg
