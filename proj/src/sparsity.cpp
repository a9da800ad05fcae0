#include "sparsekg/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace sparsekg {

namespace {

// A candidate realization: the modal assignment with the groups at the given
// positions (in flip-ratio order) flipped to their less likely value.
struct Node {
    double key;               // product of flip ratios, for ordering only
    std::vector<int> flips;   // positions into the ratio-sorted group order, ascending
};

struct NodeLess {
    bool operator()(const Node& x, const Node& y) const {
        if (x.key != y.key) return x.key < y.key;  // max-heap on key
        return x.flips > y.flips;                  // deterministic tie order
    }
};

}  // namespace

std::vector<SparsityRealization> enumerate_realizations(const std::vector<BetaCounts>& counts,
                                                        int max_terms) {
    const int p = static_cast<int>(counts.size());
    if (p == 0) throw std::invalid_argument("enumerate_realizations: no groups");
    if (max_terms < 1) throw std::invalid_argument("enumerate_realizations: max_terms < 1");

    std::vector<double> q(static_cast<size_t>(p));
    for (int j = 0; j < p; ++j) {
        const BetaCounts& c = counts[static_cast<size_t>(j)];
        if (c.xi < 0.0 || c.eta < 0.0 || !(c.xi + c.eta > 0.0) || !std::isfinite(c.xi) ||
            !std::isfinite(c.eta))
            throw std::invalid_argument("enumerate_realizations: counts must be nonnegative with positive sum");
        q[static_cast<size_t>(j)] = c.q();
    }

    // Most likely value per group, and how much a flip costs (ratio <= 1).
    std::vector<std::uint8_t> mode(static_cast<size_t>(p));
    std::vector<double> ratio(static_cast<size_t>(p));
    for (int j = 0; j < p; ++j) {
        const double qi = q[static_cast<size_t>(j)];
        mode[static_cast<size_t>(j)] = qi >= 0.5 ? 1 : 0;
        const double hi = std::max(qi, 1.0 - qi);
        ratio[static_cast<size_t>(j)] = std::min(qi, 1.0 - qi) / hi;
    }
    std::vector<int> by_ratio(static_cast<size_t>(p));
    std::iota(by_ratio.begin(), by_ratio.end(), 0);
    std::stable_sort(by_ratio.begin(), by_ratio.end(), [&](int i, int j) {
        return ratio[static_cast<size_t>(i)] > ratio[static_cast<size_t>(j)];
    });

    // Exact weight of an assignment, recomputed as a clean product so that
    // emitted weights carry no accumulated ratio-division error.
    auto weight_of = [&](const std::vector<std::uint8_t>& zeta) {
        double w = 1.0;
        for (int j = 0; j < p; ++j)
            w *= zeta[static_cast<size_t>(j)] ? q[static_cast<size_t>(j)]
                                              : 1.0 - q[static_cast<size_t>(j)];
        return w;
    };
    auto realize = [&](const std::vector<int>& flips) {
        std::vector<std::uint8_t> zeta = mode;
        for (int pos : flips) {
            const int g = by_ratio[static_cast<size_t>(pos)];
            zeta[static_cast<size_t>(g)] ^= 1;
        }
        return zeta;
    };

    // Best-first walk over flip subsets. Each popped node spawns at most two
    // children (extend by the next position / shift its deepest position), so
    // every subset is reached exactly once and keys are nonincreasing.
    std::priority_queue<Node, std::vector<Node>, NodeLess> heap;
    heap.push(Node{1.0, {}});
    std::vector<SparsityRealization> out;
    out.reserve(static_cast<size_t>(max_terms));
    while (!heap.empty() && static_cast<int>(out.size()) < max_terms) {
        Node node = heap.top();
        heap.pop();
        std::vector<std::uint8_t> zeta = realize(node.flips);
        const double w = weight_of(zeta);
        out.push_back(SparsityRealization{std::move(zeta), w});
        const int deepest = node.flips.empty() ? -1 : node.flips.back();
        if (deepest + 1 < p) {
            Node extend = node;
            extend.flips.push_back(deepest + 1);
            extend.key = node.key * ratio[static_cast<size_t>(by_ratio[static_cast<size_t>(deepest + 1)])];
            heap.push(std::move(extend));
            if (deepest >= 0) {
                Node shift = node;
                shift.flips.back() = deepest + 1;
                const double r_old = ratio[static_cast<size_t>(by_ratio[static_cast<size_t>(deepest)])];
                const double r_new = ratio[static_cast<size_t>(by_ratio[static_cast<size_t>(deepest + 1)])];
                shift.key = r_old > 0.0 ? node.key / r_old * r_new : 0.0;
                heap.push(std::move(shift));
            }
        }
    }
    return out;
}

}  // namespace sparsekg
