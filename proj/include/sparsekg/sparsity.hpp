#pragma once

#include <cstdint>
#include <vector>

namespace sparsekg {

// Beta posterior counts for one group's inclusion indicator.
// Boundary counts (xi or eta equal to 0) are allowed and mean the indicator
// is certain; both-zero is rejected where these are consumed.
struct BetaCounts {
    double xi = 1.0;   // evidence for "group is in the model"
    double eta = 1.0;  // evidence for "group is out"
    double q() const { return xi / (xi + eta); }
};

struct SparsityRealization {
    std::vector<std::uint8_t> zeta;  // one inclusion flag per group
    double weight = 0.0;             // product of marginal probabilities
};

// The max_terms highest-probability realizations of independent group
// inclusion indicators with marginals q_j, in nonincreasing weight order
// (ties broken deterministically). Weights are the exact products; the
// truncated tail is deliberately not renormalized.
std::vector<SparsityRealization> enumerate_realizations(const std::vector<BetaCounts>& counts,
                                                        int max_terms);

}  // namespace sparsekg
