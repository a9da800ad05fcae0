#include "sparsekg/groups.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace sparsekg {

GroupStructure::GroupStructure(std::vector<std::vector<Eigen::Index>> groups)
    : groups_(std::move(groups)) {
    Eigen::Index m = 0;
    for (const auto& g : groups_) {
        if (g.empty()) throw std::invalid_argument("GroupStructure: empty group");
        m += static_cast<Eigen::Index>(g.size());
        max_size_ = std::max(max_size_, static_cast<Eigen::Index>(g.size()));
    }
    if (m == 0) throw std::invalid_argument("GroupStructure: no features");
    feature_group_.assign(static_cast<size_t>(m), -1);
    for (int j = 0; j < num_groups(); ++j) {
        for (Eigen::Index k : groups_[static_cast<size_t>(j)]) {
            if (k < 0 || k >= m) throw std::invalid_argument("GroupStructure: feature index out of range");
            if (feature_group_[static_cast<size_t>(k)] != -1)
                throw std::invalid_argument("GroupStructure: feature appears in two groups");
            feature_group_[static_cast<size_t>(k)] = j;
        }
    }
    // All slots filled follows from the count + distinctness checks above.
}

GroupStructure GroupStructure::contiguous(const std::vector<Eigen::Index>& sizes) {
    std::vector<std::vector<Eigen::Index>> groups;
    groups.reserve(sizes.size());
    Eigen::Index next = 0;
    for (Eigen::Index d : sizes) {
        if (d <= 0) throw std::invalid_argument("GroupStructure: nonpositive group size");
        std::vector<Eigen::Index> g(static_cast<size_t>(d));
        std::iota(g.begin(), g.end(), next);
        next += d;
        groups.push_back(std::move(g));
    }
    return GroupStructure(std::move(groups));
}

}  // namespace sparsekg
