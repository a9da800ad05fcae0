#pragma once

#include <Eigen/Core>

#include <vector>

namespace sparsekg {

// Disjoint feature groups covering 0..m-1. Groups need not be contiguous,
// but every feature must belong to exactly one group.
class GroupStructure {
public:
    GroupStructure() = default;
    explicit GroupStructure(std::vector<std::vector<Eigen::Index>> groups);

    // Convenience: groups of the given sizes laid out back to back.
    static GroupStructure contiguous(const std::vector<Eigen::Index>& sizes);

    int num_groups() const { return static_cast<int>(groups_.size()); }
    Eigen::Index num_features() const { return static_cast<Eigen::Index>(feature_group_.size()); }
    Eigen::Index max_group_size() const { return max_size_; }

    const std::vector<Eigen::Index>& group(int j) const { return groups_.at(static_cast<size_t>(j)); }
    const std::vector<std::vector<Eigen::Index>>& all() const { return groups_; }
    int group_of(Eigen::Index feature) const { return feature_group_.at(static_cast<size_t>(feature)); }

private:
    std::vector<std::vector<Eigen::Index>> groups_;
    std::vector<int> feature_group_;  // inverse map, one entry per feature
    Eigen::Index max_size_ = 0;
};

}  // namespace sparsekg
