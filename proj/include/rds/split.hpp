#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace rds {

enum class Action : std::uint8_t { Train, Test };

/// Per-sample train/test assignment over a whole dataset, in dataset order.
struct SplitAssignment {
    std::vector<Action> actions;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double achieved_ratio = 0.0;

    static SplitAssignment from_actions(std::vector<Action> actions);

    std::size_t size() const { return actions.size(); }
    bool valid() const { return n_train > 0 && n_test > 0; }
    std::vector<Eigen::Index> train_rows() const;
    std::vector<Eigen::Index> test_rows() const;

    friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

}  // namespace rds
