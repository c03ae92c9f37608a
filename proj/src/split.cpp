#include "rds/split.hpp"

namespace rds {

SplitAssignment SplitAssignment::from_actions(std::vector<Action> actions) {
    SplitAssignment split;
    split.actions = std::move(actions);
    for (const Action a : split.actions) {
        if (a == Action::Train) ++split.n_train;
        else ++split.n_test;
    }
    split.achieved_ratio = split.actions.empty()
                               ? 0.0
                               : static_cast<double>(split.n_train) / static_cast<double>(split.actions.size());
    return split;
}

std::vector<Eigen::Index> SplitAssignment::train_rows() const {
    std::vector<Eigen::Index> rows;
    rows.reserve(n_train);
    for (std::size_t i = 0; i < actions.size(); ++i)
        if (actions[i] == Action::Train) rows.push_back(static_cast<Eigen::Index>(i));
    return rows;
}

std::vector<Eigen::Index> SplitAssignment::test_rows() const {
    std::vector<Eigen::Index> rows;
    rows.reserve(n_test);
    for (std::size_t i = 0; i < actions.size(); ++i)
        if (actions[i] == Action::Test) rows.push_back(static_cast<Eigen::Index>(i));
    return rows;
}

}  // namespace rds
