#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rds/dataset.hpp"
#include "rds/engine.hpp"
#include "rds/split.hpp"

namespace rds::io {

/// split.csv: header "id,assignment", one row per sample in dataset order,
/// assignment is "train" or "test".
void write_split_csv(std::ostream& out, const Dataset& dataset, const SplitAssignment& split);
void write_split_csv(const std::filesystem::path& path, const Dataset& dataset, const SplitAssignment& split);

/// Reads a split file and orders it by the dataset's ids. Every dataset id
/// must appear exactly once; unknown ids are rejected.
SplitAssignment read_split_csv(const std::filesystem::path& path, const Dataset& dataset);

/// dynamics.csv: episode, reward, reward_shaped, ratio, loss_theta,
/// loss_ratio, loss_iid, learner_<k>_metric..., chosen_learner, seconds.
/// Learners that were not scored leave their cell empty; so does
/// chosen_learner under the deterministic mechanism, and seconds when
/// `with_timing` is false.
void write_dynamics_csv(std::ostream& out, std::span<const EpisodeLog> episodes, std::size_t num_learners,
                        bool with_timing);
void write_dynamics_csv(const std::filesystem::path& path, std::span<const EpisodeLog> episodes,
                        std::size_t num_learners, bool with_timing);

struct ReportRow {
    std::string split_name;
    SplitEvaluation evaluation;
};

/// report.csv: split, n_train, n_test, train_class_ratio, test_class_ratio,
/// one column per learner, ensemble. Class ratio is n(class 1)/n(class 0)
/// for binary tasks and the ';'-joined class proportions for multiclass;
/// empty for regression.
void write_report_csv(std::ostream& out, std::span<const std::string> learner_names, std::span<const ReportRow> rows,
                      TaskKind task);

}  // namespace rds::io

namespace rds::io {

/// Header "id,<feature names...>,target"; load_csv(path, "target", task, "id")
/// reads it back exactly.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& dataset);

}  // namespace rds::io
