#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rds/split.hpp"

namespace rds {

enum class TaskType { BinaryClassification, MultiClassification, Regression };

struct TaskKind {
    TaskType type = TaskType::BinaryClassification;
    int num_classes = 2;  // 0 for regression

    static TaskKind binary() { return {TaskType::BinaryClassification, 2}; }
    static TaskKind multiclass(int num_classes);
    static TaskKind regression() { return {TaskType::Regression, 0}; }

    bool is_classification() const { return type != TaskType::Regression; }

    friend bool operator==(const TaskKind&, const TaskKind&) = default;
};

/// The full population to be split. Targets hold class indices (as exact
/// doubles) for classification and real values for regression.
struct Dataset {
    std::vector<std::string> ids;
    Eigen::MatrixXd features;  // M x D
    Eigen::VectorXd targets;   // M
    TaskKind task;
    std::vector<std::string> feature_names;

    Eigen::Index size() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }
    int label(Eigen::Index i) const { return static_cast<int>(targets[i]); }
    std::vector<int> labels() const;

    /// Throws ValidationError when any invariant is broken.
    void validate() const;
};

/// Reads a header-row CSV. Every non-target, non-id column must be numeric.
/// Without an id column the ids are the 0-based row indices.
Dataset load_csv(const std::filesystem::path& path, std::string_view target_column, TaskKind task,
                 std::optional<std::string> id_column = std::nullopt);

/// Per-feature z-score statistics, population (ddof=0) convention.
struct FeatureScaling {
    static constexpr double kMinStddev = 1e-12;

    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd stddev;

    static FeatureScaling fit(const Eigen::MatrixXd& features);
    /// Columns with stddev below kMinStddev map to zero.
    Eigen::MatrixXd apply(const Eigen::MatrixXd& features) const;
    Eigen::MatrixXd invert(const Eigen::MatrixXd& scaled) const;
};

std::pair<Dataset, FeatureScaling> standardize(const Dataset& dataset);

/// Rows of `dataset` selected by `rows`, in the given order.
Dataset subset(const Dataset& dataset, std::span<const Eigen::Index> rows);

/// Class counts for classification targets.
std::vector<std::size_t> class_counts(const Dataset& dataset, std::span<const Eigen::Index> rows);
std::vector<double> class_pmf(const Dataset& dataset, std::span<const Eigen::Index> rows);

/// Target summaries of both sides of a split: class PMFs for
/// classification, raw target values for regression.
struct TargetDistribution {
    bool is_pmf = true;
    std::vector<double> train;
    std::vector<double> test;
};

TargetDistribution target_distribution(const Dataset& dataset, const SplitAssignment& assignment);

}  // namespace rds
