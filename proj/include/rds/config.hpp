#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rds/dataset.hpp"
#include "rds/engine.hpp"

namespace rds {

struct DatasetSource {
    std::filesystem::path path;  // absolute, or relative to the working directory
    std::string target;
    std::optional<std::string> id;
    TaskKind task;
};

struct LearnerEntry {
    LearnerKind kind = LearnerKind::LogisticRegression;
    LearnerHyperparameters hyperparameters;
};

/// Parsed configuration file. `run.learners` is filled from `learners` with
/// seeds derived from `run.seed`.
struct AppConfig {
    DatasetSource dataset;
    RunConfig run;
    std::vector<LearnerEntry> learners;
    std::filesystem::path output_dir;
    bool timing = false;  // fill the seconds column of dynamics.csv
};

/// JSON document. Required: dataset.path, dataset.target, dataset.task,
/// learners, output.dir. Every other key falls back to its default. Unknown
/// keys raise ValidationError naming the key. Relative paths resolve
/// against the config file's directory.
AppConfig load_config(const std::filesystem::path& path);
AppConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);

/// The configuration with every default expanded, as JSON text.
std::string resolved_config_json(const AppConfig& config);

Dataset load_dataset(const DatasetSource& source);

}  // namespace rds
